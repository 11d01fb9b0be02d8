#pragma once

// Flat "key = value" text files. '#' starts a comment; a value may span
// several lines when continuation lines start with whitespace. Numeric lists
// are separated by spaces, commas, semicolons or brackets.

#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace roughlab {

class KeyValueFile {
public:
    KeyValueFile() = default;

    [[nodiscard]] static KeyValueFile parse(const std::string& text) {
        KeyValueFile kv;
        std::istringstream in(text);
        std::string line;
        std::string last_key;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            if (trim(line).empty()) continue;
            const bool continuation = !line.empty() && (line[0] == ' ' || line[0] == '\t');
            const auto eq = line.find('=');
            if (continuation && eq == std::string::npos && !last_key.empty()) {
                kv.values_[last_key] += " " + trim(line);
                continue;
            }
            if (eq == std::string::npos) {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
            if (kv.values_.count(key)) throw std::invalid_argument("duplicate key '" + key + "'");
            kv.values_[key] = trim(line.substr(eq + 1));
            last_key = key;
        }
        return kv;
    }

    [[nodiscard]] static KeyValueFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open '" + path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

    [[nodiscard]] std::string get_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw std::invalid_argument("missing key '" + key + "'");
        std::string v = it->second;
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        return v;
    }
    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    [[nodiscard]] double get_double(const std::string& key) const {
        const auto list = get_list(key);
        if (list.size() != 1) throw std::invalid_argument("key '" + key + "' must hold one number");
        return list[0];
    }
    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    [[nodiscard]] long long get_int(const std::string& key) const {
        const double v = get_double(key);
        const auto i = static_cast<long long>(v);
        if (static_cast<double>(i) != v) throw std::invalid_argument("key '" + key + "' must be an integer");
        return i;
    }
    [[nodiscard]] long long get_int(const std::string& key, long long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    [[nodiscard]] std::vector<double> get_list(const std::string& key) const {
        std::string v = get_string(key);
        for (char& c : v) {
            if (c == ',' || c == ';' || c == '[' || c == ']') c = ' ';
        }
        std::istringstream in(v);
        std::vector<double> out;
        std::string tok;
        while (in >> tok) {
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) throw std::invalid_argument("key '" + key + "': '" + tok + "' is not a number");
            out.push_back(x);
        }
        return out;
    }

    /// Words of a list-valued string key (split on spaces and commas).
    [[nodiscard]] std::vector<std::string> get_words(const std::string& key) const {
        std::string v = get_string(key);
        for (char& c : v) {
            if (c == ',' || c == ';' || c == '[' || c == ']') c = ' ';
        }
        std::istringstream in(v);
        std::vector<std::string> out;
        std::string tok;
        while (in >> tok) out.push_back(tok);
        return out;
    }

    /// Rejects keys outside `allowed`, so typos fail loudly.
    void require_known(const std::set<std::string>& allowed) const {
        for (const auto& [k, v] : values_) {
            if (!allowed.count(k)) throw std::invalid_argument("unknown key '" + k + "'");
        }
    }

    [[nodiscard]] const std::map<std::string, std::string>& entries() const noexcept { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace roughlab
