// Command-line front end: signatures of CSV paths, process simulation, limit
// models, Lyons extensions, p-variation, characteristic-function gaps and
// config-driven experiments.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11/CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "roughlab/roughlab.hpp"

namespace {

using namespace roughlab;

struct CsvPath {
    PathSample path;
    bool has_time = false;
};

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
}

bool parse_number(const std::string& s, double& v) {
    try {
        std::size_t used = 0;
        v = std::stod(s, &used);
        return used == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

// Rows of x1..xd, or t,x1..xd on a uniform grid (a first column named t
// marks a continuous-time path). A non-numeric first line is a header.
CsvPath read_csv_path(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open '" + file + "'");
    std::string line;
    std::vector<std::vector<double>> rows;
    bool has_time = false;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv(line);
        std::vector<double> row;
        bool numeric = true;
        for (const auto& c : cells) {
            double v = 0.0;
            if (!parse_number(c, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (!first) throw std::runtime_error("non-numeric row in '" + file + "'");
            has_time = !cells.empty() && cells[0] == "t";
            first = false;
            continue;
        }
        first = false;
        if (!rows.empty() && row.size() != rows[0].size()) throw std::runtime_error("ragged rows in '" + file + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return {PathSample(1, {}), has_time};
    const std::size_t cols = rows[0].size();
    const std::size_t d = has_time ? cols - 1 : cols;
    if (d == 0) throw std::runtime_error("no value columns in '" + file + "'");
    std::vector<double> values;
    for (const auto& r : rows) values.insert(values.end(), r.begin() + (has_time ? 1 : 0), r.end());
    if (!has_time) return {PathSample(d, std::move(values)), false};
    double dt = 1.0;
    if (rows.size() >= 2) {
        dt = rows[1][0] - rows[0][0];
        for (std::size_t k = 1; k < rows.size(); ++k) {
            if (std::abs(rows[k][0] - rows[k - 1][0] - dt) > 1e-9 * std::max(1.0, std::abs(dt))) {
                throw std::runtime_error("time column of '" + file + "' is not a uniform grid");
            }
        }
    }
    return {PathSample(d, std::move(values), PathKind::continuous_grid, dt), true};
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    f << text;
}

std::string path_csv(const PathSample& p, double t0_scale) {
    std::string s = p.kind() == PathKind::continuous_grid ? "t" : "";
    for (std::size_t i = 0; i < p.dim(); ++i) {
        if (!s.empty()) s += ",";
        s += fmt::format("x{}", i + 1);
    }
    s += "\n";
    for (std::size_t k = 0; k < p.size(); ++k) {
        std::string line;
        if (p.kind() == PathKind::continuous_grid) line = format_double(static_cast<double>(k) * p.dt() * t0_scale);
        for (std::size_t i = 0; i < p.dim(); ++i) {
            if (!line.empty() || i > 0) line += ",";
            line += format_double(p(k, i));
        }
        s += line + "\n";
    }
    return s;
}

LimitModel model_for(const AnySpec& spec, std::size_t lag_cap, std::uint64_t seed) {
    if (auto exact = exact_limit_model(spec)) return *exact;
    EstimateOptions opt;
    opt.lag_cap = lag_cap;
    opt.seed = seed;
    return estimate_limit_model(spec, opt).model;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"roughlab: signatures of weakly dependent processes and their Gaussian rough-path limits"};
    app.require_subcommand(1);

    // sig
    auto* sig = app.add_subcommand("sig", "Signature of a CSV path over a normalized window");
    std::string sig_in, sig_out;
    std::size_t sig_depth = 2;
    double sig_n = 1.0;
    std::vector<double> sig_window;
    bool sig_oracle = false;
    sig->add_option("--input,input", sig_in, "CSV path (rows x1..xd, or t,x1..xd)")->required();
    sig->add_option("--depth", sig_depth, "Truncation level")->check(CLI::Range(1, 8));
    sig->add_option("--scale-N", sig_n, "Normalization N")->check(CLI::PositiveNumber);
    sig->add_option("--window", sig_window, "Window s t in normalized time")->expected(2);
    sig->add_flag("--oracle", sig_oracle, "Use brute-force enumeration (discrete, <= 14 steps, depth <= 4)");
    sig->add_option("--out", sig_out, "Output JSON (default stdout)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Sample a stationary path of a spec");
    std::string sim_spec, sim_out;
    std::size_t sim_n = 1000;
    std::uint64_t sim_seed = 1, sim_stream = 0;
    double sim_dt = 0.1;
    sim->add_option("--spec", sim_spec, "Spec file")->required();
    sim->add_option("--n", sim_n, "Length (steps, grid cells, or flow time for suspensions)")->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_seed, "Seed");
    sim->add_option("--stream", sim_stream, "Stream id");
    sim->add_option("--dt", sim_dt, "Output grid step for suspensions")->check(CLI::PositiveNumber);
    sim->add_option("--out", sim_out, "Output CSV (default stdout)");

    // limit-model
    auto* lm = app.add_subcommand("limit-model", "Estimate sigma and Gamma of a spec");
    std::string lm_spec, lm_out;
    EstimateOptions lm_opt;
    lm->add_option("--spec", lm_spec, "Spec file")->required();
    lm->add_option("--lag-cap", lm_opt.lag_cap, "Lag truncation K (0 = default)");
    lm->add_option("--replicas", lm_opt.replicas, "Independent paths")->check(CLI::PositiveNumber);
    lm->add_option("--length", lm_opt.length, "Steps per path")->check(CLI::PositiveNumber);
    lm->add_option("--seed", lm_opt.seed, "Seed");
    lm->add_option("--workers", lm_opt.workers, "Threads")->check(CLI::PositiveNumber);
    lm->add_option("--out", lm_out, "Output JSON (default stdout)");

    // lyons
    auto* ly = app.add_subcommand("lyons", "Simulate the Lyons extension of the limit Brownian motion");
    std::string ly_model, ly_out;
    double ly_t = 1.0;
    std::size_t ly_steps = 1000, ly_depth = 2;
    std::uint64_t ly_seed = 1;
    ly->add_option("--model", ly_model, "Model JSON with sigma and gamma")->required();
    ly->add_option("--T", ly_t, "Horizon")->check(CLI::PositiveNumber);
    ly->add_option("--steps", ly_steps, "Grid steps")->check(CLI::PositiveNumber);
    ly->add_option("--depth", ly_depth, "Truncation level")->check(CLI::Range(1, 8));
    ly->add_option("--seed", ly_seed, "Seed");
    ly->add_option("--out", ly_out, "Output JSON (default stdout)");

    // pvar
    auto* pv = app.add_subcommand("pvar", "p-variation of one signature level of a CSV path");
    std::string pv_in;
    double pv_p = 2.5, pv_n = 1.0;
    std::size_t pv_level = 1;
    pv->add_option("--input,input", pv_in, "CSV path")->required();
    pv->add_option("--p", pv_p, "Exponent p; level nu uses p/nu")->required();
    pv->add_option("--level", pv_level, "Signature level")->check(CLI::Range(1, 8));
    pv->add_option("--scale-N", pv_n, "Normalization N")->check(CLI::PositiveNumber);

    // charfn
    auto* cf = app.add_subcommand("charfn", "Characteristic-function gap of normalized block sums");
    std::string cf_spec, cf_out;
    std::size_t cf_n = 100, cf_reps = 1000;
    double cf_t = 1.0;
    std::uint64_t cf_seed = 1;
    cf->add_option("--spec", cf_spec, "Spec file (discrete kinds)")->required();
    cf->add_option("--N", cf_n, "Scale N (>= 16)")->check(CLI::Range(16, 1 << 30));
    cf->add_option("--T", cf_t, "Horizon")->check(CLI::PositiveNumber);
    cf->add_option("--replicas", cf_reps, "Replicas")->check(CLI::PositiveNumber);
    cf->add_option("--seed", cf_seed, "Seed");
    cf->add_option("--out", cf_out, "Output CSV (default stdout)");

    // experiment
    auto* ex = app.add_subcommand("experiment", "Run a config-driven distance experiment");
    std::string ex_cfg;
    std::size_t ex_workers = 1;
    ex->add_option("--config", ex_cfg, "Config file")->required();
    ex->add_option("--workers", ex_workers, "Threads")->check(CLI::PositiveNumber);

    // chen-audit
    auto* ca = app.add_subcommand("chen-audit", "Chen residuals of sampled and limit rough paths");
    std::string ca_spec;
    ChenAuditOptions ca_opt;
    ca->add_option("--spec", ca_spec, "Spec file")->required();
    ca->add_option("--seed", ca_opt.seed, "Seed");
    ca->add_option("--replicas", ca_opt.replicas, "Limit replicas")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sig->parsed()) {
            const auto csv = read_csv_path(sig_in);
            const auto& p = csv.path;
            const double horizon_norm = p.horizon() / sig_n;
            const double s = sig_window.empty() ? 0.0 : sig_window[0];
            const double t = sig_window.empty() ? horizon_norm : sig_window[1];
            TruncatedTensor tensor;
            if (sig_oracle) {
                if (p.kind() != PathKind::discrete) throw std::invalid_argument("--oracle needs a discrete path");
                const auto k0 = static_cast<std::size_t>(std::floor(s * sig_n + 1e-9));
                const auto k1 = static_cast<std::size_t>(std::floor(t * sig_n + 1e-9));
                tensor = brute_force_signature(p, k0, k1, sig_depth).dilate(1.0 / std::sqrt(sig_n));
            } else {
                tensor = signature_increment(p, s, t, sig_depth, sig_n).tensor;
            }
            nlohmann::json j = tensor;
            emit(sig_out, j.dump() + "\n");
        } else if (sim->parsed()) {
            const auto spec = load_spec(sim_spec);
            RngStream rng(sim_seed, sim_stream);
            if (const auto* ps = std::get_if<ProcessSpec>(&spec)) {
                emit(sim_out, path_csv(sample_path(*ps, sim_n, rng), 1.0));
            } else {
                const auto sample = sample_suspension(std::get<SuspensionSpec>(spec), static_cast<double>(sim_n), rng);
                emit(sim_out, path_csv(sample.to_grid(sim_dt, static_cast<double>(sim_n)), 1.0));
            }
        } else if (lm->parsed()) {
            const auto spec = load_spec(lm_spec);
            const auto est = estimate_limit_model(spec, lm_opt);
            auto j = to_json(est);
            if (const auto exact = exact_limit_model(spec)) {
                j["closed_form"] = {{"sigma", detail::matrix_json(exact->sigma)}, {"gamma", detail::matrix_json(exact->gamma)}};
            }
            emit(lm_out, j.dump(2) + "\n");
        } else if (ly->parsed()) {
            std::ifstream in(ly_model);
            if (!in) throw std::runtime_error("cannot open '" + ly_model + "'");
            const auto model = limit_model_from_json(nlohmann::json::parse(in));
            RngStream rng(ly_seed, 0);
            const auto rp = lyons_extension(sample_brownian(model, ly_t, ly_steps, rng), model, ly_depth);
            nlohmann::json w = nlohmann::json::array();
            std::vector<double> cur(rp.w.dim, 0.0);
            w.push_back(cur);
            for (std::size_t k = 0; k < rp.steps(); ++k) {
                for (std::size_t i = 0; i < rp.w.dim; ++i) cur[i] += rp.w.increment(k)[i];
                w.push_back(cur);
            }
            nlohmann::json j = {{"T", ly_t}, {"steps", ly_steps}, {"depth", ly_depth}, {"w", w},
                                {"signature", nlohmann::json(rp.at(rp.steps()))}};
            emit(ly_out, j.dump() + "\n");
        } else if (pv->parsed()) {
            auto csv = read_csv_path(pv_in);
            csv.path.set_time_scale(pv_n);
            const PrefixSignature table(csv.path, pv_level);
            const double q = pv_p / static_cast<double>(pv_level);
            const double v = p_variation(level_increments(table, pv_level, index_range(table.steps() + 1)), q);
            std::cout << format_double(v) << "\n";
        } else if (cf->parsed()) {
            const auto spec = load_spec(cf_spec);
            const auto* ps = std::get_if<ProcessSpec>(&spec);
            if (ps == nullptr || ps->is_continuous()) throw std::invalid_argument("charfn needs a discrete-time spec");
            const auto scheme = build_scheme(cf_n, cf_t);
            if (scheme.k_max == 0) throw std::invalid_argument("N T is too small for one block");
            const std::size_t d = ps->dim;
            std::vector<double> samples(cf_reps * d);
            for (std::size_t r = 0; r < cf_reps; ++r) {
                RngStream rng(cf_seed, r);
                const auto v = block_sums(sample_path(*ps, scheme.n(1), rng), BlockScheme{scheme.n_scale, scheme.horizon, scheme.m, 1});
                std::copy(v.begin(), v.end(), samples.begin() + static_cast<std::ptrdiff_t>(r * d));
            }
            const auto model = model_for(spec, 0, cf_seed);
            const auto table = charfn_gap(samples, d, model.sigma, default_wgrid(d, scheme.block_length()));
            std::string out;
            for (std::size_t i = 0; i < d; ++i) out += fmt::format("w{},", i + 1);
            out += "re,im,g,gap,se\n";
            for (const auto& row : table.rows) {
                for (std::size_t i = 0; i < d; ++i) out += format_double(row.w(static_cast<Eigen::Index>(i))) + ",";
                out += fmt::format("{},{},{},{},{}\n", format_double(row.empirical.real()), format_double(row.empirical.imag()),
                                   format_double(row.gaussian), format_double(row.gap), format_double(row.se));
            }
            emit(cf_out, out);
        } else if (ex->parsed()) {
            const auto cfg = load_experiment_config(ex_cfg);
            auto res = run_experiment(cfg, ex_workers);
            if (!cfg.output.empty()) {
                write_outputs(res, cfg.output);
                std::cerr << "wrote " << cfg.output << "/{distances.csv,slopes.csv,manifest.json}\n";
            }
            std::cout << slopes_csv(res);
        } else if (ca->parsed()) {
            const auto spec = load_spec(ca_spec);
            const auto model = model_for(spec, 0, ca_opt.seed);
            bool ok = true;
            for (const auto& row : chen_audit(spec, model, ca_opt)) {
                std::cout << fmt::format("{} {}: value {} threshold {}\n", row.pass ? "PASS" : "FAIL", row.check,
                                         format_double(row.value), format_double(row.threshold));
                ok = ok && row.pass;
            }
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
