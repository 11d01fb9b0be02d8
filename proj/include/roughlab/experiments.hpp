#pragma once

// Monte Carlo comparison of signature functionals of a process against the
// same functionals of its Gaussian rough-path limit, per scale N, with
// bootstrap errors and fitted log-log decay slopes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "roughlab/keyvalue.hpp"
#include "roughlab/limit_objects.hpp"
#include "roughlab/norms_metrics.hpp"
#include "roughlab/parallel.hpp"
#include "roughlab/processes.hpp"
#include "roughlab/rng.hpp"
#include "roughlab/signature.hpp"
#include "roughlab/suspension.hpp"

namespace roughlab {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Decay fits

struct DecayPoint {
    double n = 0.0;
    double distance = 0.0;
    double se = 0.0;
};

struct DecayFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    std::size_t used = 0;
    std::size_t dropped = 0;  ///< points with nonpositive distance
    bool weighted = true;
};

/// Least squares of log(distance) on log(N), weights 1/(se/distance)^2. When
/// some se is zero the fit is unweighted and the slope se comes from residuals.
[[nodiscard]] inline DecayFit fit_decay(const std::vector<DecayPoint>& pts) {
    DecayFit fit;
    std::vector<double> x, y, w;
    bool all_se = true;
    for (const auto& p : pts) {
        if (!(p.distance > 0.0) || !(p.n > 0.0)) {
            ++fit.dropped;
            continue;
        }
        x.push_back(std::log(p.n));
        y.push_back(std::log(p.distance));
        const double rel = p.se / p.distance;
        w.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 0.0);
        if (!(rel > 0.0)) all_se = false;
    }
    fit.used = x.size();
    if (fit.used < 3) throw std::invalid_argument("fit_decay: fewer than 3 points with positive distance");
    fit.weighted = all_se;
    if (!all_se) std::fill(w.begin(), w.end(), 1.0);
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_decay: N values must not all coincide");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (all_se) {
        fit.slope_se = std::sqrt(1.0 / sxx);
    } else {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_se = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Functionals and metrics

enum class FunctionalKind { terminal, sup, pvar };
enum class Metric { w1, ks, prokhorov };

struct Functional {
    FunctionalKind kind = FunctionalKind::terminal;
    std::size_t level = 1;
    std::vector<std::size_t> word;  ///< 0-based letters, terminal only
    std::string id;
};

/// "terminal:<letters>" (1-based letters, e.g. terminal:12), "sup:<level>",
/// "pvar:<level>".
[[nodiscard]] inline Functional parse_functional(const std::string& id) {
    const auto colon = id.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("functional '" + id + "': expected kind:argument");
    const std::string kind = id.substr(0, colon), arg = id.substr(colon + 1);
    if (arg.empty() || arg.find_first_not_of("123456789") != std::string::npos) {
        throw std::invalid_argument("functional '" + id + "': argument must be digits 1-9");
    }
    Functional f;
    f.id = id;
    if (kind == "terminal") {
        f.kind = FunctionalKind::terminal;
        for (char c : arg) f.word.push_back(static_cast<std::size_t>(c - '1'));
        f.level = f.word.size();
        return f;
    }
    if (arg.size() != 1) throw std::invalid_argument("functional '" + id + "': level must be one digit");
    f.level = static_cast<std::size_t>(arg[0] - '0');
    if (kind == "sup") {
        f.kind = FunctionalKind::sup;
    } else if (kind == "pvar") {
        f.kind = FunctionalKind::pvar;
    } else {
        throw std::invalid_argument("functional '" + id + "': unknown kind '" + kind + "'");
    }
    return f;
}

[[nodiscard]] inline Metric parse_metric(const std::string& s) {
    if (s == "w1") return Metric::w1;
    if (s == "ks") return Metric::ks;
    if (s == "prokhorov") return Metric::prokhorov;
    throw std::invalid_argument("unknown metric '" + s + "'");
}

[[nodiscard]] inline std::string to_string(Metric m) {
    switch (m) {
        case Metric::w1: return "w1";
        case Metric::ks: return "ks";
        case Metric::prokhorov: return "prokhorov";
    }
    return "unknown";
}

[[nodiscard]] inline double metric_distance(Metric m, const std::vector<double>& xs, const std::vector<double>& ys) {
    switch (m) {
        case Metric::w1: return wasserstein1_scalar(xs, ys);
        case Metric::ks: return cdf_distance(xs, ys);
        case Metric::prokhorov: return prokhorov_upper(wasserstein1_scalar(xs, ys));
    }
    return 0.0;
}

/// Evaluates a functional on a prefix table whose level nu is scaled by
/// time_scale^(-nu/2); `eval` are prefix indices of the evaluation grid
/// (first entry 0, last entry the horizon).
[[nodiscard]] inline double evaluate_functional(const Functional& f, const PrefixSignature& table,
                                                const std::vector<std::size_t>& eval, double p) {
    const std::size_t d = table.dim();
    if (f.level == 0 || f.level > table.depth()) throw std::invalid_argument("functional '" + f.id + "': level exceeds depth");
    const double scale = std::pow(table.time_scale(), -0.5 * static_cast<double>(f.level));
    const std::size_t off = detail::level_offset(d, f.level);
    const std::size_t len = detail::level_offset(d, f.level + 1) - off;
    switch (f.kind) {
        case FunctionalKind::terminal: {
            std::size_t w = 0;
            for (std::size_t letter : f.word) {
                if (letter >= d) throw std::invalid_argument("functional '" + f.id + "': letter exceeds dimension");
                w = w * d + letter;
            }
            return scale * table.flat(eval.back())[off + w];
        }
        case FunctionalKind::sup: {
            double best = 0.0;
            for (std::size_t k : eval) {
                const auto x = table.flat(k);
                double s = 0.0;
                for (std::size_t i = 0; i < len; ++i) s += x[off + i] * x[off + i];
                best = std::max(best, std::sqrt(s));
            }
            return scale * best;
        }
        case FunctionalKind::pvar: {
            const double q = p / static_cast<double>(f.level);
            if (q < 1.0) throw std::invalid_argument("functional '" + f.id + "': p/level must be >= 1");
            return p_variation(level_increments(table, f.level, eval), q);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
    std::string spec_path;
    std::optional<AnySpec> spec;  ///< in-memory spec; takes precedence over spec_path
    std::optional<LimitVariant> variant;
    std::vector<std::size_t> n_values;
    double horizon = 1.0;
    std::size_t depth = 2;
    double p = 2.5;
    std::size_t replicas = 1000;
    std::vector<std::string> functionals{"terminal:1"};
    std::vector<std::string> metrics{"w1"};
    std::uint64_t seed = 1;
    std::size_t lag_cap = 0;
    std::string output;
    std::size_t limit_steps = 1024;
    std::size_t eval_points = 64;
    double grid = 0.1;  ///< internal grid step (process time) of continuous and suspension variants
    std::size_t bootstrap = 200;
    std::string limit_model = "auto";  ///< auto (closed form when available) | estimate
    std::size_t estimate_replicas = 10;
    std::size_t estimate_length = 100000;

    void validate() const {
        if (n_values.size() < 3) throw std::invalid_argument("config: need at least 3 values of N");
        for (std::size_t i = 1; i < n_values.size(); ++i) {
            if (n_values[i] <= n_values[i - 1]) throw std::invalid_argument("config: N values must be strictly increasing");
        }
        if (n_values.front() == 0) throw std::invalid_argument("config: N must be positive");
        if (!(horizon > 0.0)) throw std::invalid_argument("config: T must be positive");
        if (depth == 0 || depth > kMaxDepth) throw std::invalid_argument("config: bad depth");
        if (!(p > 2.0 && p < 3.0)) throw std::invalid_argument("config: p must lie in (2,3)");
        if (replicas < 100) throw std::invalid_argument("config: need at least 100 replicas");
        if (functionals.empty() || metrics.empty()) throw std::invalid_argument("config: empty functional or metric list");
        if (eval_points < 2) throw std::invalid_argument("config: need at least 2 evaluation points");
        if (limit_steps == 0) throw std::invalid_argument("config: limit_steps must be positive");
        if (!(grid > 0.0)) throw std::invalid_argument("config: grid must be positive");
        if (bootstrap < 2) throw std::invalid_argument("config: need at least 2 bootstrap resamples");
        if (limit_model != "auto" && limit_model != "estimate") throw std::invalid_argument("config: limit_model must be auto or estimate");
        for (const auto& f : functionals) {
            const auto fn = parse_functional(f);
            if (fn.level > depth) throw std::invalid_argument("config: functional '" + f + "' needs a deeper truncation");
        }
        for (const auto& m : metrics) (void)parse_metric(m);
    }

    /// Canonical text of every setting, used for the config hash.
    [[nodiscard]] std::string canonical() const {
        std::ostringstream o;
        o << "spec=" << spec_path << "\nvariant=" << (variant ? to_string(*variant) : "auto") << "\nN=";
        for (auto n : n_values) o << n << ' ';
        o << "\nT=" << fmt::format("{:.17g}", horizon) << "\ndepth=" << depth << "\np=" << fmt::format("{:.17g}", p)
          << "\nreplicas=" << replicas << "\nfunctionals=";
        for (const auto& f : functionals) o << f << ' ';
        o << "\nmetrics=";
        for (const auto& m : metrics) o << m << ' ';
        o << "\nseed=" << seed << "\nlag_cap=" << lag_cap << "\nlimit_steps=" << limit_steps
          << "\neval_points=" << eval_points << "\ngrid=" << fmt::format("{:.17g}", grid) << "\nbootstrap=" << bootstrap
          << "\nlimit_model=" << limit_model << "\nestimate_replicas=" << estimate_replicas
          << "\nestimate_length=" << estimate_length << '\n';
        return o.str();
    }
};

/// Reads a flat key/value config. A relative spec path is resolved against
/// `base_dir`.
[[nodiscard]] inline ExperimentConfig parse_experiment_config(const KeyValueFile& kv, const std::string& base_dir = ".") {
    kv.require_known({"spec", "variant", "N", "T", "depth", "p", "replicas", "functionals", "metrics", "seed", "lag_cap",
                      "output", "limit_steps", "eval_points", "grid", "bootstrap", "limit_model", "estimate_replicas",
                      "estimate_length"});
    ExperimentConfig c;
    std::filesystem::path sp = kv.get_string("spec");
    if (sp.is_relative()) sp = std::filesystem::path(base_dir) / sp;
    c.spec_path = sp.lexically_normal().string();
    if (kv.has("variant")) c.variant = parse_variant(kv.get_string("variant"));
    for (double n : kv.get_list("N")) {
        if (n < 1.0 || n != std::floor(n)) throw std::invalid_argument("config: N values must be positive integers");
        c.n_values.push_back(static_cast<std::size_t>(n));
    }
    auto positive = [&](const std::string& key, long long fallback) {
        const long long v = kv.get_int(key, fallback);
        if (v < 0) throw std::invalid_argument("config: '" + key + "' must be nonnegative");
        return static_cast<std::size_t>(v);
    };
    c.horizon = kv.get_double("T", c.horizon);
    c.depth = positive("depth", static_cast<long long>(c.depth));
    c.p = kv.get_double("p", c.p);
    c.replicas = positive("replicas", static_cast<long long>(c.replicas));
    if (kv.has("functionals")) c.functionals = kv.get_words("functionals");
    if (kv.has("metrics")) c.metrics = kv.get_words("metrics");
    const long long seed = kv.get_int("seed", 1);
    c.seed = static_cast<std::uint64_t>(seed);
    c.lag_cap = positive("lag_cap", 0);
    if (kv.has("output")) {
        std::filesystem::path out = kv.get_string("output");
        if (out.is_relative()) out = std::filesystem::path(base_dir) / out;
        c.output = out.lexically_normal().string();
    }
    c.limit_steps = positive("limit_steps", static_cast<long long>(c.limit_steps));
    c.eval_points = positive("eval_points", static_cast<long long>(c.eval_points));
    c.grid = kv.get_double("grid", c.grid);
    c.bootstrap = positive("bootstrap", static_cast<long long>(c.bootstrap));
    c.limit_model = kv.get_string("limit_model", c.limit_model);
    c.estimate_replicas = positive("estimate_replicas", static_cast<long long>(c.estimate_replicas));
    c.estimate_length = positive("estimate_length", static_cast<long long>(c.estimate_length));
    c.validate();
    return c;
}

[[nodiscard]] inline ExperimentConfig load_experiment_config(const std::string& path) {
    const auto base = std::filesystem::path(path).parent_path().string();
    return parse_experiment_config(KeyValueFile::load(path), base.empty() ? "." : base);
}

// ---------------------------------------------------------------------------
// Results

struct DistanceRow {
    std::size_t n = 0;
    std::string functional;
    std::string metric;
    double distance = 0.0;
    double se = 0.0;
    double floor = 0.0;     ///< distance between two independent limit sample sets
    double floor_se = 0.0;
};

struct SlopeRow {
    std::string functional;
    std::string metric;
    DecayFit fit;
    std::string flag;  ///< ok | noise-limited | unfitted
};

struct ExperimentResult {
    LimitModel model;
    std::string model_source;
    std::vector<DistanceRow> distances;
    std::vector<SlopeRow> slopes;
    nlohmann::json manifest;
};

[[nodiscard]] inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

[[nodiscard]] inline std::string format_double(double x) { return fmt::format("{:.17g}", x); }

[[nodiscard]] inline std::string distances_csv(const ExperimentResult& r) {
    std::string out = "N,functional,metric,distance,se\n";
    for (const auto& d : r.distances) {
        out += fmt::format("{},{},{},{},{}\n", d.n, d.functional, d.metric, format_double(d.distance), format_double(d.se));
    }
    return out;
}

[[nodiscard]] inline std::string slopes_csv(const ExperimentResult& r) {
    std::string out = "functional,metric,slope,se,flag\n";
    for (const auto& s : r.slopes) {
        out += fmt::format("{},{},{},{},{}\n", s.functional, s.metric, format_double(s.fit.slope), format_double(s.fit.slope_se),
                           s.flag);
    }
    return out;
}

namespace detail {

struct BootstrapResult {
    double distance = 0.0;
    double se = 0.0;
};

inline BootstrapResult bootstrap_distance(Metric m, const std::vector<double>& xs, const std::vector<double>& ys,
                                          std::size_t resamples, RngStream rng) {
    BootstrapResult r;
    r.distance = metric_distance(m, xs, ys);
    std::vector<double> bx(xs.size()), by(ys.size());
    double s = 0.0, s2 = 0.0;
    std::uniform_int_distribution<std::size_t> ix(0, xs.size() - 1), iy(0, ys.size() - 1);
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& v : bx) v = xs[ix(rng.engine())];
        for (auto& v : by) v = ys[iy(rng.engine())];
        const double dist = metric_distance(m, bx, by);
        s += dist;
        s2 += dist * dist;
    }
    const auto nb = static_cast<double>(resamples);
    r.se = std::sqrt(std::max(0.0, (s2 - s * s / nb) / (nb - 1.0)));
    return r;
}

inline std::vector<std::size_t> eval_indices(std::size_t points, double horizon, double per_unit) {
    std::vector<std::size_t> idx(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double t = horizon * static_cast<double>(k) / static_cast<double>(points - 1);
        idx[k] = static_cast<std::size_t>(std::floor(t * per_unit + 1e-9));
    }
    return idx;
}

}  // namespace detail

/// Process-side prefix table for scale N and one replica, with the prefix
/// indices of the evaluation grid.
struct ScaledTable {
    PrefixSignature table;
    std::vector<std::size_t> eval;
};

[[nodiscard]] inline ScaledTable process_table(const AnySpec& spec, std::size_t n_scale, double horizon, std::size_t depth,
                                               std::size_t eval_points, double grid, RngStream& rng) {
    const auto nd = static_cast<double>(n_scale);
    if (const auto* ps = std::get_if<ProcessSpec>(&spec)) {
        if (!ps->is_continuous()) {
            const auto cells = static_cast<std::size_t>(std::floor(nd * horizon + 1e-9));
            auto path = sample_path(*ps, std::max<std::size_t>(cells, 1), rng);
            path.set_time_scale(nd);
            return {PrefixSignature(path, depth), detail::eval_indices(eval_points, horizon, nd)};
        }
        ProcessSpec gridded = *ps;
        gridded.dt = grid;
        const auto cells = static_cast<std::size_t>(std::ceil(nd * horizon / grid - 1e-9));
        auto path = sample_path(gridded, std::max<std::size_t>(cells, 1), rng);
        path.set_time_scale(nd);
        return {PrefixSignature(path, depth), detail::eval_indices(eval_points, horizon, nd / grid)};
    }
    const auto& ss = std::get<SuspensionSpec>(spec);
    const double span = nd * horizon * ss.tau_bar;
    const auto sample = sample_suspension(ss, span + 2.0 * ss.roof_bound, rng);
    auto path = sample.to_grid(grid, span + grid);
    path.set_time_scale(nd);
    return {PrefixSignature(path, depth), detail::eval_indices(eval_points, horizon, nd * ss.tau_bar / grid)};
}

[[nodiscard]] inline LimitVariant spec_variant(const AnySpec& spec) {
    if (std::holds_alternative<SuspensionSpec>(spec)) return LimitVariant::suspension;
    return std::get<ProcessSpec>(spec).is_continuous() ? LimitVariant::continuous : LimitVariant::discrete;
}

/// Runs the comparison. Results depend only on the config, never on `workers`.
[[nodiscard]] inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1) {
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };
    cfg.validate();
    const auto t_start = clock::now();
    const AnySpec spec = cfg.spec ? *cfg.spec : load_spec(cfg.spec_path);
    const LimitVariant variant = spec_variant(spec);
    if (cfg.variant && *cfg.variant != variant) {
        throw std::invalid_argument("config: variant '" + to_string(*cfg.variant) + "' does not match the process kind ('" +
                                    to_string(variant) + "')");
    }
    std::vector<Functional> fns;
    for (const auto& f : cfg.functionals) fns.push_back(parse_functional(f));
    std::vector<Metric> metrics;
    for (const auto& m : cfg.metrics) metrics.push_back(parse_metric(m));

    ExperimentResult res;
    nlohmann::json timings;
    auto t0 = clock::now();
    std::optional<LimitModel> exact = cfg.limit_model == "auto" ? exact_limit_model(spec) : std::nullopt;
    if (exact) {
        res.model = *exact;
        res.model_source = "closed-form";
    } else {
        EstimateOptions opt;
        opt.lag_cap = cfg.lag_cap;
        opt.replicas = cfg.estimate_replicas;
        opt.length = cfg.estimate_length;
        opt.seed = cfg.seed;
        opt.workers = workers;
        res.model = estimate_limit_model(spec, opt).model;
        res.model_source = "estimated";
    }
    res.model.variant = variant;
    const Eigen::MatrixXd root = covariance_root(res.model.sigma);
    timings["limit_model_ms"] = ms_since(t0);

    const std::size_t nf = fns.size();
    const std::size_t rr = cfg.replicas;
    const std::size_t gauss_eval_den = cfg.eval_points - 1;
    std::vector<std::size_t> gauss_eval(cfg.eval_points);
    for (std::size_t k = 0; k < cfg.eval_points; ++k) {
        gauss_eval[k] = static_cast<std::size_t>(std::llround(static_cast<double>(k * cfg.limit_steps) / static_cast<double>(gauss_eval_den)));
    }
    auto gaussian_values = [&](std::uint64_t tag, std::size_t slot) {
        std::vector<double> vals(rr * nf);
        parallel_for(rr, workers, [&](std::size_t r) {
            RngStream rng(cfg.seed, RngStream::key(tag, slot, r));
            const auto rp = lyons_extension(sample_brownian(root, cfg.horizon, cfg.limit_steps, rng), res.model, cfg.depth);
            for (std::size_t f = 0; f < nf; ++f) vals[r * nf + f] = evaluate_functional(fns[f], rp.table, gauss_eval, cfg.p);
        });
        return vals;
    };
    auto column = [&](const std::vector<double>& vals, std::size_t f) {
        std::vector<double> c(rr);
        for (std::size_t r = 0; r < rr; ++r) c[r] = vals[r * nf + f];
        return c;
    };

    t0 = clock::now();
    const auto floor_vals = gaussian_values(4, 0);
    timings["noise_floor_ms"] = ms_since(t0);

    struct Task {
        std::size_t f, m;
    };
    nlohmann::json per_n = nlohmann::json::array();
    for (std::size_t ni = 0; ni < cfg.n_values.size(); ++ni) {
        const std::size_t n = cfg.n_values[ni];
        auto tn = clock::now();
        std::vector<double> proc(rr * nf);
        parallel_for(rr, workers, [&](std::size_t r) {
            RngStream rng(cfg.seed, RngStream::key(2, ni, r));
            const auto st = process_table(spec, n, cfg.horizon, cfg.depth, cfg.eval_points, cfg.grid, rng);
            for (std::size_t f = 0; f < nf; ++f) proc[r * nf + f] = evaluate_functional(fns[f], st.table, st.eval, cfg.p);
        });
        const double proc_ms = ms_since(tn);
        tn = clock::now();
        const auto gauss = gaussian_values(3, ni);
        const double gauss_ms = ms_since(tn);
        tn = clock::now();
        std::vector<Task> tasks;
        for (std::size_t f = 0; f < nf; ++f) {
            for (std::size_t m = 0; m < metrics.size(); ++m) tasks.push_back({f, m});
        }
        std::vector<DistanceRow> rows(tasks.size());
        parallel_for(tasks.size(), workers, [&](std::size_t ti) {
            const auto& t = tasks[ti];
            const auto xs = column(proc, t.f), ys = column(gauss, t.f), zs = column(floor_vals, t.f);
            const auto slot = static_cast<std::uint64_t>(t.f * 16 + t.m);
            const auto main = detail::bootstrap_distance(metrics[t.m], xs, ys, cfg.bootstrap,
                                                         RngStream(cfg.seed, RngStream::key(5, ni, slot)));
            const auto fl = detail::bootstrap_distance(metrics[t.m], ys, zs, cfg.bootstrap,
                                                       RngStream(cfg.seed, RngStream::key(6, ni, slot)));
            rows[ti] = {n, fns[t.f].id, to_string(metrics[t.m]), main.distance, main.se, fl.distance, fl.se};
        });
        for (auto& row : rows) res.distances.push_back(std::move(row));
        per_n.push_back({{"N", n}, {"process_ms", proc_ms}, {"limit_ms", gauss_ms}, {"distance_ms", ms_since(tn)}});
    }
    timings["per_N"] = per_n;

    for (std::size_t f = 0; f < nf; ++f) {
        for (const auto m : metrics) {
            std::vector<DecayPoint> pts;
            bool all_at_floor = true;
            for (const auto& d : res.distances) {
                if (d.functional != fns[f].id || d.metric != to_string(m)) continue;
                pts.push_back({static_cast<double>(d.n), d.distance, d.se});
                const double band = 4.0 * std::sqrt(d.se * d.se + d.floor_se * d.floor_se);
                if (d.distance > d.floor + band) all_at_floor = false;
            }
            SlopeRow s{fns[f].id, to_string(m), {}, "ok"};
            try {
                s.fit = fit_decay(pts);
                if (all_at_floor) s.flag = "noise-limited";
            } catch (const std::invalid_argument&) {
                s.flag = "unfitted";
                s.fit.slope = std::nan("");
                s.fit.slope_se = std::nan("");
            }
            res.slopes.push_back(std::move(s));
        }
    }
    timings["total_ms"] = ms_since(t_start);

    std::string spec_text;
    if (!cfg.spec && !cfg.spec_path.empty()) {
        std::ifstream in(cfg.spec_path);
        std::stringstream buf;
        buf << in.rdbuf();
        spec_text = buf.str();
    }
    res.manifest = {{"config_hash", fmt::format("{:016x}", fnv1a(spec_text, fnv1a(cfg.canonical())))},
                    {"seed", cfg.seed},
                    {"variant", to_string(variant)},
                    {"limit_model", {{"source", res.model_source},
                                     {"sigma", detail::matrix_json(res.model.sigma)},
                                     {"gamma", detail::matrix_json(res.model.gamma)}}},
                    {"noise_floor", nlohmann::json::array()},
                    {"timings", timings},
                    {"versions", {{"roughlab", kVersion}, {"compiler", __VERSION__}}}};
    for (const auto& d : res.distances) {
        res.manifest["noise_floor"].push_back(
            {{"N", d.n}, {"functional", d.functional}, {"metric", d.metric}, {"floor", d.floor}, {"se", d.floor_se}});
    }
    return res;
}

/// Writes distances.csv, slopes.csv and manifest.json into `dir`.
inline void write_outputs(ExperimentResult& res, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto base = std::filesystem::path(dir);
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
        out << text;
    };
    write(base / "distances.csv", distances_csv(res));
    write(base / "slopes.csv", slopes_csv(res));
    res.manifest["outputs"] = {(base / "distances.csv").string(), (base / "slopes.csv").string(),
                               (base / "manifest.json").string()};
    write(base / "manifest.json", res.manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Chen audit

struct ChenAuditOptions {
    std::size_t path_length = 1000;
    std::size_t depth = 3;
    std::size_t splits = 100;
    std::size_t replicas = 200;
    std::size_t fine_steps = 4096;
    std::size_t coarse_stride = 64;  ///< fine steps per coarse Euler step; refined to stride / 4
    std::uint64_t seed = 1;
};

struct ChenAuditRow {
    std::string check;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

/// Relative Chen residual: per level, |x (x) y - z| over sum_k |x^k| |y^(nu-k)|.
[[nodiscard]] inline double chen_residual(const TruncatedTensor& x, const TruncatedTensor& y, const TruncatedTensor& z) {
    const auto c = chen_concat(x, y);
    double worst = 0.0;
    for (std::size_t nu = 1; nu <= z.depth(); ++nu) {
        double scale = 0.0;
        for (std::size_t k = 0; k <= nu; ++k) scale += level_norm(x.level(k)) * level_norm(y.level(nu - k));
        const double r = level_norm(c.level(nu) - z.level(nu));
        if (r > 0.0) worst = std::max(worst, r / std::max(scale, 1e-300));
    }
    return worst;
}

/// Chen residuals at random splits: exact for sampled signatures, and the
/// strong-rate improvement of Euler rough paths restarted at off-grid splits
/// when the coarse step shrinks fourfold.
[[nodiscard]] inline std::vector<ChenAuditRow> chen_audit(const AnySpec& spec, const LimitModel& model,
                                                          const ChenAuditOptions& opt) {
    if (opt.coarse_stride < 4 || opt.coarse_stride % 4 != 0) throw std::invalid_argument("chen_audit: stride must be a multiple of 4");
    std::vector<ChenAuditRow> rows;
    RngStream rng(opt.seed, RngStream::key(7, 0));
    const auto table = process_table(spec, opt.path_length, 1.0, opt.depth, 2, 0.1, rng);
    const std::size_t cells = table.table.steps();
    const auto& tbl = table.table;
    PathSample cellpath;  // cell values recovered from level 1 of the prefix table
    {
        std::vector<double> v(cells * tbl.dim());
        std::vector<double> buf(tbl.dim());
        for (std::size_t k = 0; k < cells; ++k) {
            tbl.level1(k, k + 1, buf.data());
            for (std::size_t i = 0; i < tbl.dim(); ++i) v[k * tbl.dim() + i] = buf[i];
        }
        cellpath = PathSample(tbl.dim(), std::move(v), PathKind::discrete, 1.0, 1.0);
    }
    double worst = 0.0;
    std::uniform_int_distribution<std::size_t> pick(0, cells);
    for (std::size_t s = 0; s < opt.splits; ++s) {
        std::size_t a = pick(rng.engine()), b = pick(rng.engine()), c = pick(rng.engine());
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        const auto sx = window_signature(cellpath, static_cast<double>(a), static_cast<double>(b), opt.depth);
        const auto sy = window_signature(cellpath, static_cast<double>(b), static_cast<double>(c), opt.depth);
        const auto sz = window_signature(cellpath, static_cast<double>(a), static_cast<double>(c), opt.depth);
        worst = std::max(worst, chen_residual(sx, sy, sz));
    }
    rows.push_back({"sampled signature, grid splits", worst, 1e-12, worst <= 1e-12});

    const Eigen::MatrixXd root = covariance_root(model.sigma);
    double coarse = 0.0, fine = 0.0;
    for (std::size_t r = 0; r < opt.replicas; ++r) {
        RngStream wr(opt.seed, RngStream::key(8, r));
        const auto w = sample_brownian(root, 1.0, opt.fine_steps, wr);
        std::uniform_int_distribution<std::size_t> upick(1, opt.fine_steps - 1);
        std::size_t u = upick(wr.engine());
        if (u % opt.coarse_stride == 0) ++u;
        if (u % (opt.coarse_stride / 4) == 0) ++u;
        for (const std::size_t stride : {opt.coarse_stride, opt.coarse_stride / 4}) {
            const auto x = euler_window(w, model, opt.depth, 0, u, stride);
            const auto y = euler_window(w, model, opt.depth, u, opt.fine_steps, stride);
            const auto z = euler_window(w, model, opt.depth, 0, opt.fine_steps, stride);
            const double res = max_level_distance(chen_concat(x, y), z);
            (stride == opt.coarse_stride ? coarse : fine) += res;
        }
    }
    coarse /= static_cast<double>(opt.replicas);
    fine /= static_cast<double>(opt.replicas);
    const double ratio = fine > 0.0 ? coarse / fine : 0.0;
    rows.push_back({"Euler rough path, off-grid splits, residual ratio dt/(dt/4)", ratio, 1.5, ratio >= 1.5});
    return rows;
}

}  // namespace roughlab
