#pragma once

// Variation norms on sampled increments, the control function of the
// factorial signature bound, and distances between scalar sample sets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/zeta.hpp>

#include "roughlab/signature.hpp"
#include "roughlab/tensor_algebra.hpp"

namespace roughlab {

/// (s,t) -> |X(s,t)| on the breakpoints t_0 < ... < t_m, addressed by index.
struct IncrementFunction {
    std::vector<double> times;
    std::function<double(std::size_t, std::size_t)> norm;

    [[nodiscard]] std::size_t points() const noexcept { return times.size(); }
};

/// Increments of a scalar path sampled at the breakpoints.
[[nodiscard]] inline IncrementFunction scalar_increments(std::vector<double> times, std::vector<double> values) {
    if (times.size() != values.size()) throw std::invalid_argument("scalar_increments: size mismatch");
    auto v = std::make_shared<std::vector<double>>(std::move(values));
    return {std::move(times), [v](std::size_t a, std::size_t b) { return std::abs((*v)[b] - (*v)[a]); }};
}

/// Norm of level nu of a prefix table's increments, on prefix indices `idx`.
/// Levels are normalized by the table's time scale.
[[nodiscard]] inline IncrementFunction level_increments(const PrefixSignature& table, std::size_t nu,
                                                        std::vector<std::size_t> idx) {
    if (nu == 0 || nu > table.depth()) throw std::invalid_argument("level_increments: level out of range");
    for (std::size_t k : idx) {
        if (k > table.steps()) throw std::invalid_argument("level_increments: index out of range");
    }
    std::vector<double> times;
    times.reserve(idx.size());
    for (std::size_t k : idx) times.push_back(static_cast<double>(k) * table.dt() / table.time_scale());
    const double scale = std::pow(table.time_scale(), -0.5 * static_cast<double>(nu));
    auto shared_idx = std::make_shared<std::vector<std::size_t>>(std::move(idx));
    const PrefixSignature* t = &table;
    return {std::move(times), [t, nu, scale, shared_idx](std::size_t a, std::size_t b) {
                const std::size_t k0 = (*shared_idx)[a], k1 = (*shared_idx)[b];
                const std::size_t d = t->dim();
                if (nu == 1) {
                    std::vector<double> buf(d);
                    t->level1(k0, k1, buf.data());
                    double s = 0.0;
                    for (double x : buf) s += x * x;
                    return scale * std::sqrt(s);
                }
                if (nu == 2) {
                    std::vector<double> buf(d * d);
                    t->level2(k0, k1, buf.data());
                    double s = 0.0;
                    for (double x : buf) s += x * x;
                    return scale * std::sqrt(s);
                }
                return scale * level_norm(t->increment(k0, k1).level(nu));
            }};
}

[[nodiscard]] inline std::vector<std::size_t> index_range(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

/// Dense table of |X(t_j, t_i)|^p, stored by end point: row i holds j < i.
class IncrementPowers {
public:
    IncrementPowers(const IncrementFunction& f, double p) : m_(f.points()), data_(m_ * m_, 0.0) {
        if (m_ > 20001) throw std::invalid_argument("p-variation: grid exceeds 2e4 intervals");
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < i; ++j) data_[i * m_ + j] = std::pow(f.norm(j, i), p);
        }
    }
    [[nodiscard]] std::size_t points() const noexcept { return m_; }
    [[nodiscard]] const double* ending_at(std::size_t i) const { return data_.data() + i * m_; }

private:
    std::size_t m_;
    std::vector<double> data_;
};

/// V(i) = sup over partitions of [t_start, t_i] of sum |X|^p, for every
/// i >= start (V(start) = 0). Entries before `start` are zero.
[[nodiscard]] inline std::vector<double> p_variation_powers(const IncrementPowers& pw, std::size_t start) {
    const std::size_t m = pw.points();
    std::vector<double> v(m, 0.0);
    for (std::size_t i = start + 1; i < m; ++i) {
        const double* col = pw.ending_at(i);
        double best = 0.0;
        for (std::size_t j = start; j < i; ++j) best = std::max(best, v[j] + col[j]);
        v[i] = best;
    }
    return v;
}

[[nodiscard]] inline double p_variation(const IncrementFunction& f, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("p_variation: p must be >= 1");
    if (f.points() < 2) return 0.0;
    const IncrementPowers pw(f, p);
    return std::pow(p_variation_powers(pw, 0).back(), 1.0 / p);
}

/// max over grid pairs of |X(s,t)| / |t - s|^a.
[[nodiscard]] inline double hoelder_ratio(const IncrementFunction& f, double a) {
    if (!(a > 0.0)) throw std::invalid_argument("hoelder_ratio: exponent must be positive");
    double best = 0.0;
    for (std::size_t i = 0; i < f.points(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double dt = f.times[i] - f.times[j];
            if (dt > 0.0) best = std::max(best, f.norm(j, i) / std::pow(dt, a));
        }
    }
    return best;
}

/// 2p^2 (1 + sum_{r>=3} (2/(r-2))^{([p]+1)/p}), where the series equals
/// 2^e zeta(e) with e = ([p]+1)/p > 1.
[[nodiscard]] inline double beta_lower_bound(double p) {
    if (!(p > 2.0 && p < 3.0)) throw std::invalid_argument("beta_lower_bound: p must lie in (2,3)");
    const double e = (std::floor(p) + 1.0) / p;
    return 2.0 * p * p * (1.0 + std::pow(2.0, e) * boost::math::zeta(e));
}

/// phi(s,t) = beta^p (|S|^p_{p,[s,t]} + |SS|^{p/2}_{p/2,[s,t]}) for every pair
/// of a subgrid, with partition breakpoints on the full prefix grid.
struct ControlFunction {
    std::vector<std::size_t> subgrid;  ///< prefix indices
    std::vector<double> values;        ///< row-major |subgrid|^2, entry (a,b) for a <= b
    double p = 2.5;
    double beta = 1.0;

    [[nodiscard]] double operator()(std::size_t a, std::size_t b) const { return values[a * subgrid.size() + b]; }
};

[[nodiscard]] inline ControlFunction control_function(const PrefixSignature& table, double p, double beta,
                                                      std::vector<std::size_t> subgrid) {
    if (!(p > 2.0 && p < 3.0)) throw std::invalid_argument("control_function: p must lie in (2,3)");
    if (table.depth() < 2) throw std::invalid_argument("control_function: need depth >= 2");
    if (!std::is_sorted(subgrid.begin(), subgrid.end())) throw std::invalid_argument("control_function: subgrid must be sorted");
    const auto full = index_range(table.steps() + 1);
    const IncrementPowers v1(level_increments(table, 1, full), p);
    const IncrementPowers v2(level_increments(table, 2, full), p / 2.0);
    ControlFunction cf;
    cf.p = p;
    cf.beta = beta;
    const std::size_t m = subgrid.size();
    cf.values.assign(m * m, 0.0);
    const double bp = std::pow(beta, p);
    for (std::size_t a = 0; a < m; ++a) {
        const auto r1 = p_variation_powers(v1, subgrid[a]);
        const auto r2 = p_variation_powers(v2, subgrid[a]);
        for (std::size_t b = a; b < m; ++b) cf.values[a * m + b] = bp * (r1[subgrid[b]] + r2[subgrid[b]]);
    }
    cf.subgrid = std::move(subgrid);
    return cf;
}

/// Evenly spaced subgrid of `count` prefix indices covering 0..steps.
[[nodiscard]] inline std::vector<std::size_t> even_subgrid(std::size_t steps, std::size_t count) {
    if (count < 2) throw std::invalid_argument("even_subgrid: need at least two points");
    std::vector<std::size_t> idx(count);
    for (std::size_t a = 0; a < count; ++a) idx[a] = (a * steps) / (count - 1);
    return idx;
}

struct FactorialReport {
    std::vector<double> worst_ratio;  ///< index nu, entry 0 unused
    double worst = 0.0;
};

/// max over subgrid pairs of |S^(nu)(s,t)| beta (nu/p)! / phi(s,t)^(nu/p).
[[nodiscard]] inline FactorialReport factorial_bound_check(const PrefixSignature& table, const ControlFunction& phi,
                                                           std::size_t levels) {
    if (levels > table.depth()) throw std::invalid_argument("factorial_bound_check: levels exceed table depth");
    FactorialReport rep;
    rep.worst_ratio.assign(levels + 1, 0.0);
    const std::size_t m = phi.subgrid.size();
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const double ctrl = phi(a, b);
            const auto inc = table.normalized_increment(phi.subgrid[a], phi.subgrid[b]);
            for (std::size_t nu = 1; nu <= levels; ++nu) {
                const double norm = level_norm(inc.level(nu));
                const double e = static_cast<double>(nu) / phi.p;
                double ratio = 0.0;
                if (norm > 0.0) {
                    ratio = ctrl > 0.0 ? norm * phi.beta * std::exp(std::lgamma(e + 1.0) - e * std::log(ctrl))
                                       : std::numeric_limits<double>::infinity();
                }
                rep.worst_ratio[nu] = std::max(rep.worst_ratio[nu], ratio);
                rep.worst = std::max(rep.worst, ratio);
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Distances between scalar sample sets

/// W1 between the empirical laws; the larger set is trimmed to the smaller size.
[[nodiscard]] inline double wasserstein1_scalar(std::vector<double> xs, std::vector<double> ys) {
    if (xs.empty() || ys.empty()) throw std::invalid_argument("wasserstein1_scalar: empty sample");
    const std::size_t n = std::min(xs.size(), ys.size());
    xs.resize(n);
    ys.resize(n);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(xs[i] - ys[i]);
    return acc / static_cast<double>(n);
}

/// Prokhorov distance bound pi <= sqrt(W1).
[[nodiscard]] inline double prokhorov_upper(double w1) {
    if (!(w1 >= 0.0)) throw std::invalid_argument("prokhorov_upper: W1 must be nonnegative");
    return std::sqrt(w1);
}

/// Two-sample Kolmogorov-Smirnov statistic.
[[nodiscard]] inline double cdf_distance(std::vector<double> xs, std::vector<double> ys) {
    if (xs.empty() || ys.empty()) throw std::invalid_argument("cdf_distance: empty sample");
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const auto nx = static_cast<double>(xs.size());
    const auto ny = static_cast<double>(ys.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < xs.size() || j < ys.size()) {
        double v;
        if (j == ys.size() || (i < xs.size() && xs[i] <= ys[j])) {
            v = xs[i];
        } else {
            v = ys[j];
        }
        while (i < xs.size() && xs[i] <= v) ++i;
        while (j < ys.size() && ys[j] <= v) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return best;
}

}  // namespace roughlab
