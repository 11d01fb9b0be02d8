#pragma once

// The Gaussian limit: covariance sigma and drift Gamma of the limiting
// Brownian motion, estimated or in closed form, and its Lyons extension
// simulated by the Ito (left-point) Euler recursion.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "roughlab/parallel.hpp"
#include "roughlab/processes.hpp"
#include "roughlab/rng.hpp"
#include "roughlab/signature.hpp"
#include "roughlab/tensor_algebra.hpp"

namespace roughlab {

enum class LimitVariant { discrete, continuous, suspension };

[[nodiscard]] inline std::string to_string(LimitVariant v) {
    switch (v) {
        case LimitVariant::discrete: return "discrete";
        case LimitVariant::continuous: return "continuous";
        case LimitVariant::suspension: return "suspension";
    }
    return "unknown";
}

[[nodiscard]] inline LimitVariant parse_variant(const std::string& s) {
    if (s == "discrete") return LimitVariant::discrete;
    if (s == "continuous") return LimitVariant::continuous;
    if (s == "suspension") return LimitVariant::suspension;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

struct LimitModel {
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd gamma;
    LimitVariant variant = LimitVariant::discrete;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(sigma.rows()); }
};

struct LimitEstimate {
    LimitModel model;
    Eigen::MatrixXd se_sigma;
    Eigen::MatrixXd se_gamma;
    Eigen::MatrixXd c0;  ///< lag-0 covariance of the summed sequence
    std::size_t lag_cap = 0;
    bool tail_warning = false;  ///< |C(K)| > 5 se somewhere: the series may not have decayed
};

struct EstimateOptions {
    std::size_t lag_cap = 0;  ///< 0 selects the default
    std::size_t replicas = 10;
    std::size_t length = 100000;  ///< steps per replica (unit intervals for continuous kinds)
    std::uint64_t seed = 1;
    std::size_t workers = 1;
};

/// ceil(10 / (1 - |lambda_2|)) for chains, 50 otherwise.
[[nodiscard]] inline std::size_t default_lag_cap(const ProcessSpec& spec) {
    if (spec.is_chain()) {
        const double l2 = second_eigenvalue_modulus(spec.transition);
        return static_cast<std::size_t>(std::ceil(10.0 / (1.0 - l2)));
    }
    return 50;
}

namespace detail {

// Lagged cross-covariances C(k)_ij = mean_t x_i(t) x_j(t+k), k = 0..K, of an
// n x d row-major sequence.
inline std::vector<Eigen::MatrixXd> lag_covariances(const std::vector<double>& x, std::size_t d, std::size_t lag_cap) {
    const std::size_t n = x.size() / d;
    if (n <= lag_cap) throw std::invalid_argument("estimate_limit_model: sequence shorter than the lag cap");
    std::vector<Eigen::MatrixXd> c(lag_cap + 1, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
    for (std::size_t k = 0; k <= lag_cap; ++k) {
        auto& ck = c[k];
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t t = 0; t + k < n; ++t) acc += x[t * d + i] * x[(t + k) * d + j];
                ck(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc / static_cast<double>(n - k);
            }
        }
    }
    return c;
}

struct ReplicaMoments {
    Eigen::MatrixXd sigma, gamma, c0, tail;
};

inline ReplicaMoments moments_from_sequence(const std::vector<double>& x, std::size_t d, std::size_t lag_cap,
                                            const Eigen::MatrixXd& f_correction) {
    const auto c = lag_covariances(x, d, lag_cap);
    ReplicaMoments r;
    r.c0 = c[0];
    r.gamma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t k = 1; k <= lag_cap; ++k) r.gamma += c[k];
    r.sigma = r.c0 + r.gamma + r.gamma.transpose();
    r.gamma += f_correction;
    r.tail = c[lag_cap];
    return r;
}

inline LimitEstimate combine(const std::vector<ReplicaMoments>& reps, LimitVariant variant, std::size_t lag_cap) {
    const auto rr = static_cast<double>(reps.size());
    const auto d = reps.front().sigma.rows();
    auto mean_of = [&](auto field) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
        for (const auto& r : reps) m += r.*field;
        return Eigen::MatrixXd(m / rr);
    };
    auto se_of = [&](auto field, const Eigen::MatrixXd& mean) {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, d);
        if (reps.size() < 2) return v;
        for (const auto& r : reps) v += (r.*field - mean).cwiseAbs2();
        return Eigen::MatrixXd((v / (rr - 1.0) / rr).cwiseSqrt());
    };
    LimitEstimate e;
    e.model.variant = variant;
    e.model.sigma = mean_of(&ReplicaMoments::sigma);
    e.model.gamma = mean_of(&ReplicaMoments::gamma);
    e.c0 = mean_of(&ReplicaMoments::c0);
    e.se_sigma = se_of(&ReplicaMoments::sigma, e.model.sigma);
    e.se_gamma = se_of(&ReplicaMoments::gamma, e.model.gamma);
    e.lag_cap = lag_cap;
    const Eigen::MatrixXd tail = mean_of(&ReplicaMoments::tail);
    const Eigen::MatrixXd tail_se = se_of(&ReplicaMoments::tail, tail);
    if (reps.size() >= 2) e.tail_warning = (tail.cwiseAbs().array() > 5.0 * tail_se.array()).any();
    return e;
}

}  // namespace detail

/// Truncated lag-series estimate of (sigma, Gamma) from long stationary
/// paths. Discrete kinds use C(k) of xi; continuous kinds sum the unit
/// interval integrals eta(k) and add the mean unit-interval level-2 term F.
[[nodiscard]] inline LimitEstimate estimate_limit_model(const ProcessSpec& spec, const EstimateOptions& opt) {
    const std::size_t lag = opt.lag_cap ? opt.lag_cap : default_lag_cap(spec);
    if (opt.replicas == 0) throw std::invalid_argument("estimate_limit_model: need at least one replica");
    const std::size_t d = spec.dim;
    std::vector<detail::ReplicaMoments> reps(opt.replicas);
    parallel_for(opt.replicas, opt.workers, [&](std::size_t r) {
        RngStream rng(opt.seed, RngStream::key(1, r));
        if (!spec.is_continuous()) {
            const auto path = sample_path(spec, opt.length, rng);
            const std::vector<double> x(path.values().begin(), path.values().end());
            reps[r] = detail::moments_from_sequence(x, d, lag, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
            return;
        }
        const double units_real = 1.0 / spec.dt;
        const auto units = static_cast<std::size_t>(std::llround(units_real));
        if (std::abs(units_real - static_cast<double>(units)) > 1e-9) {
            throw std::invalid_argument("estimate_limit_model: 1/dt must be an integer for continuous kinds");
        }
        const auto path = sample_path(spec, opt.length * units, rng);
        std::vector<double> eta(opt.length * d);
        Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        const std::size_t size = detail::flat_size(d, 2);
        std::vector<double> buf(size), inc(d);
        for (std::size_t k = 0; k < opt.length; ++k) {
            std::fill(buf.begin(), buf.end(), 0.0);
            buf[0] = 1.0;
            for (std::size_t c = 0; c < units; ++c) {
                const auto row = path.row(k * units + c);
                for (std::size_t i = 0; i < d; ++i) inc[i] = row[i] * spec.dt;
                detail::mul_step(buf.data(), inc.data(), d, 2);
            }
            for (std::size_t i = 0; i < d; ++i) {
                eta[k * d + i] = buf[1 + i];
                for (std::size_t j = 0; j < d; ++j) f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += buf[1 + d + i * d + j];
            }
        }
        f /= static_cast<double>(opt.length);
        reps[r] = detail::moments_from_sequence(eta, d, lag, f);
    });
    return detail::combine(reps, spec.is_continuous() ? LimitVariant::continuous : LimitVariant::discrete, lag);
}

/// Suspension version: eta(k) is the integral over the k-th fiber and the
/// within-fiber level-2 integral enters Gamma through its mean.
[[nodiscard]] inline LimitEstimate estimate_limit_model(const SuspensionSpec& spec, const EstimateOptions& opt) {
    const std::size_t lag = opt.lag_cap ? opt.lag_cap : default_lag_cap(spec.base);
    if (opt.replicas == 0) throw std::invalid_argument("estimate_limit_model: need at least one replica");
    const std::size_t d = spec.dim();
    std::vector<detail::ReplicaMoments> reps(opt.replicas);
    parallel_for(opt.replicas, opt.workers, [&](std::size_t r) {
        RngStream rng(opt.seed, RngStream::key(1, r));
        std::vector<std::size_t> states;
        detail::sample_chain_states(spec.base, opt.length, rng, states);
        std::vector<double> eta(opt.length * d);
        Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < opt.length; ++k) {
            const Eigen::VectorXd e = spec.eta(states[k]);
            for (std::size_t i = 0; i < d; ++i) eta[k * d + i] = e(static_cast<Eigen::Index>(i));
            f += spec.fiber_level2(states[k]);
        }
        f /= static_cast<double>(opt.length);
        reps[r] = detail::moments_from_sequence(eta, d, lag, f);
    });
    return detail::combine(reps, LimitVariant::suspension, lag);
}

[[nodiscard]] inline LimitEstimate estimate_limit_model(const AnySpec& spec, const EstimateOptions& opt) {
    return std::visit([&](const auto& s) { return estimate_limit_model(s, opt); }, spec);
}

namespace detail {

// C(0) = g' D g and Gamma = g' D (Z - I) g with Z = (I - P + 1 pi)^{-1}, for a
// centered state-local functional g of a stationary chain.
inline LimitModel chain_limit_model(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi, const Eigen::MatrixXd& g) {
    const auto m = p.rows();
    const Eigen::MatrixXd one_pi = Eigen::VectorXd::Ones(m) * pi.transpose();
    const Eigen::MatrixXd z = (Eigen::MatrixXd::Identity(m, m) - p + one_pi).inverse();
    const Eigen::MatrixXd dg = pi.asDiagonal() * g;
    LimitModel lm;
    const Eigen::MatrixXd c0 = g.transpose() * dg;
    lm.gamma = dg.transpose() * (z - Eigen::MatrixXd::Identity(m, m)) * g;
    lm.sigma = c0 + lm.gamma + lm.gamma.transpose();
    return lm;
}

}  // namespace detail

/// Closed-form (sigma, Gamma) where one is available.
[[nodiscard]] inline std::optional<LimitModel> exact_limit_model(const ProcessSpec& spec) {
    LimitModel lm;
    const auto d = static_cast<Eigen::Index>(spec.dim);
    switch (spec.kind) {
        case ProcessKind::iid:
            lm.sigma = spec.innovation_cov;
            lm.gamma = Eigen::MatrixXd::Zero(d, d);
            return lm;
        case ProcessKind::ar1: {
            const double rho = spec.rho;
            const Eigen::MatrixXd g0 = spec.innovation_cov / (1.0 - rho * rho);
            lm.gamma = g0 * (rho / (1.0 - rho));
            lm.sigma = spec.innovation_cov / ((1.0 - rho) * (1.0 - rho));
            return lm;
        }
        case ProcessKind::ou: {
            const double th2 = spec.theta * spec.theta;
            lm.variant = LimitVariant::continuous;
            lm.sigma = spec.innovation_cov / th2;
            lm.gamma = spec.innovation_cov / (2.0 * th2);
            return lm;
        }
        case ProcessKind::markov_functional:
        case ProcessKind::subshift: {
            auto out = detail::chain_limit_model(spec.transition, spec.stationary, spec.observable);
            return out;
        }
        case ProcessKind::doubling_map: {
            // Binary digits are iid fair bits under Lebesgue measure.
            lm.sigma.resize(1, 1);
            lm.gamma.resize(1, 1);
            switch (spec.map_observable) {
                case MapObservable::cos2pi:
                    lm.sigma(0, 0) = 0.5;
                    lm.gamma(0, 0) = 0.0;
                    break;
                case MapObservable::identity:
                    // Cov(x, 2^k x mod 1) = 2^-k / 12.
                    lm.gamma(0, 0) = 1.0 / 12.0;
                    lm.sigma(0, 0) = 1.0 / 12.0 + 2.0 / 12.0;
                    break;
                case MapObservable::indicator_half:
                    lm.sigma(0, 0) = 0.25;
                    lm.gamma(0, 0) = 0.0;
                    break;
            }
            return lm;
        }
        case ProcessKind::gauss_map:
            break;
    }
    return std::nullopt;
}

[[nodiscard]] inline std::optional<LimitModel> exact_limit_model(const SuspensionSpec& spec) {
    const auto m = static_cast<Eigen::Index>(spec.base.states());
    Eigen::MatrixXd eta(m, spec.fiber.cols());
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(spec.fiber.cols(), spec.fiber.cols());
    for (Eigen::Index s = 0; s < m; ++s) {
        eta.row(s) = spec.eta(static_cast<std::size_t>(s)).transpose();
        f += spec.base.stationary(s) * spec.fiber_level2(static_cast<std::size_t>(s));
    }
    auto lm = detail::chain_limit_model(spec.base.transition, spec.base.stationary, eta);
    lm.gamma += f;
    lm.variant = LimitVariant::suspension;
    return lm;
}

[[nodiscard]] inline std::optional<LimitModel> exact_limit_model(const AnySpec& spec) {
    return std::visit([](const auto& s) { return exact_limit_model(s); }, spec);
}

// ---------------------------------------------------------------------------
// Brownian motion and its Lyons extension

/// Brownian increments on a uniform grid of [0, T]; W(0) = 0.
struct BrownianPath {
    std::size_t dim = 1;
    double horizon = 1.0;
    std::size_t steps = 0;
    std::vector<double> increments;  ///< steps x d

    [[nodiscard]] double step() const { return horizon / static_cast<double>(steps); }
    [[nodiscard]] const double* increment(std::size_t k) const { return increments.data() + k * dim; }

    /// W(t_k), k = 0..steps.
    [[nodiscard]] std::vector<double> value(std::size_t k) const {
        std::vector<double> w(dim, 0.0);
        for (std::size_t q = 0; q < k; ++q) {
            for (std::size_t i = 0; i < dim; ++i) w[i] += increments[q * dim + i];
        }
        return w;
    }
};

/// Symmetric PSD square root; eigenvalues in [-1e-10, 0) are clipped to 0.
[[nodiscard]] inline Eigen::MatrixXd covariance_root(const Eigen::MatrixXd& sigma) {
    return detail::psd_sqrt(sigma, "limit covariance");
}

[[nodiscard]] inline BrownianPath sample_brownian(const Eigen::MatrixXd& root, double horizon, std::size_t steps, RngStream& rng) {
    if (steps == 0) throw std::invalid_argument("sample_brownian: steps must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("sample_brownian: horizon must be positive");
    BrownianPath w;
    w.dim = static_cast<std::size_t>(root.rows());
    w.horizon = horizon;
    w.steps = steps;
    w.increments.resize(steps * w.dim);
    const double sd = std::sqrt(horizon / static_cast<double>(steps));
    Eigen::VectorXd z(static_cast<Eigen::Index>(w.dim));
    for (std::size_t k = 0; k < steps; ++k) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal() * sd;
        const Eigen::VectorXd x = root * z;
        std::copy(x.data(), x.data() + w.dim, w.increments.begin() + static_cast<std::ptrdiff_t>(k * w.dim));
    }
    return w;
}

[[nodiscard]] inline BrownianPath sample_brownian(const LimitModel& model, double horizon, std::size_t steps, RngStream& rng) {
    return sample_brownian(covariance_root(model.sigma), horizon, steps, rng);
}

/// The limit rough path on a grid: W and its higher levels W^(nu)(0, t_k).
struct GaussianRoughPath {
    BrownianPath w;
    PrefixSignature table;  ///< entry k holds W(0, t_k) across levels

    [[nodiscard]] std::size_t steps() const { return w.steps; }
    [[nodiscard]] double time(std::size_t k) const { return w.step() * static_cast<double>(k); }
    [[nodiscard]] TruncatedTensor at(std::size_t k) const { return table.at(k); }
    [[nodiscard]] TruncatedTensor increment(std::size_t k0, std::size_t k1) const { return table.increment(k0, k1); }
};

/// Ito Euler recursion X(t_{k+1}) = X(t_k) (x) (1 + dW_k + Gamma dt): level n
/// gains W^(n-1) (x) dW_k + W^(n-2) (x) Gamma dt at every step.
[[nodiscard]] inline GaussianRoughPath lyons_extension(BrownianPath w, const LimitModel& model, std::size_t depth) {
    const std::size_t d = w.dim;
    if (static_cast<std::size_t>(model.gamma.rows()) != d || static_cast<std::size_t>(model.gamma.cols()) != d) {
        throw std::invalid_argument("lyons_extension: Gamma shape does not match the path");
    }
    if (depth == 0 || depth > kMaxDepth) throw std::invalid_argument("lyons_extension: bad depth");
    const std::size_t stride = detail::flat_size(d, depth);
    const double dt = w.step();
    std::vector<double> drift(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) drift[i * d + j] = model.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * dt;
    }
    std::vector<double> data((w.steps + 1) * stride, 0.0);
    data[0] = 1.0;
    for (std::size_t k = 0; k < w.steps; ++k) {
        double* cur = data.data() + (k + 1) * stride;
        std::copy_n(data.data() + k * stride, stride, cur);
        detail::mul_euler_step(cur, w.increment(k), drift.data(), d, depth);
    }
    GaussianRoughPath out;
    out.table = PrefixSignature::from_table(d, depth, w.steps, dt, 1.0, std::move(data));
    out.w = std::move(w);
    return out;
}

/// Euler rough path restarted at fine index k0 and run to k1 with coarse steps
/// of `stride` fine increments (the last step may be shorter).
[[nodiscard]] inline TruncatedTensor euler_window(const BrownianPath& w, const LimitModel& model, std::size_t depth,
                                                  std::size_t k0, std::size_t k1, std::size_t stride) {
    if (k0 > k1 || k1 > w.steps || stride == 0) throw std::invalid_argument("euler_window: bad window");
    const std::size_t d = w.dim;
    std::vector<double> x(detail::flat_size(d, depth), 0.0);
    x[0] = 1.0;
    std::vector<double> dw(d), drift(d * d);
    const double fine = w.step();
    for (std::size_t a = k0; a < k1; a += stride) {
        const std::size_t b = std::min(k1, a + stride);
        std::fill(dw.begin(), dw.end(), 0.0);
        for (std::size_t q = a; q < b; ++q) {
            for (std::size_t i = 0; i < d; ++i) dw[i] += w.increments[q * d + i];
        }
        const double h = fine * static_cast<double>(b - a);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) drift[i * d + j] = model.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * h;
        }
        detail::mul_euler_step(x.data(), dw.data(), drift.data(), d, depth);
    }
    return TruncatedTensor::from_flat(d, depth, x);
}

// JSON for models: {"variant", "sigma", "gamma"} with row-major nested arrays.

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix JSON: expected a nonempty array of rows");
    const auto rows = j.size();
    const auto cols = j[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw std::invalid_argument("matrix JSON: ragged rows");
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    return m;
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const LimitEstimate& e) {
    return {{"variant", to_string(e.model.variant)},
            {"sigma", detail::matrix_json(e.model.sigma)},
            {"gamma", detail::matrix_json(e.model.gamma)},
            {"se_sigma", detail::matrix_json(e.se_sigma)},
            {"se_gamma", detail::matrix_json(e.se_gamma)},
            {"lag_cap", e.lag_cap},
            {"tail_warning", e.tail_warning}};
}

[[nodiscard]] inline LimitModel limit_model_from_json(const nlohmann::json& j) {
    LimitModel m;
    m.sigma = detail::matrix_from_json(j.at("sigma"));
    m.gamma = detail::matrix_from_json(j.at("gamma"));
    m.variant = parse_variant(j.value("variant", std::string("discrete")));
    if (m.sigma.rows() != m.sigma.cols() || m.gamma.rows() != m.sigma.rows() || m.gamma.cols() != m.sigma.cols()) {
        throw std::invalid_argument("model JSON: sigma and gamma must be d x d");
    }
    return m;
}

}  // namespace roughlab
