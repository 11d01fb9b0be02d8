#pragma once

// Centered stationary processes: iid and AR(1) vectors, functionals of
// finite Markov chains and subshifts of finite type, the doubling and Gauss
// maps, Ornstein-Uhlenbeck on a grid, and suspension flows over chains.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "roughlab/keyvalue.hpp"
#include "roughlab/path.hpp"
#include "roughlab/rng.hpp"
#include "roughlab/suspension.hpp"

namespace roughlab {

enum class ProcessKind { iid, ar1, markov_functional, doubling_map, gauss_map, subshift, ou };
enum class Innovation { normal, exponential, rademacher };
enum class MapObservable { cos2pi, identity, indicator_half };

[[nodiscard]] inline std::string to_string(ProcessKind k) {
    switch (k) {
        case ProcessKind::iid: return "iid";
        case ProcessKind::ar1: return "ar1";
        case ProcessKind::markov_functional: return "markov";
        case ProcessKind::doubling_map: return "doubling";
        case ProcessKind::gauss_map: return "gauss";
        case ProcessKind::subshift: return "subshift";
        case ProcessKind::ou: return "ou";
    }
    return "unknown";
}

struct ProcessSpec {
    ProcessKind kind = ProcessKind::iid;
    std::size_t dim = 1;

    // iid, ar1, ou: innovation covariance Q and its symmetric square root.
    Eigen::MatrixXd innovation_cov;
    Eigen::MatrixXd innovation_root;
    Innovation innovation = Innovation::normal;
    double rho = 0.0;
    double theta = 1.0;
    double dt = 0.1;  ///< grid step of continuous-time kinds
    std::size_t burn_in = 0;

    // Chains and subshifts: transition matrix, centered state-by-coordinate
    // observable table, stationary law.
    Eigen::MatrixXd transition;
    Eigen::MatrixXd observable;
    Eigen::VectorXd stationary;
    Eigen::MatrixXd adjacency;

    // Maps: scalar observable and its invariant-measure mean.
    MapObservable map_observable = MapObservable::cos2pi;
    double observable_mean = 0.0;

    [[nodiscard]] std::size_t states() const { return static_cast<std::size_t>(transition.rows()); }
    [[nodiscard]] bool is_chain() const {
        return kind == ProcessKind::markov_functional || kind == ProcessKind::subshift;
    }
    [[nodiscard]] bool is_continuous() const { return kind == ProcessKind::ou; }
};

namespace detail {

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a, const char* what) {
    if (a.rows() != a.cols()) throw std::invalid_argument(std::string(what) + ": matrix must be square");
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument(std::string(what) + ": matrix must be symmetric");
    }
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.size() > 0 && ev.minCoeff() < -1e-10) {
        throw std::invalid_argument(std::string(what) + ": matrix is not positive semidefinite");
    }
    ev = ev.cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

inline bool is_primitive(const Eigen::MatrixXd& p) {
    const auto n = p.rows();
    Eigen::MatrixXd pattern = (p.array() > 0.0).cast<double>().matrix();
    Eigen::MatrixXd power = pattern;
    const long limit = (n - 1) * (n - 1) + 1;
    for (long k = 1; k <= limit; ++k) {
        if ((power.array() > 0.0).all()) return true;
        power = ((power * pattern).array() > 0.0).cast<double>().matrix();
    }
    return false;
}

inline Eigen::VectorXd stationary_law(const Eigen::MatrixXd& p) {
    const auto n = p.rows();
    // Identical rows: the chain is iid and pi is that row.
    if ((p.rowwise() - p.row(0)).cwiseAbs().maxCoeff() == 0.0) return p.row(0).transpose();
    Eigen::MatrixXd a(n + 1, n);
    a.topRows(n) = p.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(n).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1.0;
    Eigen::VectorXd pi = a.colPivHouseholderQr().solve(b);
    pi = pi.cwiseMax(0.0);
    return pi / pi.sum();
}

inline double standard_draw(Innovation law, RngStream& rng) {
    switch (law) {
        case Innovation::normal: return rng.normal();
        case Innovation::exponential: return -std::log1p(-rng.uniform()) - 1.0;
        case Innovation::rademacher: return (rng.bits() >> 63) != 0 ? 1.0 : -1.0;
    }
    return 0.0;
}

inline double map_observable_value(MapObservable obs, double x) {
    switch (obs) {
        case MapObservable::cos2pi: return std::cos(2.0 * std::numbers::pi * x);
        case MapObservable::identity: return x;
        case MapObservable::indicator_half: return x < 0.5 ? 1.0 : 0.0;
    }
    return 0.0;
}

inline double gauss_density(double x) { return 1.0 / ((1.0 + x) * std::numbers::ln2); }

}  // namespace detail

[[nodiscard]] inline ProcessSpec make_iid(const Eigen::MatrixXd& cov, Innovation law = Innovation::normal) {
    ProcessSpec s;
    s.kind = ProcessKind::iid;
    s.dim = static_cast<std::size_t>(cov.rows());
    if (s.dim == 0) throw std::invalid_argument("iid spec: empty covariance");
    s.innovation_cov = cov;
    s.innovation_root = detail::psd_sqrt(cov, "iid covariance");
    s.innovation = law;
    return s;
}

[[nodiscard]] inline ProcessSpec make_ar1(double rho, const Eigen::MatrixXd& cov, Innovation law = Innovation::normal) {
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("ar1 spec: need |rho| < 1");
    ProcessSpec s = make_iid(cov, law);
    s.kind = ProcessKind::ar1;
    s.rho = rho;
    s.burn_in = rho == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(40.0 / -std::log(std::abs(rho))));
    return s;
}

[[nodiscard]] inline ProcessSpec make_ou(double theta, const Eigen::MatrixXd& cov, double dt) {
    if (!(theta > 0.0)) throw std::invalid_argument("ou spec: theta must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("ou spec: dt must be positive");
    ProcessSpec s = make_iid(cov, Innovation::normal);
    s.kind = ProcessKind::ou;
    s.theta = theta;
    s.dt = dt;
    return s;
}

/// xi(k) = g(X_k) - E g for a stationary chain X with transition matrix P.
[[nodiscard]] inline ProcessSpec make_markov(const Eigen::MatrixXd& p, const Eigen::MatrixXd& g) {
    if (p.rows() == 0 || p.rows() != p.cols()) throw std::invalid_argument("markov spec: P must be square");
    if (g.rows() != p.rows() || g.cols() == 0) {
        throw std::invalid_argument("markov spec: observable table must be states x d");
    }
    if ((p.array() < 0.0).any()) throw std::invalid_argument("markov spec: P has negative entries");
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if (std::abs(p.row(i).sum() - 1.0) > 1e-12) throw std::invalid_argument("markov spec: P is not row-stochastic");
    }
    if (!detail::is_primitive(p)) {
        throw std::invalid_argument("markov spec: P must be irreducible and aperiodic");
    }
    ProcessSpec s;
    s.kind = ProcessKind::markov_functional;
    s.dim = static_cast<std::size_t>(g.cols());
    s.transition = p;
    s.stationary = detail::stationary_law(p);
    const Eigen::RowVectorXd mean = s.stationary.transpose() * g;
    s.observable = g.rowwise() - mean;
    return s;
}

/// Subshift of finite type with adjacency A under its Parry (maximal entropy)
/// Markov measure, observed through a function of the current symbol.
[[nodiscard]] inline ProcessSpec make_subshift(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g) {
    if (a.rows() == 0 || a.rows() != a.cols()) throw std::invalid_argument("subshift spec: A must be square");
    if (((a.array() != 0.0) && (a.array() != 1.0)).any()) {
        throw std::invalid_argument("subshift spec: A must be a 0/1 matrix");
    }
    if (!detail::is_primitive(a)) throw std::invalid_argument("subshift spec: A must be primitive");
    Eigen::VectorXd v = Eigen::VectorXd::Ones(a.rows());
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd next = a * v;
        const double nl = next.sum() / v.sum();
        next /= next.norm();
        const double change = (next - v).cwiseAbs().maxCoeff();
        v = next;
        lambda = nl;
        if (change < 1e-15) break;
    }
    Eigen::MatrixXd p(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) p(i, j) = a(i, j) * v(j) / (lambda * v(i));
        p.row(i) /= p.row(i).sum();
    }
    ProcessSpec s = make_markov(p, g);
    s.kind = ProcessKind::subshift;
    s.adjacency = a;
    return s;
}

[[nodiscard]] inline double map_observable_mean(ProcessKind kind, MapObservable obs) {
    if (kind == ProcessKind::doubling_map) {
        switch (obs) {
            case MapObservable::cos2pi: return 0.0;
            case MapObservable::identity: return 0.5;
            case MapObservable::indicator_half: return 0.5;
        }
    }
    switch (obs) {
        case MapObservable::identity: return 1.0 / std::numbers::ln2 - 1.0;
        case MapObservable::indicator_half: return std::log2(1.5);
        case MapObservable::cos2pi: break;
    }
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(
        [](double x) { return std::cos(2.0 * std::numbers::pi * x) * detail::gauss_density(x); }, 0.0, 1.0, 15,
        1e-14);
}

[[nodiscard]] inline ProcessSpec make_map(ProcessKind kind, MapObservable obs) {
    if (kind != ProcessKind::doubling_map && kind != ProcessKind::gauss_map) {
        throw std::invalid_argument("map spec: kind must be doubling or gauss");
    }
    ProcessSpec s;
    s.kind = kind;
    s.dim = 1;
    s.map_observable = obs;
    s.observable_mean = map_observable_mean(kind, obs);
    return s;
}

namespace detail {

inline void sample_chain_states(const ProcessSpec& spec, std::size_t n, RngStream& rng, std::vector<std::size_t>& out) {
    const auto m = static_cast<std::size_t>(spec.transition.rows());
    std::vector<double> cum(m * m);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            acc += spec.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            cum[i * m + j] = acc;
        }
        cum[i * m + m - 1] = 1.0;
    }
    std::vector<double> init(m);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        acc += spec.stationary(static_cast<Eigen::Index>(j));
        init[j] = acc;
    }
    init[m - 1] = 1.0;
    auto pick = [&](const double* c) {
        const double u = rng.uniform();
        std::size_t j = 0;
        while (j + 1 < m && u >= c[j]) ++j;
        return j;
    };
    out.resize(n);
    if (n == 0) return;
    out[0] = pick(init.data());
    for (std::size_t k = 1; k < n; ++k) out[k] = pick(cum.data() + out[k - 1] * m);
}

}  // namespace detail

/// Stationary sample of length n (grid cells of step spec.dt for OU).
[[nodiscard]] inline PathSample sample_path(const ProcessSpec& spec, std::size_t n, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("sample_path: n must be positive");
    const std::size_t d = spec.dim;
    std::vector<double> values(n * d);
    Eigen::VectorXd z(d), x(d);
    switch (spec.kind) {
        case ProcessKind::iid: {
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t i = 0; i < d; ++i) z(static_cast<Eigen::Index>(i)) = detail::standard_draw(spec.innovation, rng);
                x = spec.innovation_root * z;
                std::copy(x.data(), x.data() + d, values.begin() + static_cast<std::ptrdiff_t>(k * d));
            }
            break;
        }
        case ProcessKind::ar1: {
            x.setZero();
            if (spec.innovation == Innovation::normal) {
                for (std::size_t i = 0; i < d; ++i) z(static_cast<Eigen::Index>(i)) = rng.normal();
                x = spec.innovation_root * z / std::sqrt(1.0 - spec.rho * spec.rho);
            } else {
                for (std::size_t b = 0; b < spec.burn_in; ++b) {
                    for (std::size_t i = 0; i < d; ++i) z(static_cast<Eigen::Index>(i)) = detail::standard_draw(spec.innovation, rng);
                    x = spec.rho * x + spec.innovation_root * z;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (k > 0) {
                    for (std::size_t i = 0; i < d; ++i) z(static_cast<Eigen::Index>(i)) = detail::standard_draw(spec.innovation, rng);
                    x = spec.rho * x + spec.innovation_root * z;
                }
                std::copy(x.data(), x.data() + d, values.begin() + static_cast<std::ptrdiff_t>(k * d));
            }
            break;
        }
        case ProcessKind::ou: {
            const double phi = std::exp(-spec.theta * spec.dt);
            const double stat = 1.0 / std::sqrt(2.0 * spec.theta);
            const double step = stat * std::sqrt(1.0 - phi * phi);
            for (std::size_t i = 0; i < d; ++i) z(static_cast<Eigen::Index>(i)) = rng.normal();
            x = stat * (spec.innovation_root * z);
            for (std::size_t k = 0; k < n; ++k) {
                if (k > 0) {
                    for (std::size_t i = 0; i < d; ++i) z(static_cast<Eigen::Index>(i)) = rng.normal();
                    x = phi * x + step * (spec.innovation_root * z);
                }
                std::copy(x.data(), x.data() + d, values.begin() + static_cast<std::ptrdiff_t>(k * d));
            }
            return {d, std::move(values), PathKind::continuous_grid, spec.dt, 1.0};
        }
        case ProcessKind::markov_functional:
        case ProcessKind::subshift: {
            std::vector<std::size_t> states;
            detail::sample_chain_states(spec, n, rng, states);
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t i = 0; i < d; ++i) {
                    values[k * d + i] = spec.observable(static_cast<Eigen::Index>(states[k]), static_cast<Eigen::Index>(i));
                }
            }
            break;
        }
        case ProcessKind::doubling_map: {
            // 63-bit fixed point: doubling drops the top bit; a fresh random
            // bottom bit stands in for the digits below machine precision.
            constexpr std::uint64_t mask = (std::uint64_t{1} << 63) - 1;
            constexpr double scale = 1.0 / 9223372036854775808.0;
            std::uint64_t state = rng.bits() & mask;
            for (std::size_t k = 0; k < n; ++k) {
                if (k > 0) state = ((state << 1) & mask) | (rng.bits() >> 63);
                const double xv = static_cast<double>(state >> 11) * (scale * 2048.0);
                values[k] = detail::map_observable_value(spec.map_observable, xv) - spec.observable_mean;
            }
            break;
        }
        case ProcessKind::gauss_map: {
            auto draw = [&] { return std::exp2(rng.uniform()) - 1.0; };
            double xv = draw();
            for (std::size_t k = 0; k < n; ++k) {
                if (k > 0) {
                    const double inv = 1.0 / xv;
                    xv = inv - std::floor(inv);
                }
                if (xv < 0x1p-40 || xv >= 1.0) xv = draw();
                values[k] = detail::map_observable_value(spec.map_observable, xv) - spec.observable_mean;
            }
            break;
        }
    }
    return {d, std::move(values), PathKind::discrete, 1.0, 1.0};
}

/// Second largest eigenvalue modulus of a chain's transition matrix.
[[nodiscard]] inline double second_eigenvalue_modulus(const Eigen::MatrixXd& p) {
    if (p.rows() < 2) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(p, false);
    std::vector<double> mods;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mods.push_back(std::abs(es.eigenvalues()(i)));
    std::sort(mods.begin(), mods.end(), std::greater<>());
    return mods[1];
}

// ---------------------------------------------------------------------------
// Suspensions

struct SuspensionSpec {
    ProcessSpec base;             ///< chain driving the base transformation
    std::vector<double> roof;     ///< tau per base state
    Eigen::MatrixXd fiber;        ///< centered h per base state (states x d)
    FiberProfile profile = FiberProfile::constant;
    double roof_bound = 1.0;      ///< L-hat: 1/L-hat <= tau <= L-hat
    double tau_bar = 1.0;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(fiber.cols()); }

    /// eta = integral of xi over one fiber of state s.
    [[nodiscard]] Eigen::VectorXd eta(std::size_t s) const {
        return fiber.row(static_cast<Eigen::Index>(s)).transpose() * roof[s];
    }

    /// Level-2 iterated integral over one fiber of state s (word (i,j):
    /// xi_i at the earlier time). Constant and linear profiles both give
    /// h h^T tau^2 / 2.
    [[nodiscard]] Eigen::MatrixXd fiber_level2(std::size_t s) const {
        const Eigen::VectorXd h = fiber.row(static_cast<Eigen::Index>(s)).transpose();
        return h * h.transpose() * (roof[s] * roof[s] / 2.0);
    }
};

[[nodiscard]] inline SuspensionSpec make_suspension(const ProcessSpec& base, const std::vector<double>& roof,
                                                    const Eigen::MatrixXd& h, FiberProfile profile,
                                                    double roof_bound = 0.0) {
    if (!base.is_chain()) throw std::invalid_argument("suspension spec: base must be a finite-state chain");
    const std::size_t m = base.states();
    if (roof.size() != m) throw std::invalid_argument("suspension spec: need one roof value per base state");
    if (static_cast<std::size_t>(h.rows()) != m || h.cols() == 0) {
        throw std::invalid_argument("suspension spec: fiber table must be states x d");
    }
    double lo = roof[0], hi = roof[0];
    for (double t : roof) {
        if (!(t > 0.0)) throw std::invalid_argument("suspension spec: roof values must be positive");
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    if (roof_bound <= 0.0) roof_bound = std::max(hi, 1.0 / lo);
    for (double t : roof) {
        if (t < 1.0 / roof_bound || t > roof_bound) {
            throw std::invalid_argument("suspension spec: roof value outside [1/L, L]");
        }
    }
    SuspensionSpec s;
    s.base = base;
    s.roof = roof;
    s.profile = profile;
    s.roof_bound = roof_bound;
    Eigen::VectorXd tau(m);
    for (std::size_t i = 0; i < m; ++i) tau(static_cast<Eigen::Index>(i)) = roof[i];
    s.tau_bar = base.stationary.dot(tau);
    // Shift h so that E eta = sum_s pi_s (h_s - c) tau_s = 0.
    const Eigen::RowVectorXd weighted = (base.stationary.cwiseProduct(tau)).transpose() * h;
    s.fiber = h.rowwise() - weighted / s.tau_bar;
    return s;
}

/// Base sequence and fiber data up to flow time `horizon`, started at the
/// origin of a stationary base state.
[[nodiscard]] inline SuspensionSample sample_suspension(const SuspensionSpec& spec, double horizon, RngStream& rng) {
    if (!(horizon >= 0.0)) throw std::invalid_argument("sample_suspension: horizon must be nonnegative");
    const double min_roof = 1.0 / spec.roof_bound;
    const auto guess = static_cast<std::size_t>(horizon / min_roof) + 2;
    if (guess > (std::size_t{1} << 30)) throw std::invalid_argument("sample_suspension: horizon exceeds the memory guard");
    SuspensionSample out;
    out.dim = spec.dim();
    out.profile = spec.profile;
    out.tau_bar = spec.tau_bar;
    out.jump_times.push_back(0.0);
    const std::size_t chunk = static_cast<std::size_t>(horizon / spec.tau_bar) + 16;
    std::vector<std::size_t> states;
    detail::sample_chain_states(spec.base, chunk, rng, states);
    std::size_t pos = 0;
    const auto& p = spec.base.transition;
    while (out.jump_times.back() <= horizon) {
        std::size_t s;
        if (pos < states.size()) {
            s = states[pos++];
        } else {
            // Continue the chain one step at a time past the first guess.
            const std::size_t prev = out.states.back();
            const double u = rng.uniform();
            double acc = 0.0;
            s = static_cast<std::size_t>(p.rows()) - 1;
            for (Eigen::Index j = 0; j < p.cols(); ++j) {
                acc += p(static_cast<Eigen::Index>(prev), j);
                if (u < acc) {
                    s = static_cast<std::size_t>(j);
                    break;
                }
            }
        }
        out.states.push_back(s);
        out.roofs.push_back(spec.roof[s]);
        out.jump_times.push_back(out.jump_times.back() + spec.roof[s]);
        for (std::size_t i = 0; i < out.dim; ++i) {
            out.fiber.push_back(spec.fiber(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dependence coefficients

struct MixingTable {
    std::vector<double> alpha;  ///< alpha[n-1] = alpha(n)
    std::vector<double> phi;
    std::vector<double> psi;
    bool alpha_is_bound = false;  ///< true when alpha holds psi/4 instead of the exact value
};

/// alpha, phi, psi mixing coefficients of a stationary chain for n = 1..n_max,
/// via the reduction to sigma(X_0) versus sigma(X_n).
[[nodiscard]] inline MixingTable mixing_coefficients(const ProcessSpec& spec, std::size_t n_max,
                                                     std::size_t exact_alpha_limit = 12) {
    if (!spec.is_chain()) throw std::invalid_argument("mixing_coefficients: finite-state chains only");
    const auto m = static_cast<Eigen::Index>(spec.states());
    const Eigen::VectorXd& pi = spec.stationary;
    if ((pi.array() <= 0.0).any()) throw std::invalid_argument("mixing_coefficients: stationary law has null states");
    // (P - 1 pi)^n = P^n - 1 pi for n >= 1, which avoids cancellation.
    const Eigen::MatrixXd q = spec.transition - Eigen::VectorXd::Ones(m) * pi.transpose();
    Eigen::MatrixXd dn = Eigen::MatrixXd::Identity(m, m);
    MixingTable t;
    t.alpha_is_bound = static_cast<std::size_t>(m) > exact_alpha_limit;
    for (std::size_t n = 1; n <= n_max; ++n) {
        dn = dn * q;
        double phi = 0.0, psi = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            phi = std::max(phi, 0.5 * dn.row(i).cwiseAbs().sum());
            for (Eigen::Index j = 0; j < m; ++j) psi = std::max(psi, std::abs(dn(i, j)) / pi(j));
        }
        double alpha = 0.0;
        if (t.alpha_is_bound) {
            alpha = 0.25 * psi;
        } else {
            // P(X_0 in A, X_n = j) - pi(A) pi_j = sum_{i in A} pi_i D_ij; the
            // best B collects the positive columns, which is half the l1 mass.
            const Eigen::MatrixXd weighted = pi.asDiagonal() * dn;
            const std::uint64_t subsets = std::uint64_t{1} << m;
            Eigen::RowVectorXd col(m);
            for (std::uint64_t a = 1; a + 1 < subsets; ++a) {
                col.setZero();
                for (Eigen::Index i = 0; i < m; ++i) {
                    if ((a >> i) & 1u) col += weighted.row(i);
                }
                alpha = std::max(alpha, 0.5 * col.cwiseAbs().sum());
            }
        }
        t.alpha.push_back(alpha);
        t.phi.push_back(phi);
        t.psi.push_back(psi);
    }
    return t;
}

/// Upper estimate of the approximation rate beta(a, l): how well xi(k) is
/// approximated given the sigma-algebra of indices k-l..k+l.
[[nodiscard]] inline double approximation_rate(const ProcessSpec& spec, double a, std::size_t l) {
    if (!(a >= 1.0)) throw std::invalid_argument("approximation_rate: moment order must be >= 1");
    switch (spec.kind) {
        case ProcessKind::iid:
        case ProcessKind::markov_functional:
        case ProcessKind::subshift:
            return 0.0;
        case ProcessKind::doubling_map:
        case ProcessKind::gauss_map: {
            double lipschitz = 0.0;
            switch (spec.map_observable) {
                case MapObservable::cos2pi: lipschitz = 2.0 * std::numbers::pi; break;
                case MapObservable::identity: lipschitz = 1.0; break;
                case MapObservable::indicator_half: return 0.0;  // measurable w.r.t. the first digit
            }
            const double contraction = spec.kind == ProcessKind::doubling_map ? 0.5 : 1.0 / (std::numbers::phi * std::numbers::phi);
            return lipschitz * std::pow(contraction, static_cast<double>(l));
        }
        case ProcessKind::ar1:
        case ProcessKind::ou:
            break;
    }
    throw std::invalid_argument("approximation_rate: unsupported process kind '" + to_string(spec.kind) + "'");
}

// ---------------------------------------------------------------------------
// Spec files

using AnySpec = std::variant<ProcessSpec, SuspensionSpec>;

namespace detail {

inline Eigen::MatrixXd matrix_from_list(const std::vector<double>& v, std::size_t rows, std::size_t cols,
                                        const std::string& what) {
    if (v.size() != rows * cols) {
        throw std::invalid_argument(what + ": expected " + std::to_string(rows * cols) + " numbers, got " +
                                    std::to_string(v.size()));
    }
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i * cols + j];
    }
    return m;
}

inline std::size_t square_side(std::size_t n, const std::string& what) {
    const auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (s == 0 || s * s != n) throw std::invalid_argument(what + ": entry count is not a perfect square");
    return s;
}

inline Innovation parse_innovation(const std::string& s) {
    if (s == "normal") return Innovation::normal;
    if (s == "exponential") return Innovation::exponential;
    if (s == "rademacher") return Innovation::rademacher;
    throw std::invalid_argument("unknown innovation law '" + s + "'");
}

inline MapObservable parse_observable(const std::string& s) {
    if (s == "cos") return MapObservable::cos2pi;
    if (s == "x") return MapObservable::identity;
    if (s == "indicator") return MapObservable::indicator_half;
    throw std::invalid_argument("unknown observable '" + s + "'");
}

inline Eigen::MatrixXd read_cov(const KeyValueFile& kv, std::size_t d) {
    if (kv.has("cov")) return matrix_from_list(kv.get_list("cov"), d, d, "cov");
    return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) * kv.get_double("var", 1.0);
}

}  // namespace detail

/// Builds a spec from flat key/value text. Keys: kind, d, cov | var,
/// innovation, rho, theta, dt, P, g, A, observable, roof, h, profile, roof_bound.
[[nodiscard]] inline AnySpec parse_spec(const KeyValueFile& kv) {
    kv.require_known({"kind", "d", "cov", "var", "innovation", "rho", "theta", "dt", "P", "g", "A", "observable", "roof",
                      "h", "profile", "roof_bound", "name"});
    const std::string kind = kv.get_string("kind");
    const auto d = static_cast<std::size_t>(kv.get_int("d", 1));
    if (d == 0) throw std::invalid_argument("spec: d must be positive");
    if (kind == "iid") {
        return make_iid(detail::read_cov(kv, d), detail::parse_innovation(kv.get_string("innovation", "normal")));
    }
    if (kind == "ar1") {
        return make_ar1(kv.get_double("rho"), detail::read_cov(kv, d),
                        detail::parse_innovation(kv.get_string("innovation", "normal")));
    }
    if (kind == "ou") return make_ou(kv.get_double("theta"), detail::read_cov(kv, d), kv.get_double("dt", 0.1));
    if (kind == "doubling") return make_map(ProcessKind::doubling_map, detail::parse_observable(kv.get_string("observable", "cos")));
    if (kind == "gauss") return make_map(ProcessKind::gauss_map, detail::parse_observable(kv.get_string("observable", "cos")));
    if (kind == "markov" || kind == "suspension") {
        const auto pl = kv.get_list("P");
        const std::size_t m = detail::square_side(pl.size(), "P");
        const Eigen::MatrixXd p = detail::matrix_from_list(pl, m, m, "P");
        if (kind == "markov") return make_markov(p, detail::matrix_from_list(kv.get_list("g"), m, d, "g"));
        const ProcessSpec base = make_markov(p, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), 1));
        const std::string prof = kv.get_string("profile", "constant");
        if (prof != "constant" && prof != "linear") throw std::invalid_argument("unknown fiber profile '" + prof + "'");
        return make_suspension(base, kv.get_list("roof"), detail::matrix_from_list(kv.get_list("h"), m, d, "h"),
                               prof == "linear" ? FiberProfile::linear : FiberProfile::constant,
                               kv.get_double("roof_bound", 0.0));
    }
    if (kind == "subshift") {
        const auto al = kv.get_list("A");
        const std::size_t m = detail::square_side(al.size(), "A");
        return make_subshift(detail::matrix_from_list(al, m, m, "A"), detail::matrix_from_list(kv.get_list("g"), m, d, "g"));
    }
    throw std::invalid_argument("unknown process kind '" + kind + "'");
}

[[nodiscard]] inline AnySpec load_spec(const std::string& path) { return parse_spec(KeyValueFile::load(path)); }

}  // namespace roughlab
