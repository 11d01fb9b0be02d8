#pragma once

// Sampled trajectories of a suspension flow: the base sequence, its roof
// values, the jump times sigma_k = tau_0 + ... + tau_{k-1}, and the fiber
// observable between jumps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "roughlab/path.hpp"
#include "roughlab/signature.hpp"

namespace roughlab {

/// Shape of the fiber observable on [0, tau): constant h, or linear 2hr/tau.
/// Both integrate to h tau over a full fiber.
enum class FiberProfile { constant, linear };

struct SuspensionSample {
    std::size_t dim = 1;
    std::vector<std::size_t> states;
    std::vector<double> roofs;
    std::vector<double> jump_times;  ///< size n+1, jump_times[0] = 0
    std::vector<double> fiber;       ///< n x d, the h vector of each visited fiber
    FiberProfile profile = FiberProfile::constant;
    double tau_bar = 1.0;

    [[nodiscard]] std::size_t segments() const noexcept { return roofs.size(); }
    [[nodiscard]] double horizon() const noexcept { return jump_times.empty() ? 0.0 : jump_times.back(); }

    /// n(s) = max{k : sigma_k <= s}.
    [[nodiscard]] std::size_t counting(double s) const {
        if (s < 0.0) throw std::invalid_argument("counting: s must be nonnegative");
        const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), s);
        return static_cast<std::size_t>(it - jump_times.begin()) - 1;
    }

    /// Integral of coordinate i over local fiber times [a, b] of segment k.
    [[nodiscard]] double fiber_integral(std::size_t k, std::size_t i, double a, double b) const {
        const double h = fiber[k * dim + i];
        if (profile == FiberProfile::constant) return h * (b - a);
        return h * (b * b - a * a) / roofs[k];
    }

    /// Integral of xi_i over the flow-time window [u0, u1].
    [[nodiscard]] double integral(std::size_t i, double u0, double u1) const {
        if (u1 > horizon() * (1.0 + 1e-12)) throw std::invalid_argument("integral: window past horizon");
        double acc = 0.0;
        std::size_t k = counting(u0);
        for (; k < segments() && jump_times[k] < u1; ++k) {
            const double a = std::max(u0, jump_times[k]) - jump_times[k];
            const double b = std::min(u1, jump_times[k + 1]) - jump_times[k];
            if (b > a) acc += fiber_integral(k, i, a, b);
        }
        return acc;
    }

    /// Cell averages of xi on a uniform grid of step dt covering [0, horizon].
    [[nodiscard]] PathSample to_grid(double dt, double horizon_limit) const {
        if (!(dt > 0.0)) throw std::invalid_argument("to_grid: dt must be positive");
        const double hz = std::min(horizon_limit, horizon());
        const auto cells = static_cast<std::size_t>(std::ceil(hz / dt - 1e-9));
        std::vector<double> values(cells * dim, 0.0);
        std::size_t k = 0;
        for (std::size_t c = 0; c < cells; ++c) {
            const double lo = static_cast<double>(c) * dt;
            const double hi = lo + dt;
            while (k < segments() && jump_times[k + 1] <= lo) ++k;
            for (std::size_t q = k; q < segments() && jump_times[q] < hi; ++q) {
                const double a = std::max(lo, jump_times[q]) - jump_times[q];
                const double b = std::min(hi, jump_times[q + 1]) - jump_times[q];
                if (b <= a) continue;
                for (std::size_t i = 0; i < dim; ++i) values[c * dim + i] += fiber_integral(q, i, a, b) / dt;
            }
        }
        return {dim, std::move(values), PathKind::continuous_grid, dt, 1.0};
    }
};

/// S_N(s,t) of a suspension: iterated integrals over [s N tau_bar, t N tau_bar]
/// on a grid of step dt, level nu scaled by N^(-nu/2).
[[nodiscard]] inline SignatureIncrement suspension_signature(const SuspensionSample& sample, double s, double t,
                                                             std::size_t depth, double n_scale, double dt) {
    if (s < 0.0 || t < s) throw std::invalid_argument("suspension_signature: need 0 <= s <= t");
    const double u0 = s * n_scale * sample.tau_bar;
    const double u1 = t * n_scale * sample.tau_bar;
    if (u1 > sample.horizon() * (1.0 + 1e-12)) {
        throw std::invalid_argument("suspension_signature: window extends past the sampled horizon");
    }
    const PathSample grid = sample.to_grid(dt, u1 + dt);
    auto tensor = window_signature(grid, u0, u1, depth);
    tensor.dilate(1.0 / std::sqrt(n_scale));
    return {s, t, std::move(tensor)};
}

}  // namespace roughlab
