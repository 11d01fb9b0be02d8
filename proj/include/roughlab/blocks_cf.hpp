#pragma once

// Block/gap decomposition of [0, NT] and characteristic-function checks of
// the normalized block sums against the Gaussian limit.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "roughlab/path.hpp"

namespace roughlab {

/// m = [sqrt N], n_k = 3 k m, l_k = n_{k-1} + 3 [sqrt m]; blocks [l_k, n_k)
/// for k = 1..k_max are separated by gaps [n_{k-1}, l_k).
struct BlockScheme {
    std::size_t n_scale = 0;
    double horizon = 1.0;
    std::size_t m = 0;
    std::size_t k_max = 0;

    [[nodiscard]] std::size_t gap() const { return 3 * static_cast<std::size_t>(std::sqrt(static_cast<double>(m))); }
    [[nodiscard]] std::size_t n(std::size_t k) const { return 3 * k * m; }
    [[nodiscard]] std::size_t l(std::size_t k) const {
        if (k == 0) throw std::invalid_argument("BlockScheme: l_k is defined for k >= 1");
        return n(k - 1) + gap();
    }
    [[nodiscard]] std::size_t block_length() const { return 3 * m - gap(); }
};

namespace detail {
inline std::size_t isqrt(std::size_t n) {
    auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}
}  // namespace detail

[[nodiscard]] inline BlockScheme build_scheme(std::size_t n_scale, double horizon) {
    if (n_scale < 16) throw std::invalid_argument("build_scheme: N must be at least 16");
    if (!(horizon > 0.0)) throw std::invalid_argument("build_scheme: T must be positive");
    BlockScheme s;
    s.n_scale = n_scale;
    s.horizon = horizon;
    s.m = detail::isqrt(n_scale);
    const double total = static_cast<double>(n_scale) * horizon;
    s.k_max = static_cast<std::size_t>(std::floor(total / static_cast<double>(3 * s.m) + 1e-12));
    return s;
}

/// Scheme with N = m^2 and T = 3/m (exactly one block) whose block length
/// 3(m - [sqrt m]) equals `length`.
[[nodiscard]] inline BlockScheme scheme_for_block_length(std::size_t length) {
    for (std::size_t m = 4; 3 * m <= 4 * length + 12; ++m) {
        if (3 * (m - detail::isqrt(m)) == length) return build_scheme(m * m, 3.0 / static_cast<double>(m));
    }
    throw std::invalid_argument("scheme_for_block_length: no m gives block length " + std::to_string(length));
}

/// V_k = (n_k - l_k)^{-1/2} sum_{l_k <= j < n_k} xi(j), k = 1..k_max, as a
/// k_max x d row-major array.
[[nodiscard]] inline std::vector<double> block_sums(const PathSample& path, const BlockScheme& s) {
    if (path.kind() != PathKind::discrete) throw std::invalid_argument("block_sums: path must be discrete");
    if (s.k_max == 0) return {};
    if (path.size() < s.n(s.k_max)) throw std::invalid_argument("block_sums: path too short for the scheme");
    const std::size_t d = path.dim();
    std::vector<double> out(s.k_max * d, 0.0);
    const double norm = 1.0 / std::sqrt(static_cast<double>(s.block_length()));
    for (std::size_t k = 1; k <= s.k_max; ++k) {
        for (std::size_t j = s.l(k); j < s.n(k); ++j) {
            for (std::size_t i = 0; i < d; ++i) out[(k - 1) * d + i] += path(j, i);
        }
        for (std::size_t i = 0; i < d; ++i) out[(k - 1) * d + i] *= norm;
    }
    return out;
}

/// Frequencies: w = 0, then 8 directions (the two signs for d = 1) times radii
/// r_j = (j/5) n^{wp/2}, j = 1..5, with wp = 1/20. Directions beyond d = 1 lie in
/// the plane of the first two coordinates.
[[nodiscard]] inline std::vector<Eigen::VectorXd> default_wgrid(std::size_t d, std::size_t block_length,
                                                                double wp = 1.0 / 20.0) {
    const double rmax = std::pow(static_cast<double>(block_length), wp / 2.0);
    std::vector<Eigen::VectorXd> dirs;
    if (d == 1) {
        dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
        dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    } else {
        for (int a = 0; a < 8; ++a) {
            Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
            u(0) = std::cos(a * std::numbers::pi / 4.0);
            u(1) = std::sin(a * std::numbers::pi / 4.0);
            dirs.push_back(u);
        }
    }
    std::vector<Eigen::VectorXd> grid{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))};
    for (const auto& u : dirs) {
        for (int j = 1; j <= 5; ++j) grid.push_back(u * (rmax * j / 5.0));
    }
    return grid;
}

struct CharFnRow {
    Eigen::VectorXd w;
    std::complex<double> empirical;
    double gaussian = 1.0;
    double gap = 0.0;
    double se = 0.0;  ///< Monte Carlo standard error of the empirical value
};

struct CharFnTable {
    std::vector<CharFnRow> rows;
    double max_gap = 0.0;
};

/// f(w) = mean of exp(i <w, V>) over samples (R x d row-major) against
/// g(w) = exp(-<sigma w, w>/2).
[[nodiscard]] inline CharFnTable charfn_gap(const std::vector<double>& samples, std::size_t d, const Eigen::MatrixXd& sigma,
                                            const std::vector<Eigen::VectorXd>& wgrid) {
    if (d == 0 || samples.empty() || samples.size() % d != 0) throw std::invalid_argument("charfn_gap: bad sample array");
    const std::size_t r = samples.size() / d;
    CharFnTable t;
    for (const auto& w : wgrid) {
        if (static_cast<std::size_t>(w.size()) != d) throw std::invalid_argument("charfn_gap: frequency dimension mismatch");
        double sc = 0.0, ss = 0.0, sc2 = 0.0, ss2 = 0.0;
        for (std::size_t k = 0; k < r; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += w(static_cast<Eigen::Index>(i)) * samples[k * d + i];
            const double c = std::cos(dot), s = std::sin(dot);
            sc += c;
            ss += s;
            sc2 += c * c;
            ss2 += s * s;
        }
        const auto rr = static_cast<double>(r);
        CharFnRow row;
        row.w = w;
        row.empirical = {sc / rr, ss / rr};
        row.gaussian = std::exp(-0.5 * w.dot(sigma * w));
        row.gap = std::abs(row.empirical - row.gaussian);
        const double vc = std::max(0.0, sc2 / rr - (sc / rr) * (sc / rr));
        const double vs = std::max(0.0, ss2 / rr - (ss / rr) * (ss / rr));
        row.se = std::sqrt((vc + vs) / rr);
        t.max_gap = std::max(t.max_gap, row.gap);
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace roughlab
