#include <cmath>
#include <complex>
#include <vector>

#include <gtest/gtest.h>

#include "roughlab/blocks_cf.hpp"
#include "roughlab/processes.hpp"

using namespace roughlab;

namespace {

std::vector<double> first_block_samples(const ProcessSpec& spec, const BlockScheme& s, std::size_t reps, std::uint64_t seed) {
    std::vector<double> out;
    out.reserve(reps * spec.dim);
    for (std::size_t r = 0; r < reps; ++r) {
        RngStream rng(seed, r);
        const auto v = block_sums(sample_path(spec, s.n(1), rng), s);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace

TEST(BlockScheme, Arithmetic) {
    const auto s = build_scheme(100, 1.0);
    EXPECT_EQ(s.m, 10u);
    EXPECT_EQ(s.gap(), 9u);
    EXPECT_EQ(s.k_max, 3u);
    for (std::size_t k = 1; k <= 3; ++k) {
        EXPECT_EQ(s.n(k), 30 * k);
        EXPECT_EQ(s.l(k), 30 * (k - 1) + 9);
    }
    EXPECT_EQ(s.block_length(), 21u);
    EXPECT_EQ(build_scheme(16, 1.0).block_length(), 6u);
    EXPECT_EQ(build_scheme(16, 1.0).k_max, 1u);
    EXPECT_EQ(build_scheme(99, 1.0).m, 9u);
    EXPECT_THROW((void)build_scheme(15, 1.0), std::invalid_argument);
    EXPECT_THROW((void)build_scheme(100, 0.0), std::invalid_argument);
    EXPECT_THROW((void)s.l(0), std::invalid_argument);
}

TEST(BlockScheme, BlocksAndGapsTile) {
    const auto s = build_scheme(10000, 2.0);
    std::size_t covered = 0;
    for (std::size_t k = 1; k <= s.k_max; ++k) {
        EXPECT_EQ(s.n(k) - s.l(k), s.block_length());
        covered += (s.n(k) - s.l(k)) + (s.l(k) - s.n(k - 1));
    }
    EXPECT_EQ(covered, s.n(s.k_max));
    EXPECT_LE(s.n(s.k_max), 20000u);
    EXPECT_GT(s.n(s.k_max + 1), 20000u);
}

TEST(BlockScheme, TargetBlockLengths) {
    for (auto [len, m] : {std::pair{30u, 13u}, std::pair{300u, 110u}, std::pair{3000u, 1032u}}) {
        const auto s = scheme_for_block_length(len);
        EXPECT_EQ(s.m, m);
        EXPECT_EQ(s.block_length(), len);
        EXPECT_EQ(s.k_max, 1u);
    }
    EXPECT_THROW((void)scheme_for_block_length(1), std::invalid_argument);
}

TEST(BlockSums, ZeroPathGivesZero) {
    const auto s = build_scheme(100, 1.0);
    const auto v = block_sums(PathSample(2, std::vector<double>(200, 0.0)), s);
    ASSERT_EQ(v.size(), 6u);
    for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(BlockSums, ExplicitSum) {
    const auto s = build_scheme(16, 1.0);
    std::vector<double> x(12);
    for (std::size_t i = 0; i < 12; ++i) x[i] = static_cast<double>(i);
    const auto v = block_sums(PathSample(1, x), s);
    ASSERT_EQ(v.size(), 1u);
    // Block [6, 12): 6 + ... + 11 = 51.
    EXPECT_NEAR(v[0], 51.0 / std::sqrt(6.0), 1e-12);
    EXPECT_THROW((void)block_sums(PathSample(1, std::vector<double>(11, 0.0)), s), std::invalid_argument);
}

TEST(BlockSums, IidNormalHasUnitVariance) {
    const auto spec = make_iid(Eigen::MatrixXd::Identity(1, 1));
    const auto s = build_scheme(100, 1.0);
    const std::size_t reps = 20000;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        RngStream rng(11, r);
        for (double v : block_sums(sample_path(spec, s.n(s.k_max), rng), s)) {
            s1 += v;
            s2 += v * v;
        }
    }
    const double n = static_cast<double>(reps * s.k_max);
    EXPECT_LE(std::abs(s1 / n), 4.0 / std::sqrt(n));
    EXPECT_LE(std::abs(s2 / n - 1.0), 4.0 * std::sqrt(2.0 / n));
}

TEST(BlockSums, CorrelationBoundedByPsiMixing) {
    Eigen::MatrixXd p(2, 2);
    p << 0.9, 0.1, 0.2, 0.8;
    Eigen::MatrixXd g(2, 1);
    g << 1.0, -1.0;
    const auto spec = make_markov(p, g);
    const auto s = build_scheme(100, 1.0);
    const auto mix = mixing_coefficients(spec, s.gap() + 1);
    const double psi = mix.psi[s.gap() - 1];
    const std::size_t reps = 20000;
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        RngStream rng(12, r);
        const auto v = block_sums(sample_path(spec, s.n(s.k_max), rng), s);
        sx += v[0];
        sy += v[1];
        sxx += v[0] * v[0];
        syy += v[1] * v[1];
        sxy += v[0] * v[1];
    }
    const double n = static_cast<double>(reps);
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double corr = cov / std::sqrt((sxx / n - sx * sx / (n * n)) * (syy / n - sy * sy / (n * n)));
    EXPECT_LE(std::abs(corr), psi + 4.0 / std::sqrt(n));
}

TEST(DefaultWgrid, Layout) {
    const auto g1 = default_wgrid(1, 300);
    ASSERT_EQ(g1.size(), 11u);
    EXPECT_EQ(g1[0].norm(), 0.0);
    const double rmax = std::pow(300.0, 1.0 / 40.0);
    EXPECT_NEAR(g1[5](0), rmax, 1e-14);
    EXPECT_NEAR(g1[10](0), -rmax, 1e-14);
    EXPECT_NEAR(g1[1](0), rmax / 5.0, 1e-14);
    const auto g2 = default_wgrid(3, 300);
    ASSERT_EQ(g2.size(), 41u);
    for (const auto& w : g2) EXPECT_EQ(w(2), 0.0);
}

TEST(CharFn, BasicProperties) {
    const auto spec = make_iid(Eigen::MatrixXd::Identity(2, 2));
    const auto s = scheme_for_block_length(30);
    const auto samples = first_block_samples(spec, s, 2000, 13);
    const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
    const auto grid = default_wgrid(2, 30);
    const auto t = charfn_gap(samples, 2, sigma, grid);
    ASSERT_EQ(t.rows.size(), grid.size());
    EXPECT_EQ(t.rows[0].gap, 0.0);
    EXPECT_EQ(t.rows[0].empirical, std::complex<double>(1.0, 0.0));
    for (const auto& row : t.rows) EXPECT_LE(std::abs(row.empirical), 1.0 + 1e-12);
    // Opposite directions a and a+4 give conjugate values.
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t j = 0; j < 5; ++j) {
            const auto& x = t.rows[1 + a * 5 + j].empirical;
            const auto& y = t.rows[1 + (a + 4) * 5 + j].empirical;
            EXPECT_NEAR(std::abs(x - std::conj(y)), 0.0, 1e-12);
        }
    }
    EXPECT_THROW((void)charfn_gap(samples, 3, sigma, grid), std::invalid_argument);
}

TEST(CharFn, IidNormalGapWithinNoise) {
    const auto spec = make_iid(Eigen::MatrixXd::Identity(1, 1));
    const auto s = scheme_for_block_length(300);
    const auto samples = first_block_samples(spec, s, 5000, 14);
    const auto t = charfn_gap(samples, 1, Eigen::MatrixXd::Identity(1, 1), default_wgrid(1, 300));
    for (const auto& row : t.rows) EXPECT_LE(row.gap, 4.0 * row.se + 1e-15) << "w=" << row.w(0);
}
