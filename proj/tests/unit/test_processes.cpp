#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "roughlab/keyvalue.hpp"
#include "roughlab/limit_objects.hpp"
#include "roughlab/processes.hpp"

using namespace roughlab;

namespace {

Eigen::MatrixXd two_state_p() {
    Eigen::MatrixXd p(2, 2);
    p << 0.9, 0.1, 0.2, 0.8;
    return p;
}

Eigen::MatrixXd col(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

Eigen::MatrixXd eye(Eigen::Index d) { return Eigen::MatrixXd::Identity(d, d); }

std::vector<double> coordinate(const PathSample& p, std::size_t i) {
    std::vector<double> out(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = p(k, i);
    return out;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Two-sample KS statistic computed from pooled sorted values.
double ks(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    double best = 0.0;
    for (double v : pooled) {
        const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), v) - a.begin()) / static_cast<double>(a.size());
        const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), v) - b.begin()) / static_cast<double>(b.size());
        best = std::max(best, std::abs(fa - fb));
    }
    return best;
}

// (P^n) by repeated multiplication, independent of the library's centered powers.
Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& p, std::size_t n) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(p.rows(), p.cols());
    for (std::size_t k = 0; k < n; ++k) out = out * p;
    return out;
}

std::vector<ProcessSpec> all_discrete_specs() {
    Eigen::MatrixXd a(2, 2);
    a << 1, 1, 1, 0;
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, 0.3, 0.3, 0.5;
    return {make_iid(cov),
            make_ar1(0.5, eye(1)),
            make_ar1(0.5, eye(1), Innovation::exponential),
            make_markov(two_state_p(), col({1.0, -1.0})),
            make_subshift(a, col({1.0, 0.0})),
            make_map(ProcessKind::doubling_map, MapObservable::cos2pi),
            make_map(ProcessKind::gauss_map, MapObservable::identity)};
}

}  // namespace

TEST(SamplePath, IidMeanIsCentered) {
    RngStream rng(1, 0);
    const auto p = sample_path(make_iid(eye(2)), 1000000, rng);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto c = coordinate(p, i);
        EXPECT_LT(std::abs(mean(c)), 4.0 * stddev(c) / 1000.0);
    }
}

TEST(SamplePath, ExponentialInnovationsAreCentered) {
    RngStream rng(2, 0);
    const auto p = sample_path(make_iid(eye(1), Innovation::exponential), 1000000, rng);
    const auto c = coordinate(p, 0);
    EXPECT_LT(std::abs(mean(c)), 4.0 * stddev(c) / 1000.0);
    EXPECT_NEAR(stddev(c), 1.0, 0.01);
}

TEST(SamplePath, DoublingMapCosineMean) {
    RngStream rng(3, 0);
    const auto p = sample_path(make_map(ProcessKind::doubling_map, MapObservable::cos2pi), 1000000, rng);
    const auto c = coordinate(p, 0);
    EXPECT_LT(std::abs(mean(c)), 4.0 * stddev(c) / 1000.0);
    // Lebesgue invariance: E cos^2(2 pi x) = 1/2.
    EXPECT_NEAR(stddev(c) * stddev(c), 0.5, 0.005);
}

TEST(SamplePath, DoublingMapStaysUniform) {
    RngStream rng(4, 0);
    const auto p = sample_path(make_map(ProcessKind::doubling_map, MapObservable::identity), 200000, rng);
    std::vector<double> late;
    for (std::size_t k = 100000; k < p.size(); k += 10) late.push_back(p(k, 0) + 0.5);
    std::sort(late.begin(), late.end());
    double d = 0.0;
    for (std::size_t i = 0; i < late.size(); ++i) {
        const double f = static_cast<double>(i + 1) / static_cast<double>(late.size());
        d = std::max(d, std::max(std::abs(f - late[i]), std::abs(f - 1.0 / static_cast<double>(late.size()) - late[i])));
    }
    EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(late.size())));
}

TEST(SamplePath, GaussMapFollowsGaussMeasure) {
    RngStream rng(5, 0);
    const auto spec = make_map(ProcessKind::gauss_map, MapObservable::identity);
    const auto p = sample_path(spec, 200000, rng);
    std::vector<double> xs;
    for (std::size_t k = 0; k < p.size(); k += 10) xs.push_back(p(k, 0) + spec.observable_mean);
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    const auto n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = std::log2(1.0 + xs[i]);
        d = std::max(d, std::max(std::abs(static_cast<double>(i + 1) / n - cdf), std::abs(static_cast<double>(i) / n - cdf)));
    }
    EXPECT_LT(d, 1.63 / std::sqrt(n));
}

TEST(SamplePath, GaussMapCosineMeanMatchesQuadrature) {
    const std::size_t q = 1000000;
    double acc = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
        const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(q);
        acc += std::cos(2.0 * std::numbers::pi * x) / ((1.0 + x) * std::numbers::ln2);
    }
    acc /= static_cast<double>(q);
    EXPECT_NEAR(map_observable_mean(ProcessKind::gauss_map, MapObservable::cos2pi), acc, 1e-10);
    EXPECT_NEAR(map_observable_mean(ProcessKind::gauss_map, MapObservable::identity), 1.0 / std::numbers::ln2 - 1.0, 1e-15);
}

TEST(SamplePath, ChainStateFrequencies) {
    const auto spec = make_markov(two_state_p(), col({1.0, 0.0}));
    EXPECT_NEAR(spec.stationary(0), 2.0 / 3.0, 1e-14);
    RngStream rng(6, 0);
    const std::size_t n = 1000000;
    const auto p = sample_path(spec, n, rng);
    // observable is 1{state 0} - 2/3.
    const double freq0 = mean(coordinate(p, 0)) + 2.0 / 3.0;
    // Long-run variance of an indicator of a two-state chain: pi0 pi1 (1+l)/(1-l), l = 0.7.
    const double se = std::sqrt((2.0 / 9.0) * (1.7 / 0.3) / static_cast<double>(n));
    EXPECT_LT(std::abs(freq0 - 2.0 / 3.0), 4.0 * se);
}

TEST(SamplePath, ObservableCentered) {
    Eigen::MatrixXd p(3, 3);
    p << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.4, 0.4, 0.2;
    Eigen::MatrixXd g(3, 2);
    g << 1.0, 5.0, -2.0, 0.5, 3.0, 3.0;
    const auto spec = make_markov(p, g);
    const Eigen::RowVectorXd m = spec.stationary.transpose() * spec.observable;
    EXPECT_LE(m.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((spec.stationary.transpose() * p - spec.stationary.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SamplePath, Reproducible) {
    for (const auto& spec : all_discrete_specs()) {
        RngStream a(42, 7), b(42, 7), c(42, 8);
        const auto pa = sample_path(spec, 500, a);
        const auto pb = sample_path(spec, 500, b);
        const auto pc = sample_path(spec, 500, c);
        EXPECT_TRUE(std::equal(pa.values().begin(), pa.values().end(), pb.values().begin())) << to_string(spec.kind);
        EXPECT_FALSE(std::equal(pa.values().begin(), pa.values().end(), pc.values().begin())) << to_string(spec.kind);
    }
}

TEST(SamplePath, Stationarity) {
    // Law of (xi(k), xi(k+1)) along one long path versus (xi(0), xi(1)) over
    // independent replicas, through the coordinate and the lag-one product.
    auto specs = all_discrete_specs();
    specs.push_back(make_ou(1.0, eye(1), 0.1));
    std::uint64_t seed = 100;
    for (const auto& spec : specs) {
        const std::size_t pts = 10000, spacing = 50;
        RngStream long_rng(seed, 0);
        const auto path = sample_path(spec, pts * spacing + 2, long_rng);
        std::vector<double> a0, a1, b0, b1;
        for (std::size_t q = 0; q < pts; ++q) {
            const std::size_t k = q * spacing + 1;
            a0.push_back(path(k, 0));
            a1.push_back(path(k, 0) * path(k + 1, 0));
            RngStream r(seed, q + 1);
            const auto head = sample_path(spec, 2, r);
            b0.push_back(head(0, 0));
            b1.push_back(head(0, 0) * head(1, 0));
        }
        const double crit = 1.63 * std::sqrt(2.0 / static_cast<double>(pts));
        EXPECT_LT(ks(a0, b0), crit) << to_string(spec.kind);
        EXPECT_LT(ks(a1, b1), crit) << to_string(spec.kind);
        ++seed;
    }
}

TEST(SamplePath, CenteringAtLongRunScale) {
    // |mean| <= 5 sqrt(long-run variance) / 10^3 over 10^6 draws; for
    // uncorrelated sequences this is the sample standard deviation.
    auto specs = all_discrete_specs();
    std::uint64_t seed = 200;
    for (const auto& spec : specs) {
        RngStream rng(seed++, 0);
        const auto p = sample_path(spec, 1000000, rng);
        const auto c = coordinate(p, 0);
        double scale = stddev(c);
        if (const auto lm = exact_limit_model(spec)) scale = std::sqrt(lm->sigma(0, 0));
        if (spec.kind == ProcessKind::gauss_map) scale = 2.0 * scale;
        EXPECT_LE(std::abs(mean(c)), 5.0 * scale / 1000.0) << to_string(spec.kind);
    }
}

TEST(SamplePath, NonErgodicChainRejected) {
    Eigen::MatrixXd periodic(2, 2);
    periodic << 0, 1, 1, 0;
    EXPECT_THROW((void)make_markov(periodic, col({1, -1})), std::invalid_argument);
    Eigen::MatrixXd reducible(2, 2);
    reducible << 1, 0, 0.5, 0.5;
    EXPECT_THROW((void)make_markov(reducible, col({1, -1})), std::invalid_argument);
    Eigen::MatrixXd bad(2, 2);
    bad << 0.5, 0.6, 0.5, 0.5;
    EXPECT_THROW((void)make_markov(bad, col({1, -1})), std::invalid_argument);
}

TEST(Subshift, GoldenMeanParryMeasure) {
    Eigen::MatrixXd a(2, 2);
    a << 1, 1, 1, 0;
    const auto spec = make_subshift(a, col({1.0, 0.0}));
    const double phi = std::numbers::phi;
    EXPECT_NEAR(spec.stationary(0), phi * phi / (1.0 + phi * phi), 1e-12);
    EXPECT_NEAR(spec.transition(0, 0), 1.0 / phi, 1e-12);
    EXPECT_EQ(spec.transition(1, 1), 0.0);
    EXPECT_NEAR(spec.transition(1, 0), 1.0, 1e-15);
}

TEST(Suspension, UnitRoofCountsFloor) {
    const auto base = make_markov(two_state_p(), col({0.0, 0.0}));
    const auto spec = make_suspension(base, {1.0, 1.0}, col({1.0, -2.0}), FiberProfile::constant);
    RngStream rng(7, 0);
    const auto s = sample_suspension(spec, 200.0, rng);
    for (double t : {0.0, 0.5, 1.0, 17.3, 199.99}) EXPECT_EQ(s.counting(t), static_cast<std::size_t>(std::floor(t)));
}

TEST(Suspension, CenteredAndRoofBounded) {
    const auto base = make_markov(two_state_p(), col({0.0, 0.0}));
    Eigen::MatrixXd h(2, 2);
    h << 1.0, 0.5, -1.0, 2.0;
    const auto spec = make_suspension(base, {0.5, 1.5}, h, FiberProfile::linear);
    EXPECT_DOUBLE_EQ(spec.roof_bound, 2.0);
    EXPECT_NEAR(spec.tau_bar, 2.0 / 3.0 * 0.5 + 1.0 / 3.0 * 1.5, 1e-15);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
    for (std::size_t s = 0; s < 2; ++s) e += spec.base.stationary(static_cast<Eigen::Index>(s)) * spec.eta(s);
    EXPECT_LE(e.cwiseAbs().maxCoeff(), 1e-12);
    RngStream rng(8, 0);
    const auto sample = sample_suspension(spec, 5000.0, rng);
    for (double t : sample.roofs) {
        EXPECT_GE(t, 1.0 / spec.roof_bound);
        EXPECT_LE(t, spec.roof_bound);
    }
    for (std::size_t k = 1; k < sample.jump_times.size(); ++k) {
        EXPECT_EQ(sample.counting(sample.jump_times[k]), k);
        EXPECT_EQ(sample.counting(0.5 * (sample.jump_times[k - 1] + sample.jump_times[k])), k - 1);
    }
    EXPECT_THROW((void)make_suspension(base, {0.5, 1.5}, h, FiberProfile::constant, 1.5), std::invalid_argument);
}

TEST(Suspension, RenewalRate) {
    Eigen::MatrixXd half(2, 2);
    half << 0.5, 0.5, 0.5, 0.5;
    const auto base = make_markov(half, col({0.0, 0.0}));
    const auto spec = make_suspension(base, {0.5, 1.5}, col({1.0, -1.0}), FiberProfile::constant);
    EXPECT_DOUBLE_EQ(spec.tau_bar, 1.0);
    RngStream rng(9, 0);
    const double s = 1e4;
    const auto sample = sample_suspension(spec, s * spec.tau_bar + 10.0, rng);
    EXPECT_LT(std::abs(static_cast<double>(sample.counting(s * spec.tau_bar)) / s - 1.0), 0.05);
}

TEST(Mixing, IidChainIsZero) {
    Eigen::MatrixXd p(3, 3);
    p << 0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3;
    const auto t = mixing_coefficients(make_markov(p, col({1, 2, 3})), 10);
    for (std::size_t n = 0; n < 10; ++n) {
        EXPECT_EQ(t.alpha[n], 0.0);
        EXPECT_EQ(t.phi[n], 0.0);
        EXPECT_EQ(t.psi[n], 0.0);
    }
}

TEST(Mixing, TwoStatePsiRatio) {
    const auto t = mixing_coefficients(make_markov(two_state_p(), col({1, -1})), 40);
    for (std::size_t n = 1; n < 40; ++n) {
        EXPECT_NEAR(t.psi[n] / t.psi[n - 1], 0.7, 1e-9);
        EXPECT_LE(t.alpha[n], t.alpha[n - 1]);
        EXPECT_LE(t.phi[n], t.phi[n - 1]);
        EXPECT_LE(t.psi[n], t.psi[n - 1]);
    }
    EXPECT_NEAR(second_eigenvalue_modulus(two_state_p()), 0.7, 1e-12);
}

TEST(Mixing, MatchesSubsetEnumeration) {
    Eigen::MatrixXd p(3, 3);
    p << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.4, 0.4, 0.2;
    const auto spec = make_markov(p, col({1, 2, 3}));
    const auto t = mixing_coefficients(spec, 6);
    const Eigen::VectorXd& pi = spec.stationary;
    for (std::size_t n = 1; n <= 6; ++n) {
        const Eigen::MatrixXd pn = matrix_power(p, n);
        double alpha = 0.0, phi = 0.0, psi = 0.0;
        for (unsigned a = 1; a < 8; ++a) {
            for (unsigned b = 1; b < 8; ++b) {
                double pa = 0.0, pb = 0.0, pab = 0.0;
                for (int i = 0; i < 3; ++i) {
                    if ((a >> i) & 1u) pa += pi(i);
                    if ((b >> i) & 1u) pb += pi(i);
                    for (int j = 0; j < 3; ++j) {
                        if (((a >> i) & 1u) && ((b >> j) & 1u)) pab += pi(i) * pn(i, j);
                    }
                }
                alpha = std::max(alpha, std::abs(pab - pa * pb));
                phi = std::max(phi, std::abs(pab / pa - pb));
                psi = std::max(psi, std::abs(pab - pa * pb) / (pa * pb));
            }
        }
        EXPECT_NEAR(t.alpha[n - 1], alpha, 1e-14);
        EXPECT_NEAR(t.phi[n - 1], phi, 1e-14);
        EXPECT_NEAR(t.psi[n - 1], psi, 1e-13);
    }
}

TEST(Mixing, LargeChainsReportBound) {
    const Eigen::Index m = 13;
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(m, m, 0.5 / static_cast<double>(m));
    for (Eigen::Index i = 0; i < m; ++i) p(i, (i + 1) % m) += 0.5;
    const auto t = mixing_coefficients(make_markov(p, Eigen::MatrixXd::Random(m, 1)), 5);
    EXPECT_TRUE(t.alpha_is_bound);
    for (std::size_t n = 0; n < 5; ++n) EXPECT_DOUBLE_EQ(t.alpha[n], 0.25 * t.psi[n]);
    EXPECT_THROW((void)mixing_coefficients(make_iid(eye(1)), 3), std::invalid_argument);
}

TEST(ApproximationRate, Values) {
    const auto chain = make_markov(two_state_p(), col({1, -1}));
    const auto dbl = make_map(ProcessKind::doubling_map, MapObservable::identity);
    const auto gss = make_map(ProcessKind::gauss_map, MapObservable::cos2pi);
    double prev_d = 1e300, prev_g = 1e300;
    for (std::size_t l = 1; l <= 20; ++l) {
        EXPECT_EQ(approximation_rate(chain, 2.0, l), 0.0);
        const double bd = approximation_rate(dbl, 2.0, l);
        EXPECT_DOUBLE_EQ(bd, std::ldexp(1.0, -static_cast<int>(l)));
        EXPECT_LE(bd, prev_d);
        const double bg = approximation_rate(gss, 2.0, l);
        EXPECT_LE(bg, prev_g);
        prev_d = bd;
        prev_g = bg;
    }
    EXPECT_THROW((void)approximation_rate(make_ar1(0.5, eye(1)), 2.0, 1), std::invalid_argument);
}

TEST(SpecFile, ParsesEveryKind) {
    const auto iid = parse_spec(KeyValueFile::parse("kind = iid\nd = 2\ncov = 1, 0.2, 0.2, 1\n"));
    EXPECT_EQ(std::get<ProcessSpec>(iid).dim, 2u);
    const auto ar = std::get<ProcessSpec>(parse_spec(KeyValueFile::parse("kind = ar1\nrho = 0.5\ninnovation = exponential\n")));
    EXPECT_EQ(ar.kind, ProcessKind::ar1);
    EXPECT_EQ(ar.innovation, Innovation::exponential);
    const auto mk = std::get<ProcessSpec>(parse_spec(KeyValueFile::parse("kind = markov\nP = [0.9, 0.1; 0.2, 0.8]\ng = 1, -1\n")));
    EXPECT_EQ(mk.states(), 2u);
    const auto db = std::get<ProcessSpec>(parse_spec(KeyValueFile::parse("kind = doubling\nobservable = x\n")));
    EXPECT_EQ(db.map_observable, MapObservable::identity);
    const auto ou = std::get<ProcessSpec>(parse_spec(KeyValueFile::parse("kind = ou\ntheta = 2\ndt = 0.05\n")));
    EXPECT_TRUE(ou.is_continuous());
    const auto su = parse_spec(KeyValueFile::parse("kind = suspension\nP = 0.5,0.5,0.5,0.5\nroof = 0.5, 1.5\nh = 1, -1\nprofile = linear\n"));
    EXPECT_EQ(std::get<SuspensionSpec>(su).profile, FiberProfile::linear);
    const auto sh = std::get<ProcessSpec>(parse_spec(KeyValueFile::parse("kind = subshift\nA = 1,1,1,0\ng = 1, 0\n")));
    EXPECT_EQ(sh.kind, ProcessKind::subshift);
    EXPECT_THROW((void)parse_spec(KeyValueFile::parse("kind = nonsense\n")), std::invalid_argument);
    EXPECT_THROW((void)parse_spec(KeyValueFile::parse("kind = iid\nbogus = 1\n")), std::invalid_argument);
    EXPECT_THROW((void)parse_spec(KeyValueFile::parse("kind = markov\nP = 0,1,1,0\ng = 1,-1\n")), std::invalid_argument);
}
