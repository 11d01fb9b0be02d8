#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "roughlab/experiments.hpp"

using namespace roughlab;

namespace {

ExperimentConfig small_config(const AnySpec& spec) {
    ExperimentConfig c;
    c.spec = spec;
    c.n_values = {16, 32, 64};
    c.replicas = 100;
    c.bootstrap = 20;
    c.limit_steps = 64;
    c.eval_points = 9;
    c.depth = 2;
    c.functionals = {"terminal:1", "terminal:12", "sup:2", "pvar:1"};
    c.metrics = {"w1", "ks", "prokhorov"};
    c.seed = 7;
    return c;
}

ProcessSpec two_state_chain() {
    Eigen::MatrixXd p(2, 2);
    p << 0.9, 0.1, 0.2, 0.8;
    Eigen::MatrixXd g(2, 2);
    g << 1.0, 0.5, -1.0, 0.0;
    return make_markov(p, g);
}

}  // namespace

TEST(FitDecay, ExactPowerLaw) {
    std::vector<DecayPoint> pts;
    for (double n : {64.0, 256.0, 1024.0, 4096.0}) pts.push_back({n, 3.0 * std::pow(n, -0.5), 0.01 * std::pow(n, -0.5)});
    const auto fit = fit_decay(pts);
    EXPECT_NEAR(fit.slope, -0.5, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
    EXPECT_TRUE(fit.weighted);
    EXPECT_EQ(fit.used, 4u);
}

TEST(FitDecay, ConstantDistances) {
    std::vector<DecayPoint> pts;
    for (double n : {10.0, 100.0, 1000.0}) pts.push_back({n, 0.2, 0.01});
    const auto fit = fit_decay(pts);
    EXPECT_NEAR(fit.slope, 0.0, 1e-12);
    EXPECT_GT(fit.slope_se, 0.0);
}

TEST(FitDecay, NoisyPowerLaw) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    int within = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<DecayPoint> pts;
        for (double n : {100.0, 300.0, 1000.0, 3000.0, 10000.0}) {
            const double d = 2.0 * std::pow(n, -0.3);
            pts.push_back({n, d * (1.0 + 0.05 * nd(gen)), 0.05 * d});
        }
        const auto fit = fit_decay(pts);
        if (std::abs(fit.slope + 0.3) <= 3.0 * fit.slope_se) ++within;
    }
    // Coverage of a 3 se interval is 99.7%.
    EXPECT_GE(within, trials - 5);
}

TEST(FitDecay, DropsNonpositiveAndRejectsTooFew) {
    std::vector<DecayPoint> pts{{10.0, 0.1, 0.01}, {100.0, 0.0, 0.01}, {1000.0, 0.001, 0.0001}, {10000.0, 0.0001, 0.00001}};
    const auto fit = fit_decay(pts);
    EXPECT_EQ(fit.dropped, 1u);
    EXPECT_EQ(fit.used, 3u);
    EXPECT_NEAR(fit.slope, -1.0, 1e-12);
    pts[0].distance = -1.0;
    EXPECT_THROW((void)fit_decay(pts), std::invalid_argument);
    EXPECT_THROW((void)fit_decay({{10.0, 1.0, 0.1}, {10.0, 2.0, 0.1}, {10.0, 3.0, 0.1}}), std::invalid_argument);
}

TEST(FitDecay, UnweightedWhenSeMissing) {
    const auto fit = fit_decay({{10.0, 1.0, 0.0}, {100.0, 0.5, 0.0}, {1000.0, 0.26, 0.0}});
    EXPECT_FALSE(fit.weighted);
    EXPECT_LT(fit.slope, 0.0);
    EXPECT_GT(fit.slope_se, 0.0);
}

TEST(Functionals, ParseIds) {
    const auto t = parse_functional("terminal:12");
    EXPECT_EQ(t.kind, FunctionalKind::terminal);
    EXPECT_EQ(t.level, 2u);
    EXPECT_EQ(t.word, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(parse_functional("sup:3").level, 3u);
    EXPECT_EQ(parse_functional("pvar:1").kind, FunctionalKind::pvar);
    for (const char* bad : {"terminal", "terminal:", "terminal:0", "sup:12", "area:1", "pvar:x"}) {
        EXPECT_THROW((void)parse_functional(bad), std::invalid_argument) << bad;
    }
    EXPECT_THROW((void)parse_metric("l2"), std::invalid_argument);
}

TEST(Functionals, EvaluateOnKnownPath) {
    // Scalar path with cells 1, 2, 3 at time scale 1: levels 6 and 11.
    const PrefixSignature table(PathSample(1, {1.0, 2.0, 3.0}), 2);
    const std::vector<std::size_t> eval{0, 1, 2, 3};
    EXPECT_DOUBLE_EQ(evaluate_functional(parse_functional("terminal:1"), table, eval, 2.5), 6.0);
    EXPECT_DOUBLE_EQ(evaluate_functional(parse_functional("terminal:11"), table, eval, 2.5), 11.0);
    EXPECT_DOUBLE_EQ(evaluate_functional(parse_functional("sup:1"), table, eval, 2.5), 6.0);
    EXPECT_DOUBLE_EQ(evaluate_functional(parse_functional("pvar:1"), table, eval, 2.5), 6.0);
    EXPECT_THROW((void)evaluate_functional(parse_functional("terminal:12"), table, eval, 2.5), std::invalid_argument);
    EXPECT_THROW((void)evaluate_functional(parse_functional("sup:3"), table, eval, 2.5), std::invalid_argument);
}

TEST(Config, ParseAndValidate) {
    const auto kv = KeyValueFile::parse(
        "spec = specs/iid.txt\nN = 64, 256, 1024\nT = 1\nreplicas = 200\nfunctionals = terminal:1 sup:2\n"
        "metrics = w1, ks\nseed = 3\noutput = out\n");
    const auto c = parse_experiment_config(kv, "/tmp/base");
    EXPECT_EQ(c.spec_path, "/tmp/base/specs/iid.txt");
    EXPECT_EQ(c.output, "/tmp/base/out");
    EXPECT_EQ(c.n_values, (std::vector<std::size_t>{64, 256, 1024}));
    EXPECT_EQ(c.functionals.size(), 2u);
    EXPECT_EQ(c.metrics, (std::vector<std::string>{"w1", "ks"}));
    EXPECT_EQ(c.seed, 3u);

    const std::string base = "spec = a\nN = 64 256 1024\n";
    for (const char* bad : {"N = 64 256\n", "replicas = 99\n", "p = 3\n", "p = 2\n", "metrics = l2\n", "colour = red\n",
                            "functionals = terminal:123\n", "T = 0\n", "limit_model = exact\n"}) {
        const std::string text = std::string(bad).rfind("N =", 0) == 0 ? std::string("spec = a\n") + bad : base + bad;
        EXPECT_THROW((void)parse_experiment_config(KeyValueFile::parse(text)), std::invalid_argument) << bad;
    }
    EXPECT_THROW((void)parse_experiment_config(KeyValueFile::parse("spec = a\nN = 256 64 1024\n")), std::invalid_argument);
    EXPECT_THROW((void)parse_experiment_config(KeyValueFile::parse("N = 64 256 1024\n")), std::invalid_argument);
}

TEST(RunExperiment, DeterministicAcrossWorkers) {
    const auto cfg = small_config(two_state_chain());
    const auto r1 = run_experiment(cfg, 1);
    const auto d1 = distances_csv(r1), s1 = slopes_csv(r1);
    for (std::size_t w : {2u, 3u}) {
        const auto r = run_experiment(cfg, w);
        EXPECT_EQ(distances_csv(r), d1) << w;
        EXPECT_EQ(slopes_csv(r), s1) << w;
        EXPECT_EQ(r.manifest["config_hash"], r1.manifest["config_hash"]);
    }
    EXPECT_EQ(r1.distances.size(), 3u * 4u * 3u);
    EXPECT_EQ(r1.slopes.size(), 12u);
    EXPECT_EQ(r1.model_source, "closed-form");
    auto other = cfg;
    other.seed = 8;
    EXPECT_NE(distances_csv(run_experiment(other, 1)), d1);
}

TEST(RunExperiment, OwnLimitSitsAtNoiseFloor) {
    // iid standard normal: the scaled level-1 terminal value is exactly N(0, 1).
    auto cfg = small_config(make_iid(Eigen::MatrixXd::Identity(1, 1)));
    cfg.functionals = {"terminal:1"};
    cfg.replicas = 1000;
    cfg.bootstrap = 100;
    const auto r = run_experiment(cfg, 1);
    for (const auto& d : r.distances) {
        EXPECT_LE(std::abs(d.distance - d.floor), 4.0 * std::sqrt(d.se * d.se + d.floor_se * d.floor_se))
            << d.n << " " << d.metric;
    }
}

TEST(RunExperiment, VariantMismatchRejected) {
    auto cfg = small_config(two_state_chain());
    cfg.variant = LimitVariant::continuous;
    EXPECT_THROW((void)run_experiment(cfg, 1), std::invalid_argument);
}

TEST(RunExperiment, ContinuousAndSuspensionVariantsRun) {
    auto cfg = small_config(make_ou(1.0, Eigen::MatrixXd::Identity(1, 1), 0.1));
    cfg.functionals = {"terminal:1", "terminal:11"};
    const auto r = run_experiment(cfg, 1);
    EXPECT_EQ(r.manifest["variant"], "continuous");
    for (const auto& d : r.distances) EXPECT_TRUE(std::isfinite(d.distance));

    Eigen::MatrixXd p(2, 2);
    p << 0.9, 0.1, 0.2, 0.8;
    Eigen::MatrixXd h(2, 1);
    h << 1.0, -1.0;
    auto sc = small_config(make_suspension(make_markov(p, Eigen::MatrixXd::Zero(2, 1)), {0.5, 1.5}, h, FiberProfile::constant));
    sc.functionals = {"terminal:1", "terminal:11"};
    const auto rs = run_experiment(sc, 1);
    EXPECT_EQ(rs.manifest["variant"], "suspension");
    for (const auto& d : rs.distances) EXPECT_TRUE(std::isfinite(d.distance));
}

TEST(Bootstrap, SeShrinksWithSampleSize) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd;
    auto draw = [&](std::size_t n, double shift) {
        std::vector<double> v(n);
        for (auto& x : v) x = shift + nd(gen);
        return v;
    };
    for (const Metric m : {Metric::w1, Metric::ks}) {
        std::vector<double> small, large;
        for (int rep = 0; rep < 9; ++rep) {
            small.push_back(detail::bootstrap_distance(m, draw(500, 0.0), draw(500, 0.2), 200, RngStream(3, rep)).se);
            large.push_back(detail::bootstrap_distance(m, draw(1000, 0.0), draw(1000, 0.2), 200, RngStream(4, rep)).se);
        }
        std::nth_element(small.begin(), small.begin() + 4, small.end());
        std::nth_element(large.begin(), large.begin() + 4, large.end());
        const double ratio = small[4] / large[4];
        EXPECT_GE(ratio, 1.2) << to_string(m);
        EXPECT_LE(ratio, 1.7) << to_string(m);
    }
}

TEST(ChenAudit, RowsPass) {
    ChenAuditOptions opt;
    opt.replicas = 100;
    const auto spec = two_state_chain();
    const auto rows = chen_audit(spec, *exact_limit_model(spec), opt);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) EXPECT_TRUE(r.pass) << r.check << " " << r.value;
}

TEST(ChenAudit, ZeroPathHasZeroResidual) {
    const auto x = TruncatedTensor::identity(2, 3);
    EXPECT_EQ(chen_residual(x, x, x), 0.0);
}

TEST(Outputs, HashAndCsvFormat) {
    EXPECT_EQ(fnv1a(""), 14695981039346656037ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    ExperimentResult r;
    r.distances.push_back({64, "terminal:1", "w1", 0.1, 0.25, 0.0, 0.0});
    r.slopes.push_back({"terminal:1", "w1", {}, "ok"});
    r.slopes.back().fit.slope = -0.5;
    r.slopes.back().fit.slope_se = 0.125;
    EXPECT_EQ(distances_csv(r), "N,functional,metric,distance,se\n64,terminal:1,w1,0.10000000000000001,0.25\n");
    EXPECT_EQ(slopes_csv(r), "functional,metric,slope,se,flag\nterminal:1,w1,-0.5,0.125,ok\n");
}
