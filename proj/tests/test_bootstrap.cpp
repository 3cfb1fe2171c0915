#include <gtest/gtest.h>

#include <algorithm>
#include <mutex>
#include <random>

#include "test_support.hpp"

using namespace pstrat;
using namespace pstrat::testing;

namespace {

Dataset simulated(const char* name, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return simulate_dataset(preset(name, n), rng).observed;
}

std::vector<std::string> ids(const Dataset& d) {
    std::vector<std::string> out;
    for (const auto& r : d.records()) out.push_back(r.id);
    return out;
}

} // namespace

TEST(Resample, SingleRecord) {
    const Dataset d({binary_record(1, 0, 1, 1, "only")}, 1);
    Rng rng(1);
    const Dataset r = resample(d, rng);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r.records()[0].id, "only");
}

TEST(Resample, StratifiedKeepsArmCounts) {
    const Dataset d = simulated("setting1", 300, 2);
    const auto arm1 = std::count_if(d.records().begin(), d.records().end(), [](auto& r) { return r.z == 1; });
    for (std::uint64_t b = 0; b < 100; ++b) {
        Rng rng = Rng::substream(9, b);
        const Dataset r = resample(d, rng, Resampling::StratifiedByArm);
        ASSERT_EQ(r.size(), d.size());
        EXPECT_EQ(std::count_if(r.records().begin(), r.records().end(), [](auto& x) { return x.z == 1; }), arm1);
    }
}

TEST(Resample, DeterministicGivenSeed) {
    const Dataset d = simulated("setting2", 200, 3);
    Rng a(42), b(42), c(43);
    EXPECT_EQ(ids(resample(d, a)), ids(resample(d, b)));
    EXPECT_NE(ids(resample(d, a)), ids(resample(d, c)));
}

TEST(Quantile, InclusiveInterpolation) {
    const std::vector<double> v{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(quantile_inclusive(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile_inclusive(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile_inclusive(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_inclusive(v, 0.25), 1.75);
    EXPECT_THROW(quantile_inclusive(std::vector<double>{}, 0.5), Error);
}

TEST(PivotalCi, DirectFormula) {
    // Flat tails put the 0.025 and 0.975 quantiles at exactly 0.10 and 0.35.
    std::vector<double> boot(41, 0.10);
    boot.insert(boot.end(), 41, 0.35);
    ASSERT_DOUBLE_EQ(quantile_inclusive(boot, 0.025), 0.10);
    ASSERT_DOUBLE_EQ(quantile_inclusive(boot, 0.975), 0.35);
    const Interval ci = pivotal_ci(0.2, boot, 0.05);
    EXPECT_NEAR(ci.lower, 0.05, 1e-15);
    EXPECT_NEAR(ci.upper, 0.30, 1e-15);
}

TEST(PivotalCi, ConstantDraws) {
    const std::vector<double> boot(250, 0.37);
    const Interval ci = pivotal_ci(0.37, boot, 0.05);
    EXPECT_DOUBLE_EQ(ci.lower, 0.37);
    EXPECT_DOUBLE_EQ(ci.upper, 0.37);
}

TEST(PivotalCi, InterpolatedGridOfDraws) {
    std::vector<double> boot;
    for (int i = 999; i >= 1; --i) boot.push_back(i / 1000.0);
    // h = 998 * 0.975 = 973.05 -> 0.974 + 0.05 * 0.001; h = 998 * 0.025 = 24.95 -> 0.025 + 0.95 * 0.001
    const Interval ci = pivotal_ci(0.5, boot, 0.05);
    EXPECT_NEAR(ci.lower, 1.0 - 0.97405, 1e-12);
    EXPECT_NEAR(ci.upper, 1.0 - 0.02595, 1e-12);
}

TEST(PivotalCi, AffineEquivariant) {
    std::mt19937 gen(12);
    std::normal_distribution<double> nd(0.2, 0.05);
    std::vector<double> boot(300);
    for (auto& v : boot) v = nd(gen);
    const Interval base = pivotal_ci(0.21, boot, 0.1);
    for (auto [a, b] : {std::pair{2.0, -0.3}, std::pair{0.5, 1.0}, std::pair{10.0, 0.0}}) {
        std::vector<double> mapped;
        for (double v : boot) mapped.push_back(a * v + b);
        const Interval ci = pivotal_ci(a * 0.21 + b, mapped, 0.1);
        EXPECT_NEAR(ci.lower, a * base.lower + b, 1e-12);
        EXPECT_NEAR(ci.upper, a * base.upper + b, 1e-12);
    }
}

TEST(PivotalCi, PermutationInvariant) {
    std::vector<double> boot;
    for (int i = 0; i < 200; ++i) boot.push_back(std::sin(i * 0.7));
    const Interval a = pivotal_ci(0.0, boot, 0.05);
    std::mt19937 gen(5);
    std::shuffle(boot.begin(), boot.end(), gen);
    const Interval b = pivotal_ci(0.0, boot, 0.05);
    EXPECT_EQ(a.lower, b.lower);
    EXPECT_EQ(a.upper, b.upper);
    EXPECT_LE(a.lower, a.upper);
}

TEST(BootstrapConfig, Validation) {
    BootstrapConfig c;
    c.n_replicates = 1;
    EXPECT_THROW(c.check(), Error);
    c = {};
    c.alpha = 1.0;
    EXPECT_THROW(c.check(), Error);
}

TEST(BootstrapEstimate, DeterministicAndThreadIndependent) {
    const Dataset d = simulated("setting2", 400, 8);
    BootstrapConfig serial;
    serial.n_replicates = 60;
    serial.seed = 2024;
    serial.threads = 1;
    BootstrapConfig parallel = serial;
    parallel.threads = 4;
    const CausalEstimate a = bootstrap_estimate(d, {}, serial);
    const CausalEstimate b = bootstrap_estimate(d, {}, serial);
    const CausalEstimate c = bootstrap_estimate(d, {}, parallel);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_LE(a.ci_lower, a.ci_upper);
    EXPECT_EQ(a.n_bootstrap + a.n_failed, 60u);
}

TEST(BootstrapEstimate, ZeroWidthWhenThetaCannotMove) {
    // Every outcome is 1: both terms are 1 in every replicate.
    std::vector<SubjectRecord> recs;
    for (int x = 0; x < 3; ++x) {
        add_cell(recs, 0, 0, x, 20, 20);
        add_cell(recs, 0, 1, x, 10, 10);
        add_cell(recs, 1, 0, x, 15, 15);
        add_cell(recs, 1, 1, x, 15, 15);
    }
    const Dataset d(recs, 3);
    BootstrapConfig cfg;
    cfg.n_replicates = 50;
    cfg.seed = 3;
    // The model-consistent denominator keeps the control term at exactly 1.
    const CausalEstimate e = bootstrap_estimate(d, {}, cfg, EstimandOptions{true});
    EXPECT_NEAR(e.theta_hat, 0.0, 1e-12);
    EXPECT_NEAR(e.boot_mean, 0.0, 1e-12);
    EXPECT_NEAR(e.ci_lower, e.theta_hat, 1e-12);
    EXPECT_NEAR(e.ci_upper, e.theta_hat, 1e-12);
}

TEST(BootstrapThetas, DropsFailuresUpToCap) {
    const Dataset d = simulated("setting1", 100, 4);
    BootstrapConfig cfg;
    cfg.n_replicates = 40;
    cfg.seed = 1;
    int calls = 0;
    std::mutex m;
    auto flaky = [&](std::size_t every) {
        return [&, every](const Dataset&) -> double {
            std::lock_guard lock(m);
            if (++calls % every == 0) throw Error(ErrorKind::EmptyCell, "synthetic");
            return 0.5;
        };
    };
    const BootstrapDraws ok = bootstrap_thetas(d, cfg, flaky(10)); // 4 of 40 fail
    EXPECT_EQ(ok.n_failed, 4u);
    EXPECT_EQ(ok.thetas.size(), 36u);

    calls = 0;
    try {
        bootstrap_thetas(d, cfg, flaky(5)); // 8 of 40 fail
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TooManyFailedReplicates);
    }
}

TEST(BootstrapThetas, NonEstimationErrorsPropagate) {
    const Dataset d = simulated("setting1", 100, 4);
    BootstrapConfig cfg;
    cfg.n_replicates = 5;
    EXPECT_THROW(bootstrap_thetas(d, cfg, [](const Dataset&) -> double { throw Error(ErrorKind::IoError, "x"); }), Error);
}

TEST(BootstrapEstimate, TinySamplesTriggerFailureCap) {
    // With two subjects per control cell, many resamples lose a cell.
    const Dataset d = dataset_from_cells({{1, 1, 1, 0, 1, 0, 1, 1}, {1, 0, 1, 1, 1, 1, 1, 0}, {1, 1, 1, 1, 1, 0, 1, 1}});
    BootstrapConfig cfg;
    cfg.n_replicates = 100;
    try {
        bootstrap_estimate(d, {}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TooManyFailedReplicates);
    }
}
