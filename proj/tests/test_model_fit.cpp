#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "test_support.hpp"

using namespace pstrat;
using namespace pstrat::testing;

namespace {

EmpiricalTables tables_from(const std::vector<double>& g_l, const std::vector<double>& g_r1) {
    EmpiricalTables t;
    t.k_levels = static_cast<int>(g_l.size());
    t.g_l = g_l;
    for (double p : g_r1) t.g_r.push_back({1 - p, p});
    return t;
}

EmpiricalTables exact_tables(const ModelParams& beta, const std::vector<double>& g_r1) {
    std::vector<double> g_l;
    for (std::size_t x = 0; x < g_r1.size(); ++x)
        g_l.push_back(g_m(beta, int(x), 0) * (1 - g_r1[x]) + g_m(beta, int(x), 1) * g_r1[x]);
    return tables_from(g_l, g_r1);
}

} // namespace

TEST(GM, LogisticValues) {
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 2; ++y) EXPECT_EQ(g_m({0, 0, 0}, x, y), 0.5);
    EXPECT_NEAR(g_m({-3, -5, 0.2}, 0, 0), 0.0474258731775667808788, 1e-15);
    EXPECT_NEAR(g_m({-3, -5, 0.2}, 3, 1), 6.10879359434400996e-4, 1e-17);
}

TEST(GM, StableForLargeArguments) {
    EXPECT_EQ(g_m({700, 0, 0}, 0, 0), 1.0);
    EXPECT_GT(g_m({-700, 0, 0}, 0, 0), 0.0);
    EXPECT_TRUE(std::isfinite(g_m({-700, 0, 0}, 0, 0)));
    EXPECT_EQ(g_m({-800, 0, 0}, 0, 0), 0.0);
}

TEST(GM, MonotoneInEachCoefficient) {
    const ModelParams b{-1.0, 0.5, 0.3};
    EXPECT_LT(g_m(b, 2, 1), g_m({b.beta0 + 0.1, b.beta1, b.beta2}, 2, 1));
    EXPECT_LT(g_m(b, 2, 1), g_m({b.beta0, b.beta1 + 0.1, b.beta2}, 2, 1));
    EXPECT_LT(g_m(b, 2, 1), g_m({b.beta0, b.beta1, b.beta2 + 0.1}, 2, 1));
    EXPECT_EQ(g_m(b, 2, 0), g_m({b.beta0, b.beta1 + 0.1, b.beta2}, 2, 0));
}

TEST(Objective, ZeroAtExactSolution) {
    const ModelParams star{-3, -5, 0.2};
    EXPECT_EQ(objective(star, exact_tables(star, {0.7, 0.65, 0.6, 0.55})), 0.0);
}

TEST(Objective, HandCase) {
    const auto t = tables_from({0.3}, {0.5});
    EXPECT_NEAR(objective({0, 0, 0}, t), 0.04, 1e-16);
}

TEST(Objective, NonNegative) {
    std::mt19937 gen(1);
    std::uniform_real_distribution<double> b(-8, 8), p(0, 1);
    for (int i = 0; i < 1000; ++i) {
        const auto t = tables_from({p(gen), p(gen), p(gen)}, {p(gen), p(gen), p(gen)});
        EXPECT_GE(objective({b(gen), b(gen), b(gen)}, t), 0.0);
    }
}

TEST(Gradient, HandChainRule) {
    const auto g = analytic_gradient({0, 0, 0}, tables_from({0.3}, {0.5}));
    EXPECT_NEAR(g[0], 0.1, 1e-15);
    EXPECT_NEAR(g[1], 0.05, 1e-15);
    EXPECT_EQ(g[2], 0.0);
}

TEST(Gradient, VanishesAtExactSolution) {
    const ModelParams star{-3, -5, 0.2};
    const auto g = analytic_gradient(star, exact_tables(star, {0.7, 0.65, 0.6, 0.55}));
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-8);
}

TEST(Gradient, MatchesCentralDifferences) {
    std::mt19937 gen(99);
    std::uniform_real_distribution<double> b(-4, 4), p(0.05, 0.95);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const auto t = tables_from({p(gen), p(gen), p(gen), p(gen)}, {p(gen), p(gen), p(gen), p(gen)});
        const ModelParams beta{b(gen), b(gen), b(gen)};
        const auto fd = oracle::central_differences(
            [&](std::array<double, 3> v) { return objective(ModelParams::from_array(v), t); }, beta.as_array(), 1e-6);
        const auto an = analytic_gradient(beta, t);
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(fd[c] - an[c]));
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(FitBeta, RecoversPopulationParameters) {
    const auto t = population_tables(preset("setting1"));
    const FitResult r = fit_beta(t);
    EXPECT_NEAR(r.beta_hat.beta0, -3.0, 1e-4);
    EXPECT_NEAR(r.beta_hat.beta1, -5.0, 1e-4);
    EXPECT_NEAR(r.beta_hat.beta2, 0.2, 1e-4);
    EXPECT_LT(r.objective_value, 1e-12);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.jacobian_rank, 3);
    EXPECT_FALSE(r.under_identified);

    double sum = 0;
    for (double v : r.per_level_residuals) sum += v * v;
    EXPECT_NEAR(sum, r.objective_value, 1e-10);
}

TEST(FitBeta, RecoversOtherSettings) {
    // Setting 3 has a shallow local minimum reachable from the origin; the
    // grid multistart avoids it.
    FitConfig grid;
    grid.init_points.clear();
    grid.grid_bound = 5;
    for (const char* name : {"setting2", "setting3"}) {
        const auto spec = preset(name);
        const FitResult r = fit_beta(population_tables(spec), grid);
        EXPECT_LT(r.objective_value, 1e-12) << name;
        EXPECT_NEAR(r.beta_hat.beta0, spec.beta.beta0, 1e-3) << name;
        EXPECT_NEAR(r.beta_hat.beta1, spec.beta.beta1, 1e-3) << name;
        EXPECT_NEAR(r.beta_hat.beta2, spec.beta.beta2, 1e-3) << name;
    }
}

TEST(FitBeta, OriginStartCanStopAtLocalMinimum) {
    const auto spec = preset("setting3");
    const FitResult r = fit_beta(population_tables(spec));
    EXPECT_TRUE(r.converged);
    EXPECT_GT(r.objective_value, 1e-12);
    EXPECT_LT(r.objective_value, 1e-9);
}

TEST(FitBeta, RankDeficientWhenOutcomeNeverSucceeds) {
    // G_R(x, 1) = 0 at every level: beta1 never enters the residuals.
    const auto t = tables_from({0.2, 0.25, 0.3, 0.35}, {0.0, 0.0, 0.0, 0.0});
    const FitResult r = fit_beta(t);
    EXPECT_LT(r.jacobian_rank, 3);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(FitBeta, UnderIdentifiedWarnsAndProceeds) {
    const auto t = tables_from({0.2, 0.3}, {0.6, 0.5});
    const FitResult r = fit_beta(t);
    EXPECT_TRUE(r.under_identified);
    EXPECT_LT(r.objective_value, 1e-12);
    EXPECT_LE(r.jacobian_rank, 2);
}

TEST(FitBeta, BestStartNoWorseThanAnyInit) {
    const auto t = tables_from({0.1, 0.3, 0.2, 0.05}, {0.7, 0.6, 0.5, 0.4}); // overdetermined, inconsistent
    FitConfig cfg;
    cfg.init_points = {{0, 0, 0}, {3, -3, 1}, {-6, 2, -1}, {8, 8, 8}};
    const FitResult r = fit_beta(t, cfg);
    ASSERT_EQ(r.starts.size(), 4u);
    for (const auto& init : cfg.init_points) EXPECT_LE(r.objective_value, objective(init, t));
    for (const auto& s : r.starts) EXPECT_LE(r.objective_value, s.objective_value);
}

TEST(FitBeta, GridStartsAreEnumerated) {
    FitConfig cfg;
    cfg.init_points.clear();
    cfg.grid_bound = 1;
    EXPECT_EQ(cfg.starts().size(), 27u);
    const FitResult r = fit_beta(population_tables(preset("setting1")), cfg);
    EXPECT_EQ(r.starts.size(), 27u);
    EXPECT_LT(r.objective_value, 1e-12);
}

TEST(FitBeta, IterationCapReportsNonConvergence) {
    FitConfig cfg;
    cfg.max_iterations = 1;
    const FitResult r = fit_beta(population_tables(preset("setting1")), cfg);
    EXPECT_FALSE(r.converged);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(FitConfig, RejectsBadSettings) {
    FitConfig cfg;
    cfg.gradient_tolerance = 0;
    EXPECT_THROW(cfg.check(), Error);
    cfg = {};
    cfg.max_iterations = 0;
    EXPECT_THROW(cfg.check(), Error);
}

TEST(Bfgs, MinimizesRosenbrockLikeQuadratic) {
    auto fg = [](const std::array<double, 3>& x, std::array<double, 3>& g) {
        g = {2 * (x[0] - 1) + (x[1] - 2), (x[0] - 1) + 4 * (x[1] - 2), 6 * (x[2] + 3)};
        return (x[0] - 1) * (x[0] - 1) + (x[0] - 1) * (x[1] - 2) + 2 * (x[1] - 2) * (x[1] - 2) +
               3 * (x[2] + 3) * (x[2] + 3);
    };
    const auto r = minimize_bfgs(fg, {10, -10, 5}, 1e-10, 200);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1, 1e-8);
    EXPECT_NEAR(r.x[1], 2, 1e-8);
    EXPECT_NEAR(r.x[2], -3, 1e-8);
}
