#include <gtest/gtest.h>

#include <cmath>

#include "gen.hpp"
#include "l2lab/mdp.hpp"

using namespace l2lab;

namespace {

MdpConfig small_config() {
    MdpConfig c;
    c.q_max = 30;
    c.n_price = 21;
    return c;
}

PriceModel price_in(PriceMode mode) {
    PriceModel m;
    m.mode = mode;
    return m;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

void expect_matches_oracle(const MdpSolution& sol, const PriceGrid& grid, const DemandModel& d, double fee,
                           const CostParams& cost) {
    const FullActionOracle oracle(sol, grid, d, fee, cost);
    for (int q = 0; q <= sol.q_max; ++q) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const BackupResult b = oracle.backup(q, i);
            ASSERT_TRUE(b.best_action == 0 || b.best_action == q) << "q=" << q << " i=" << i;
            ASSERT_LE(rel_gap(b.best_value, sol.value_at(q, i)), 1e-9) << "q=" << q << " i=" << i;
        }
    }
}

}  // namespace

TEST(PriceGridTest, InvariantsAcrossRandomModels) {
    proptest::Gen gen(31);
    for (int trial = 0; trial < 60; ++trial) {
        const PriceMode mode = trial % 2 ? PriceMode::ar1 : PriceMode::iid;
        const PriceModel m = gen.price(mode);
        MdpConfig c;
        c.n_price = static_cast<int>(gen.integer(3, 61));
        const PriceGrid g = build_price_grid(m, c);
        ASSERT_EQ(g.size(), static_cast<std::size_t>(c.n_price));
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_GE(g.points[i], m.floor);
            if (i) EXPECT_GT(g.points[i], g.points[i - 1]);
            double row = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j) {
                EXPECT_GE(g.prob(i, j), 0.0);
                row += g.prob(i, j);
            }
            EXPECT_NEAR(row, 1.0, 1e-12);
            if (mode == PriceMode::iid) {
                for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(g.prob(i, j), g.prob(0, j));
            }
        }
    }
}

TEST(PriceGridTest, NoiselessFrozenProcessIsIdentity) {
    PriceModel m = price_in(PriceMode::ar1);
    m.sigma = 0.0;
    m.theta = 0.0;
    MdpConfig c;
    c.n_price = 11;
    const PriceGrid g = build_price_grid(m, c);
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(g.prob(i, j), i == j ? 1.0 : 0.0);
    }
}

TEST(PriceGridTest, RowAtMeanPeaksAtMean) {
    const PriceGrid g = build_price_grid(price_in(PriceMode::ar1), MdpConfig{});
    const std::size_t mid = g.nearest(3.86e-8);
    EXPECT_LE(std::abs(g.points[mid] - 3.86e-8), 0.5 * (g.points[1] - g.points[0]));
    std::size_t best = 0;
    for (std::size_t j = 1; j < g.size(); ++j) {
        if (g.prob(mid, j) > g.prob(mid, best)) best = j;
    }
    EXPECT_EQ(best, mid);
}

TEST(PriceGridTest, NearestClampsToRange) {
    const PriceGrid g = build_price_grid(price_in(PriceMode::iid), small_config());
    EXPECT_EQ(g.nearest(0.0), 0u);
    EXPECT_EQ(g.nearest(1.0), g.size() - 1);
}

class SmallInstance : public ::testing::TestWithParam<PriceMode> {};

TEST_P(SmallInstance, BinaryActionsAndValuesMatchFullOracle) {
    const PriceGrid grid = build_price_grid(price_in(GetParam()), small_config());
    const DemandModel d;
    const CostParams cost;
    for (double fee : {60.0 / 1.67e6, 170.0 / 1.67e6}) {
        const MdpSolution sol = solve(grid, d, fee, cost, small_config());
        expect_matches_oracle(sol, grid, d, fee, cost);
    }
}

TEST_P(SmallInstance, StructuralInvariants) {
    const PriceGrid grid = build_price_grid(price_in(GetParam()), small_config());
    const DemandModel d;
    const CostParams cost;
    const double fee = 60.0 / 1.67e6;
    const MdpSolution sol = solve(grid, d, fee, cost, small_config());
    const FullActionOracle oracle(sol, grid, d, fee, cost);
    const double tol = small_config().resolved_tol(cost);
    EXPECT_LE(sol.stats.bellman_residual, 10.0 * tol);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(sol.value_at(0, i), oracle.continuation(0, i), 1e-9 * std::abs(sol.value_at(0, i)));
        EXPECT_EQ(oracle.backup(0, i).best_action, 0);
        int switches = 0;
        for (int q = 0; q <= sol.q_max; ++q) {
            EXPECT_EQ(sol.action_at(q, i) == Action::post_all, q > sol.thresholds[i]);
            EXPECT_EQ(sol.posts(q, grid.points[i]), q > sol.thresholds[i]);
            if (q) switches += sol.action_at(q, i) != sol.action_at(q - 1, i);
            if (q + 2 <= sol.q_max) {
                const double j0 = sol.value_at(q, i);
                EXPECT_GE(2.0 * sol.value_at(q + 1, i), j0 + sol.value_at(q + 2, i) - 1e-8 * (1.0 + std::abs(j0)));
            }
            if (q) EXPECT_GE(sol.value_at(q, i), sol.value_at(q - 1, i));
        }
        EXPECT_LE(switches, 1);
    }
}

INSTANTIATE_TEST_SUITE_P(BothPriceModes, SmallInstance, ::testing::Values(PriceMode::ar1, PriceMode::iid),
                         [](const auto& info) { return info.param == PriceMode::ar1 ? "ar1" : "iid"; });

TEST(Solve, NegligibleDelayCostNeverPosts) {
    CostParams cost;
    cost.a = 1e-30;
    const PriceGrid grid = build_price_grid(price_in(PriceMode::ar1), small_config());
    const MdpSolution sol = solve(grid, DemandModel{}, 3.6e-5, cost, small_config());
    for (int t : sol.thresholds) EXPECT_EQ(t, 30);
}

TEST(Solve, FreePostingAlwaysPosts) {
    CostParams cost;
    cost.b0 = 0.0;
    cost.b1 = 0.0;
    for (PriceMode mode : {PriceMode::ar1, PriceMode::iid}) {
        const PriceGrid grid = build_price_grid(price_in(mode), small_config());
        const MdpSolution sol = solve(grid, DemandModel{}, 3.6e-5, cost, small_config());
        for (int t : sol.thresholds) EXPECT_EQ(t, 0);
    }
}

TEST(Solve, ThresholdsRiseWithPrice) {
    const PriceGrid grid = build_price_grid(price_in(PriceMode::ar1), MdpConfig{});
    const MdpSolution sol = solve(grid, DemandModel{}, 3.6e-5, CostParams{}, MdpConfig{});
    for (std::size_t i = 1; i < sol.thresholds.size(); ++i) EXPECT_GE(sol.thresholds[i], sol.thresholds[i - 1]);
    EXPECT_LT(sol.thresholds.front(), sol.thresholds.back());
}

TEST(Solve, WarmStartReachesSameSolution) {
    const PriceGrid grid = build_price_grid(price_in(PriceMode::ar1), small_config());
    const DemandModel d;
    const CostParams cost;
    const MdpSolution near = solve(grid, d, 3.0e-5, cost, small_config());
    const MdpSolution cold = solve(grid, d, 3.2e-5, cost, small_config());
    const MdpSolution warm = solve(grid, d, 3.2e-5, cost, small_config(), &near);
    EXPECT_EQ(cold.thresholds, warm.thresholds);
    for (std::size_t k = 0; k < cold.value.size(); ++k) {
        ASSERT_LE(rel_gap(warm.value[k], cold.value[k]), 1e-9);
    }
}

TEST(SolveProperty, RandomCostsKeepThresholdForm) {
    proptest::Gen gen(41);
    MdpConfig config;
    config.q_max = 20;
    config.n_price = 11;
    const DemandModel d;
    for (int trial = 0; trial < 16; ++trial) {
        const CostParams cost = gen.cost();
        const PriceMode mode = trial % 2 ? PriceMode::ar1 : PriceMode::iid;
        const PriceGrid grid = build_price_grid(price_in(mode), config);
        const double fee = gen.uniform(0.0, d.lambda0 / (2.0 * d.k));
        MdpSolution sol;
        ASSERT_NO_THROW(sol = solve(grid, d, fee, cost, config)) << "trial " << trial;
        expect_matches_oracle(sol, grid, d, fee, cost);
    }
}

TEST(ExtractThresholds, HandBuiltColumns) {
    MdpSolution s;
    s.q_max = 4;
    s.prices = {1e-8, 2e-8, 3e-8};
    const Action H = Action::hold;
    const Action P = Action::post_all;
    // rows are q = 0..4; columns are price indices
    s.policy = {H, H, H,
                H, P, H,
                H, P, H,
                H, P, P,
                H, P, P};
    EXPECT_EQ(extract_thresholds(s), (std::vector<int>{4, 0, 2}));
    s.policy[1 * 3 + 2] = P;  // column 2 becomes hold, post, hold, post, post
    try {
        extract_thresholds(s);
        FAIL() << "expected ThresholdViolation";
    } catch (const ThresholdViolation& e) {
        EXPECT_EQ(e.column(), 2u);
    }
}

TEST(MdpConfigValidation, RejectsBadShapes) {
    MdpConfig c;
    c.q_max = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = MdpConfig{};
    c.n_price = 2;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(OverflowSlope, BoundedByMarginalPostingCost) {
    const PriceGrid grid = build_price_grid(price_in(PriceMode::ar1), small_config());
    const CostParams cost;
    const auto m = overflow_slope(grid, cost);
    ASSERT_EQ(m.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_LE(m[i], cost.b1 * grid.points[i] * (1.0 + 1e-12));
        EXPECT_GT(m[i], 0.0);
    }
}
