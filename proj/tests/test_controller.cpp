#include <gtest/gtest.h>

#include <vector>

#include "gen.hpp"
#include "l2lab/controller.hpp"

using namespace l2lab;

namespace {

StepSchedule constant(double base) { return {StepKind::constant, base}; }

ControllerState fresh(int kappa = 1, ControllerMode mode = ControllerMode::adaptive) {
    return ControllerState::initial(DemandModel{}, constant(1e-9), constant(1e-8), kappa, 120.0, mode);
}

PeriodStats period(double x, double y) {
    PeriodStats p;
    p.x = x;
    p.y = y;
    p.tau = 1;
    return p;
}

}  // namespace

TEST(StepSize, Schedules) {
    const StepSchedule dec{StepKind::decreasing, 0.3};
    EXPECT_DOUBLE_EQ(step_size(dec, 0), 0.3);
    EXPECT_DOUBLE_EQ(step_size(dec, 9), 0.03);
    for (std::int64_t n : {0, 1, 1000}) EXPECT_DOUBLE_EQ(step_size(constant(0.3), n), 0.3);
    EXPECT_THROW(step_size(dec, -1), std::invalid_argument);
}

TEST(Project, ClampsToInterval) {
    const FeeBounds b = FeeBounds::from_demand(DemandModel{});
    EXPECT_EQ(project(-1e-5, b), 0.0);
    EXPECT_EQ(project(9e-5, b), b.hi);
    EXPECT_NEAR(b.hi, 5.3892e-5, 5e-10);
    EXPECT_EQ(project(2e-5, b), 2e-5);
}

TEST(AccumulateBlock, Examples) {
    PeriodStats s = accumulate_block({}, 0, 3.6e-5, 0.0, 120.0);
    EXPECT_EQ(s.x, 0.0);
    EXPECT_EQ(s.y, 120.0);
    EXPECT_EQ(s.tau, 1);
    const PeriodStats t = accumulate_block({}, 120, 3.6e-5, 2.316e-4, 120.0, 7);
    EXPECT_NEAR(t.x, 4.0884e-3, 1e-15);
    EXPECT_EQ(t.y, 0.0);
    EXPECT_EQ(t.delay_blocks, 7);
    EXPECT_EQ(t.arrivals, 120);
}

TEST(UpdateBudgetFee, Examples) {
    ControllerState s = fresh();
    s.f_last = 4.0e-5;
    EXPECT_NEAR(update_budget_fee(s, 1000.0), 3.9e-5, 1e-18);
    EXPECT_EQ(s.i, 1);
    EXPECT_EQ(s.g, s.f_last);
    const double before = s.f_last;
    EXPECT_EQ(update_budget_fee(s, 0.0), before);
    EXPECT_GT(update_budget_fee(s, -10.0), before);
    s.f_last = s.bounds.hi;
    EXPECT_EQ(update_budget_fee(s, -10.0), s.bounds.hi);
}

TEST(UpdateCongestionFee, Examples) {
    ControllerState s = fresh();
    s.p_last = 3.0e-5;
    EXPECT_NEAR(update_congestion_fee(s, -50.0), 3.05e-5, 1e-18);
    EXPECT_EQ(s.j, 1);
    const double before = s.p_last;
    EXPECT_EQ(update_congestion_fee(s, 0.0), before);
    EXPECT_GT(update_congestion_fee(s, -1.0), before);
}

TEST(InitialState, MidpointAndBudgetRegime) {
    const ControllerState s = fresh();
    EXPECT_DOUBLE_EQ(s.g, 180.0 / (4.0 * 1.67e6));
    EXPECT_EQ(s.f_last, s.g);
    EXPECT_EQ(s.p_last, s.g);
    EXPECT_EQ(s.delta, kBudgetRegime);
    EXPECT_EQ(s.x_last, 0.0);
    EXPECT_EQ(s.y_last, 0.0);
    EXPECT_EQ(fresh(1, ControllerMode::congestion_only).delta, kCongestionRegime);
}

TEST(SelectNext, BudgetStaysWhenNotCongested) {
    ControllerState s = fresh();
    const std::vector<PeriodStats> b{period(-2.0, 5.0)};
    const Decision d = select_next(s, b);
    EXPECT_EQ(d.delta_next, kBudgetRegime);
    EXPECT_EQ(s.x_last, -2.0);
    EXPECT_NEAR(d.fee_next, s.bounds.hi / 2.0 + 2e-9, 1e-20);
}

TEST(SelectNext, BudgetToCongestionUsesStaleObservation) {
    ControllerState s = fresh();
    const double g0 = s.g;
    const Decision d = select_next(s, std::vector<PeriodStats>{period(1.0, -3.0)});
    EXPECT_EQ(d.delta_next, kCongestionRegime);
    // No congestion observation yet: the first congestion update is a no-op move from g0.
    EXPECT_EQ(d.fee_next, g0);
    EXPECT_EQ(s.j, 1);
    EXPECT_EQ(s.x_last, 1.0);
    EXPECT_EQ(s.f_last, g0);
}

TEST(SelectNext, CongestionToBudgetWhenLosingMoney) {
    ControllerState s = fresh();
    select_next(s, std::vector<PeriodStats>{period(1.0, -3.0)});
    ASSERT_EQ(s.delta, kCongestionRegime);
    const double g_cong = s.g;
    const Decision d = select_next(s, std::vector<PeriodStats>{period(-4.0, -1.0)});
    EXPECT_EQ(d.delta_next, kBudgetRegime);
    EXPECT_EQ(s.y_last, -1.0);
    EXPECT_EQ(s.p_last, g_cong);
    // Budget update runs from the last budget fee with the last budget observation (x = 1).
    EXPECT_NEAR(d.fee_next, g_cong - 1e-9 * 1.0, 1e-20);
}

TEST(SelectNext, CongestionStaysWhenProfitable) {
    ControllerState s = fresh();
    const double g0 = s.g;
    select_next(s, std::vector<PeriodStats>{period(1.0, -3.0)});
    const Decision d = select_next(s, std::vector<PeriodStats>{period(0.0, -2.0)});
    EXPECT_EQ(d.delta_next, kCongestionRegime);
    EXPECT_NEAR(d.fee_next, g0 + 2e-8, 1e-20);
}

TEST(SelectNext, BatchUsesSumsAndMeans) {
    ControllerState s = fresh(3);
    const std::vector<PeriodStats> b{period(1.0, 4.0), period(2.0, -1.0), period(3.0, -2.0)};
    const Decision d = select_next(s, b);
    EXPECT_EQ(d.delta_next, kBudgetRegime);  // Ysum = 1 >= 0
    EXPECT_DOUBLE_EQ(d.x_obs, 2.0);
    EXPECT_DOUBLE_EQ(d.y_obs, 1.0 / 3.0);
}

TEST(SelectNext, RejectsWrongBatchSize) {
    ControllerState s = fresh(2);
    EXPECT_THROW(select_next(s, std::vector<PeriodStats>{period(0, 0)}), std::invalid_argument);
}

TEST(SelectNext, PinnedModesNeverSwitch) {
    ControllerState b = fresh(1, ControllerMode::budget_only);
    ControllerState c = fresh(1, ControllerMode::congestion_only);
    for (int k = 0; k < 10; ++k) {
        select_next(b, std::vector<PeriodStats>{period(-1.0, -100.0)});
        select_next(c, std::vector<PeriodStats>{period(-1.0, -100.0)});
        EXPECT_EQ(b.delta, kBudgetRegime);
        EXPECT_EQ(c.delta, kCongestionRegime);
    }
    EXPECT_EQ(b.j, 0);
    EXPECT_EQ(c.i, 0);
}

TEST(ControllerProperty, FeesStayInsideInterval) {
    proptest::Gen gen(51);
    for (int trial = 0; trial < 40; ++trial) {
        const int kappa = static_cast<int>(gen.integer(1, 5));
        const StepKind kind = trial % 2 ? StepKind::constant : StepKind::decreasing;
        ControllerState s = ControllerState::initial(DemandModel{}, {kind, gen.log_uniform(1e-9, 1e-2)},
                                                     {kind, gen.log_uniform(1e-9, 1e-5)}, kappa, 120.0);
        std::vector<PeriodStats> batch(static_cast<std::size_t>(kappa));
        for (int u = 0; u < 500; ++u) {
            for (auto& p : batch) p = period(gen.uniform(-0.05, 0.05), gen.uniform(-200.0, 200.0));
            select_next(s, batch);
            ASSERT_TRUE(s.bounds.contains(s.g));
            ASSERT_TRUE(s.bounds.contains(s.f_last));
            ASSERT_TRUE(s.bounds.contains(s.p_last));
            ASSERT_EQ(s.i + s.j, u + 1);
        }
    }
}
