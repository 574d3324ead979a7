#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "l2lab/simulator.hpp"

using namespace l2lab;

namespace {

ScenarioConfig small_scenario() {
    ScenarioConfig c = apply_scenario(ScenarioConfig{}, "iid-dec");
    c.mdp.q_max = 60;
    c.mdp.n_price = 21;
    c.fee_lattice = 64;
    c.horizon_updates = 300;
    c.replicas = 2;
    return c;
}

void expect_same(const Trajectory& a, const Trajectory& b) {
    ASSERT_EQ(a.records.size(), b.records.size());
    EXPECT_EQ(0, std::memcmp(a.records.data(), b.records.data(), a.records.size() * sizeof(UpdateRecord)));
    EXPECT_EQ(a.summary.final_f, b.summary.final_f);
    EXPECT_EQ(a.summary.final_p, b.summary.final_p);
    EXPECT_EQ(a.summary.total_arrivals, b.summary.total_arrivals);
    EXPECT_EQ(a.summary.total_delay_blocks, b.summary.total_delay_blocks);
}

}  // namespace

TEST(PostingPeriod, NoDemandRunsToCap) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    const double cap = c.model.demand.fee_cap();
    BlockDriver driver(c.model, 1, 0);
    SystemState state = initial_state(c.model);
    const PoissonSampler none(arrival_rate(c.model.demand, cap));
    const PeriodStats p = run_posting_period(cap, cache.exact(cap), none, state, driver, 120.0, 250);
    EXPECT_TRUE(p.force_closed);
    EXPECT_EQ(p.tau, 250);
    EXPECT_EQ(p.x, 0.0);
    EXPECT_EQ(p.y, 250 * 120.0);
    EXPECT_EQ(p.arrivals, 0);
}

TEST(PostingPeriod, FreePostingGivesOneBlockPeriods) {
    ScenarioConfig c = small_scenario();
    c.model.cost.b0 = c.model.cost.b1 = 0.0;
    PolicyCache cache = make_policy_cache(c);
    const double fee = 3e-5;
    BlockDriver driver(c.model, 1, 0);
    SystemState state = initial_state(c.model);
    const PoissonSampler arrivals(arrival_rate(c.model.demand, fee));
    for (int k = 0; k < 200; ++k) {
        const PeriodStats p = run_posting_period(fee, cache.exact(fee), arrivals, state, driver, 120.0);
        ASSERT_EQ(p.tau, 1);
        ASSERT_EQ(p.posted, p.arrivals);
        ASSERT_EQ(p.delay_blocks, 0);
    }
}

TEST(PostingPeriod, CostSplitsIntoWaitingAndPosting) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    const double fee = 3.6e-5;
    BlockDriver driver(c.model, 3, 0);
    SystemState state = initial_state(c.model);
    const PoissonSampler arrivals(arrival_rate(c.model.demand, fee));
    for (int k = 0; k < 500; ++k) {
        const PeriodStats p = run_posting_period(fee, cache.exact(fee), arrivals, state, driver, 120.0);
        ASSERT_FALSE(p.force_closed);
        ASSERT_EQ(state.queue, 0);
        const double posting = (c.model.cost.b0 + c.model.cost.b1 * static_cast<double>(p.posted)) * state.price.p;
        const double waiting = compensation_owed(p.delay_blocks, c.model.cost);
        ASSERT_NEAR(p.cost, waiting + posting, 1e-12 * p.cost);
        ASSERT_NEAR(p.x, static_cast<double>(p.arrivals) * fee - p.cost, 1e-12 * std::abs(p.cost) + 1e-15);
        ASSERT_NEAR(p.y, static_cast<double>(p.tau) * 120.0 - static_cast<double>(p.arrivals), 1e-9);
    }
}

TEST(Scenario, ConservationAndCompensation) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    for (const Trajectory& t : run_scenario(c, cache)) {
        const ReplicaSummary& s = t.summary;
        EXPECT_EQ(s.total_arrivals, s.total_posted + s.final_queue);
        EXPECT_DOUBLE_EQ(s.total_compensation, c.model.cost.a * static_cast<double>(s.total_delay_blocks));
        ASSERT_EQ(t.records.size(), static_cast<std::size_t>(c.horizon_updates));
        const FeeBounds b = FeeBounds::from_demand(c.model.demand);
        for (const UpdateRecord& r : t.records) {
            ASSERT_DOUBLE_EQ(r.i_frac + r.j_frac, 1.0);
            ASSERT_TRUE(b.contains(r.g) && b.contains(r.f_last) && b.contains(r.p_last));
            ASSERT_EQ(r.i + r.j, r.update_index + 1);
        }
        EXPECT_EQ(t.records.back().block_index, s.blocks);
    }
}

TEST(Scenario, SingleUpdateHorizon) {
    ScenarioConfig c = small_scenario();
    c.horizon_updates = 1;
    c.replicas = 1;
    PolicyCache cache = make_policy_cache(c);
    const auto runs = run_scenario(c, cache);
    ASSERT_EQ(runs.size(), 1u);
    ASSERT_EQ(runs[0].records.size(), 1u);
    EXPECT_EQ(runs[0].records[0].i + runs[0].records[0].j, 1);
}

TEST(Scenario, DeterministicAcrossRunsAndThreadCounts) {
    ScenarioConfig c = small_scenario();
    c.replicas = 3;
    PolicyCache cache1 = make_policy_cache(c);
    PolicyCache cache2 = make_policy_cache(c);
    ::setenv("L2LAB_THREADS", "1", 1);
    const auto serial = run_scenario(c, cache1);
    ::setenv("L2LAB_THREADS", "3", 1);
    const auto parallel = run_scenario(c, cache2);
    ::unsetenv("L2LAB_THREADS");
    ASSERT_EQ(serial.size(), parallel.size());
    for (std::size_t r = 0; r < serial.size(); ++r) expect_same(serial[r], parallel[r]);
    EXPECT_NE(serial[0].summary.total_arrivals, serial[1].summary.total_arrivals);
}

TEST(Scenario, KappaOneMatchesPerPostingRule) {
    // Reference loop written directly from the per-posting update rules.
    ScenarioConfig c = small_scenario();
    c.replicas = 1;
    PolicyCache cache = make_policy_cache(c);
    const Trajectory t = run_replica(c, cache, 0);

    const SystemModel& m = c.model;
    const FeeBounds b = FeeBounds::from_demand(m.demand);
    BlockDriver driver(m, c.seed, 0);
    SystemState state = initial_state(m);
    double g = m.demand.lambda0 / (4.0 * m.demand.k);
    double f_last = g;
    double p_last = g;
    double x_last = 0.0;
    double y_last = 0.0;
    int delta = 1;
    std::int64_t i = 0;
    std::int64_t j = 0;
    for (std::int64_t u = 0; u < c.horizon_updates; ++u) {
        const PoissonSampler arrivals(arrival_rate(m.demand, g));
        const PeriodStats p = run_posting_period(g, cache.lattice(g), arrivals, state, driver, c.lambda_bar);
        if (delta == 1) {
            f_last = g;
            x_last = p.x;
            delta = p.y >= 0.0 ? 1 : 0;
        } else {
            p_last = g;
            y_last = p.y;
            delta = p.x < 0.0 ? 1 : 0;
        }
        if (delta == 1) {
            f_last = std::clamp(f_last - c.step_f / static_cast<double>(i + 1) * x_last, b.lo, b.hi);
            g = f_last;
            ++i;
        } else {
            p_last = std::clamp(p_last - c.step_p / static_cast<double>(j + 1) * y_last, b.lo, b.hi);
            g = p_last;
            ++j;
        }
        const UpdateRecord& r = t.records[static_cast<std::size_t>(u)];
        ASSERT_EQ(r.delta, delta) << "update " << u;
        ASSERT_EQ(r.g, g) << "update " << u;
        ASSERT_EQ(r.f_last, f_last);
        ASSERT_EQ(r.p_last, p_last);
    }
}

TEST(Scenario, RegimesRecurAtStationaryRates) {
    ScenarioConfig c = small_scenario();
    c.horizon_updates = 100'000;
    c.replicas = 1;
    PolicyCache cache = make_policy_cache(c);
    const Trajectory t = run_replica(c, cache, 0);
    const double f_star = find_budget_balance_fee(cache, McConfig{200'000, 100, c.seed, 0}).fee;
    const double p_star = congestion_fee_closed_form(c.model.demand, c.lambda_bar);
    SwitchEstimateConfig sc;
    const auto [pi_f, pi_p] = stationary_split(estimate_switch_matrix(cache, f_star, p_star, sc));
    const double need = std::ceil(1e5 * std::min(pi_f, pi_p) / 2.0);
    EXPECT_GE(static_cast<double>(t.records.back().i), need);
    EXPECT_GE(static_cast<double>(t.records.back().j), need);
}

TEST(SwitchMatrixEstimate, SignsFollowTargetRate) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    SwitchEstimateConfig sc;
    sc.n_batches = 2'000;
    // Above p* demand runs below target, so congestion alarms are rare; at a
    // low fee demand exceeds target and they are common.
    const SwitchMatrix high = estimate_switch_matrix(cache, 4.5e-5, 3.6e-5, sc);
    const SwitchMatrix low = estimate_switch_matrix(cache, 1.0e-5, 3.6e-5, sc);
    EXPECT_LT(high.p10, 0.2);
    EXPECT_GT(low.p10, 0.8);
    EXPECT_LT(high.p01, 0.2);
    EXPECT_NO_THROW(high.validate());
}

TEST(KappaSweep, RejectsCoincidentFees) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    EXPECT_THROW(kappa_sweep(cache, 3e-5, 3e-5 + 1e-9, {1, 4}, SwitchEstimateConfig{}), std::invalid_argument);
}

TEST(KappaSweep, MinorityShrinksWithBatchSize) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    SwitchEstimateConfig sc;
    sc.n_batches = 4'000;
    const auto rows = kappa_sweep(cache, 2.0e-5, 3.6e-5, {1, 4}, sc);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_GT(rows[0].minority, rows[1].minority);
    EXPECT_EQ(rows[0].minority, std::min(rows[0].pi_f, rows[0].pi_p));
}

TEST(ScenarioConfigTest, PresetsAndValidation) {
    EXPECT_EQ(apply_scenario({}, "ar1-const").model.price.mode, PriceMode::ar1);
    EXPECT_EQ(apply_scenario({}, "ar1-const").step_kind, StepKind::constant);
    EXPECT_EQ(apply_scenario({}, "iid-dec").model.price.mode, PriceMode::iid);
    try {
        apply_scenario({}, "bogus");
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("iid-dec, iid-const, ar1-dec, ar1-const"), std::string::npos);
    }
    ScenarioConfig c;
    c.lambda_bar = 80.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.allow_any_lambda_bar = true;
    EXPECT_NO_THROW(c.validate());
    c = ScenarioConfig{};
    c.horizon_updates = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(PolicyCacheTest, LatticeRoundingAndMemo) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    const double hi = FeeBounds::from_demand(c.model.demand).hi;
    const double half_cell = hi / (2.0 * static_cast<double>(c.fee_lattice - 1));
    for (int k = 0; k <= 1000; ++k) {
        const double f = hi * k / 1000.0;
        ASSERT_LE(std::abs(cache.lattice_fee(cache.lattice_index(f)) - f), half_cell * (1.0 + 1e-12));
    }
    const MdpSolution& a = cache.lattice(2e-5);
    const MdpSolution& b = cache.lattice(2e-5 + 1e-9);
    EXPECT_EQ(&a, &b);
    EXPECT_EQ(cache.solved(), 1u);
}

TEST(PolicyCacheTest, FinerLatticeTracksExactCost) {
    ScenarioConfig c = small_scenario();
    PolicyCache exact = make_policy_cache(c);
    c.fee_lattice = 1024;
    PolicyCache fine = make_policy_cache(c);
    const McConfig mc{50'000, 50, 7, 0};
    for (double fee : {1.3e-5, 2.71e-5, 4.4e-5}) {
        const CostEstimate e = estimate_expected_cost(fee, exact.exact(fee), c.model, mc);
        const CostEstimate l = estimate_expected_cost(fee, fine.lattice(fee), c.model, mc);
        EXPECT_NEAR(l.mean, e.mean, 0.01 * e.mean) << fee;
    }
}

TEST(Scenario, BudgetDriftVanishesAtBalancedFee) {
    const ScenarioConfig c = small_scenario();
    PolicyCache cache = make_policy_cache(c);
    const double f_star = find_budget_balance_fee(cache, McConfig{200'000, 100, c.seed, 0}).fee;
    BlockDriver driver(c.model, c.seed, 77);
    SystemState state = initial_state(c.model);
    const PoissonSampler arrivals(arrival_rate(c.model.demand, f_star));
    const int n = 10'000;
    double s = 0.0;
    double s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double x = run_posting_period(f_star, cache.exact(f_star), arrivals, state, driver, c.lambda_bar).x;
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / (n - 1));
    EXPECT_LE(std::abs(mean), 3.0 * se);
}
