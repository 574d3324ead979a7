// Online fee controller: per-period accumulators, projected update rules and
// the adaptive choice between the budget-balance and congestion regimes.
#pragma once

#include <cstdint>
#include <span>

#include "l2lab/fee_oracles.hpp"

namespace l2lab {

enum class StepKind { constant, decreasing };

struct StepSchedule {
    StepKind kind = StepKind::decreasing;
    double base = 1.0;

    void validate() const;
};

/// constant: base; decreasing: base / (n + 1).
double step_size(const StepSchedule& schedule, std::int64_t n);

struct PeriodStats {
    double x = 0.0;
    double y = 0.0;
    std::int64_t tau = 0;
    std::int64_t delay_blocks = 0;
    std::int64_t arrivals = 0;
    std::int64_t posted = 0;
    double cost = 0.0;
    /// Closed at the block cap instead of by a post.
    bool force_closed = false;
};

/// Adds one block: x += arrivals*fee - block_cost, y += lambda_bar - arrivals,
/// tau += 1, delay_blocks += queue_after.
PeriodStats accumulate_block(PeriodStats stats, std::int64_t arrivals, double fee, double block_cost,
                             double lambda_bar, std::int64_t queue_after = 0);

double project(double x, const FeeBounds& bounds);

/// Regime flag: 1 budget balance, 0 congestion control.
inline constexpr int kBudgetRegime = 1;
inline constexpr int kCongestionRegime = 0;

/// adaptive switches regimes; the other two modes pin one update rule.
enum class ControllerMode { adaptive, budget_only, congestion_only };

struct ControllerState {
    double g = 0.0;
    int delta = kBudgetRegime;
    double f_last = 0.0;
    double p_last = 0.0;
    double x_last = 0.0;
    double y_last = 0.0;
    std::int64_t i = 0;
    std::int64_t j = 0;
    int kappa = 1;
    FeeBounds bounds;
    StepSchedule step_f;
    StepSchedule step_p;
    double lambda_bar = 120.0;
    ControllerMode mode = ControllerMode::adaptive;

    /// g = f_last = p_last = lambda0/(4k), delta = 1 (0 for congestion_only),
    /// zero observations and counters.
    static ControllerState initial(const DemandModel& demand, const StepSchedule& step_f,
                                   const StepSchedule& step_p, int kappa, double lambda_bar,
                                   ControllerMode mode = ControllerMode::adaptive);
    void validate() const;
};

/// f_last <- project(f_last - step_f(i) * x_obs); i += 1; g <- f_last.
double update_budget_fee(ControllerState& state, double x_obs);
/// p_last <- project(p_last - step_p(j) * y_obs); j += 1; g <- p_last.
double update_congestion_fee(ControllerState& state, double y_obs);

struct Decision {
    int delta_next = kBudgetRegime;
    double fee_next = 0.0;
    /// Batch means per posting.
    double x_obs = 0.0;
    double y_obs = 0.0;
};

/// Consumes one batch of kappa periods observed at fee state.g under
/// state.delta, records it as that regime's latest observation and applies
/// the next update.
Decision select_next(ControllerState& state, std::span<const PeriodStats> batch);

}  // namespace l2lab
