#include "l2lab/controller.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace l2lab {

void StepSchedule::validate() const {
    if (!(base > 0.0)) throw std::invalid_argument("step schedule base must be > 0");
}

double step_size(const StepSchedule& schedule, std::int64_t n) {
    if (n < 0) throw std::invalid_argument("step_size: update count must be >= 0");
    if (schedule.kind == StepKind::constant) return schedule.base;
    return schedule.base / static_cast<double>(n + 1);
}

PeriodStats accumulate_block(PeriodStats stats, std::int64_t arrivals, double fee, double block_cost,
                             double lambda_bar, std::int64_t queue_after) {
    stats.x += static_cast<double>(arrivals) * fee - block_cost;
    stats.y += lambda_bar - static_cast<double>(arrivals);
    stats.tau += 1;
    stats.delay_blocks += queue_after;
    stats.arrivals += arrivals;
    stats.cost += block_cost;
    return stats;
}

double project(double x, const FeeBounds& bounds) { return std::min(bounds.hi, std::max(bounds.lo, x)); }

ControllerState ControllerState::initial(const DemandModel& demand, const StepSchedule& step_f,
                                         const StepSchedule& step_p, int kappa, double lambda_bar,
                                         ControllerMode mode) {
    ControllerState s;
    s.bounds = FeeBounds::from_demand(demand);
    s.g = demand.lambda0 / (4.0 * demand.k);
    s.f_last = s.g;
    s.p_last = s.g;
    s.delta = mode == ControllerMode::congestion_only ? kCongestionRegime : kBudgetRegime;
    s.kappa = kappa;
    s.step_f = step_f;
    s.step_p = step_p;
    s.lambda_bar = lambda_bar;
    s.mode = mode;
    s.validate();
    return s;
}

void ControllerState::validate() const {
    if (kappa < 1) throw std::invalid_argument("controller kappa must be >= 1");
    step_f.validate();
    step_p.validate();
    for (double v : {g, f_last, p_last}) {
        if (!bounds.contains(v)) throw std::invalid_argument("controller fee outside the admissible interval");
    }
    if (delta != kBudgetRegime && delta != kCongestionRegime) throw std::invalid_argument("controller delta must be 0 or 1");
}

double update_budget_fee(ControllerState& state, double x_obs) {
    state.f_last = project(state.f_last - step_size(state.step_f, state.i) * x_obs, state.bounds);
    ++state.i;
    state.g = state.f_last;
    return state.g;
}

double update_congestion_fee(ControllerState& state, double y_obs) {
    state.p_last = project(state.p_last - step_size(state.step_p, state.j) * y_obs, state.bounds);
    ++state.j;
    state.g = state.p_last;
    return state.g;
}

Decision select_next(ControllerState& state, std::span<const PeriodStats> batch) {
    if (batch.size() != static_cast<std::size_t>(state.kappa)) {
        throw std::invalid_argument("select_next: batch has " + std::to_string(batch.size()) + " periods, kappa is " +
                                    std::to_string(state.kappa));
    }
    double x_sum = 0.0;
    double y_sum = 0.0;
    for (const auto& p : batch) {
        x_sum += p.x;
        y_sum += p.y;
    }
    Decision d;
    d.x_obs = x_sum / static_cast<double>(state.kappa);
    d.y_obs = y_sum / static_cast<double>(state.kappa);

    if (state.delta == kBudgetRegime) {
        state.f_last = state.g;
        state.x_last = d.x_obs;
    } else {
        state.p_last = state.g;
        state.y_last = d.y_obs;
    }

    bool to_budget = false;
    switch (state.mode) {
        case ControllerMode::budget_only: to_budget = true; break;
        case ControllerMode::congestion_only: to_budget = false; break;
        case ControllerMode::adaptive:
            to_budget = state.delta == kBudgetRegime ? !(y_sum < 0.0) : x_sum < 0.0;
            break;
    }
    if (to_budget) {
        state.delta = kBudgetRegime;
        update_budget_fee(state, state.x_last);
    } else {
        state.delta = kCongestionRegime;
        update_congestion_fee(state, state.y_last);
    }
    d.delta_next = state.delta;
    d.fee_next = state.g;
    return d;
}

}  // namespace l2lab
