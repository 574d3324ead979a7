#include "l2lab/dynamics.hpp"

namespace l2lab {

void SystemModel::validate() const {
    price.validate();
    demand.validate();
    cost.validate();
}

BlockDriver::BlockDriver(const SystemModel& model, std::uint64_t seed, std::uint64_t replica)
    : model_(model),
      price_rng_(make_stream(seed, replica, StreamRole::price)),
      arrival_rng_(make_stream(seed, replica, StreamRole::arrivals)) {}

BlockOutcome BlockDriver::step(SystemState& state, const PoissonSampler& arrivals, const MdpSolution& policy) {
    BlockOutcome out;
    out.arrivals = arrivals(arrival_rng_);
    state.queue += out.arrivals;
    state.price = step_price(state.price, model_.price, price_rng_);
    if (state.queue > 0 && policy.posts(state.queue, state.price.p)) out.posted = state.queue;
    out.cost = stage_cost(state.queue, out.posted, state.price.p, model_.cost);
    state.queue -= out.posted;
    out.queue_after = state.queue;
    return out;
}

SystemState initial_state(const SystemModel& model) {
    SystemState state;
    state.price.p = model.price.mu;
    return state;
}

}  // namespace l2lab
