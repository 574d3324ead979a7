// One-block closed-loop dynamics shared by the Monte-Carlo oracles and the
// scenario simulator.
#pragma once

#include <cstdint>

#include "l2lab/cost.hpp"
#include "l2lab/mdp.hpp"
#include "l2lab/stochastic.hpp"

namespace l2lab {

struct SystemModel {
    PriceModel price;
    DemandModel demand;
    CostParams cost;

    void validate() const;
};

struct SystemState {
    std::int64_t queue = 0;
    PriceState price;
};

struct BlockOutcome {
    std::int64_t arrivals = 0;
    std::int64_t posted = 0;
    double cost = 0.0;
    std::int64_t queue_after = 0;
};

/// Owns the price and arrival streams of one replica.
///
/// Within a block: arrivals join the queue, the price moves, the threshold
/// policy decides on the new (queue, price) pair and the stage cost is
/// charged. The price path depends only on the price stream, and arrivals
/// consume one uniform per block, so runs at different fees share common
/// random numbers.
class BlockDriver {
public:
    BlockDriver(const SystemModel& model, std::uint64_t seed, std::uint64_t replica);

    BlockOutcome step(SystemState& state, const PoissonSampler& arrivals, const MdpSolution& policy);

    [[nodiscard]] const SystemModel& model() const { return model_; }

private:
    SystemModel model_;
    RngStream price_rng_;
    RngStream arrival_rng_;
};

/// Starting state of every replica: empty queue at the long-run mean price.
SystemState initial_state(const SystemModel& model);

}  // namespace l2lab
