// Per-block cost, the analytic cost bound and delay compensation.
#pragma once

#include <cstdint>

#include "l2lab/stochastic.hpp"

namespace l2lab {

/// a is in ETH per waiting tx per block. b0 and b1 are gas-unit quantities
/// that are multiplied by the L1 price (ETH per gas unit).
struct CostParams {
    double a = 1e-5;
    double b0 = 1000.0;
    double b1 = 500.0;
    double gamma = 0.95;

    void validate() const;
};

/// a*(q - s) + (b0 + b1*s)*p*[s > 0]
double stage_cost(std::int64_t q, std::int64_t s, double p, const CostParams& params);

/// Upper bound on the stationary expected cost at fee f:
/// (b0 + b1*lambda0 - b1*k*f) * mu, valid for 0 <= f <= lambda0/k.
double cost_upper_bound(double f, const CostParams& params, const DemandModel& demand, double mu);

/// Refund owed for total_delay_blocks transaction-blocks of waiting.
double compensation_owed(std::int64_t total_delay_blocks, const CostParams& params);

}  // namespace l2lab
