#include "l2lab/cost.hpp"

#include <stdexcept>
#include <string>

namespace l2lab {

void CostParams::validate() const {
    if (!(a > 0.0)) throw std::invalid_argument("cost.a must be > 0");
    if (!(b0 >= 0.0)) throw std::invalid_argument("cost.b0 must be >= 0");
    if (!(b1 >= 0.0)) throw std::invalid_argument("cost.b1 must be >= 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("cost.gamma must lie in (0, 1)");
}

double stage_cost(std::int64_t q, std::int64_t s, double p, const CostParams& params) {
    if (s < 0 || s > q) {
        throw std::invalid_argument("stage_cost: posted count " + std::to_string(s) + " outside [0, " +
                                    std::to_string(q) + "]");
    }
    const double waiting = params.a * static_cast<double>(q - s);
    if (s == 0) return waiting;
    return waiting + (params.b0 + params.b1 * static_cast<double>(s)) * p;
}

double cost_upper_bound(double f, const CostParams& params, const DemandModel& demand, double mu) {
    if (!(f >= 0.0) || f > demand.fee_cap()) {
        throw std::invalid_argument("cost_upper_bound: fee outside [0, lambda0/k]");
    }
    return (params.b0 + params.b1 * demand.lambda0 - params.b1 * demand.k * f) * mu;
}

double compensation_owed(std::int64_t total_delay_blocks, const CostParams& params) {
    if (total_delay_blocks < 0) throw std::invalid_argument("compensation_owed: negative delay");
    return params.a * static_cast<double>(total_delay_blocks);
}

}  // namespace l2lab
