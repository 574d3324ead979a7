// Discretized posting MDP over (queue length, L1 price).
//
// The state is the queue length q in 0..q_max and a price-grid index i. Each
// block the sequencer either holds or posts the whole queue; the solver runs
// policy iteration over that binary action set and reports the per-price
// thresholds Q*(i) such that posting happens iff q > Q*(i).
//
// Queue truncation: arrivals that would push the queue beyond q_max land in
// the boundary state and are charged the asymptotic marginal cost of a
// queued transaction, m(p) = min(b1*p, a + gamma*E[m(P') | p]), per excess
// transaction. Without that surcharge, overflow arrivals would vanish for
// free and holding at the cap would look artificially attractive.
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "l2lab/cost.hpp"
#include "l2lab/stochastic.hpp"

namespace l2lab {

struct PriceGrid {
    PriceMode mode = PriceMode::ar1;
    std::vector<double> points;
    /// Row-major n x n; transition[i*n + j] = Pr(points[i] -> points[j]).
    std::vector<double> transition;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] double prob(std::size_t i, std::size_t j) const { return transition[i * points.size() + j]; }
    /// Index of the grid point closest to p (clamped to the grid range).
    [[nodiscard]] std::size_t nearest(double p) const;
};

struct MdpConfig {
    int q_max = 200;
    int n_price = 101;
    double grid_width_sds = 4.0;
    /// Policy-evaluation tolerance in ETH. Non-positive means 1e-12 * a * q_max.
    double tol = 0.0;
    /// Cap on policy-improvement rounds.
    int max_iters = 100;
    /// Cap on evaluation sweeps per round.
    int max_sweeps = 200000;

    void validate() const;
    [[nodiscard]] double resolved_tol(const CostParams& cost) const;
};

enum class Action : std::uint8_t { hold = 0, post_all = 1 };

struct SolveStats {
    int policy_iterations = 0;
    long sweeps = 0;
    double bellman_residual = 0.0;
    double seconds = 0.0;
};

struct MdpSolution {
    int q_max = 0;
    double fee = 0.0;
    double arrival_rate = 0.0;
    std::vector<double> prices;
    /// (q_max + 1) x n_price, index q * n_price + i.
    std::vector<double> value;
    std::vector<Action> policy;
    std::vector<int> thresholds;
    std::vector<double> overflow_slope;
    SolveStats stats;

    [[nodiscard]] std::size_t n_price() const { return prices.size(); }
    [[nodiscard]] double value_at(int q, std::size_t i) const { return value[static_cast<std::size_t>(q) * n_price() + i]; }
    [[nodiscard]] Action action_at(int q, std::size_t i) const { return policy[static_cast<std::size_t>(q) * n_price() + i]; }
    [[nodiscard]] std::size_t price_index(double p) const;
    /// Threshold rule for any queue length (including q > q_max).
    [[nodiscard]] bool posts(std::int64_t q, double price) const { return q > thresholds[price_index(price)]; }
};

class ThresholdViolation : public std::runtime_error {
public:
    ThresholdViolation(std::size_t column, int switches)
        : std::runtime_error("policy column " + std::to_string(column) + " is not single-switch (" +
                             std::to_string(switches) + " switches)"),
          column_(column) {}
    [[nodiscard]] std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

PriceGrid build_price_grid(const PriceModel& model, const MdpConfig& config);

/// Asymptotic marginal cost of one more queued transaction at each grid price.
std::vector<double> overflow_slope(const PriceGrid& grid, const CostParams& cost);

/// warm, when given and shape-compatible, seeds the value function and the
/// initial policy (typically a solution at a nearby fee).
MdpSolution solve(const PriceGrid& grid, const DemandModel& demand, double fee, const CostParams& cost,
                  const MdpConfig& config, const MdpSolution* warm = nullptr);

/// Validates the single-switch form of every price column and returns Q*(i).
std::vector<int> extract_thresholds(const MdpSolution& solution);

struct BackupResult {
    int best_action = 0;
    double best_value = 0.0;
};

/// Full-action Bellman backup: evaluates every s in 0..q against the
/// solution's value function. Shares nothing with the solver's banded
/// expectation code; it expands the transition sum directly.
class FullActionOracle {
public:
    FullActionOracle(const MdpSolution& solution, const PriceGrid& grid, const DemandModel& demand, double fee,
                     const CostParams& cost);

    [[nodiscard]] BackupResult backup(int q, std::size_t i) const;
    /// Expected discounted continuation from remaining queue r at price index i.
    [[nodiscard]] double continuation(int r, std::size_t i) const;

private:
    const MdpSolution& solution_;
    const PriceGrid& grid_;
    CostParams cost_;
    std::vector<double> pmf_;
    std::vector<double> cont_;  // (q_max + 1) x n
};

BackupResult bellman_backup_full(const MdpSolution& solution, int q, std::size_t i, const PriceGrid& grid,
                                 const DemandModel& demand, double fee, const CostParams& cost);

}  // namespace l2lab
