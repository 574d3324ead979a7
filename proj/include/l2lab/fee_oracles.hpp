#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "l2lab/cost.hpp"
#include "l2lab/dynamics.hpp"
#include "l2lab/mdp.hpp"
#include "l2lab/policy_cache.hpp"
#include "l2lab/stochastic.hpp"

namespace l2lab {

/// Admissible fee interval [0, lambda0/(2k)].
struct FeeBounds {
    double lo = 0.0;
    double hi = 0.0;

    static FeeBounds from_demand(const DemandModel& demand) { return {0.0, demand.lambda0 / (2.0 * demand.k)}; }
    [[nodiscard]] bool contains(double f) const { return f >= lo && f <= hi; }
};

struct PnlEstimate {
    double fee = 0.0;
    double revenue = 0.0;
    double expected_cost = 0.0;
    double pnl = 0.0;
    double std_err = 0.0;
};

/// Regime-flag transitions at frozen optimal fees; state 1 is budget balance,
/// state 0 congestion control, and pXY = Pr(next = Y | current = X).
struct SwitchMatrix {
    double p00 = 1.0;
    double p01 = 0.0;
    double p10 = 0.0;
    double p11 = 1.0;

    void validate() const;
};

class ConditionViolated : public std::runtime_error {
public:
    ConditionViolated(const std::string& what, double margin) : std::runtime_error(what), margin_(margin) {}
    /// Signed distance to the violated bound.
    [[nodiscard]] double margin() const { return margin_; }

private:
    double margin_;
};

class NoSignChange : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (lambda0 - lambda_bar) / k; requires lambda0/2 <= lambda_bar <= lambda0.
double congestion_fee_closed_form(const DemandModel& demand, double lambda_bar);

struct ExistenceCheck {
    bool holds = false;
    double margin = 0.0;
};

/// lambda0^2/(4k) >= (b0 + b1*lambda0)*mu
ExistenceCheck check_existence_condition(const DemandModel& demand, const CostParams& cost, double mu);

struct McConfig {
    std::int64_t n_blocks = 1'000'000;
    int batches = 100;
    std::uint64_t seed = 42;
    std::uint64_t replica = 0;

    void validate() const;
};

struct CostEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::int64_t posts = 0;
};

/// Time-average stage cost of the closed loop at a fixed fee, after a burn-in
/// of n_blocks/10, with a batch-means standard error. Identical McConfig
/// values give common random numbers across fees.
CostEstimate estimate_expected_cost(double fee, const MdpSolution& solution, const SystemModel& model,
                                    const McConfig& mc);

PnlEstimate expected_pnl(double fee, const MdpSolution& solution, const SystemModel& model, const McConfig& mc);

struct BisectionConfig {
    double fee_tol = 1e-8;
    int max_probes = 64;
};

struct BudgetBalanceResult {
    double fee = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    /// Estimate at the returned fee.
    PnlEstimate at_root;
    std::vector<PnlEstimate> probes;
};

/// Bisection for the root of the expected pnl on [0, lambda0/(2k)], re-solving
/// the posting policy at every probe fee through the cache.
BudgetBalanceResult find_budget_balance_fee(PolicyCache& cache, const McConfig& mc,
                                            const BisectionConfig& bisection = {});

struct RenewalResult {
    double lhs = 0.0;
    double lhs_std_err = 0.0;
    double rhs = 0.0;
    double rhs_std_err = 0.0;
    double rel_gap = 0.0;
    double mean_tau = 0.0;
    double tau_std_err = 0.0;
    std::int64_t periods = 0;
};

inline constexpr double kRenewalEpsilon = 1e-12;

/// Compares the mean per-period pnl against E[tau] times the per-block pnl.
/// The per-block side uses the analytic revenue and an independently seeded
/// cost estimate, so the two sides share no samples.
RenewalResult renewal_check(double fee, const MdpSolution& solution, const SystemModel& model, const McConfig& mc);

/// Long-run fractions (pi_f, pi_p) of budget-balance and congestion updates.
std::pair<double, double> stationary_split(const SwitchMatrix& m);

}  // namespace l2lab
