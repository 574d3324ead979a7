// Closed-loop experiments: posting periods, controller scenarios, regime
// switch-matrix estimation and the kappa sweep.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2lab/controller.hpp"
#include "l2lab/dynamics.hpp"
#include "l2lab/fee_oracles.hpp"
#include "l2lab/mdp.hpp"
#include "l2lab/policy_cache.hpp"

namespace l2lab {

inline constexpr std::int64_t kDefaultTauMax = 10'000;

struct ScenarioConfig {
    SystemModel model;
    MdpConfig mdp;
    StepKind step_kind = StepKind::decreasing;
    /// Step bases for the decreasing schedule.
    double step_f = 5e-3;
    double step_p = 5e-7;
    /// Step bases for the constant schedule.
    double step_f_const = 5e-5;
    double step_p_const = 5e-9;
    int kappa = 1;
    double lambda_bar = 120.0;
    ControllerMode mode = ControllerMode::adaptive;
    std::int64_t horizon_updates = 50'000;
    std::uint64_t seed = 42;
    int replicas = 10;
    std::int64_t tau_max = kDefaultTauMax;
    std::size_t fee_lattice = 256;
    /// Permit lambda_bar outside [lambda0/2, lambda0] (a warning is still logged).
    bool allow_any_lambda_bar = false;

    void validate() const;
    [[nodiscard]] StepSchedule schedule_f() const;
    [[nodiscard]] StepSchedule schedule_p() const;
};

struct UpdateRecord {
    std::int64_t update_index = 0;
    /// Blocks elapsed at the end of the batch.
    std::int64_t block_index = 0;
    int delta = kBudgetRegime;
    double g = 0.0;
    double f_last = 0.0;
    double p_last = 0.0;
    double x_obs = 0.0;
    double y_obs = 0.0;
    std::int64_t tau = 0;
    std::int64_t i = 0;
    std::int64_t j = 0;
    double i_frac = 0.0;
    double j_frac = 0.0;
};

struct ReplicaSummary {
    std::uint64_t replica = 0;
    double final_f = 0.0;
    double final_p = 0.0;
    double final_g = 0.0;
    double i_frac = 0.0;
    double j_frac = 0.0;
    double mean_queue = 0.0;
    double total_compensation = 0.0;
    std::int64_t blocks = 0;
    std::int64_t total_arrivals = 0;
    std::int64_t total_posted = 0;
    std::int64_t final_queue = 0;
    std::int64_t total_delay_blocks = 0;
    std::int64_t forced_closes = 0;
};

struct Trajectory {
    std::vector<UpdateRecord> records;
    ReplicaSummary summary;
};

/// Runs blocks at fee g until the threshold policy posts or tau_max blocks
/// have elapsed. The posting block's cost is part of the period.
PeriodStats run_posting_period(double g, const MdpSolution& policy, const PoissonSampler& arrivals,
                               SystemState& state, BlockDriver& driver, double lambda_bar,
                               std::int64_t tau_max = kDefaultTauMax);

/// Worker count from L2LAB_THREADS (0 or unset means hardware concurrency).
int worker_threads();

/// One replica of the closed loop. Deterministic in (config.seed, replica).
Trajectory run_replica(const ScenarioConfig& config, PolicyCache& cache, std::uint64_t replica);

/// All replicas, fanned out over worker_threads(); result order is by replica.
std::vector<Trajectory> run_scenario(const ScenarioConfig& config, PolicyCache& cache);

/// Cache matching a scenario's model and solver settings.
PolicyCache make_policy_cache(const ScenarioConfig& config);

struct SwitchEstimateConfig {
    std::int64_t n_batches = 10'000;
    int kappa = 1;
    double lambda_bar = 120.0;
    std::uint64_t seed = 42;
    /// Replica ids used for the two frozen-fee runs are stream_base and stream_base + 1.
    std::uint64_t stream_base = 1'000'000;
    std::int64_t tau_max = kDefaultTauMax;
};

/// p11/p10 from kappa-period batches at fee_f, p00/p01 from batches at fee_p.
SwitchMatrix estimate_switch_matrix(PolicyCache& cache, double fee_f, double fee_p, const SwitchEstimateConfig& cfg);

struct KappaRow {
    int kappa = 1;
    SwitchMatrix matrix;
    double pi_f = 0.0;
    double pi_p = 0.0;
    double minority = 0.0;
};

/// Requires |fee_f - fee_p| > separation_tol.
std::vector<KappaRow> kappa_sweep(PolicyCache& cache, double fee_f, double fee_p, const std::vector<int>& kappas,
                                  const SwitchEstimateConfig& base, double separation_tol = 1e-8);

/// Scenario presets: iid-dec, iid-const, ar1-dec, ar1-const.
ScenarioConfig apply_scenario(ScenarioConfig config, const std::string& name);
const std::vector<std::string>& scenario_names();

}  // namespace l2lab
