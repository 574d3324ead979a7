#include "l2lab/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <thread>

namespace l2lab {

void ScenarioConfig::validate() const {
    model.validate();
    mdp.validate();
    if (horizon_updates < 1) throw std::invalid_argument("sim.horizon_updates must be >= 1");
    if (replicas < 1) throw std::invalid_argument("sim.replicas must be >= 1");
    if (kappa < 1) throw std::invalid_argument("controller.kappa must be >= 1");
    if (tau_max < 1) throw std::invalid_argument("tau_max must be >= 1");
    if (fee_lattice < 2) throw std::invalid_argument("fee lattice needs at least 2 points");
    schedule_f().validate();
    schedule_p().validate();
    const double lo = model.demand.lambda0 / 2.0;
    if (lambda_bar < lo || lambda_bar > model.demand.lambda0) {
        if (!allow_any_lambda_bar) {
            throw std::invalid_argument("controller.lambda_bar must lie in [lambda0/2, lambda0]");
        }
        std::cerr << "warning: lambda_bar " << lambda_bar << " lies outside [lambda0/2, lambda0]\n";
    }
}

StepSchedule ScenarioConfig::schedule_f() const {
    return {step_kind, step_kind == StepKind::constant ? step_f_const : step_f};
}

StepSchedule ScenarioConfig::schedule_p() const {
    return {step_kind, step_kind == StepKind::constant ? step_p_const : step_p};
}

PeriodStats run_posting_period(double g, const MdpSolution& policy, const PoissonSampler& arrivals,
                               SystemState& state, BlockDriver& driver, double lambda_bar, std::int64_t tau_max) {
    PeriodStats stats;
    while (stats.tau < tau_max) {
        const BlockOutcome o = driver.step(state, arrivals, policy);
        stats = accumulate_block(stats, o.arrivals, g, o.cost, lambda_bar, o.queue_after);
        if (o.posted > 0) {
            stats.posted = o.posted;
            return stats;
        }
    }
    stats.force_closed = true;
    return stats;
}

int worker_threads() {
    int n = 0;
    if (const char* env = std::getenv("L2LAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 0) throw std::invalid_argument("L2LAB_THREADS must be a non-negative integer");
        n = static_cast<int>(v);
    }
    if (n == 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

Trajectory run_replica(const ScenarioConfig& config, PolicyCache& cache, std::uint64_t replica) {
    const SystemModel& model = config.model;
    BlockDriver driver(model, config.seed, replica);
    SystemState state = initial_state(model);
    ControllerState ctrl = ControllerState::initial(model.demand, config.schedule_f(), config.schedule_p(),
                                                    config.kappa, config.lambda_bar, config.mode);

    Trajectory out;
    out.records.reserve(static_cast<std::size_t>(config.horizon_updates));
    ReplicaSummary& sum = out.summary;
    sum.replica = replica;
    std::vector<PeriodStats> batch(static_cast<std::size_t>(config.kappa));

    for (std::int64_t u = 0; u < config.horizon_updates; ++u) {
        const double g = ctrl.g;
        const MdpSolution& policy = cache.lattice(g);
        const PoissonSampler arrivals(arrival_rate(model.demand, g));
        std::int64_t batch_tau = 0;
        for (auto& period : batch) {
            period = run_posting_period(g, policy, arrivals, state, driver, config.lambda_bar, config.tau_max);
            batch_tau += period.tau;
            sum.total_arrivals += period.arrivals;
            sum.total_posted += period.posted;
            sum.total_delay_blocks += period.delay_blocks;
            if (period.force_closed) ++sum.forced_closes;
        }
        sum.blocks += batch_tau;
        const Decision d = select_next(ctrl, batch);

        UpdateRecord r;
        r.update_index = u;
        r.block_index = sum.blocks;
        r.delta = d.delta_next;
        r.g = ctrl.g;
        r.f_last = ctrl.f_last;
        r.p_last = ctrl.p_last;
        r.x_obs = d.x_obs;
        r.y_obs = d.y_obs;
        r.tau = batch_tau;
        r.i = ctrl.i;
        r.j = ctrl.j;
        const auto decisions = static_cast<double>(ctrl.i + ctrl.j);
        r.i_frac = static_cast<double>(ctrl.i) / decisions;
        r.j_frac = static_cast<double>(ctrl.j) / decisions;
        out.records.push_back(r);
    }

    sum.final_f = ctrl.f_last;
    sum.final_p = ctrl.p_last;
    sum.final_g = ctrl.g;
    sum.i_frac = out.records.back().i_frac;
    sum.j_frac = out.records.back().j_frac;
    sum.final_queue = state.queue;
    sum.mean_queue = static_cast<double>(sum.total_delay_blocks) / static_cast<double>(std::max<std::int64_t>(1, sum.blocks));
    sum.total_compensation = compensation_owed(sum.total_delay_blocks, model.cost);
    return out;
}

std::vector<Trajectory> run_scenario(const ScenarioConfig& config, PolicyCache& cache) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.replicas);
    std::vector<Trajectory> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t r = next++; r < n; r = next++) {
            try {
                results[r] = run_replica(config, cache, r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(worker_threads()));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

PolicyCache make_policy_cache(const ScenarioConfig& config) {
    return PolicyCache(config.model, config.mdp, config.fee_lattice, FeeBounds::from_demand(config.model.demand).hi);
}

namespace {

// Fraction of kappa-period batches at a frozen fee whose summed statistic is negative.
double negative_batch_fraction(PolicyCache& cache, double fee, const SwitchEstimateConfig& cfg, std::uint64_t replica,
                               bool use_x) {
    const SystemModel& model = cache.model();
    const MdpSolution& policy = cache.exact(fee);
    const PoissonSampler arrivals(arrival_rate(model.demand, fee));
    BlockDriver driver(model, cfg.seed, replica);
    SystemState state = initial_state(model);
    std::int64_t negative = 0;
    for (std::int64_t b = 0; b < cfg.n_batches; ++b) {
        double total = 0.0;
        for (int k = 0; k < cfg.kappa; ++k) {
            const PeriodStats p = run_posting_period(fee, policy, arrivals, state, driver, cfg.lambda_bar, cfg.tau_max);
            total += use_x ? p.x : p.y;
        }
        if (total < 0.0) ++negative;
    }
    return static_cast<double>(negative) / static_cast<double>(cfg.n_batches);
}

}  // namespace

SwitchMatrix estimate_switch_matrix(PolicyCache& cache, double fee_f, double fee_p, const SwitchEstimateConfig& cfg) {
    if (cfg.n_batches < 1) throw std::invalid_argument("estimate_switch_matrix: n_batches must be >= 1");
    if (cfg.kappa < 1) throw std::invalid_argument("estimate_switch_matrix: kappa must be >= 1");
    SwitchMatrix m;
    m.p10 = negative_batch_fraction(cache, fee_f, cfg, cfg.stream_base, false);
    m.p11 = 1.0 - m.p10;
    m.p01 = negative_batch_fraction(cache, fee_p, cfg, cfg.stream_base + 1, true);
    m.p00 = 1.0 - m.p01;
    return m;
}

std::vector<KappaRow> kappa_sweep(PolicyCache& cache, double fee_f, double fee_p, const std::vector<int>& kappas,
                                  const SwitchEstimateConfig& base, double separation_tol) {
    if (std::abs(fee_f - fee_p) <= separation_tol) {
        throw std::invalid_argument("kappa_sweep: budget-balance and congestion fees coincide within tolerance");
    }
    std::vector<KappaRow> rows;
    for (int kappa : kappas) {
        SwitchEstimateConfig cfg = base;
        cfg.kappa = kappa;
        KappaRow row;
        row.kappa = kappa;
        row.matrix = estimate_switch_matrix(cache, fee_f, fee_p, cfg);
        const auto [pi_f, pi_p] = stationary_split(row.matrix);
        row.pi_f = pi_f;
        row.pi_p = pi_p;
        row.minority = std::min(pi_f, pi_p);
        rows.push_back(row);
    }
    return rows;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"iid-dec", "iid-const", "ar1-dec", "ar1-const"};
    return names;
}

ScenarioConfig apply_scenario(ScenarioConfig config, const std::string& name) {
    if (name == "iid-dec" || name == "iid-const") config.model.price.mode = PriceMode::iid;
    else if (name == "ar1-dec" || name == "ar1-const") config.model.price.mode = PriceMode::ar1;
    else {
        std::string valid;
        for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown scenario '" + name + "' (valid: " + valid + ")");
    }
    config.step_kind = name.ends_with("-dec") ? StepKind::decreasing : StepKind::constant;
    return config;
}

}  // namespace l2lab
