#include "l2lab/fee_oracles.hpp"

#include <cmath>
#include <sstream>

namespace l2lab {

namespace {

struct RunningMoments {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    [[nodiscard]] double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    [[nodiscard]] double std_err() const { return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

void SwitchMatrix::validate() const {
    for (double v : {p00, p01, p10, p11}) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("SwitchMatrix: entries must lie in [0, 1]");
    }
    if (std::abs(p00 + p01 - 1.0) > 1e-12 || std::abs(p10 + p11 - 1.0) > 1e-12) {
        throw std::invalid_argument("SwitchMatrix: rows must sum to 1");
    }
}

double congestion_fee_closed_form(const DemandModel& demand, double lambda_bar) {
    demand.validate();
    const double lo = demand.lambda0 / 2.0;
    if (lambda_bar < lo) {
        throw ConditionViolated("congestion fee requires lambda_bar >= lambda0/2 = " + fmt(lo) + ", got " +
                                    fmt(lambda_bar),
                                lambda_bar - lo);
    }
    if (lambda_bar > demand.lambda0) {
        throw ConditionViolated("congestion fee requires lambda_bar <= lambda0 = " + fmt(demand.lambda0) + ", got " +
                                    fmt(lambda_bar),
                                demand.lambda0 - lambda_bar);
    }
    return (demand.lambda0 - lambda_bar) / demand.k;
}

ExistenceCheck check_existence_condition(const DemandModel& demand, const CostParams& cost, double mu) {
    const double peak_revenue = demand.lambda0 * demand.lambda0 / (4.0 * demand.k);
    const double margin = peak_revenue - (cost.b0 + cost.b1 * demand.lambda0) * mu;
    return {margin >= 0.0, margin};
}

void McConfig::validate() const {
    if (n_blocks < 10'000) throw std::invalid_argument("Monte-Carlo runs need at least 10^4 blocks");
    if (batches < 2) throw std::invalid_argument("Monte-Carlo runs need at least 2 batches");
    if (n_blocks < batches) throw std::invalid_argument("Monte-Carlo blocks must be >= batches");
}

CostEstimate estimate_expected_cost(double fee, const MdpSolution& solution, const SystemModel& model,
                                    const McConfig& mc) {
    mc.validate();
    const PoissonSampler sampler(arrival_rate(model.demand, fee));
    BlockDriver driver(model, mc.seed, mc.replica);
    SystemState state = initial_state(model);

    std::int64_t burn_posts = 0;
    for (std::int64_t t = 0; t < mc.n_blocks / 10; ++t) {
        if (driver.step(state, sampler, solution).posted > 0) ++burn_posts;
    }
    if (burn_posts == 0 && state.queue >= solution.q_max) {
        throw DivergenceError("estimate_expected_cost: queue pinned at " + std::to_string(state.queue) +
                              " with no posts during burn-in at fee " + fmt(fee));
    }

    CostEstimate out;
    RunningMoments batch_means;
    const std::int64_t per_batch = mc.n_blocks / mc.batches;
    double total = 0.0;
    std::int64_t counted = 0;
    for (int b = 0; b < mc.batches; ++b) {
        const std::int64_t len = (b + 1 == mc.batches) ? mc.n_blocks - per_batch * (mc.batches - 1) : per_batch;
        double sum = 0.0;
        for (std::int64_t t = 0; t < len; ++t) {
            const BlockOutcome o = driver.step(state, sampler, solution);
            sum += o.cost;
            if (o.posted > 0) ++out.posts;
        }
        total += sum;
        counted += len;
        batch_means.add(sum / static_cast<double>(len));
    }
    out.mean = total / static_cast<double>(counted);
    out.std_err = batch_means.std_err();
    return out;
}

PnlEstimate expected_pnl(double fee, const MdpSolution& solution, const SystemModel& model, const McConfig& mc) {
    const CostEstimate cost = estimate_expected_cost(fee, solution, model, mc);
    PnlEstimate out;
    out.fee = fee;
    out.revenue = (model.demand.lambda0 - model.demand.k * fee) * fee;
    if (arrival_rate(model.demand, fee) == 0.0) out.revenue = 0.0;
    out.expected_cost = cost.mean;
    out.pnl = out.revenue - cost.mean;
    out.std_err = cost.std_err;
    return out;
}

BudgetBalanceResult find_budget_balance_fee(PolicyCache& cache, const McConfig& mc, const BisectionConfig& bisection) {
    const SystemModel& model = cache.model();
    const ExistenceCheck existence = check_existence_condition(model.demand, model.cost, model.price.mu);
    if (!existence.holds) {
        throw ConditionViolated("budget-balance fee does not exist: lambda0^2/(4k) < (b0 + b1*lambda0)*mu, margin " +
                                    fmt(existence.margin),
                                existence.margin);
    }
    if (!(bisection.fee_tol > 0.0)) throw std::invalid_argument("bisection fee_tol must be > 0");

    BudgetBalanceResult result;
    auto probe = [&](double fee) {
        PnlEstimate est = expected_pnl(fee, cache.exact(fee), model, mc);
        result.probes.push_back(est);
        return est;
    };

    const FeeBounds bounds = FeeBounds::from_demand(model.demand);
    double lo = bounds.lo;
    double hi = bounds.hi;
    const PnlEstimate at_lo = probe(lo);
    if (std::abs(at_lo.pnl) <= at_lo.std_err) {
        result.fee = result.lo = result.hi = lo;
        result.at_root = at_lo;
        return result;
    }
    const PnlEstimate at_hi = probe(hi);
    if (at_hi.pnl < -3.0 * at_hi.std_err) {
        throw NoSignChange("expected pnl stays negative on the admissible interval: pnl(" + fmt(hi) +
                           ") = " + fmt(at_hi.pnl) + " +/- " + fmt(at_hi.std_err) + ", pnl(0) = " +
                           fmt(at_lo.pnl) + ", existence margin " + fmt(existence.margin));
    }

    while (hi - lo > bisection.fee_tol && static_cast<int>(result.probes.size()) < bisection.max_probes) {
        const double mid = 0.5 * (lo + hi);
        const PnlEstimate est = probe(mid);
        if (std::abs(est.pnl) <= est.std_err) {
            result.fee = mid;
            result.lo = lo;
            result.hi = hi;
            result.at_root = est;
            return result;
        }
        if (est.pnl < 0.0) lo = mid;
        else hi = mid;
    }
    result.lo = lo;
    result.hi = hi;
    result.fee = 0.5 * (lo + hi);
    result.at_root = probe(result.fee);
    return result;
}

RenewalResult renewal_check(double fee, const MdpSolution& solution, const SystemModel& model, const McConfig& mc) {
    mc.validate();
    const double rate = arrival_rate(model.demand, fee);
    const PoissonSampler sampler(rate);
    BlockDriver driver(model, mc.seed, mc.replica);
    SystemState state = initial_state(model);

    RunningMoments x_moments;
    RunningMoments tau_moments;
    bool started = false;
    double x = 0.0;
    std::int64_t tau = 0;
    for (std::int64_t t = 0; t < mc.n_blocks; ++t) {
        const BlockOutcome o = driver.step(state, sampler, solution);
        if (started) {
            x += static_cast<double>(o.arrivals) * fee - o.cost;
            ++tau;
        }
        if (o.posted > 0) {
            if (started) {
                x_moments.add(x);
                tau_moments.add(static_cast<double>(tau));
            }
            started = true;
            x = 0.0;
            tau = 0;
        }
    }
    if (x_moments.n < 100) {
        throw std::runtime_error("renewal_check: only " + std::to_string(x_moments.n) +
                                 " complete posting periods observed (need >= 100)");
    }

    McConfig independent = mc;
    independent.replica = mc.replica + 1;
    const CostEstimate cost = estimate_expected_cost(fee, solution, model, independent);
    const double block_pnl = rate * fee - cost.mean;

    RenewalResult out;
    out.periods = x_moments.n;
    out.lhs = x_moments.mean;
    out.lhs_std_err = x_moments.std_err();
    out.mean_tau = tau_moments.mean;
    out.tau_std_err = tau_moments.std_err();
    out.rhs = out.mean_tau * block_pnl;
    out.rhs_std_err = std::hypot(out.tau_std_err * block_pnl, out.mean_tau * cost.std_err);
    out.rel_gap = std::abs(out.lhs - out.rhs) / (std::abs(out.rhs) + kRenewalEpsilon);
    return out;
}

std::pair<double, double> stationary_split(const SwitchMatrix& m) {
    m.validate();
    const double denom = m.p01 + m.p10;
    if (!(denom > 0.0)) throw std::invalid_argument("stationary_split: both regimes absorbing (p01 = p10 = 0)");
    const double pi_f = m.p01 / denom;
    return {pi_f, 1.0 - pi_f};
}

}  // namespace l2lab
