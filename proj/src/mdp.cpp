#include "l2lab/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace l2lab {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Number of Poisson outcomes tabulated beyond q_max; the remaining mass is
// below 1e-40 for every rate this library sees.
std::size_t arrival_table_size(int q_max, double rate) {
    return static_cast<std::size_t>(q_max) + static_cast<std::size_t>(std::ceil(rate + 14.0 * std::sqrt(rate) + 40.0));
}

// Banded expectation operator over truncated arrivals:
//   W[r] = sum_{a < q_max - r} pmf[a] * J[r + a] + tail[r] * J[q_max] + excess[r] * slope
struct ArrivalKernel {
    int q_max = 0;
    std::vector<double> pmf;
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::vector<double> tail;
    std::vector<double> excess;

    ArrivalKernel(int q_max_, double rate) : q_max(q_max_) {
        pmf = poisson_pmf(rate, arrival_table_size(q_max, rate));
        constexpr double kNegligible = 1e-30;
        lo = 0;
        while (lo + 1 < pmf.size() && pmf[lo] < kNegligible) ++lo;
        hi = pmf.size() - 1;
        while (hi > lo && pmf[hi] < kNegligible) --hi;

        // Upper-tail sums from the far end for accuracy.
        std::vector<double> upper(pmf.size() + 1, 0.0);
        std::vector<double> upper_mean(pmf.size() + 1, 0.0);
        for (std::size_t a = pmf.size(); a-- > 0;) {
            upper[a] = upper[a + 1] + pmf[a];
            upper_mean[a] = upper_mean[a + 1] + pmf[a] * static_cast<double>(a);
        }
        tail.resize(static_cast<std::size_t>(q_max) + 1);
        excess.resize(static_cast<std::size_t>(q_max) + 1);
        for (int r = 0; r <= q_max; ++r) {
            const auto m = static_cast<std::size_t>(q_max - r);
            tail[r] = upper[m];
            excess[r] = upper_mean[m] - static_cast<double>(m) * upper[m];
        }
    }

    void apply(const RowMatrix& J, const Eigen::RowVectorXd& slope, RowMatrix& W) const {
        const Eigen::Index top = q_max;
        for (int r = 0; r <= q_max; ++r) {
            auto row = W.row(r);
            row = tail[r] * J.row(top) + excess[r] * slope;
            const auto m = static_cast<std::size_t>(q_max - r);
            if (m == 0 || lo >= m) continue;
            const std::size_t a_end = std::min(m - 1, hi);
            for (std::size_t a = lo; a <= a_end; ++a) row.noalias() += pmf[a] * J.row(r + static_cast<Eigen::Index>(a));
        }
    }
};

struct Backups {
    RowMatrix hold;
    RowMatrix post;
};

class PolicySolver {
public:
    PolicySolver(const PriceGrid& grid, const DemandModel& demand, double fee, const CostParams& cost,
                 const MdpConfig& config)
        : grid_(grid),
          cost_(cost),
          q_max_(config.q_max),
          n_(static_cast<Eigen::Index>(grid.size())),
          rate_(arrival_rate(demand, fee)),
          kernel_(config.q_max, rate_) {
        T_ = Eigen::Map<const RowMatrix>(grid.transition.data(), n_, n_);
        const auto slope = overflow_slope(grid, cost);
        slope_ = Eigen::Map<const Eigen::RowVectorXd>(slope.data(), n_);
        W_.resize(q_max_ + 1, n_);
        V_.resize(q_max_ + 1, n_);
        prices_ = Eigen::Map<const Eigen::RowVectorXd>(grid.points.data(), n_);
    }

    [[nodiscard]] double rate() const { return rate_; }
    [[nodiscard]] const Eigen::RowVectorXd& slope() const { return slope_; }

    // V = E[continuation] for every remaining-queue level and current price.
    void continuation(const RowMatrix& J) {
        if (grid_.mode == PriceMode::iid) {
            // Identical rows: collapse the price dimension before the arrival sum.
            const Eigen::VectorXd t = T_.row(0).transpose();
            const Eigen::VectorXd u = J * t;
            const double slope_mean = slope_.dot(t.transpose());
            for (int r = 0; r <= q_max_; ++r) {
                double acc = kernel_.tail[r] * u(q_max_) + kernel_.excess[r] * slope_mean;
                const auto m = static_cast<std::size_t>(q_max_ - r);
                if (m > 0 && kernel_.lo < m) {
                    const std::size_t a_end = std::min(m - 1, kernel_.hi);
                    for (std::size_t a = kernel_.lo; a <= a_end; ++a) acc += kernel_.pmf[a] * u(r + static_cast<Eigen::Index>(a));
                }
                V_.row(r).setConstant(acc);
            }
            return;
        }
        kernel_.apply(J, slope_, W_);
        V_.noalias() = W_ * T_.transpose();
    }

    double hold_value(int q, Eigen::Index i) const { return cost_.a * q + cost_.gamma * V_(q, i); }
    double post_value(int q, Eigen::Index i) const {
        if (q == 0) return hold_value(0, i);
        return (cost_.b0 + cost_.b1 * q) * prices_(i) + cost_.gamma * V_(0, i);
    }

    // One application of the fixed-policy Bellman operator; returns sup-norm change.
    double sweep(const std::vector<Action>& policy, RowMatrix& J) {
        continuation(J);
        double diff = 0.0;
        for (int q = 0; q <= q_max_; ++q) {
            for (Eigen::Index i = 0; i < n_; ++i) {
                const auto idx = static_cast<std::size_t>(q) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
                const double next = policy[idx] == Action::post_all ? post_value(q, i) : hold_value(q, i);
                diff = std::max(diff, std::abs(next - J(q, i)));
                J(q, i) = next;
            }
        }
        return diff;
    }

    // Greedy policy with ties broken toward hold; returns the Bellman residual.
    double improve(const RowMatrix& J, std::vector<Action>& policy) {
        continuation(J);
        double residual = 0.0;
        for (int q = 0; q <= q_max_; ++q) {
            for (Eigen::Index i = 0; i < n_; ++i) {
                const double h = hold_value(q, i);
                const double p = post_value(q, i);
                const auto idx = static_cast<std::size_t>(q) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
                policy[idx] = (q > 0 && p < h) ? Action::post_all : Action::hold;
                residual = std::max(residual, std::abs(std::min(h, p) - J(q, i)));
            }
        }
        return residual;
    }

private:
    const PriceGrid& grid_;
    CostParams cost_;
    int q_max_;
    Eigen::Index n_;
    double rate_;
    ArrivalKernel kernel_;
    RowMatrix T_;
    Eigen::RowVectorXd slope_;
    Eigen::RowVectorXd prices_;
    RowMatrix W_;
    RowMatrix V_;
};

}  // namespace

std::size_t PriceGrid::nearest(double p) const {
    const auto it = std::lower_bound(points.begin(), points.end(), p);
    if (it == points.begin()) return 0;
    if (it == points.end()) return points.size() - 1;
    const auto hi = static_cast<std::size_t>(it - points.begin());
    return (p - points[hi - 1] <= points[hi] - p) ? hi - 1 : hi;
}

void MdpConfig::validate() const {
    if (q_max < 1) throw std::invalid_argument("mdp.q_max must be >= 1");
    if (n_price < 3) throw std::invalid_argument("mdp.n_price must be >= 3");
    if (!(grid_width_sds > 0.0)) throw std::invalid_argument("mdp.grid_width_sds must be > 0");
    if (max_iters < 1) throw std::invalid_argument("mdp.max_iters must be >= 1");
    if (max_sweeps < 1) throw std::invalid_argument("mdp.max_sweeps must be >= 1");
}

double MdpConfig::resolved_tol(const CostParams& cost) const {
    return tol > 0.0 ? tol : 1e-12 * cost.a * static_cast<double>(q_max);
}

std::size_t MdpSolution::price_index(double p) const {
    const auto it = std::lower_bound(prices.begin(), prices.end(), p);
    if (it == prices.begin()) return 0;
    if (it == prices.end()) return prices.size() - 1;
    const auto hi = static_cast<std::size_t>(it - prices.begin());
    return (p - prices[hi - 1] <= prices[hi] - p) ? hi - 1 : hi;
}

PriceGrid build_price_grid(const PriceModel& model, const MdpConfig& config) {
    model.validate();
    config.validate();
    double scale = 0.0;
    if (model.mode == PriceMode::ar1) {
        scale = model.theta > 0.0 ? stationary_std(model) : model.sigma;
    } else {
        scale = model.iid_std;
    }
    // A noiseless process still needs a non-degenerate grid around mu.
    const double half_width = scale > 0.0 ? config.grid_width_sds * scale : 0.5 * model.mu;
    const double lo = std::max(model.floor, model.mu - half_width);
    const double hi = model.mu + half_width;
    if (!(hi > model.floor) || !(hi > lo)) throw std::invalid_argument("build_price_grid: degenerate price grid");

    const auto n = static_cast<std::size_t>(config.n_price);
    PriceGrid grid;
    grid.mode = model.mode;
    grid.points.resize(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) grid.points[i] = lo + step * static_cast<double>(i);
    grid.points[n - 1] = hi;

    // Cell j covers [edge[j], edge[j+1]); outer cells absorb the tails.
    std::vector<double> edges(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) edges[j] = 0.5 * (grid.points[j] + grid.points[j + 1]);

    grid.transition.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double mean = model.mu;
        double sd = model.iid_std;
        if (model.mode == PriceMode::ar1) {
            mean = model.theta * model.mu + (1.0 - model.theta) * grid.points[i];
            sd = model.sigma;
        }
        double* row = &grid.transition[i * n];
        if (sd <= 0.0) {
            row[grid.nearest(std::max(model.floor, mean))] = 1.0;
            continue;
        }
        double prev = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const double c = normal_cdf((edges[j] - mean) / sd);
            row[j] = c - prev;
            prev = c;
        }
        row[n - 1] = normal_cdf(-(edges[n - 2] - mean) / sd);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += row[j];
        for (std::size_t j = 0; j < n; ++j) row[j] /= total;
    }
    return grid;
}

std::vector<double> overflow_slope(const PriceGrid& grid, const CostParams& cost) {
    const std::size_t n = grid.size();
    std::vector<double> m(n, 0.0);
    std::vector<double> next(n, 0.0);
    for (int iter = 0; iter < 100000; ++iter) {
        double diff = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double expect = 0.0;
            for (std::size_t j = 0; j < n; ++j) expect += grid.prob(i, j) * m[j];
            next[i] = std::min(cost.b1 * grid.points[i], cost.a + cost.gamma * expect);
            diff = std::max(diff, std::abs(next[i] - m[i]));
            scale = std::max(scale, std::abs(next[i]));
        }
        m.swap(next);
        if (diff <= 1e-15 * scale) break;
    }
    return m;
}

MdpSolution solve(const PriceGrid& grid, const DemandModel& demand, double fee, const CostParams& cost,
                  const MdpConfig& config, const MdpSolution* warm) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    cost.validate();
    demand.validate();
    if (static_cast<int>(grid.size()) != config.n_price) {
        throw std::invalid_argument("solve: price grid size does not match mdp.n_price");
    }
    PolicySolver solver(grid, demand, fee, cost, config);
    if (!std::isfinite(solver.rate())) throw SolveError("solve: arrival rate is not finite");

    const double tol = config.resolved_tol(cost);
    // Early rounds evaluate to a looser tolerance; the final round always
    // re-evaluates at tol and re-checks policy stability.
    const double loose_tol = 1e4 * tol;

    const auto n = static_cast<Eigen::Index>(grid.size());
    const auto states = static_cast<std::size_t>(config.q_max + 1) * static_cast<std::size_t>(n);
    RowMatrix J = RowMatrix::Zero(config.q_max + 1, n);
    std::vector<Action> policy(states, Action::hold);
    if (warm != nullptr && warm->q_max == config.q_max && warm->value.size() == states && warm->prices == grid.points) {
        J = Eigen::Map<const RowMatrix>(warm->value.data(), config.q_max + 1, n);
        policy = warm->policy;
    } else {
        solver.improve(J, policy);  // myopic start
    }

    SolveStats stats;
    double current_tol = loose_tol;
    bool converged = false;
    std::vector<Action> next_policy(states);
    while (stats.policy_iterations < config.max_iters) {
        ++stats.policy_iterations;
        int sweeps = 0;
        double diff = 0.0;
        do {
            diff = solver.sweep(policy, J);
            ++sweeps;
        } while (diff >= current_tol && sweeps < config.max_sweeps);
        stats.sweeps += sweeps;
        if (!std::isfinite(diff)) throw SolveError("solve: non-finite value during policy evaluation");
        if (diff >= current_tol) throw SolveError("solve: policy evaluation did not reach tolerance");

        stats.bellman_residual = solver.improve(J, next_policy);
        if (next_policy == policy) {
            if (current_tol == tol) {
                converged = true;
                break;
            }
            current_tol = tol;
        }
        policy.swap(next_policy);
    }
    if (!converged) {
        throw SolveError("solve: policy iteration did not converge within " + std::to_string(config.max_iters) +
                         " rounds");
    }

    MdpSolution sol;
    sol.q_max = config.q_max;
    sol.fee = fee;
    sol.arrival_rate = solver.rate();
    sol.prices = grid.points;
    sol.value.assign(J.data(), J.data() + states);
    for (double v : sol.value) {
        if (!std::isfinite(v)) throw SolveError("solve: non-finite value in solution");
    }
    sol.policy = std::move(policy);
    sol.overflow_slope.assign(solver.slope().data(), solver.slope().data() + n);
    sol.thresholds = extract_thresholds(sol);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    sol.stats = stats;
    return sol;
}

std::vector<int> extract_thresholds(const MdpSolution& solution) {
    const std::size_t n = solution.n_price();
    std::vector<int> thresholds(n, solution.q_max);
    for (std::size_t i = 0; i < n; ++i) {
        int switches = 0;
        bool bad = solution.action_at(0, i) != Action::hold;
        for (int q = 1; q <= solution.q_max; ++q) {
            const Action prev = solution.action_at(q - 1, i);
            const Action cur = solution.action_at(q, i);
            if (prev != cur) {
                ++switches;
                if (cur == Action::hold) bad = true;
                else thresholds[i] = q - 1;
            }
        }
        if (bad || switches > 1) throw ThresholdViolation(i, switches);
    }
    return thresholds;
}

FullActionOracle::FullActionOracle(const MdpSolution& solution, const PriceGrid& grid, const DemandModel& demand,
                                   double fee, const CostParams& cost)
    : solution_(solution), grid_(grid), cost_(cost) {
    const int q_max = solution.q_max;
    const std::size_t n = grid.size();
    pmf_ = poisson_pmf(arrival_rate(demand, fee), arrival_table_size(q_max, arrival_rate(demand, fee)));
    const auto& slope = solution.overflow_slope;

    // Continuation after leaving r transactions queued, written out term by term.
    std::vector<double> expect_next(static_cast<std::size_t>(q_max + 1) * n, 0.0);
    for (int r = 0; r <= q_max; ++r) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t a = 0; a < pmf_.size(); ++a) {
                const long next_q = r + static_cast<long>(a);
                if (next_q <= q_max) {
                    acc += pmf_[a] * solution.value_at(static_cast<int>(next_q), j);
                } else {
                    acc += pmf_[a] * (solution.value_at(q_max, j) + static_cast<double>(next_q - q_max) * slope[j]);
                }
            }
            expect_next[static_cast<std::size_t>(r) * n + j] = acc;
        }
    }
    cont_.assign(expect_next.size(), 0.0);
    for (int r = 0; r <= q_max; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grid.prob(i, j) * expect_next[static_cast<std::size_t>(r) * n + j];
            cont_[static_cast<std::size_t>(r) * n + i] = cost.gamma * acc;
        }
    }
}

double FullActionOracle::continuation(int r, std::size_t i) const {
    return cont_[static_cast<std::size_t>(r) * grid_.size() + i];
}

BackupResult FullActionOracle::backup(int q, std::size_t i) const {
    BackupResult best{0, stage_cost(q, 0, grid_.points[i], cost_) + continuation(q, i)};
    for (int s = 1; s <= q; ++s) {
        const double v = stage_cost(q, s, grid_.points[i], cost_) + continuation(q - s, i);
        if (v < best.best_value) best = {s, v};
    }
    (void)solution_;
    return best;
}

BackupResult bellman_backup_full(const MdpSolution& solution, int q, std::size_t i, const PriceGrid& grid,
                                 const DemandModel& demand, double fee, const CostParams& cost) {
    return FullActionOracle(solution, grid, demand, fee, cost).backup(q, i);
}

}  // namespace l2lab
