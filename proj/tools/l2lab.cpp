#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "l2lab/config.hpp"
#include "l2lab/csv.hpp"
#include "l2lab/fee_oracles.hpp"
#include "l2lab/mdp.hpp"
#include "l2lab/simulator.hpp"
#include "l2lab/svg_plot.hpp"
#include "l2lab/verify.hpp"

namespace fs = std::filesystem;
using namespace l2lab;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quick = false;
};

ScenarioConfig resolve_config(const GlobalOptions& g) {
    ScenarioConfig c = g.config_path.empty() ? ScenarioConfig{} : load_config(g.config_path);
    if (g.seed) c.seed = *g.seed;
    return c;
}

std::string prepare_out(const GlobalOptions& g, const std::string& fallback) {
    const std::string dir = g.out.empty() ? fallback : g.out;
    fs::create_directories(dir);
    return dir;
}

std::string sci(double v, int digits) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(digits) << v;
    return os.str();
}

McConfig mc_for(const ScenarioConfig& c, std::int64_t blocks) {
    McConfig m;
    m.n_blocks = blocks;
    m.seed = c.seed;
    return m;
}

int cmd_solve(const GlobalOptions& g, std::optional<double> fee_opt) {
    ScenarioConfig c = resolve_config(g);
    const double fee = fee_opt ? *fee_opt : congestion_fee_closed_form(c.model.demand, c.lambda_bar);
    const std::string out = prepare_out(g, "l2lab_out/solve");
    write_config(out + "/config.ini", c);
    const auto start = std::chrono::steady_clock::now();
    const PriceGrid grid = build_price_grid(c.model.price, c.mdp);
    const MdpSolution sol = solve(grid, c.model.demand, fee, c.model.cost, c.mdp);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_solution_csv(out + "/solution.csv", sol);
    write_thresholds_csv(out + "/thresholds.csv", sol);
    std::cout << "fee " << sci(fee, 5) << " (arrival rate " << sol.arrival_rate << ")\n"
              << "grid " << c.mdp.q_max + 1 << " x " << c.mdp.n_price << ", " << sol.stats.policy_iterations
              << " policy rounds, " << sol.stats.sweeps << " sweeps, residual " << sci(sol.stats.bellman_residual, 2)
              << "\n"
              << "thresholds Q* from " << sol.thresholds.front() << " (lowest price) to " << sol.thresholds.back()
              << " (highest price)\n"
              << "wall time " << std::fixed << std::setprecision(3) << secs << " s\n"
              << "wrote " << out << "/solution.csv, " << out << "/thresholds.csv\n";
    return 0;
}

int cmd_fees(const GlobalOptions& g) {
    ScenarioConfig c = resolve_config(g);
    const ExistenceCheck ex = check_existence_condition(c.model.demand, c.model.cost, c.model.price.mu);
    std::cout << "existence margin " << sci(ex.margin, 4) << "\n";
    const double p_star = congestion_fee_closed_form(c.model.demand, c.lambda_bar);
    std::cout << "p* = " << sci(p_star, 4) << "\n";
    if (!ex.holds) {
        std::cerr << "error: budget-balance fee does not exist: lambda0^2/(4k) < (b0 + b1*lambda0)*mu (margin "
                  << sci(ex.margin, 4) << ")\n";
        return 1;
    }
    const std::string out = prepare_out(g, "l2lab_out/fees");
    write_config(out + "/config.ini", c);
    PolicyCache cache = make_policy_cache(c);
    const McConfig mc = mc_for(c, g.quick ? 200'000 : 1'000'000);
    const BudgetBalanceResult f = find_budget_balance_fee(cache, mc);
    std::vector<PnlEstimate> curve;
    const double hi = FeeBounds::from_demand(c.model.demand).hi;
    for (int k = 0; k <= 10; ++k) {
        const double fee = hi * k / 10.0;
        curve.push_back(expected_pnl(fee, cache.exact(fee), c.model, mc));
    }
    write_pnl_csv(out + "/pnl_curve.csv", curve);
    write_pnl_csv(out + "/bisection.csv", f.probes);
    std::cout << "f* = " << sci(f.fee, 4) << " (pnl " << sci(f.at_root.pnl, 2) << " +- " << sci(f.at_root.std_err, 2)
              << ", " << f.probes.size() << " probes)\n"
              << "max(f*, p*) = " << sci(std::max(f.fee, p_star), 4) << "\n"
              << "wrote " << out << "/pnl_curve.csv\n";
    return 0;
}

double reference_f_star(PolicyCache& cache, const ScenarioConfig& c, bool quick) {
    return find_budget_balance_fee(cache, mc_for(c, quick ? 100'000 : 200'000)).fee;
}

int cmd_simulate(const GlobalOptions& g, const std::string& scenario, std::optional<int> replicas,
                 std::optional<std::int64_t> horizon) {
    ScenarioConfig c = apply_scenario(resolve_config(g), scenario);
    if (replicas) c.replicas = *replicas;
    if (horizon) c.horizon_updates = *horizon;
    c.validate();
    const std::string out = prepare_out(g, "l2lab_out/" + scenario);
    write_config(out + "/config.ini", c);
    PolicyCache cache = make_policy_cache(c);
    const auto runs = run_scenario(c, cache);
    for (const auto& t : runs) write_trajectory_csv(out + "/trajectory_r" + std::to_string(t.summary.replica) + ".csv", t);
    write_summary_csv(out + "/summary.csv", runs);

    const double p_star = congestion_fee_closed_form(c.model.demand, c.lambda_bar);
    const double f_star = reference_f_star(cache, c, g.quick);
    SwitchEstimateConfig sc;
    sc.kappa = c.kappa;
    sc.lambda_bar = c.lambda_bar;
    sc.seed = c.seed;
    sc.n_batches = g.quick ? 2'000 : 10'000;
    const SwitchMatrix m = estimate_switch_matrix(cache, f_star, p_star, sc);
    write_switch_matrix_csv(out + "/switch_matrix.csv", m);
    write_scenario_plots(out, runs.front(), f_star, p_star, FeeBounds::from_demand(c.model.demand).hi);

    std::cout << "scenario " << scenario << ": " << runs.size() << " replicas x " << c.horizon_updates << " updates\n"
              << "f* = " << sci(f_star, 4) << ", p* = " << sci(p_star, 4) << "\n";
    for (const auto& t : runs) {
        const auto& s = t.summary;
        std::cout << "  replica " << s.replica << ": f " << sci(s.final_f, 4) << ", p " << sci(s.final_p, 4)
                  << ", i/t " << std::fixed << std::setprecision(4) << s.i_frac << std::defaultfloat << "\n";
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_kappa_sweep(const GlobalOptions& g, const std::vector<int>& kappas) {
    ScenarioConfig c = resolve_config(g);
    const std::string out = prepare_out(g, "l2lab_out/kappa_sweep");
    write_config(out + "/config.ini", c);
    PolicyCache cache = make_policy_cache(c);
    const double p_star = congestion_fee_closed_form(c.model.demand, c.lambda_bar);
    const double f_star = find_budget_balance_fee(cache, mc_for(c, g.quick ? 200'000 : 1'000'000)).fee;
    SwitchEstimateConfig sc;
    sc.lambda_bar = c.lambda_bar;
    sc.seed = c.seed;
    sc.n_batches = g.quick ? 5'000 : 20'000;
    const auto rows = kappa_sweep(cache, f_star, p_star, kappas, sc);
    write_kappa_csv(out + "/kappa_sweep.csv", rows);
    std::cout << "f* = " << sci(f_star, 4) << ", p* = " << sci(p_star, 4) << "\n";
    for (const auto& r : rows) {
        std::cout << "  kappa " << std::setw(3) << r.kappa << ": pi_f " << std::fixed << std::setprecision(5) << r.pi_f
                  << ", pi_p " << r.pi_p << ", minority " << r.minority << std::defaultfloat << "\n";
    }
    std::cout << "wrote " << out << "/kappa_sweep.csv\n";
    return 0;
}

int cmd_verify(const GlobalOptions& g) {
    const ScenarioConfig c = resolve_config(g);
    VerifyOptions opt;
    opt.quick = g.quick;
    opt.out_dir = prepare_out(g, "l2lab_out/verify");
    write_config(opt.out_dir + "/config.ini", c);
    const auto results = run_verification(c, opt, std::cout);
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << (results.size() - static_cast<std::size_t>(failed)) << "/" << results.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"l2lab: rollup posting MDP and fee-controller toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config_path, "INI configuration file");
    auto* seed_opt = app.add_option("--seed", seed, "Override the random seed");
    app.add_option("--out", g.out, "Output directory");
    app.add_flag("--quick", g.quick, "Reduced-scale run");

    auto* solve_cmd = app.add_subcommand("solve", "Solve the posting MDP at one fee");
    double fee = 0.0;
    auto* fee_opt = solve_cmd->add_option("--fee", fee, "L2 fee in ETH/tx (default: congestion fee)");

    app.add_subcommand("fees", "Budget-balance and congestion fees with the pnl curve");

    auto* sim_cmd = app.add_subcommand("simulate", "Run a closed-loop scenario");
    std::string scenario;
    sim_cmd->add_option("scenario", scenario, "iid-dec, iid-const, ar1-dec or ar1-const")->required();
    int replicas = 0;
    std::int64_t horizon = 0;
    auto* rep_opt = sim_cmd->add_option("--replicas", replicas, "Replica count")->check(CLI::PositiveNumber);
    auto* hor_opt = sim_cmd->add_option("--horizon", horizon, "Fee updates per replica")->check(CLI::PositiveNumber);

    auto* kappa_cmd = app.add_subcommand("kappa-sweep", "Minority regime proportion versus kappa");
    std::vector<int> kappas{1, 4, 16, 64};
    kappa_cmd->add_option("--kappas", kappas, "Batch sizes")->check(CLI::PositiveNumber);

    app.add_subcommand("verify", "Run the acceptance criteria");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) g.seed = seed;

    try {
        if (*solve_cmd) return cmd_solve(g, *fee_opt ? std::optional<double>(fee) : std::nullopt);
        if (app.got_subcommand("fees")) return cmd_fees(g);
        if (*sim_cmd) {
            return cmd_simulate(g, scenario, *rep_opt ? std::optional<int>(replicas) : std::nullopt,
                                *hor_opt ? std::optional<std::int64_t>(horizon) : std::nullopt);
        }
        if (*kappa_cmd) return cmd_kappa_sweep(g, kappas);
        if (app.got_subcommand("verify")) return cmd_verify(g);
    } catch (const ConditionViolated& e) {
        std::cerr << "error: " << e.what() << " (margin " << e.margin() << ")\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
