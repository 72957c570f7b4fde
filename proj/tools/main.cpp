// arqopt command line: solve, sweep, simulate and validate transmit/drop
// policy scenarios described by JSON files. CSV output is the contract;
// plotting is left to whatever consumes the files.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"

#include "arqopt/lfp.hpp"
#include "arqopt/scenario.hpp"
#include "arqopt/sim.hpp"

namespace fs = std::filesystem;
using namespace arqopt;

namespace {

struct CommonArgs {
    std::string config;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::uint64_t slots = 0;
    bool slots_set = false;
    bool no_sim = false;
    std::string tableau_dump;
    bool echo_config = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "scenario JSON file")->required();
    cmd->add_option("--out", args.out_dir, "output directory (default: .)");
    cmd->add_option("--seed", args.seed, "simulation seed override")
        ->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_option("--slots", args.slots, "simulation slot count override")
        ->each([&](const std::string&) { args.slots_set = true; });
    cmd->add_flag("--no-sim", args.no_sim, "skip the Monte Carlo validation run");
    cmd->add_option("--dump-tableau", args.tableau_dump, "write LP tableau dumps to this file");
    cmd->add_flag("--echo-config", args.echo_config, "print the resolved scenario and exit");
}

RunOptions make_options(const CommonArgs& args, std::ofstream& tableau_stream) {
    RunOptions opts;
    opts.with_sim = !args.no_sim;
    if (args.seed_set) opts.seed = args.seed;
    if (args.slots_set) opts.slots = args.slots;
    if (!args.tableau_dump.empty()) {
        tableau_stream.open(args.tableau_dump);
        if (!tableau_stream) throw std::runtime_error("cannot open " + args.tableau_dump);
        opts.lp.tableau_dump = &tableau_stream;
    }
    return opts;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
}

void print_point(const BoundScenario& bound, const PointSolution& point) {
    std::cout << std::setprecision(10);
    std::cout << "status: " << point.row.status << "\n";
    if (point.lfp.status != lp::LpStatus::optimal) return;
    std::cout << "objective: " << point.row.objective << "\n";
    std::cout << "feasible: " << (point.row.feasible ? "yes" : "no") << "\n";
    std::cout << "randomized states: " << point.row.randomized_states
              << " (constraints: " << bound.scenario.constraints.size() << ")\n";
    std::cout << "transient states: " << point.lfp.policy.transient_states.size() << "\n";
    std::cout << "\n  metric              predicted";
    if (!point.row.simulated.empty()) std::cout << "      simulated        SE";
    std::cout << "\n";
    for (const Metric& m : point.metrics) {
        std::cout << "  " << std::left << std::setw(18) << m.id << std::right << "  "
                  << std::setw(13) << point.row.predicted.at(m.id);
        auto it = point.row.simulated.find(m.id);
        if (it != point.row.simulated.end()) {
            std::cout << "  " << std::setw(13) << it->second.value << "  " << std::setw(12)
                      << it->second.std_error;
        }
        std::cout << "\n";
    }
    if (!std::isnan(point.row.tv_distance)) {
        std::cout << "\nempirical/predicted occupancy TV distance: " << point.row.tv_distance
                  << "\n";
    }
}

int cmd_solve(const CommonArgs& args, bool sim_only_print) {
    std::ofstream tableau;
    const RunOptions opts = make_options(args, tableau);
    BoundScenario bound(load_scenario(args.config));
    if (args.echo_config) {
        std::cout << to_json(bound.scenario).dump(2) << "\n";
        return 0;
    }
    const auto grid = sweep_grid(bound.scenario);
    const PointSolution point = solve_point(bound, grid.front(), opts);
    print_point(bound, point);
    if (point.lfp.status != lp::LpStatus::optimal) return 1;

    if (!sim_only_print) {
        const fs::path dir(args.out_dir);
        auto occ = open_out(dir, "occupancy.csv");
        write_occupancy_csv(occ, bound.model, point.lfp.omega);
        auto pol = open_out(dir, "policy.csv");
        write_policy_csv(pol, bound.model, point.lfp.policy);
        if (bound.model.source_count() == 2) {
            auto map = open_out(dir, "policy_map.csv");
            dump_policy_map(map, bound.model, point.lfp.policy);
        }
        auto res = open_out(dir, "results.csv");
        write_results_csv(res, bound, {point.row});
        std::cout << "\nwrote occupancy.csv, policy.csv"
                  << (bound.model.source_count() == 2 ? ", policy_map.csv" : "")
                  << ", results.csv to " << dir.string() << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    std::ofstream tableau;
    const RunOptions opts = make_options(args, tableau);
    BoundScenario bound(load_scenario(args.config));
    if (args.echo_config) {
        std::cout << to_json(bound.scenario).dump(2) << "\n";
        return 0;
    }
    const auto rows = run_sweep(bound, opts);
    auto res = open_out(args.out_dir, "results.csv");
    write_results_csv(res, bound, rows);
    int feasible = 0;
    for (const ResultRow& row : rows) feasible += row.feasible;
    std::cout << rows.size() << " sweep points (" << feasible << " feasible) -> "
              << (fs::path(args.out_dir) / "results.csv").string() << "\n";
    return 0;
}

int cmd_policy_map(const CommonArgs& args) {
    std::ofstream tableau;
    RunOptions opts = make_options(args, tableau);
    opts.with_sim = false;
    BoundScenario bound(load_scenario(args.config));
    const auto grid = sweep_grid(bound.scenario);
    const PointSolution point = solve_point(bound, grid.front(), opts);
    if (point.lfp.status != lp::LpStatus::optimal) {
        std::cout << "status: " << point.row.status << "\n";
        return 1;
    }
    auto map = open_out(args.out_dir, "policy_map.csv");
    dump_policy_map(map, bound.model, point.lfp.policy);
    std::cout << "wrote " << (fs::path(args.out_dir) / "policy_map.csv").string() << "\n";
    return 0;
}

int check(bool ok, const std::string& what, int& failures) {
    std::cout << (ok ? "[ ok ] " : "[FAIL] ") << what << "\n";
    if (!ok) ++failures;
    return failures;
}

int cmd_validate(const CommonArgs& args) {
    std::ofstream tableau;
    RunOptions opts = make_options(args, tableau);
    BoundScenario bound(load_scenario(args.config));
    const Model& model = bound.model;
    int failures = 0;

    // model invariants
    double worst_row_sum = 0.0;
    for (int p = 0; p < model.pair_count(); ++p) {
        double total = 0.0;
        for (const auto& [xn, prob] : model.transition_row(p)) total += prob;
        worst_row_sum = std::max(worst_row_sum, std::fabs(total - 1.0));
    }
    check(worst_row_sum <= 1e-12, "transition rows sum to 1 (max residual " +
                                      std::to_string(worst_row_sum) + ")", failures);

    bool forced_ok = true;
    for (int x = 0; x < model.state_count(); ++x) {
        for (const JointAction& u : model.legal_actions(x)) {
            for (int s = 0; s < model.source_count(); ++s) {
                const SourceState& xs = model.state(x).source[s];
                if (xs.empty() && (u.source[s].transmit || u.source[s].drop)) forced_ok = false;
                if (!xs.empty() && xs.service == model.max_service_time() && !u.source[s].drop) {
                    forced_ok = false;
                }
            }
        }
    }
    check(forced_ok, "forced-action rules hold on every legal action", failures);

    const int classes = recurrent_class_count(model, uniform_policy(model));
    check(true, "recurrent classes under the uniform policy: " + std::to_string(classes) +
                    (classes == 1 ? "" : " (warning: not unichain)"), failures);

    // first-point solve and its invariants
    const auto grid = sweep_grid(bound.scenario);
    opts.with_sim = false;
    const PointSolution point = solve_point(bound, grid.front(), opts);
    check(point.lfp.status == lp::LpStatus::optimal, "LP status optimal", failures);
    if (point.lfp.status == lp::LpStatus::optimal) {
        const OccupancyMeasure& om = point.lfp.omega;
        check(om.sum_residual() <= 1e-8, "occupancy sums to 1", failures);
        check(om.balance_residual(model) <= 1e-8, "occupancy balance residual <= 1e-8", failures);
        const auto verify_rep = lp::verify(point.lfp.lp_problem, point.lfp.lp_solution);
        check(verify_rep.ok(1e-8), "LP verification (" + verify_rep.format() + ")", failures);
        const double lp_obj = bound.scenario.objective_beta == 0.0
                                  ? 0.0
                                  : point.lfp.lp_solution.objective;
        check(std::fabs(lp_obj + bound.scenario.objective_lambda - point.row.objective) <= 1e-8,
              "transform identity (ratio objective equals LP objective)", failures);
        check(point.row.feasible, "all constraints satisfied at the optimum", failures);
        check(point.row.randomized_states <=
                  static_cast<int>(bound.scenario.constraints.size()),
              "randomized states (" + std::to_string(point.row.randomized_states) +
                  ") within the constraint count", failures);

        SimConfig sim_cfg = bound.scenario.sim;
        if (opts.seed) sim_cfg.seed = *opts.seed;
        if (args.slots_set) sim_cfg.slots = args.slots;
        if (!args.no_sim) {
            const MetricsAccumulator acc = simulate(model, point.lfp.policy, bound.costs, sim_cfg);
            bool sim_ok = true;
            std::string worst;
            for (const Metric& m : point.metrics) {
                const RatioEstimate est = empirical_metric(acc, m);
                const double err = std::fabs(est.value - point.row.predicted.at(m.id));
                if (err > 3.0 * est.std_error + 1e-9) {
                    sim_ok = false;
                    worst = m.id + " off by " + std::to_string(err);
                }
            }
            check(sim_ok, "simulated metrics within 3 SE of predictions" +
                              (worst.empty() ? "" : " (" + worst + ")"), failures);
            double tv = 0.0;
            for (int p = 0; p < model.pair_count(); ++p) {
                tv += std::fabs(acc.pair_frequency(p) - point.lfp.omega.omega[p]);
            }
            tv *= 0.5;
            check(tv <= 0.02, "state-action frequency TV distance " + std::to_string(tv) +
                                  " <= 0.02", failures);
        }
    }

    std::cout << (failures == 0 ? "all checks passed\n"
                                : std::to_string(failures) + " check(s) failed\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constrained transmit/drop policy optimization for slotted ARQ networks"};
    app.require_subcommand(1);

    CommonArgs solve_args, sweep_args, sim_args, map_args, validate_args;
    CLI::App* solve_cmd = app.add_subcommand("solve", "solve one scenario point, write CSVs");
    add_common(solve_cmd, solve_args);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the scenario sweep, write results.csv");
    add_common(sweep_cmd, sweep_args);
    CLI::App* sim_cmd =
        app.add_subcommand("simulate", "solve and print the prediction/simulation comparison");
    add_common(sim_cmd, sim_args);
    CLI::App* map_cmd = app.add_subcommand("policy-map", "write the per-state transmit map");
    add_common(map_cmd, map_args);
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "run the invariant suite on a scenario");
    add_common(validate_cmd, validate_args);

    CLI11_PARSE(app, argc, argv);
    try {
        if (solve_cmd->parsed()) return cmd_solve(solve_args, false);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
        if (sim_cmd->parsed()) return cmd_solve(sim_args, true);
        if (map_cmd->parsed()) return cmd_policy_map(map_args);
        if (validate_cmd->parsed()) return cmd_validate(validate_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
