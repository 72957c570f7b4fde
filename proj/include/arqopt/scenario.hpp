#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arqopt/costs.hpp"
#include "arqopt/lfp.hpp"
#include "arqopt/model.hpp"
#include "arqopt/sim.hpp"

#include "json.hpp"

namespace arqopt {

/// A cost reference in a scenario file: a builtin kind plus an optional
/// 1-based source (absent = sum over sources).
struct CostSpec {
    CostKind kind = CostKind::unit;
    std::optional<int> source;

    std::string id() const { return builtin_cost_id(kind, source); }
};

/// One constraint, before the bound is fixed. Convenience types desugar to
/// the generic ratio form:
///   min_throughput    : -throughput/unit        <= -value
///   max_delay         :  queue_len/arrival      <=  value
///   min_delivery_prob : -success_slot/service_start <= -value
struct ConstraintSpec {
    std::string name;
    std::string type;  // min_throughput | max_delay | min_delivery_prob | ratio
    std::optional<int> source;
    double value = 0.0;
    // generic ratio form
    CostSpec numerator;
    CostSpec denominator;
    double beta = 1.0;
    double lambda = 0.0;

    Metric metric(double bound_value) const;
    Metric metric() const { return metric(value); }
};

struct SweepAxis {
    std::string constraint;       // name of the swept constraint
    std::vector<double> values;   // user-facing bound values, monotone
};

struct Scenario {
    std::string name;
    int version = 1;
    NetworkConfig network;
    CostSpec objective_num;
    CostSpec objective_den;
    double objective_beta = 1.0;
    double objective_lambda = 0.0;
    std::vector<ConstraintSpec> constraints;
    std::vector<SweepAxis> sweep;  // 0 = single solve, 1 = curve, 2 = grid
    SimConfig sim;
    bool symmetrize = false;  // average the occupancy over the source relabeling
                              // (valid only for source-permutation-invariant scenarios)

    Metric objective_metric() const;
    const ConstraintSpec& constraint(const std::string& name) const;
};

Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const Scenario& s);

/// Model plus the costs and metrics a scenario needs, built once per scenario.
struct BoundScenario {
    Scenario scenario;
    Model model;
    CostSet costs;
    std::vector<Metric> report_metrics;  // per-source + aggregate standard metrics

    explicit BoundScenario(Scenario s);
};

struct ResultRow {
    std::vector<double> sweep_values;
    std::string status;  // optimal | infeasible | unbounded | error: ...
    bool feasible = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
    int randomized_states = -1;
    std::map<std::string, double> predicted;
    std::map<std::string, RatioEstimate> simulated;
    double tv_distance = std::numeric_limits<double>::quiet_NaN();
};

struct RunOptions {
    bool with_sim = true;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> slots;
    lp::SolveOptions lp;
};

/// Solve a single grid point (constraint bounds overridden by the sweep
/// values, in axis order). Exposes the full solution for file emission.
struct PointSolution {
    ResultRow row;
    LfpSolution lfp;
    std::vector<Metric> metrics;  // objective + constraints + report metrics
};

PointSolution solve_point(const BoundScenario& bound, const std::vector<double>& sweep_values,
                          const RunOptions& options);

/// Full sweep in grid order (second axis fastest). Per-point solver errors
/// are captured in the row status; the run continues.
std::vector<ResultRow> run_sweep(const BoundScenario& bound, const RunOptions& options);

/// The sweep grid in row emission order.
std::vector<std::vector<double>> sweep_grid(const Scenario& s);

void write_results_csv(std::ostream& os, const BoundScenario& bound,
                       const std::vector<ResultRow>& rows);

/// Per-state transmit probabilities for two-source models: marginal per
/// source plus the probability both transmit, one row per (x1, x2).
void dump_policy_map(std::ostream& os, const Model& model, const Policy& policy);

/// Mean transmit probability of `source` over joint states selected by a
/// filter on the two sources' local states (two-source models).
double mean_transmit_prob(const Model& model, const Policy& policy, int source,
                          const std::function<bool(SourceState, SourceState)>& filter);

}  // namespace arqopt
