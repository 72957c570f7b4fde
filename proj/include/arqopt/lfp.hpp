#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arqopt/costs.hpp"
#include "arqopt/lp.hpp"
#include "arqopt/model.hpp"

namespace arqopt {

/// Steady-state probability of (state, action) pairs under a stationary
/// randomized policy; the decision variable of the fractional program.
struct OccupancyMeasure {
    std::vector<double> omega;  // indexed by the model's pair index

    double sum() const;
    /// |1 - sum(omega)|
    double sum_residual() const;
    /// max over states of |inflow - outflow| under the model's kernel
    double balance_residual(const Model& model) const;
    /// pi(x) = sum_u omega(x,u)
    std::vector<double> state_marginals(const Model& model) const;
};

/// Randomized stationary policy: per-state distribution over legal actions.
struct Policy {
    std::vector<std::vector<double>> action_probs;  // [state][action index]
    std::vector<int> transient_states;              // zero-occupancy states

    /// States where no single action has probability > 1 - threshold.
    int randomization_count(double threshold = 1e-9) const;
    /// Inverse-CDF sample of an action index from a uniform draw in [0,1).
    int sample(int state, double u01) const;
};

/// The fractional program: minimize beta * (num.omega / den.omega) + lambda
/// over occupancy measures, subject to ratio constraints (each metric's
/// bound is required) linearized as
///   (beta_q * z_num + (lambda_q - gamma_q) * z_den) . omega <= 0.
struct LfpProblem {
    const Model* model = nullptr;
    const CostSet* costs = nullptr;
    Metric objective;
    std::vector<Metric> constraints;

    std::vector<double> objective_num;              // per pair
    std::vector<double> objective_den;              // per pair
    std::vector<std::vector<double>> constraint_rows;

    int constraint_count() const { return static_cast<int>(constraints.size()); }
};

LfpProblem assemble(const Model& model, const CostSet& costs, Metric objective,
                    std::vector<Metric> constraints);

/// The equivalent LP in kappa = g * omega: minimize beta * num.kappa subject
/// to the linearized constraint rows (<= 0), the stationarity balance rows
/// (= 0), the denominator normalization den.kappa = 1, and kappa >= 0.
/// g is recovered afterwards as sum(kappa).
lp::LpProblem charnes_cooper(const LfpProblem& problem);

/// Invert the transform: omega = kappa / sum(kappa). Throws when the
/// normalizer is ~0, which signals a non-positive denominator average on the
/// feasible set.
OccupancyMeasure recover(const LfpProblem& problem, const lp::LpSolution& solution);

/// Time-sharing map mu(x,u) = omega(x,u) / sum_u omega(x,u). States with no
/// occupancy are transient and receive the deterministic fallback action:
/// (idle, keep) when legal, else (idle, drop).
Policy extract_policy(const Model& model, const OccupancyMeasure& omega);

struct MetricReport {
    std::map<std::string, double> values;
    std::vector<std::string> violations;  // constraints beyond their bound + slack
    bool feasible() const { return violations.empty(); }
};

/// Evaluate metrics on an occupancy measure; metrics carrying a bound are
/// checked against it with the given slack.
MetricReport predicted_metrics(const OccupancyMeasure& omega, const CostSet& costs,
                               std::span<const Metric> metrics, double slack = 1e-6);

/// Stationary distribution of the chain induced by the policy, by direct
/// linear solve of pi P = pi, sum(pi) = 1. Throws when the system is singular
/// or the residual exceeds 1e-10 ("not unichain under this policy").
std::vector<double> stationary_distribution(const Model& model, const Policy& policy);

/// Number of closed communicating classes of the chain induced by the policy
/// (1 = unichain). Diagnostic only.
int recurrent_class_count(const Model& model, const Policy& policy);

/// Uniform-random policy over legal actions, for the unichain diagnostic.
Policy uniform_policy(const Model& model);

/// End-to-end convenience: assemble -> transform -> solve -> recover.
struct LfpSolution {
    lp::LpStatus status = lp::LpStatus::infeasible;
    OccupancyMeasure omega;
    Policy policy;
    double objective = 0.0;  // beta * ratio + lambda at the optimum
    lp::LpSolution lp_solution;
    lp::LpProblem lp_problem;
};

LfpSolution solve_lfp(const LfpProblem& problem, const lp::SolveOptions& options = {});

/// Exhaustive reference over deterministic stationary policies, for testing.
/// Evaluates each policy's exact stationary averages, filters by the
/// constraints, and returns the best feasible one. Exact for the
/// unconstrained problem (an optimal deterministic policy exists then); a
/// feasible bound otherwise. Throws when the policy count exceeds the guard
/// or no deterministic policy is feasible.
struct BruteForceResult {
    std::vector<int> action_per_state;
    double objective = 0.0;
    long long policies_evaluated = 0;
    long long policies_skipped = 0;  // non-unichain or undefined metrics
};

BruteForceResult brute_force_reference(const Model& model, const CostSet& costs,
                                       const Metric& objective,
                                       std::span<const Metric> constraints,
                                       long long guard = 1000000);

/// CSV emission: one row per pair for omega; one row per state for mu with
/// per-action probabilities padded to the widest action set.
void write_occupancy_csv(std::ostream& os, const Model& model, const OccupancyMeasure& omega);
void write_policy_csv(std::ostream& os, const Model& model, const Policy& policy);

}  // namespace arqopt
