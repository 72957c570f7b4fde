#include "arqopt/lfp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "dense_solve.hpp"

namespace arqopt {

double OccupancyMeasure::sum() const {
    double s = 0.0;
    for (double v : omega) s += v;
    return s;
}

double OccupancyMeasure::sum_residual() const { return std::fabs(1.0 - sum()); }

std::vector<double> OccupancyMeasure::state_marginals(const Model& model) const {
    std::vector<double> pi(model.state_count(), 0.0);
    for (int pi_idx = 0; pi_idx < model.pair_count(); ++pi_idx) {
        pi[model.pair_state(pi_idx)] += omega[pi_idx];
    }
    return pi;
}

double OccupancyMeasure::balance_residual(const Model& model) const {
    std::vector<double> net = state_marginals(model);  // outflow
    for (int p = 0; p < model.pair_count(); ++p) {
        if (omega[p] == 0.0) continue;
        for (const auto& [xn, prob] : model.transition_row(p)) {
            net[xn] -= prob * omega[p];  // inflow
        }
    }
    double r = 0.0;
    for (double v : net) r = std::max(r, std::fabs(v));
    return r;
}

int Policy::randomization_count(double threshold) const {
    int count = 0;
    for (const auto& probs : action_probs) {
        double mx = 0.0;
        for (double p : probs) mx = std::max(mx, p);
        if (mx < 1.0 - threshold) ++count;
    }
    return count;
}

int Policy::sample(int state, double u01) const {
    const auto& probs = action_probs[state];
    double acc = 0.0;
    for (std::size_t a = 0; a + 1 < probs.size(); ++a) {
        acc += probs[a];
        if (u01 < acc) return static_cast<int>(a);
    }
    return static_cast<int>(probs.size()) - 1;
}

LfpProblem assemble(const Model& model, const CostSet& costs, Metric objective,
                    std::vector<Metric> constraints) {
    LfpProblem p;
    p.model = &model;
    p.costs = &costs;
    p.objective_num = costs.at(objective.numerator).expected_values();
    p.objective_den = costs.at(objective.denominator).expected_values();
    p.objective = std::move(objective);

    for (const Metric& c : constraints) {
        if (!c.bound) {
            throw std::invalid_argument("constraint '" + c.id + "' has no bound");
        }
        const auto& num = costs.at(c.numerator).expected_values();
        const auto& den = costs.at(c.denominator).expected_values();
        std::vector<double> row(model.pair_count());
        for (int i = 0; i < model.pair_count(); ++i) {
            row[i] = c.beta * num[i] + (c.lambda - *c.bound) * den[i];
        }
        p.constraint_rows.push_back(std::move(row));
    }
    p.constraints = std::move(constraints);
    return p;
}

lp::LpProblem charnes_cooper(const LfpProblem& p) {
    const Model& model = *p.model;
    const int n = model.pair_count();

    lp::LpProblem out;
    out.num_vars = n;
    out.objective.resize(n);
    for (int i = 0; i < n; ++i) out.objective[i] = p.objective.beta * p.objective_num[i];

    for (const auto& row : p.constraint_rows) out.add_ub(row, 0.0);

    // balance rows: for each state x, sum_u kappa(x,u) - sum_{x',u} P(x|x',u) kappa(x',u) = 0
    std::vector<std::vector<double>> balance(model.state_count(), std::vector<double>(n, 0.0));
    for (int pi = 0; pi < n; ++pi) {
        balance[model.pair_state(pi)][pi] += 1.0;
        for (const auto& [xn, prob] : model.transition_row(pi)) {
            balance[xn][pi] -= prob;
        }
    }
    for (auto& row : balance) out.add_eq(std::move(row), 0.0);

    // denominator normalization
    out.add_eq(p.objective_den, 1.0);
    return out;
}

OccupancyMeasure recover(const LfpProblem& p, const lp::LpSolution& sol) {
    if (sol.status != lp::LpStatus::optimal) {
        throw std::invalid_argument("recover: LP solution is not optimal");
    }
    const int n = p.model->pair_count();
    if (static_cast<int>(sol.x.size()) != n) {
        throw std::invalid_argument("recover: solution size mismatch");
    }
    double g = 0.0;
    for (double v : sol.x) g += v;
    if (g <= 1e-12) {
        throw std::runtime_error(
            "degenerate transform: sum(kappa) ~ 0, the denominator cost '" +
            p.objective.denominator + "' is not positive on the feasible set");
    }
    OccupancyMeasure om;
    om.omega.resize(n);
    for (int i = 0; i < n; ++i) {
        double w = sol.x[i] / g;
        if (w < 0.0 && w > -1e-9) w = 0.0;
        om.omega[i] = w;
    }
    return om;
}

namespace {

int fallback_action(const Model& model, int state) {
    const auto& actions = model.legal_actions(state);
    for (std::size_t a = 0; a < actions.size(); ++a) {
        if (actions[a].tx_mask == 0 && actions[a].drop_mask == 0) return static_cast<int>(a);
    }
    for (std::size_t a = 0; a < actions.size(); ++a) {
        if (actions[a].tx_mask == 0) return static_cast<int>(a);
    }
    return 0;
}

}  // namespace

Policy extract_policy(const Model& model, const OccupancyMeasure& om) {
    Policy policy;
    policy.action_probs.resize(model.state_count());
    for (int x = 0; x < model.state_count(); ++x) {
        const int n_actions = static_cast<int>(model.legal_actions(x).size());
        auto& probs = policy.action_probs[x];
        probs.assign(n_actions, 0.0);
        double total = 0.0;
        for (int a = 0; a < n_actions; ++a) total += om.omega[model.pair_index(x, a)];
        if (total > 1e-10) {
            for (int a = 0; a < n_actions; ++a) {
                probs[a] = om.omega[model.pair_index(x, a)] / total;
            }
        } else {
            policy.transient_states.push_back(x);
            probs[fallback_action(model, x)] = 1.0;
        }
    }
    return policy;
}

MetricReport predicted_metrics(const OccupancyMeasure& om, const CostSet& costs,
                               std::span<const Metric> metrics, double slack) {
    MetricReport rep;
    for (const Metric& m : metrics) {
        const double v = metric_value(m, om.omega, costs);
        rep.values[m.id] = v;
        if (m.bound && v > *m.bound + slack) {
            rep.violations.push_back(m.id + " = " + std::to_string(v) + " exceeds bound " +
                                     std::to_string(*m.bound));
        }
    }
    return rep;
}

namespace {

// P_mu as a dense row-major matrix
std::vector<double> policy_kernel(const Model& model, const Policy& policy) {
    const int n = model.state_count();
    std::vector<double> kernel(static_cast<std::size_t>(n) * n, 0.0);
    for (int x = 0; x < n; ++x) {
        const auto& probs = policy.action_probs[x];
        for (std::size_t a = 0; a < probs.size(); ++a) {
            if (probs[a] == 0.0) continue;
            for (const auto& [xn, p] : model.transition_row(model.pair_index(x, a))) {
                kernel[static_cast<std::size_t>(x) * n + xn] += probs[a] * p;
            }
        }
    }
    return kernel;
}

}  // namespace

std::vector<double> stationary_distribution(const Model& model, const Policy& policy) {
    const int n = model.state_count();
    if (static_cast<int>(policy.action_probs.size()) != n) {
        throw std::invalid_argument("policy has wrong state count");
    }
    const std::vector<double> kernel = policy_kernel(model, policy);

    // (I - P^T) pi = 0 with the last equation replaced by sum(pi) = 1; any
    // single row of I - P^T is redundant (the rows sum to zero), so this
    // system is nonsingular exactly when the chain has one recurrent class.
    std::vector<double> mat(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> rhs(n, 0.0);
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j < n; ++j) {
            mat[static_cast<std::size_t>(i) * n + j] =
                (i == j ? 1.0 : 0.0) - kernel[static_cast<std::size_t>(j) * n + i];
        }
    }
    for (int j = 0; j < n; ++j) mat[static_cast<std::size_t>(n - 1) * n + j] = 1.0;
    rhs[n - 1] = 1.0;

    const auto f = detail::lu_factor(mat, n, 1e-12);
    if (f.singular) {
        throw std::runtime_error("not unichain under this policy (singular stationary system)");
    }
    std::vector<double> pi = detail::lu_solve_refined(f, mat, rhs);

    double residual = 0.0, total = 0.0;
    for (int x = 0; x < n; ++x) {
        double inflow = 0.0;
        for (int xp = 0; xp < n; ++xp) {
            inflow += pi[xp] * kernel[static_cast<std::size_t>(xp) * n + x];
        }
        residual = std::max(residual, std::fabs(inflow - pi[x]));
        total += pi[x];
    }
    residual = std::max(residual, std::fabs(total - 1.0));
    for (double& v : pi) {
        if (v < 0.0) {
            residual = std::max(residual, -v);
            v = 0.0;
        }
    }
    if (residual > 1e-10) {
        throw std::runtime_error("not unichain under this policy (stationary residual " +
                                 std::to_string(residual) + ")");
    }
    return pi;
}

int recurrent_class_count(const Model& model, const Policy& policy) {
    const int n = model.state_count();
    const std::vector<double> kernel = policy_kernel(model, policy);
    // adjacency on the support of P_mu
    std::vector<std::vector<int>> adj(n);
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            if (kernel[static_cast<std::size_t>(x) * n + y] > 1e-14) adj[x].push_back(y);
        }
    }
    // iterative Tarjan SCC
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    int next_index = 0, next_comp = 0;
    struct Frame {
        int v;
        std::size_t child;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& fr = call.back();
            if (fr.child < adj[fr.v].size()) {
                const int w = adj[fr.v][fr.child++];
                if (index[w] < 0) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[fr.v] = std::min(low[fr.v], index[w]);
                }
            } else {
                if (low[fr.v] == index[fr.v]) {
                    for (;;) {
                        const int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        comp[w] = next_comp;
                        if (w == fr.v) break;
                    }
                    ++next_comp;
                }
                const int v = fr.v;
                call.pop_back();
                if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            }
        }
    }
    // a class is closed (recurrent) iff no edge leaves it
    std::vector<char> closed(next_comp, 1);
    for (int x = 0; x < n; ++x) {
        for (int y : adj[x]) {
            if (comp[x] != comp[y]) closed[comp[x]] = 0;
        }
    }
    int count = 0;
    for (char c : closed) count += c;
    return count;
}

Policy uniform_policy(const Model& model) {
    Policy policy;
    policy.action_probs.resize(model.state_count());
    for (int x = 0; x < model.state_count(); ++x) {
        const std::size_t k = model.legal_actions(x).size();
        policy.action_probs[x].assign(k, 1.0 / static_cast<double>(k));
    }
    return policy;
}

LfpSolution solve_lfp(const LfpProblem& p, const lp::SolveOptions& options) {
    LfpSolution out;
    out.lp_problem = charnes_cooper(p);
    out.lp_solution = lp::solve(out.lp_problem, options);
    out.status = out.lp_solution.status;
    if (out.status != lp::LpStatus::optimal) return out;
    out.omega = recover(p, out.lp_solution);
    out.policy = extract_policy(*p.model, out.omega);
    out.objective = metric_value(p.objective, out.omega.omega, *p.costs);
    return out;
}

BruteForceResult brute_force_reference(const Model& model, const CostSet& costs,
                                       const Metric& objective,
                                       std::span<const Metric> constraints, long long guard) {
    const int n = model.state_count();
    long long total = 1;
    for (int x = 0; x < n; ++x) {
        total *= static_cast<long long>(model.legal_actions(x).size());
        if (total > guard) {
            throw std::invalid_argument("brute force: policy count exceeds guard (" +
                                        std::to_string(guard) + ")");
        }
    }

    BruteForceResult best;
    bool found = false;
    std::vector<int> choice(n, 0);
    for (long long it = 0; it < total; ++it) {
        long long rest = it;
        for (int x = 0; x < n; ++x) {
            const auto k = static_cast<long long>(model.legal_actions(x).size());
            choice[x] = static_cast<int>(rest % k);
            rest /= k;
        }
        Policy policy;
        policy.action_probs.resize(n);
        for (int x = 0; x < n; ++x) {
            policy.action_probs[x].assign(model.legal_actions(x).size(), 0.0);
            policy.action_probs[x][choice[x]] = 1.0;
        }
        ++best.policies_evaluated;
        try {
            const std::vector<double> pi = stationary_distribution(model, policy);
            // averages per the stationary form: z_bar = sum_x pi(x) c(x, mu(x))
            auto average = [&](const std::string& cost_id) {
                const CostFunction& c = costs.at(cost_id);
                double acc = 0.0;
                for (int x = 0; x < n; ++x) {
                    acc += pi[x] * c.expected(model.pair_index(x, choice[x]));
                }
                return acc;
            };
            bool feasible = true;
            for (const Metric& c : constraints) {
                const double den = average(c.denominator);
                if (den <= 1e-12) {
                    feasible = false;
                    break;
                }
                const double v = c.beta * average(c.numerator) / den + c.lambda;
                if (!c.bound || v > *c.bound + 1e-9) {
                    feasible = false;
                    break;
                }
            }
            if (!feasible) continue;
            const double den = average(objective.denominator);
            if (den <= 1e-12) continue;
            const double value = objective.beta * average(objective.numerator) / den +
                                 objective.lambda;
            if (!found || value < best.objective) {
                found = true;
                best.objective = value;
                best.action_per_state = choice;
            }
        } catch (const std::runtime_error&) {
            ++best.policies_skipped;  // non-unichain under this policy
        }
    }
    if (!found) throw std::runtime_error("brute force: no feasible deterministic policy");
    return best;
}

void write_occupancy_csv(std::ostream& os, const Model& model, const OccupancyMeasure& om) {
    os << "state_index,state,action_index,action,omega\n";
    for (int p = 0; p < model.pair_count(); ++p) {
        const int x = model.pair_state(p);
        const int a = model.pair_action(p);
        os << x << ',' << model.state_label(x) << ',' << a << ',' << model.action_label(x, a)
           << ',' << om.omega[p] << '\n';
    }
}

void write_policy_csv(std::ostream& os, const Model& model, const Policy& policy) {
    std::size_t width = 0;
    for (int x = 0; x < model.state_count(); ++x) {
        width = std::max(width, model.legal_actions(x).size());
    }
    os << "state_index,state,transient";
    for (std::size_t a = 0; a < width; ++a) os << ",action_" << a << ",prob_" << a;
    os << '\n';
    for (int x = 0; x < model.state_count(); ++x) {
        const bool transient = std::find(policy.transient_states.begin(),
                                         policy.transient_states.end(),
                                         x) != policy.transient_states.end();
        os << x << ',' << model.state_label(x) << ',' << (transient ? 1 : 0);
        const auto& probs = policy.action_probs[x];
        for (std::size_t a = 0; a < width; ++a) {
            if (a < probs.size()) {
                os << ',' << model.action_label(x, static_cast<int>(a)) << ',' << probs[a];
            } else {
                os << ",,";
            }
        }
        os << '\n';
    }
}

}  // namespace arqopt
