#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arqopt::lp {

/// min c.x  s.t.  eq_rows.x = eq_rhs,  ub_rows.x <= ub_rhs,  x >= 0
struct LpProblem {
    int num_vars = 0;
    std::vector<double> objective;
    std::vector<std::vector<double>> eq_rows;
    std::vector<double> eq_rhs;
    std::vector<std::vector<double>> ub_rows;
    std::vector<double> ub_rhs;

    void add_eq(std::vector<double> row, double rhs);
    void add_ub(std::vector<double> row, double rhs);
    void validate() const;  // dimension mismatch / non-finite -> invalid_argument
};

enum class LpStatus { optimal, infeasible, unbounded };

const char* lp_status_name(LpStatus s);

/// A basic solution. `basis` holds the basic column indices in the augmented
/// space [vars | slacks] (slack i belongs to ub row i), one per surviving
/// constraint row; redundant equality rows are dropped during phase 1.
struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    std::vector<int> basis;
    std::vector<int> rows;  // surviving row indices (eq rows first, then ub rows)
    int iterations = 0;
};

struct SolveOptions {
    double pivot_tol = 1e-9;
    double feas_tol = 1e-8;
    bool equilibrate = true;        // powers-of-two row/column scaling
    std::ostream* tableau_dump = nullptr;
    long long max_iterations = 1000000;
};

/// Two-phase primal simplex, deterministic for identical input: entering by
/// most negative reduced cost (ties by lowest index), leaving by the
/// lexicographic ratio test (anti-cycling). Returns a basic optimal solution
/// whose primal values are re-solved from the original basis columns (LU +
/// iterative refinement).
LpSolution solve(const LpProblem& problem, const SolveOptions& options = {});

/// Independent optimality check of a solution: primal feasibility, sign
/// bounds, dual feasibility and complementary slackness against duals
/// recovered from the basis, and the primal/dual objective gap.
struct VerifyReport {
    double max_primal_residual = 0.0;    // |A x - b| over eq rows, (A x - b)+ over ub rows
    double max_bound_violation = 0.0;    // negative part of x and slacks
    double max_dual_violation = 0.0;     // negative part of reduced costs
    double max_slackness_violation = 0.0;
    double objective_gap = 0.0;          // |c.x - b.y|
    std::vector<double> duals;           // one per (surviving) row, eq rows first

    bool ok(double tol) const;
    std::string format() const;
};

VerifyReport verify(const LpProblem& problem, const LpSolution& solution, double tol = 1e-8);

}  // namespace arqopt::lp
