#include "arqopt/lp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dense_solve.hpp"

namespace arqopt::lp {

void LpProblem::add_eq(std::vector<double> row, double rhs) {
    eq_rows.push_back(std::move(row));
    eq_rhs.push_back(rhs);
}

void LpProblem::add_ub(std::vector<double> row, double rhs) {
    ub_rows.push_back(std::move(row));
    ub_rhs.push_back(rhs);
}

void LpProblem::validate() const {
    auto check_row = [&](const std::vector<double>& row, double rhs, const char* what) {
        if (static_cast<int>(row.size()) != num_vars) {
            throw std::invalid_argument(std::string("lp: ") + what + " row has " +
                                        std::to_string(row.size()) + " entries, expected " +
                                        std::to_string(num_vars));
        }
        for (double v : row) {
            if (!std::isfinite(v)) throw std::invalid_argument("lp: non-finite coefficient");
        }
        if (!std::isfinite(rhs)) throw std::invalid_argument("lp: non-finite rhs");
    };
    if (static_cast<int>(objective.size()) != num_vars) {
        throw std::invalid_argument("lp: objective size mismatch");
    }
    for (double v : objective) {
        if (!std::isfinite(v)) throw std::invalid_argument("lp: non-finite objective");
    }
    if (eq_rows.size() != eq_rhs.size() || ub_rows.size() != ub_rhs.size()) {
        throw std::invalid_argument("lp: rhs count mismatch");
    }
    for (std::size_t i = 0; i < eq_rows.size(); ++i) check_row(eq_rows[i], eq_rhs[i], "eq");
    for (std::size_t i = 0; i < ub_rows.size(); ++i) check_row(ub_rows[i], ub_rhs[i], "ub");
}

const char* lp_status_name(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "?";
}

namespace {

double pow2_scale(double maxabs) {
    if (maxabs <= 0.0) return 1.0;
    return std::exp2(std::round(std::log2(maxabs)));
}

// Dense two-phase tableau. Columns: [vars | slacks | artificials].
struct Tableau {
    int rows = 0;
    int cols = 0;  // without rhs
    std::vector<double> body;
    std::vector<double> rhs;
    std::vector<int> basis;        // per row: basic column
    std::vector<char> active;      // per column: eligible to enter
    std::vector<int> row_ids;      // original row index per tableau row
    int first_artificial = 0;      // columns >= this never re-enter

    double& at(int i, int j) { return body[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return body[static_cast<std::size_t>(i) * cols + j]; }

    void pivot(int prow, int pcol) {
        const double inv = 1.0 / at(prow, pcol);
        for (int j = 0; j < cols; ++j) at(prow, j) *= inv;
        rhs[prow] *= inv;
        at(prow, pcol) = 1.0;
        for (int i = 0; i < rows; ++i) {
            if (i == prow) continue;
            const double f = at(i, pcol);
            if (f == 0.0) continue;
            for (int j = 0; j < cols; ++j) at(i, j) -= f * at(prow, j);
            rhs[i] -= f * rhs[prow];
            at(i, pcol) = 0.0;
        }
        basis[prow] = pcol;
    }

    void drop_row(int i) {
        body.erase(body.begin() + static_cast<std::ptrdiff_t>(i) * cols,
                   body.begin() + static_cast<std::ptrdiff_t>(i + 1) * cols);
        rhs.erase(rhs.begin() + i);
        basis.erase(basis.begin() + i);
        row_ids.erase(row_ids.begin() + i);
        --rows;
    }

    void dump(std::ostream& os, const char* title) const {
        os << title << ": " << rows << " rows x " << cols << " cols\n";
        if (rows * cols > 20000) {
            os << "(tableau too large to dump)\n";
            return;
        }
        os << std::setprecision(6);
        for (int i = 0; i < rows; ++i) {
            os << "b" << basis[i] << " |";
            for (int j = 0; j < cols; ++j) os << ' ' << at(i, j);
            os << " | " << rhs[i] << '\n';
        }
    }
};

// Reduced costs of `cost` priced out against the current basis.
void price_out(const Tableau& t, const std::vector<double>& cost, std::vector<double>& red,
               double& red_rhs) {
    red = cost;
    red_rhs = 0.0;
    for (int i = 0; i < t.rows; ++i) {
        const double cb = cost[t.basis[i]];
        if (cb == 0.0) continue;
        for (int j = 0; j < t.cols; ++j) red[j] -= cb * t.at(i, j);
        red_rhs += cb * t.rhs[i];
    }
    for (int i = 0; i < t.rows; ++i) red[t.basis[i]] = 0.0;
}

enum class IterResult { optimal, unbounded };

// Entering: most negative reduced cost, ties broken by the lowest column
// index. Leaving: lexicographic ratio test -- the minimum of the scaled rows
// (rhs_i, T_i1, T_i2, ...) / a_i,enter in lexicographic order, which rules
// out cycling under any entering rule and is immune to the long degenerate
// stalls that index-only rules hit on all-zero-rhs balance constraints.
// Both rules are pure functions of the tableau, so solves are deterministic.
// Reduced costs are repriced from scratch periodically and before accepting
// optimality, so incremental drift can neither stop the loop early nor keep
// it churning on phantom negatives; a stall guard ends boundary-degenerate
// runs whose objective has stopped moving.
IterResult run_simplex(Tableau& t, const std::vector<double>& cost, std::vector<double>& red,
                       double& red_rhs, const SolveOptions& opt, int& iterations) {
    int since_reprice = 0;
    long long stall = 0;
    double best_obj = std::numeric_limits<double>::infinity();
    const long long stall_limit = std::max<long long>(1000, 20LL * t.rows);
    for (;;) {
        int enter = -1;
        double most = -opt.pivot_tol;
        for (int j = 0; j < t.cols; ++j) {
            if (t.active[j] && red[j] < most) {
                most = red[j];
                enter = j;
            }
        }
        if (enter < 0) {
            if (since_reprice == 0) return IterResult::optimal;
            price_out(t, cost, red, red_rhs);
            since_reprice = 0;
            continue;
        }
        if (red_rhs < best_obj - 1e-12) {
            best_obj = red_rhs;
            stall = 0;
        } else if (++stall > stall_limit) {
            return IterResult::optimal;  // degenerate stall; objective has converged
        }
        if (++since_reprice >= 256) {
            price_out(t, cost, red, red_rhs);
            since_reprice = 0;
            continue;
        }

        int leave = -1;
        for (int i = 0; i < t.rows; ++i) {
            const double a = t.at(i, enter);
            if (a <= opt.pivot_tol) continue;
            if (leave < 0) {
                leave = i;
                continue;
            }
            const double al = t.at(leave, enter);
            double d = t.rhs[i] / a - t.rhs[leave] / al;
            if (d < -1e-12) {
                leave = i;
                continue;
            }
            if (d > 1e-12) continue;
            for (int j = 0; j < t.cols; ++j) {
                d = t.at(i, j) / a - t.at(leave, j) / al;
                if (d < -1e-12) {
                    leave = i;
                    break;
                }
                if (d > 1e-12) break;
            }
        }
        if (leave < 0) return IterResult::unbounded;

        if (++iterations > opt.max_iterations) {
            throw std::runtime_error("simplex: iteration limit exceeded");
        }
        const int leaving_col = t.basis[leave];
        t.pivot(leave, enter);
        const double f = red[enter];
        if (f != 0.0) {
            for (int j = 0; j < t.cols; ++j) red[j] -= f * t.at(leave, j);
            red_rhs += f * t.rhs[leave];
            red[enter] = 0.0;
        }
        if (leaving_col >= t.first_artificial) t.active[leaving_col] = 0;
    }
}

LpSolution solve_impl(const LpProblem& p, const SolveOptions& opt) {
    p.validate();
    const int n = p.num_vars;
    const int m_eq = static_cast<int>(p.eq_rows.size());
    const int m_ub = static_cast<int>(p.ub_rows.size());
    const int m = m_eq + m_ub;
    const int n_aug = n + m_ub;

    LpSolution sol;
    sol.iterations = 0;

    // scaled copy of the var-columns and rhs
    std::vector<double> row_scale(m, 1.0), col_scale(n, 1.0);
    std::vector<std::vector<double>> a(m, std::vector<double>(n, 0.0));
    std::vector<double> b(m, 0.0);
    for (int i = 0; i < m_eq; ++i) {
        a[i] = p.eq_rows[i];
        b[i] = p.eq_rhs[i];
    }
    for (int i = 0; i < m_ub; ++i) {
        a[m_eq + i] = p.ub_rows[i];
        b[m_eq + i] = p.ub_rhs[i];
    }
    if (opt.equilibrate) {
        for (int i = 0; i < m; ++i) {
            double mx = 0.0;
            for (double v : a[i]) mx = std::max(mx, std::fabs(v));
            row_scale[i] = pow2_scale(mx);
            for (double& v : a[i]) v /= row_scale[i];
            b[i] /= row_scale[i];
        }
        for (int j = 0; j < n; ++j) {
            double mx = 0.0;
            for (int i = 0; i < m; ++i) mx = std::max(mx, std::fabs(a[i][j]));
            col_scale[j] = pow2_scale(mx);
            if (col_scale[j] != 1.0) {
                for (int i = 0; i < m; ++i) a[i][j] /= col_scale[j];
            }
        }
    }

    // augmented tableau: vars, slacks, artificials where needed
    std::vector<double> slack_sign(m_ub, 1.0);
    std::vector<char> needs_artificial(m, 1);
    for (int i = 0; i < m; ++i) {
        const bool flip = b[i] < 0.0;
        if (flip) {
            for (double& v : a[i]) v = -v;
            b[i] = -b[i];
            if (i >= m_eq) slack_sign[i - m_eq] = -1.0;
        }
        if (i >= m_eq && slack_sign[i - m_eq] > 0.0) needs_artificial[i] = 0;
    }
    int n_art = 0;
    std::vector<int> art_col(m, -1);
    for (int i = 0; i < m; ++i) {
        if (needs_artificial[i]) art_col[i] = n_aug + n_art++;
    }

    Tableau t;
    t.rows = m;
    t.cols = n_aug + n_art;
    t.first_artificial = n_aug;
    t.body.assign(static_cast<std::size_t>(m) * t.cols, 0.0);
    t.rhs = b;
    t.basis.assign(m, -1);
    t.active.assign(t.cols, 1);
    t.row_ids.resize(m);
    for (int i = 0; i < m; ++i) {
        t.row_ids[i] = i;
        for (int j = 0; j < n; ++j) t.at(i, j) = a[i][j];
        if (i >= m_eq) t.at(i, n + (i - m_eq)) = slack_sign[i - m_eq];
        if (art_col[i] >= 0) {
            t.at(i, art_col[i]) = 1.0;
            t.basis[i] = art_col[i];
        } else {
            t.basis[i] = n + (i - m_eq);
        }
    }

    if (opt.tableau_dump) t.dump(*opt.tableau_dump, "initial tableau");

    // phase 1: minimize the sum of artificials
    std::vector<double> red;
    double red_rhs = 0.0;
    if (n_art > 0) {
        std::vector<double> phase1_cost(t.cols, 0.0);
        for (int j = n_aug; j < t.cols; ++j) phase1_cost[j] = 1.0;
        price_out(t, phase1_cost, red, red_rhs);
        const IterResult r = run_simplex(t, phase1_cost, red, red_rhs, opt, sol.iterations);
        if (r == IterResult::unbounded) {
            throw std::runtime_error("simplex: phase-1 breakdown (unbounded auxiliary)");
        }
        price_out(t, phase1_cost, red, red_rhs);  // exact infeasibility verdict
        if (red_rhs > opt.feas_tol) {
            sol.status = LpStatus::infeasible;
            return sol;
        }
        // drive remaining artificials out of the basis on the largest eligible
        // pivot; rows with no usable entry are redundant and dropped
        for (int i = t.rows - 1; i >= 0; --i) {
            if (t.basis[i] < n_aug) continue;
            int pcol = -1;
            double best = 1e-7;
            for (int j = 0; j < n_aug; ++j) {
                if (std::fabs(t.at(i, j)) > best) {
                    best = std::fabs(t.at(i, j));
                    pcol = j;
                }
            }
            if (pcol >= 0) {
                ++sol.iterations;
                t.pivot(i, pcol);
            } else {
                t.drop_row(i);
            }
        }
        for (int j = n_aug; j < t.cols; ++j) t.active[j] = 0;
    }

    // phase 2: minimize the scaled objective
    std::vector<double> cost(t.cols, 0.0);
    for (int j = 0; j < n; ++j) cost[j] = p.objective[j] * col_scale[j];
    price_out(t, cost, red, red_rhs);
    const IterResult r2 = run_simplex(t, cost, red, red_rhs, opt, sol.iterations);
    if (opt.tableau_dump) t.dump(*opt.tableau_dump, "final tableau");
    if (r2 == IterResult::unbounded) {
        sol.status = LpStatus::unbounded;
        return sol;
    }

    sol.status = LpStatus::optimal;
    sol.basis.assign(t.basis.begin(), t.basis.end());
    sol.rows.assign(t.row_ids.begin(), t.row_ids.end());

    // re-solve the basic system in the original (unscaled) space for clean
    // primal values: B x_B = b over the surviving rows
    const int mb = t.rows;
    std::vector<double> x_aug(n_aug, 0.0);
    if (mb > 0) {
        auto orig_entry = [&](int row, int col) -> double {
            if (col < n) {
                return row < m_eq ? p.eq_rows[row][col] : p.ub_rows[row - m_eq][col];
            }
            return (row == m_eq + (col - n)) ? 1.0 : 0.0;
        };
        std::vector<double> bmat(static_cast<std::size_t>(mb) * mb);
        std::vector<double> brhs(mb);
        for (int i = 0; i < mb; ++i) {
            const int row = t.row_ids[i];
            brhs[i] = row < m_eq ? p.eq_rhs[row] : p.ub_rhs[row - m_eq];
            for (int k = 0; k < mb; ++k) bmat[static_cast<std::size_t>(i) * mb + k] =
                orig_entry(row, t.basis[k]);
        }
        const auto f = detail::lu_factor(bmat, mb);
        if (f.singular) {
            // fall back to the tableau values (scaled back)
            for (int i = 0; i < mb; ++i) {
                const int col = t.basis[i];
                x_aug[col] = t.rhs[i] * (col < n ? col_scale[col] : row_scale[t.row_ids[i]]);
            }
        } else {
            const auto xb = detail::lu_solve_refined(f, bmat, brhs);
            for (int i = 0; i < mb; ++i) x_aug[t.basis[i]] = xb[i];
        }
    }
    sol.x.assign(x_aug.begin(), x_aug.begin() + n);
    sol.objective = 0.0;
    for (int j = 0; j < n; ++j) sol.objective += p.objective[j] * sol.x[j];

    // self-check; a large residual here means the final basis was too
    // ill-conditioned to certify, which must not masquerade as optimal
    double residual = 0.0;
    for (int i = 0; i < m_eq; ++i) {
        double ax = 0.0;
        for (int j = 0; j < n; ++j) ax += p.eq_rows[i][j] * sol.x[j];
        residual = std::max(residual, std::fabs(ax - p.eq_rhs[i]));
    }
    for (int i = 0; i < m_ub; ++i) {
        double ax = 0.0;
        for (int j = 0; j < n; ++j) ax += p.ub_rows[i][j] * sol.x[j];
        residual = std::max(residual, ax - p.ub_rhs[i]);
    }
    for (int j = 0; j < n_aug; ++j) residual = std::max(residual, -x_aug[j]);
    double scale = 1.0;
    for (double v : p.eq_rhs) scale = std::max(scale, std::fabs(v));
    for (double v : p.ub_rhs) scale = std::max(scale, std::fabs(v));
    if (residual > 100.0 * opt.feas_tol * scale) {
        throw std::runtime_error("simplex: solution failed the residual self-check (" +
                                 std::to_string(residual) + "); basis too ill-conditioned");
    }
    return sol;
}

}  // namespace

LpSolution solve(const LpProblem& p, const SolveOptions& opt) {
    if (!opt.equilibrate) return solve_impl(p, opt);
    try {
        return solve_impl(p, opt);
    } catch (const std::runtime_error&) {
        // scaling changes the pivot path; on numerical breakdown retry the
        // plain problem before giving up (still deterministic)
        SolveOptions retry = opt;
        retry.equilibrate = false;
        return solve_impl(p, retry);
    }
}

bool VerifyReport::ok(double tol) const {
    return max_primal_residual <= tol && max_bound_violation <= tol &&
           max_dual_violation <= tol && max_slackness_violation <= tol && objective_gap <= tol;
}

std::string VerifyReport::format() const {
    std::ostringstream os;
    os << "primal residual " << max_primal_residual << ", bound violation "
       << max_bound_violation << ", dual violation " << max_dual_violation
       << ", slackness violation " << max_slackness_violation << ", objective gap "
       << objective_gap;
    return os.str();
}

VerifyReport verify(const LpProblem& p, const LpSolution& sol, double /*tol*/) {
    p.validate();
    if (sol.status != LpStatus::optimal) {
        throw std::invalid_argument("verify: solution is not optimal");
    }
    const int n = p.num_vars;
    const int m_eq = static_cast<int>(p.eq_rows.size());
    const int m_ub = static_cast<int>(p.ub_rows.size());
    const int m = m_eq + m_ub;
    const int n_aug = n + m_ub;

    VerifyReport rep;

    // augmented primal point: x plus implied slack values
    std::vector<double> x_aug(n_aug, 0.0);
    for (int j = 0; j < n; ++j) x_aug[j] = sol.x[j];
    for (int i = 0; i < m_ub; ++i) {
        double ax = 0.0;
        for (int j = 0; j < n; ++j) ax += p.ub_rows[i][j] * sol.x[j];
        x_aug[n + i] = p.ub_rhs[i] - ax;
    }
    for (int i = 0; i < m_eq; ++i) {
        double ax = 0.0;
        for (int j = 0; j < n; ++j) ax += p.eq_rows[i][j] * sol.x[j];
        rep.max_primal_residual = std::max(rep.max_primal_residual, std::fabs(ax - p.eq_rhs[i]));
    }
    for (int i = 0; i < m_ub; ++i) {
        rep.max_primal_residual = std::max(rep.max_primal_residual, -x_aug[n + i]);
    }
    for (int j = 0; j < n_aug; ++j) {
        rep.max_bound_violation = std::max(rep.max_bound_violation, -x_aug[j]);
    }

    // duals from the basis: B^T y = c_B over surviving rows, 0 elsewhere
    auto orig_entry = [&](int row, int col) -> double {
        if (col < n) return row < m_eq ? p.eq_rows[row][col] : p.ub_rows[row - m_eq][col];
        return (row == m_eq + (col - n)) ? 1.0 : 0.0;
    };
    auto cost_of = [&](int col) -> double { return col < n ? p.objective[col] : 0.0; };

    rep.duals.assign(m, 0.0);
    const int mb = static_cast<int>(sol.basis.size());
    if (mb > 0) {
        if (static_cast<int>(sol.rows.size()) != mb) {
            throw std::invalid_argument("verify: basis/rows size mismatch");
        }
        std::vector<double> bt(static_cast<std::size_t>(mb) * mb);
        std::vector<double> cb(mb);
        for (int k = 0; k < mb; ++k) {
            cb[k] = cost_of(sol.basis[k]);
            for (int i = 0; i < mb; ++i) {
                bt[static_cast<std::size_t>(k) * mb + i] = orig_entry(sol.rows[i], sol.basis[k]);
            }
        }
        const auto f = detail::lu_factor(bt, mb);
        if (!f.singular) {
            const auto y = detail::lu_solve_refined(f, bt, cb);
            for (int i = 0; i < mb; ++i) rep.duals[sol.rows[i]] = y[i];
        } else {
            rep.max_dual_violation = std::numeric_limits<double>::infinity();
        }
    }

    // reduced costs, dual feasibility, complementary slackness
    double by = 0.0;
    for (int i = 0; i < m_eq; ++i) by += rep.duals[i] * p.eq_rhs[i];
    for (int i = 0; i < m_ub; ++i) by += rep.duals[m_eq + i] * p.ub_rhs[i];
    for (int j = 0; j < n_aug; ++j) {
        double r = cost_of(j);
        for (int i = 0; i < m; ++i) r -= rep.duals[i] * orig_entry(i, j);
        rep.max_dual_violation = std::max(rep.max_dual_violation, -r);
        rep.max_slackness_violation =
            std::max(rep.max_slackness_violation, std::fabs(x_aug[j] * r));
    }
    double cx = 0.0;
    for (int j = 0; j < n; ++j) cx += p.objective[j] * sol.x[j];
    rep.objective_gap = std::fabs(cx - by);
    return rep;
}

}  // namespace arqopt::lp
