#pragma once

// Small dense LU with partial pivoting, shared by the LP solution polish and
// the stationary-distribution solve. Not part of the public API.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace arqopt::detail {

struct LuFactors {
    int n = 0;
    std::vector<double> lu;   // row-major, n x n
    std::vector<int> perm;    // row permutation
    bool singular = false;
    double min_pivot = 0.0;   // smallest |pivot| encountered
};

inline LuFactors lu_factor(std::vector<double> a, int n, double pivot_tol = 1e-13) {
    LuFactors f;
    f.n = n;
    f.lu = std::move(a);
    f.perm.resize(n);
    for (int i = 0; i < n; ++i) f.perm[i] = i;
    f.min_pivot = std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (double v : f.lu) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) scale = 1.0;
    auto& m = f.lu;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::fabs(m[k * n + k]);
        for (int i = k + 1; i < n; ++i) {
            const double v = std::fabs(m[i * n + k]);
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(m[k * n + j], m[piv * n + j]);
            std::swap(f.perm[k], f.perm[piv]);
        }
        f.min_pivot = std::min(f.min_pivot, best);
        if (best <= pivot_tol * scale) {
            f.singular = true;
            return f;
        }
        const double inv = 1.0 / m[k * n + k];
        for (int i = k + 1; i < n; ++i) {
            const double factor = m[i * n + k] * inv;
            m[i * n + k] = factor;
            for (int j = k + 1; j < n; ++j) m[i * n + j] -= factor * m[k * n + j];
        }
    }
    return f;
}

inline std::vector<double> lu_solve(const LuFactors& f, const std::vector<double>& b) {
    const int n = f.n;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (int i = 1; i < n; ++i) {
        double s = x[i];
        for (int j = 0; j < i; ++j) s -= f.lu[i * n + j] * x[j];
        x[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int j = i + 1; j < n; ++j) s -= f.lu[i * n + j] * x[j];
        x[i] = s / f.lu[i * n + i];
    }
    return x;
}

/// Solve A x = b with one step of iterative refinement.
/// `a` is the original row-major matrix the factors came from.
inline std::vector<double> lu_solve_refined(const LuFactors& f, const std::vector<double>& a,
                                            const std::vector<double>& b) {
    const int n = f.n;
    std::vector<double> x = lu_solve(f, b);
    for (int round = 0; round < 2; ++round) {
        std::vector<double> r(n);
        for (int i = 0; i < n; ++i) {
            double s = b[i];
            for (int j = 0; j < n; ++j) s -= a[i * n + j] * x[j];
            r[i] = s;
        }
        const std::vector<double> d = lu_solve(f, r);
        for (int i = 0; i < n; ++i) x[i] += d[i];
    }
    return x;
}

}  // namespace arqopt::detail
