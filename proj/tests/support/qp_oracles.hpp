#pragma once

// Test-only oracles, deliberately independent of the library's linear algebra
// and solver code: a plain Gaussian-elimination solve, a brute-force
// active-set enumerator for small QPs, and a KKT verifier written with bare
// loops.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace qp_oracle {

struct DenseProblem {
    std::size_t n = 0;               // variables
    std::size_t m = 0;               // rows
    std::vector<double> h;           // n x n row-major hessian
    std::vector<double> f;           // n linear term
    std::vector<double> a;           // m x n rows
    std::vector<double> b;           // m rhs
};

// Solve S x = rhs by Gaussian elimination with partial pivoting.
inline std::optional<std::vector<double>> ge_solve(std::vector<double> s,
                                                   std::vector<double> rhs,
                                                   std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::fabs(s[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::fabs(s[r * n + col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best < 1e-12) return std::nullopt;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(s[piv * n + c], s[col * n + c]);
            std::swap(rhs[piv], rhs[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double fac = s[r * n + col] / s[col * n + col];
            if (fac == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) s[r * n + c] -= fac * s[col * n + c];
            rhs[r] -= fac * rhs[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = rhs[ri];
        for (std::size_t c = ri + 1; c < n; ++c) acc -= s[ri * n + c] * x[c];
        x[ri] = acc / s[ri * n + ri];
    }
    return x;
}

struct OracleResult {
    bool feasible = false;
    std::vector<double> x;
    double objective = std::numeric_limits<double>::infinity();
};

// Enumerate every active set, solve the equality-constrained KKT system, and
// keep the best candidate that is primal feasible with nonnegative
// multipliers. Exponential in m; intended for m <= ~12.
inline OracleResult active_set_enumeration(const DenseProblem& p) {
    OracleResult best;
    const std::size_t subsets = static_cast<std::size_t>(1) << p.m;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
        std::vector<std::size_t> act;
        for (std::size_t i = 0; i < p.m; ++i)
            if (mask & (static_cast<std::size_t>(1) << i)) act.push_back(i);
        if (act.size() > p.n) continue;
        const std::size_t k = act.size();
        const std::size_t dim = p.n + k;
        std::vector<double> kkt(dim * dim, 0.0), rhs(dim, 0.0);
        for (std::size_t i = 0; i < p.n; ++i) {
            for (std::size_t j = 0; j < p.n; ++j) kkt[i * dim + j] = p.h[i * p.n + j];
            rhs[i] = -p.f[i];
        }
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t c = 0; c < p.n; ++c) {
                kkt[c * dim + p.n + j] = p.a[act[j] * p.n + c];
                kkt[(p.n + j) * dim + c] = p.a[act[j] * p.n + c];
            }
            rhs[p.n + j] = p.b[act[j]];
        }
        const auto sol = ge_solve(kkt, rhs, dim);
        if (!sol) continue;
        bool ok = true;
        for (std::size_t j = 0; j < k && ok; ++j)
            if ((*sol)[p.n + j] < -1e-8) ok = false;
        for (std::size_t i = 0; i < p.m && ok; ++i) {
            double lhs = 0.0;
            for (std::size_t c = 0; c < p.n; ++c) lhs += p.a[i * p.n + c] * (*sol)[c];
            if (lhs > p.b[i] + 1e-8) ok = false;
        }
        if (!ok) continue;
        double obj = 0.0;
        for (std::size_t i = 0; i < p.n; ++i) {
            obj += p.f[i] * (*sol)[i];
            for (std::size_t j = 0; j < p.n; ++j)
                obj += 0.5 * (*sol)[i] * p.h[i * p.n + j] * (*sol)[j];
        }
        if (!best.feasible || obj < best.objective - 1e-12) {
            best.feasible = true;
            best.objective = obj;
            best.x.assign(sol->begin(), sol->begin() + static_cast<long>(p.n));
        }
    }
    return best;
}

struct KktReport {
    double stationarity = 0.0;
    double primal = 0.0;       // max violation, >= 0
    double comp_slack = 0.0;   // max |y_i (a_i x - b_i)|
    double dual_min = 0.0;     // min y_i
};

inline KktReport verify_kkt(const DenseProblem& p, const std::vector<double>& x,
                            const std::vector<double>& y) {
    KktReport rep;
    rep.dual_min = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
        double g = p.f[i];
        for (std::size_t j = 0; j < p.n; ++j) g += p.h[i * p.n + j] * x[j];
        for (std::size_t r = 0; r < p.m; ++r) g += p.a[r * p.n + i] * y[r];
        rep.stationarity = std::max(rep.stationarity, std::fabs(g));
    }
    for (std::size_t r = 0; r < p.m; ++r) {
        double lhs = 0.0;
        for (std::size_t c = 0; c < p.n; ++c) lhs += p.a[r * p.n + c] * x[c];
        rep.primal = std::max(rep.primal, lhs - p.b[r]);
        rep.comp_slack = std::max(rep.comp_slack, std::fabs(y[r] * (lhs - p.b[r])));
        rep.dual_min = std::min(rep.dual_min, y[r]);
    }
    rep.primal = std::max(rep.primal, 0.0);
    return rep;
}

}  // namespace qp_oracle
