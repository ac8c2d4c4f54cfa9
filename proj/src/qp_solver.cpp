#include <algorithm>
#include <cmath>
#include <limits>

#include "lpvmpc/qp.hpp"
#include "lpvmpc/simd_kernels.hpp"

namespace lpvmpc::qp {

namespace {

using linalg::Cholesky;

constexpr double kScaleMin = 1e-4;
constexpr double kScaleMax = 1e4;
constexpr double kPolishDelta = 1e-8;

double clampd(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

double objective_of(const CondensedQp& qp, const Vector& x) {
    Vector px = linalg::matvec(qp.hessian, x);
    return 0.5 * linalg::dot(px, x) + linalg::dot(qp.linear, x);
}

// Ruiz equilibration of [P A^T; A 0] plus cost normalization (OSQP style).
struct Scaling {
    Vector d;       // variable scaling, size n
    Vector e;       // row scaling, size m
    double c = 1.0; // cost scaling
};

Scaling equilibrate(Matrix& p, Vector& q, Matrix& a, Vector& b, int iters) {
    const std::size_t n = q.size();
    const std::size_t m = b.size();
    Scaling s;
    s.d.assign(n, 1.0);
    s.e.assign(m, 1.0);
    Vector dj(n), ei(m);
    for (int it = 0; it < iters; ++it) {
        for (std::size_t j = 0; j < n; ++j) {
            double nrm = 0.0;
            for (std::size_t i = 0; i < n; ++i) nrm = std::max(nrm, std::fabs(p(i, j)));
            for (std::size_t i = 0; i < m; ++i) nrm = std::max(nrm, std::fabs(a(i, j)));
            dj[j] = nrm > 1e-12 ? clampd(1.0 / std::sqrt(nrm), kScaleMin, kScaleMax) : 1.0;
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double nrm = simd::inf_norm(a.row(i), n);
            ei[i] = nrm > 1e-12 ? clampd(1.0 / std::sqrt(nrm), kScaleMin, kScaleMax) : 1.0;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p(i, j) *= dj[i] * dj[j];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) a(i, j) *= ei[i] * dj[j];
        for (std::size_t j = 0; j < n; ++j) {
            q[j] *= dj[j];
            s.d[j] *= dj[j];
        }
        for (std::size_t i = 0; i < m; ++i) {
            b[i] *= ei[i];
            s.e[i] *= ei[i];
        }
        // cost normalization
        double mean_col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double nrm = 0.0;
            for (std::size_t i = 0; i < n; ++i) nrm = std::max(nrm, std::fabs(p(i, j)));
            mean_col += nrm;
        }
        mean_col = n > 0 ? mean_col / static_cast<double>(n) : 0.0;
        const double denom = std::max(mean_col, linalg::inf_norm(q));
        if (denom > 1e-12) {
            const double gamma = clampd(1.0 / denom, kScaleMin, kScaleMax);
            for (std::size_t i = 0; i < n; ++i) simd::scal(gamma, p.row(i), n);
            simd::scal(gamma, q.data(), n);
            s.c *= gamma;
        }
    }
    return s;
}

struct PolishResult {
    Vector x;
    Vector y;
    double r_prim = 0.0;
    double r_dual = 0.0;
};

// Equality-constrained solve on the guessed active set with add/drop
// refinement; unscaled data throughout.
std::optional<PolishResult> polish(const CondensedQp& qp, const Vector& x0,
                                   const Vector& y0, double tol) {
    const std::size_t n = qp.dim();
    const std::size_t m = qp.rows();

    Matrix preg = qp.hessian;
    linalg::add_scaled_identity(preg, kPolishDelta);
    Cholesky chol_p;
    if (!chol_p.factor(preg)) return std::nullopt;

    Vector ax0 = linalg::matvec(qp.ineq_g, x0);
    const double yscale = std::max(1.0, linalg::inf_norm(y0));
    const double bscale = std::max(1.0, linalg::inf_norm(qp.ineq_h));

    std::vector<char> in_act(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const double slack = qp.ineq_h[i] - ax0[i];
        if (y0[i] > 1e-8 * yscale || slack < 1e-6 * bscale) in_act[i] = 1;
    }

    Vector x, nu;
    std::vector<std::size_t> act;
    for (int round = 0; round < 10; ++round) {
        act.clear();
        for (std::size_t i = 0; i < m; ++i)
            if (in_act[i]) act.push_back(i);
        if (act.size() > n + 64) return std::nullopt;
        const std::size_t k = act.size();

        // T rows: t_j = (P + dI)^{-1} a_j ; S = A_act T^T + dI
        Matrix t(k, n);
        for (std::size_t j = 0; j < k; ++j) {
            Vector col(qp.ineq_g.row(act[j]), qp.ineq_g.row(act[j]) + n);
            chol_p.solve(col);
            std::copy(col.begin(), col.end(), t.row(j));
        }
        Matrix s(k, k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = i; j < k; ++j) {
                const double v = simd::dot(qp.ineq_g.row(act[i]), t.row(j), n);
                s(i, j) = v;
                s(j, i) = v;
            }
        double delta_s = kPolishDelta;
        Cholesky chol_s;
        {
            Matrix sreg = s;
            linalg::add_scaled_identity(sreg, delta_s);
            if (!chol_s.factor(sreg)) {
                delta_s = 1e-6;
                sreg = s;
                linalg::add_scaled_identity(sreg, delta_s);
                if (!chol_s.factor(sreg)) return std::nullopt;
            }
        }

        Vector mq(n);
        for (std::size_t i = 0; i < n; ++i) mq[i] = -qp.linear[i];
        Vector t0 = chol_p.solve_copy(mq);
        Vector rhs(k);
        for (std::size_t j = 0; j < k; ++j)
            rhs[j] = simd::dot(qp.ineq_g.row(act[j]), t0.data(), n) - qp.ineq_h[act[j]];
        nu = k > 0 ? chol_s.solve_copy(rhs) : Vector{};
        x = t0;
        for (std::size_t j = 0; j < k; ++j) simd::axpy(-nu[j], t.row(j), x.data(), n);

        // two rounds of iterative refinement on the true KKT system
        for (int ref = 0; ref < 2; ++ref) {
            Vector px = linalg::matvec(qp.hessian, x);
            Vector r1(n);
            for (std::size_t i = 0; i < n; ++i) r1[i] = -qp.linear[i] - px[i];
            for (std::size_t j = 0; j < k; ++j)
                simd::axpy(-nu[j], qp.ineq_g.row(act[j]), r1.data(), n);
            Vector dt0 = chol_p.solve_copy(r1);
            Vector r2(k);
            for (std::size_t j = 0; j < k; ++j)
                r2[j] = qp.ineq_h[act[j]] - simd::dot(qp.ineq_g.row(act[j]), x.data(), n);
            Vector srhs(k);
            for (std::size_t j = 0; j < k; ++j)
                srhs[j] = simd::dot(qp.ineq_g.row(act[j]), dt0.data(), n) - r2[j];
            Vector dnu = k > 0 ? chol_s.solve_copy(srhs) : Vector{};
            Vector dx = dt0;
            for (std::size_t j = 0; j < k; ++j) simd::axpy(-dnu[j], t.row(j), dx.data(), n);
            for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
            for (std::size_t j = 0; j < k; ++j) nu[j] += dnu[j];
        }

        // drop rows with negative multipliers
        const double nu_scale = std::max(1.0, linalg::inf_norm(nu));
        bool changed = false;
        for (std::size_t j = 0; j < k; ++j)
            if (nu[j] < -1e-9 * nu_scale) {
                in_act[act[j]] = 0;
                changed = true;
            }
        if (changed) continue;

        // add violated rows
        Vector ax = linalg::matvec(qp.ineq_g, x);
        for (std::size_t i = 0; i < m; ++i)
            if (!in_act[i] && ax[i] - qp.ineq_h[i] > 1e-9 * bscale) {
                in_act[i] = 1;
                changed = true;
            }
        if (changed) continue;

        PolishResult out;
        out.x = x;
        out.y.assign(m, 0.0);
        for (std::size_t j = 0; j < k; ++j) out.y[act[j]] = std::max(nu[j], 0.0);
        double viol = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            viol = std::max(viol, ax[i] - qp.ineq_h[i]);
        out.r_prim = std::max(viol, 0.0);
        Vector grad = linalg::matvec(qp.hessian, out.x);
        Vector aty = linalg::matvec_transpose(qp.ineq_g, out.y);
        double rd = 0.0;
        double comp = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            rd = std::max(rd, std::fabs(grad[i] + qp.linear[i] + aty[i]));
        for (std::size_t i = 0; i < m; ++i)
            comp = std::max(comp, std::fabs(out.y[i] * (ax[i] - qp.ineq_h[i])));
        out.r_dual = rd;
        if (out.r_prim <= tol && rd <= tol && comp <= tol) return out;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace

const char* to_string(QpStatus s) {
    switch (s) {
        case QpStatus::solved: return "solved";
        case QpStatus::max_iterations: return "max_iterations";
        case QpStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

QpSolution AdmmSolver::solve(const CondensedQp& qp,
                             const std::optional<WarmStart>& warm) {
    const std::size_t n = qp.dim();
    const std::size_t m = qp.rows();
    if (qp.hessian.rows() != n || qp.hessian.cols() != n ||
        (m > 0 && qp.ineq_g.cols() != n))
        throw DimensionMismatch("solve_qp: inconsistent dimensions");

    QpSolution sol;
    sol.primal.assign(n, 0.0);
    sol.dual.assign(m, 0.0);

    // Unconstrained: direct solve.
    if (m == 0) {
        Matrix preg = qp.hessian;
        Cholesky chol;
        if (!chol.factor(preg)) {
            linalg::add_scaled_identity(preg, settings_.sigma);
            if (!chol.factor(preg)) {
                sol.status = QpStatus::max_iterations;
                return sol;
            }
        }
        Vector mq(n);
        for (std::size_t i = 0; i < n; ++i) mq[i] = -qp.linear[i];
        sol.primal = chol.solve_copy(mq);
        Vector grad = linalg::matvec(qp.hessian, sol.primal);
        double rd = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            rd = std::max(rd, std::fabs(grad[i] + qp.linear[i]));
        sol.dual_residual = rd;
        sol.primal_residual = 0.0;
        sol.status = QpStatus::solved;
        sol.objective = objective_of(qp, sol.primal);
        return sol;
    }

    // A supplied dual identifies the active set directly; when it still
    // matches, one polish replaces the whole splitting loop.
    if (settings_.polish && warm && warm->primal.size() == n &&
        warm->dual.size() == m) {
        if (auto pr = polish(qp, warm->primal, warm->dual, settings_.tolerance)) {
            sol.primal = pr->x;
            sol.dual = pr->y;
            sol.primal_residual = pr->r_prim;
            sol.dual_residual = pr->r_dual;
            sol.polished = true;
            sol.status = QpStatus::solved;
            sol.iterations = 0;
            sol.objective = objective_of(qp, sol.primal);
            return sol;
        }
    }

    // Scaled copies.
    Matrix pb = qp.hessian;
    Vector qb = qp.linear;
    Matrix ab = qp.ineq_g;
    Vector bb = qp.ineq_h;
    Scaling sc;
    if (settings_.scale) {
        sc = equilibrate(pb, qb, ab, bb, settings_.scaling_iters);
    } else {
        sc.d.assign(n, 1.0);
        sc.e.assign(m, 1.0);
    }

    // A^T A for the reduced KKT matrix.
    Matrix ata(n, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = ab.row(i);
        for (std::size_t j = 0; j < n; ++j)
            if (ai[j] != 0.0) simd::axpy(ai[j], ai, ata.row(j), n);
    }
    linalg::symmetrize(ata);

    double rho = settings_.rho0;
    Cholesky chol_m;
    auto refactor = [&]() {
        Matrix kkt = pb;
        linalg::add_scaled_identity(kkt, settings_.sigma);
        for (std::size_t i = 0; i < n; ++i)
            simd::axpy(rho, ata.row(i), kkt.row(i), n);
        if (!chol_m.factor(kkt))
            throw DomainError("solve_qp: reduced KKT matrix not positive definite");
    };
    refactor();

    Vector x(n, 0.0), z(m, 0.0), y(m, 0.0);
    if (warm && warm->primal.size() == n) {
        for (std::size_t i = 0; i < n; ++i) x[i] = warm->primal[i] / sc.d[i];
        if (!ab.empty()) simd::gemv(ab.data(), m, n, x.data(), z.data());
        if (warm->dual.size() == m)
            for (std::size_t i = 0; i < m; ++i)
                y[i] = std::max(0.0, warm->dual[i]) * sc.c / sc.e[i];
    }

    Vector rhs(n), xt(n), zt(m), v(m), y_next(m), dy(m);
    Vector x_u(n), y_u(m), work_n(n), work_m(m);
    const double a_inf = [&] {
        double mx = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            mx = std::max(mx, simd::inf_norm(qp.ineq_g.row(i), n));
        return std::max(mx, 1.0);
    }();
    const double b_inf = std::max(1.0, linalg::inf_norm(qp.ineq_h));

    int infeas_run = 0;
    int polish_attempts = 0;
    int next_polish = settings_.polish_start;
    const double alpha = settings_.alpha;
    bool done = false;

    auto unscale_into = [&](const Vector& xs, const Vector& ys) {
        for (std::size_t i = 0; i < n; ++i) x_u[i] = xs[i] * sc.d[i];
        for (std::size_t i = 0; i < m; ++i) y_u[i] = ys[i] * sc.e[i] / sc.c;
    };

    int k = 0;
    while (k < settings_.max_iterations && !done) {
        ++k;
        // x-update
        for (std::size_t i = 0; i < n; ++i) rhs[i] = settings_.sigma * x[i] - qb[i];
        for (std::size_t i = 0; i < m; ++i) work_m[i] = rho * z[i] - y[i];
        simd::gemv_t(ab.data(), m, n, work_m.data(), work_n.data());
        for (std::size_t i = 0; i < n; ++i) rhs[i] += work_n[i];
        xt = rhs;
        chol_m.solve(xt);
        simd::gemv(ab.data(), m, n, xt.data(), zt.data());
        for (std::size_t i = 0; i < n; ++i) x[i] = alpha * xt[i] + (1.0 - alpha) * x[i];
        for (std::size_t i = 0; i < m; ++i)
            v[i] = alpha * zt[i] + (1.0 - alpha) * z[i] + y[i] / rho;
        simd::clip_upper(v.data(), bb.data(), z.data(), m);
        for (std::size_t i = 0; i < m; ++i) {
            y_next[i] = rho * (v[i] - z[i]);
            dy[i] = y_next[i] - y[i];
            y[i] = y_next[i];
        }

        const bool at_check = k % settings_.check_interval == 0 ||
                              k == settings_.max_iterations;
        if (at_check) {
            // primal infeasibility certificate from the dual increment
            double dymax = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                work_m[i] = std::max(dy[i] * sc.e[i] / sc.c, 0.0);
                dymax = std::max(dymax, work_m[i]);
            }
            if (dymax > 1e-12) {
                for (std::size_t i = 0; i < m; ++i) work_m[i] /= dymax;
                simd::gemv_t(qp.ineq_g.data(), m, n, work_m.data(), work_n.data());
                const double aty_inf = linalg::inf_norm(work_n);
                const double bty = simd::dot(qp.ineq_h.data(), work_m.data(), m);
                if (aty_inf <= settings_.infeas_threshold * a_inf &&
                    bty <= -settings_.infeas_threshold * b_inf) {
                    infeas_run += settings_.check_interval;
                    if (infeas_run >= settings_.infeas_persistence) {
                        unscale_into(x, y);
                        sol.primal = x_u;
                        sol.dual = y_u;
                        sol.status = QpStatus::infeasible;
                        sol.iterations = k;
                        sol.objective = std::numeric_limits<double>::quiet_NaN();
                        return sol;
                    }
                } else {
                    infeas_run = 0;
                }
            } else {
                infeas_run = 0;
            }

            // unscaled residuals
            unscale_into(x, y);
            Vector ax = linalg::matvec(qp.ineq_g, x_u);
            double rp = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                rp = std::max(rp, std::fabs(ax[i] - z[i] / sc.e[i]));
            Vector grad = linalg::matvec(qp.hessian, x_u);
            Vector aty = linalg::matvec_transpose(qp.ineq_g, y_u);
            double rd = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                rd = std::max(rd, std::fabs(grad[i] + qp.linear[i] + aty[i]));

            const bool converged = rp <= settings_.tolerance && rd <= settings_.tolerance;
            // optimistic polish: the active-set cleanup is cheap relative to
            // ADMM iterations, so try it on a doubling schedule
            if (settings_.polish && (converged || k >= next_polish) &&
                polish_attempts < 14) {
                ++polish_attempts;
                next_polish = 2 * k;
                if (auto pr = polish(qp, x_u, y_u, settings_.tolerance)) {
                    sol.primal = pr->x;
                    sol.dual = pr->y;
                    sol.primal_residual = pr->r_prim;
                    sol.dual_residual = pr->r_dual;
                    sol.polished = true;
                    sol.status = QpStatus::solved;
                    sol.iterations = k;
                    sol.objective = objective_of(qp, sol.primal);
                    return sol;
                }
            }
            if (converged) {
                sol.primal = x_u;
                sol.dual = y_u;
                sol.primal_residual = rp;
                sol.dual_residual = rd;
                sol.status = QpStatus::solved;
                sol.iterations = k;
                sol.objective = objective_of(qp, sol.primal);
                return sol;
            }
        }

        if (k % settings_.rho_interval == 0) {
            // residual balancing in the scaled space
            Vector ax_s = linalg::matvec(ab, x);
            double rp_s = 0.0, ax_inf = 0.0, z_inf = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                rp_s = std::max(rp_s, std::fabs(ax_s[i] - z[i]));
                ax_inf = std::max(ax_inf, std::fabs(ax_s[i]));
                z_inf = std::max(z_inf, std::fabs(z[i]));
            }
            Vector px_s = linalg::matvec(pb, x);
            Vector aty_s = linalg::matvec_transpose(ab, y);
            double rd_s = 0.0, px_inf = 0.0, aty_inf = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                rd_s = std::max(rd_s, std::fabs(px_s[i] + qb[i] + aty_s[i]));
                px_inf = std::max(px_inf, std::fabs(px_s[i]));
                aty_inf = std::max(aty_inf, std::fabs(aty_s[i]));
            }
            const double rp_n = rp_s / std::max({ax_inf, z_inf, 1e-10});
            const double rd_n =
                rd_s / std::max({px_inf, aty_inf, linalg::inf_norm(qb), 1e-10});
            const double rho_new =
                clampd(rho * std::sqrt(rp_n / std::max(rd_n, 1e-16)), 1e-6, 1e6);
            if (rho_new > 5.0 * rho || rho_new < rho / 5.0) {
                // rescale the dual iterate so y/rho stays consistent
                rho = rho_new;
                refactor();
            }
        }
    }

    unscale_into(x, y);
    sol.primal = x_u;
    sol.dual = y_u;
    sol.status = QpStatus::max_iterations;
    sol.iterations = k;
    {
        Vector ax = linalg::matvec(qp.ineq_g, x_u);
        double rp = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            rp = std::max(rp, std::fabs(ax[i] - z[i] / sc.e[i]));
        Vector grad = linalg::matvec(qp.hessian, x_u);
        Vector aty = linalg::matvec_transpose(qp.ineq_g, y_u);
        double rd = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            rd = std::max(rd, std::fabs(grad[i] + qp.linear[i] + aty[i]));
        sol.primal_residual = rp;
        sol.dual_residual = rd;
    }
    sol.objective = objective_of(qp, sol.primal);
    return sol;
}

QpSolution solve_qp(const CondensedQp& qp, const std::optional<WarmStart>& warm,
                    const SolverSettings& settings) {
    AdmmSolver solver(settings);
    return solver.solve(qp, warm);
}

}  // namespace lpvmpc::qp
