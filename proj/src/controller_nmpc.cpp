#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "lpvmpc/controller.hpp"
#include "lpvmpc/simd_kernels.hpp"

namespace lpvmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kElasticWeight = 1e3;

struct Rollout {
    std::vector<VehicleState> states;  // z_0..z_N
    bool valid = false;
};

Rollout roll(const VehicleState& z0, std::span<const ControlInput> inputs,
             const VehicleParams& par) {
    Rollout out;
    out.states.resize(inputs.size() + 1);
    out.states[0] = z0;
    try {
        for (std::size_t i = 0; i < inputs.size(); ++i)
            out.states[i + 1] = euler_step(out.states[i], inputs[i], par);
        out.valid = true;
    } catch (const DomainError&) {
        out.valid = false;
    }
    return out;
}

double quad_norm(const linalg::Matrix& w, const double* v, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) acc += v[i] * w(i, j) * v[j];
    return acc;
}

}  // namespace

NmpcSqpController::NmpcSqpController(ControllerConfig cfg)
    : cfg_(std::move(cfg)), solver_(cfg_.solver) {
    if (cfg_.horizon < 1) throw DomainError("NmpcSqpController: horizon must be >= 1");
    cfg_.vehicle.validate();
}

void NmpcSqpController::reset() {
    has_prev_plan_ = false;
    prev_inputs_.clear();
    warm_dual_.clear();
    u_prev_ = {};
}

StepResult NmpcSqpController::step(const VehicleState& z,
                                   std::span<const ReferenceState> refs,
                                   std::span<const EllipseObstacle> obstacles,
                                   const RoadBoundary& road) {
    const int n = cfg_.horizon;
    const std::size_t nu = 2 * static_cast<std::size_t>(n);
    const std::size_t nz = 6 * static_cast<std::size_t>(n);
    if (refs.size() != static_cast<std::size_t>(n) + 1)
        throw DimensionMismatch("nmpc step: reference window must have N+1 entries");

    const auto t0 = std::chrono::steady_clock::now();

    const auto z_ref = stack_reference(refs, z.psi);
    const auto [state_box, input_box] = box_rows(cfg_.bounds);
    const auto rate = rate_rows(u_prev_, n, cfg_.bounds);
    const auto road_rows = road_tangent_rows(road, refs);
    const linalg::Matrix p_term = cfg_.terminal_weight();

    // fresh NLP solve each step: the initial iterate holds the previous
    // input, mirroring a per-step nonlinear solve rather than a real-time
    // iteration off the shifted plan
    std::vector<ControlInput> u(static_cast<std::size_t>(n), u_prev_);

    // tracking objective plus a constraint-violation penalty
    auto merit = [&](std::span<const ControlInput> cand, Rollout* keep) -> double {
        const Rollout ro = roll(z, cand, cfg_.vehicle);
        if (!ro.valid) return kInf;
        double j = 0.0;
        for (int i = 1; i <= n; ++i) {
            const auto zi = ro.states[static_cast<std::size_t>(i)].to_array();
            double err[6];
            for (int c = 0; c < 6; ++c)
                err[c] = zi[static_cast<std::size_t>(c)] -
                         z_ref[6 * static_cast<std::size_t>(i - 1) +
                               static_cast<std::size_t>(c)];
            j += quad_norm(i == n ? p_term : cfg_.q, err, 6);
        }
        for (int i = 0; i < n; ++i) {
            const double ui[2] = {cand[static_cast<std::size_t>(i)].delta,
                                  cand[static_cast<std::size_t>(i)].a_lon};
            j += quad_norm(cfg_.r, ui, 2);
        }
        double viol = 0.0;
        for (int i = 1; i <= n; ++i) {
            const auto zi = ro.states[static_cast<std::size_t>(i)].to_array();
            for (std::size_t rr = 0; rr < state_box.rows(); ++rr) {
                double lhs = 0.0;
                for (int c = 0; c < 6; ++c)
                    lhs += state_box.g(rr, static_cast<std::size_t>(c)) *
                           zi[static_cast<std::size_t>(c)];
                viol += std::max(0.0, lhs - state_box.h[rr]);
            }
        }
        for (std::size_t rr = 0; rr < road_rows.rows(); ++rr) {
            double lhs = 0.0;
            for (int i = 1; i <= n; ++i) {
                const std::size_t col = 6 * static_cast<std::size_t>(i - 1);
                lhs += road_rows.g(rr, col) *
                           ro.states[static_cast<std::size_t>(i)].x +
                       road_rows.g(rr, col + 1) *
                           ro.states[static_cast<std::size_t>(i)].y;
            }
            viol += std::max(0.0, lhs - road_rows.h[rr]);
        }
        for (const auto& obs : obstacles) {
            const double unit = obs.rx * obs.rx * obs.ry * obs.ry;
            for (int i = 1; i <= n; ++i) {
                const auto& zi = ro.states[static_cast<std::size_t>(i)];
                viol += std::max(0.0, -ellipse_gauge(obs, zi.x, zi.y) / unit);
            }
        }
        if (keep) *keep = ro;
        return j + cfg_.sqp.merit_penalty * viol;
    };

    StepResult out;
    Rollout current;
    double phi = merit(u, &current);
    if (!current.valid) {
        // iterate is outside the model domain; coast and flag the step
        out.input = u_prev_;
        out.diagnostics.fallback = true;
        out.diagnostics.solver_status = qp::QpStatus::infeasible;
        out.diagnostics.sqp_converged = false;
        out.plan.states = {z};
        out.plan.inputs = {out.input};
        const auto t1 = std::chrono::steady_clock::now();
        out.diagnostics.solve_time = std::chrono::duration<double>(t1 - t0).count();
        u_prev_ = out.input;
        has_prev_plan_ = false;
        return out;
    }

    bool converged = false;
    bool qp_failed = false;
    int outer = 0;
    qp::QpStatus last_status = qp::QpStatus::solved;
    int last_iters = 0;

    std::array<std::array<double, 6>, 6> jz{};
    std::array<std::array<double, 2>, 6> ju{};

    for (outer = 0; outer < cfg_.sqp.max_outer; ++outer) {
        // linearize the Euler dynamics along the iterate
        std::vector<LpvMatrices> lin(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            dynamics_jacobians(current.states[static_cast<std::size_t>(i)],
                               u[static_cast<std::size_t>(i)], cfg_.vehicle, jz, ju);
            LpvMatrices& m = lin[static_cast<std::size_t>(i)];
            m.discrete = true;
            for (int r = 0; r < 6; ++r) {
                for (int c = 0; c < 6; ++c)
                    m.a[r][c] = cfg_.vehicle.t_s * jz[r][c] + (r == c ? 1.0 : 0.0);
                for (int c = 0; c < 2; ++c) m.b[r][c] = cfg_.vehicle.t_s * ju[r][c];
            }
        }
        const auto ops = qp::condense(lin);

        // quadratic model in dU
        linalg::Matrix q_hat(nz, nz);
        for (int i = 0; i < n; ++i) {
            const linalg::Matrix& blk = i == n - 1 ? p_term : cfg_.q;
            for (int r = 0; r < 6; ++r)
                for (int c = 0; c < 6; ++c)
                    q_hat(6 * static_cast<std::size_t>(i) + r,
                          6 * static_cast<std::size_t>(i) + c) = blk(r, c);
        }
        linalg::Matrix hess = linalg::quadratic_form(ops.gamma, q_hat, ops.gamma);
        for (std::size_t i = 0; i < nu; ++i)
            for (std::size_t j = 0; j < nu; ++j) hess(i, j) *= 2.0;
        for (int i = 0; i < n; ++i)
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    hess(2 * static_cast<std::size_t>(i) + r,
                         2 * static_cast<std::size_t>(i) + c) += 2.0 * cfg_.r(r, c);
        linalg::symmetrize(hess);

        linalg::Vector track_err(nz);
        for (int i = 1; i <= n; ++i) {
            const auto zi = current.states[static_cast<std::size_t>(i)].to_array();
            for (int c = 0; c < 6; ++c) {
                const std::size_t at = 6 * static_cast<std::size_t>(i - 1) +
                                       static_cast<std::size_t>(c);
                track_err[at] = zi[static_cast<std::size_t>(c)] - z_ref[at];
            }
        }
        linalg::Vector qerr = linalg::matvec(q_hat, track_err);
        linalg::Vector lin_term = linalg::matvec_transpose(ops.gamma, qerr);
        for (std::size_t i = 0; i < nu; ++i) lin_term[i] *= 2.0;
        for (int i = 0; i < n; ++i) {
            const double ui[2] = {u[static_cast<std::size_t>(i)].delta,
                                  u[static_cast<std::size_t>(i)].a_lon};
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    lin_term[2 * static_cast<std::size_t>(i) + r] +=
                        2.0 * cfg_.r(r, c) * ui[c];
        }

        // constraint rows in dU space; one elastic slack keeps the linearized
        // obstacle rows from making the subproblem infeasible far from the
        // converged maneuver
        std::size_t n_obs_rows = 0;
        for (const auto& obs : obstacles) {
            (void)obs;
            n_obs_rows += static_cast<std::size_t>(n);
        }
        const bool elastic = n_obs_rows > 0;
        const std::size_t dim = nu + (elastic ? 1 : 0);
        const std::size_t total = input_box.rows() * static_cast<std::size_t>(n) +
                                  rate.rows() +
                                  state_box.rows() * static_cast<std::size_t>(n) +
                                  road_rows.rows() + n_obs_rows +
                                  (elastic ? 1 : 0);
        qp::CondensedQp sub;
        sub.horizon = n;
        sub.n_inputs = static_cast<int>(nu);
        {
            linalg::Matrix hfull(dim, dim);
            for (std::size_t i = 0; i < nu; ++i)
                for (std::size_t j = 0; j < nu; ++j) hfull(i, j) = hess(i, j);
            linalg::Vector lfull(dim, 0.0);
            for (std::size_t i = 0; i < nu; ++i) lfull[i] = lin_term[i];
            if (elastic) {
                // exact-penalty weight: above the obstacle-row duals, far
                // below the merit weight, and conditioned like the H entries
                hfull(nu, nu) = 1.0;
                lfull[nu] = kElasticWeight;
            }
            sub.hessian = std::move(hfull);
            sub.linear = std::move(lfull);
        }
        sub.ineq_g = linalg::Matrix(total, dim);
        sub.ineq_h.assign(total, 0.0);
        std::size_t at = 0;

        for (int i = 0; i < n; ++i) {
            const double ui[2] = {u[static_cast<std::size_t>(i)].delta,
                                  u[static_cast<std::size_t>(i)].a_lon};
            for (std::size_t rr = 0; rr < input_box.rows(); ++rr) {
                double lhs = 0.0;
                for (int c = 0; c < 2; ++c) {
                    sub.ineq_g(at, 2 * static_cast<std::size_t>(i) + c) =
                        input_box.g(rr, static_cast<std::size_t>(c));
                    lhs += input_box.g(rr, static_cast<std::size_t>(c)) * ui[c];
                }
                sub.ineq_h[at++] = input_box.h[rr] - lhs;
            }
        }
        {
            linalg::Vector u_flat(nu);
            for (int i = 0; i < n; ++i) {
                u_flat[2 * static_cast<std::size_t>(i)] =
                    u[static_cast<std::size_t>(i)].delta;
                u_flat[2 * static_cast<std::size_t>(i) + 1] =
                    u[static_cast<std::size_t>(i)].a_lon;
            }
            const auto ru = linalg::matvec(rate.g, u_flat);
            for (std::size_t rr = 0; rr < rate.rows(); ++rr) {
                for (std::size_t c = 0; c < nu; ++c) sub.ineq_g(at, c) = rate.g(rr, c);
                sub.ineq_h[at++] = rate.h[rr] - ru[rr];
            }
        }
        auto map_state_row = [&](std::span<const double> g_row, double rhs) {
            double* dst = sub.ineq_g.row(at);
            for (std::size_t k = 0; k < nz; ++k)
                if (g_row[k] != 0.0) simd::axpy(g_row[k], ops.gamma.row(k), dst, nu);
            double lhs = 0.0;
            for (int i = 1; i <= n; ++i) {
                const auto zi = current.states[static_cast<std::size_t>(i)].to_array();
                for (int c = 0; c < 6; ++c)
                    lhs += g_row[6 * static_cast<std::size_t>(i - 1) +
                                 static_cast<std::size_t>(c)] *
                           zi[static_cast<std::size_t>(c)];
            }
            sub.ineq_h[at++] = rhs - lhs;
        };
        {
            linalg::Vector g_row(nz, 0.0);
            for (int i = 1; i <= n; ++i)
                for (std::size_t rr = 0; rr < state_box.rows(); ++rr) {
                    std::fill(g_row.begin(), g_row.end(), 0.0);
                    for (int c = 0; c < 6; ++c)
                        g_row[6 * static_cast<std::size_t>(i - 1) +
                              static_cast<std::size_t>(c)] =
                            state_box.g(rr, static_cast<std::size_t>(c));
                    map_state_row(g_row, state_box.h[rr]);
                }
            for (std::size_t rr = 0; rr < road_rows.rows(); ++rr) {
                std::copy(road_rows.g.row(rr), road_rows.g.row(rr) + nz, g_row.begin());
                map_state_row(g_row, road_rows.h[rr]);
            }
            // ellipse rows linearized at the iterate, normalized by the gauge
            // scale: -grad G . d(X,Y) / unit - s <= G / unit
            for (const auto& obs : obstacles) {
                const double unit = obs.rx * obs.rx * obs.ry * obs.ry;
                for (int i = 1; i <= n; ++i) {
                    const auto& zi = current.states[static_cast<std::size_t>(i)];
                    const double gx = 2.0 * obs.ry * obs.ry * (zi.x - obs.cx) / unit;
                    const double gy = 2.0 * obs.rx * obs.rx * (zi.y - obs.cy) / unit;
                    std::fill(g_row.begin(), g_row.end(), 0.0);
                    g_row[6 * static_cast<std::size_t>(i - 1)] = -gx;
                    g_row[6 * static_cast<std::size_t>(i - 1) + 1] = -gy;
                    sub.ineq_h[at] = ellipse_gauge(obs, zi.x, zi.y) / unit;
                    double* dst = sub.ineq_g.row(at);
                    for (std::size_t k = 0; k < nz; ++k)
                        if (g_row[k] != 0.0)
                            simd::axpy(g_row[k], ops.gamma.row(k), dst, nu);
                    sub.ineq_g(at, nu) = -1.0;
                    ++at;
                }
            }
            if (elastic) {
                sub.ineq_g(at, nu) = -1.0;  // s >= 0
                sub.ineq_h[at++] = 0.0;
            }
        }

        std::optional<qp::WarmStart> warm;
        if (warm_dual_.size() == sub.rows()) {
            warm = qp::WarmStart{};
            warm->primal.assign(dim, 0.0);
            warm->dual = warm_dual_;
        }
        const qp::QpSolution sol = solver_.solve(sub, warm);
        if (observer_) observer_(sub, sol);
        if (sol.status == qp::QpStatus::solved) warm_dual_ = sol.dual;
        last_status = sol.status;
        last_iters = sol.iterations;
        if (sol.status != qp::QpStatus::solved) {
            qp_failed = true;
            break;
        }

        const double step_norm =
            simd::inf_norm(sol.primal.data(), nu);  // input step only
        if (step_norm < cfg_.sqp.step_tolerance) {
            for (int i = 0; i < n; ++i) {
                u[static_cast<std::size_t>(i)].delta +=
                    sol.primal[2 * static_cast<std::size_t>(i)];
                u[static_cast<std::size_t>(i)].a_lon +=
                    sol.primal[2 * static_cast<std::size_t>(i) + 1];
            }
            const Rollout ro = roll(z, u, cfg_.vehicle);
            if (ro.valid) current = ro;
            converged = true;
            ++outer;
            break;
        }

        // backtracking on the merit
        double t = 1.0;
        bool accepted = false;
        std::vector<ControlInput> cand(static_cast<std::size_t>(n));
        for (int bt = 0; bt < cfg_.sqp.max_backtracks; ++bt, t *= 0.5) {
            for (int i = 0; i < n; ++i) {
                cand[static_cast<std::size_t>(i)].delta =
                    u[static_cast<std::size_t>(i)].delta +
                    t * sol.primal[2 * static_cast<std::size_t>(i)];
                cand[static_cast<std::size_t>(i)].a_lon =
                    u[static_cast<std::size_t>(i)].a_lon +
                    t * sol.primal[2 * static_cast<std::size_t>(i) + 1];
            }
            Rollout ro;
            const double phi_c = merit(cand, &ro);
            if (phi_c < phi) {
                u = cand;
                current = ro;
                phi = phi_c;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no merit decrease: report not converged
    }

    const auto t1 = std::chrono::steady_clock::now();
    out.diagnostics.solve_time = std::chrono::duration<double>(t1 - t0).count();
    out.diagnostics.sqp_iterations = outer;
    out.diagnostics.sqp_converged = converged;
    out.diagnostics.qp_iterations = last_iters;

    if (qp_failed && last_status == qp::QpStatus::infeasible) {
        out.input = u_prev_;
        out.input.delta = std::clamp(out.input.delta, -cfg_.bounds.delta_abs,
                                     cfg_.bounds.delta_abs);
        out.input.a_lon = std::clamp(out.input.a_lon, cfg_.bounds.a_min,
                                     cfg_.bounds.a_max);
        out.diagnostics.fallback = true;
        out.diagnostics.solver_status = qp::QpStatus::infeasible;
        out.plan.states = current.states;
        out.plan.inputs = u;
        u_prev_ = out.input;
        has_prev_plan_ = false;
        return out;
    }

    out.diagnostics.solver_status = last_status;
    out.input = u.front();
    out.plan.states = current.states;
    out.plan.inputs = u;

    // objective of the accepted iterate (tracking cost without the penalty)
    double j = 0.0;
    for (int i = 1; i <= n; ++i) {
        const auto zi = current.states[static_cast<std::size_t>(i)].to_array();
        double err[6];
        for (int c = 0; c < 6; ++c)
            err[c] = zi[static_cast<std::size_t>(c)] -
                     z_ref[6 * static_cast<std::size_t>(i - 1) +
                           static_cast<std::size_t>(c)];
        j += quad_norm(i == n ? p_term : cfg_.q, err, 6);
    }
    for (int i = 0; i < n; ++i) {
        const double ui[2] = {u[static_cast<std::size_t>(i)].delta,
                              u[static_cast<std::size_t>(i)].a_lon};
        j += quad_norm(cfg_.r, ui, 2);
    }
    out.diagnostics.objective = j;

    prev_inputs_ = u;
    has_prev_plan_ = true;
    u_prev_ = out.input;
    return out;
}

}  // namespace lpvmpc
