#include <algorithm>
#include <chrono>
#include <cmath>

#include "lpvmpc/controller.hpp"

namespace lpvmpc {

const char* to_string(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::lpv_trust: return "lpv_trust";
        case ControllerKind::lpv_standard: return "lpv_standard";
        case ControllerKind::nmpc_sqp: return "nmpc_sqp";
    }
    return "unknown";
}

std::optional<ControllerKind> controller_kind_from(const std::string& name) {
    if (name == "lpv_trust") return ControllerKind::lpv_trust;
    if (name == "lpv_standard") return ControllerKind::lpv_standard;
    if (name == "nmpc_sqp") return ControllerKind::nmpc_sqp;
    return std::nullopt;
}

SchedulingTrajectory init_scheduling(const VehicleState& z0,
                                     const ControlInput& u0, int n) {
    SchedulingTrajectory out;
    out.entries.assign(static_cast<std::size_t>(n) + 1, scheduling_of(z0, u0));
    return out;
}

SchedulingTrajectory shift_scheduling(const SchedulingTrajectory& prev) {
    SchedulingTrajectory out;
    const std::size_t n = prev.entries.size();
    out.entries.resize(n);
    for (std::size_t i = 0; i + 1 < n; ++i) out.entries[i] = prev.entries[i + 1];
    out.entries[n - 1] = prev.entries[n - 1];
    return out;
}

std::vector<double> stack_reference(std::span<const ReferenceState> refs,
                                    double psi_anchor) {
    const std::size_t n = refs.size() - 1;
    std::vector<double> out(6 * n, 0.0);
    double psi_prev_raw = refs[0].psi;
    double psi_acc = psi_anchor + wrap_angle(refs[0].psi - psi_anchor);
    for (std::size_t i = 1; i <= n; ++i) {
        psi_acc += wrap_angle(refs[i].psi - psi_prev_raw);
        psi_prev_raw = refs[i].psi;
        const std::size_t at = 6 * (i - 1);
        out[at + 0] = refs[i].x;
        out[at + 1] = refs[i].y;
        out[at + 2] = refs[i].v_lon;
        out[at + 3] = refs[i].v_lat;
        out[at + 4] = psi_acc;
        out[at + 5] = refs[i].omega;
    }
    return out;
}

namespace {

double sched_distance(const SchedulingVector& a, const SchedulingVector& b) {
    return std::max({std::fabs(a.v_lon - b.v_lon), std::fabs(a.v_lat - b.v_lat),
                     std::fabs(a.delta - b.delta), std::fabs(a.psi - b.psi)});
}

ControlInput clamp_to_box(const ControlInput& u, const MpcBounds& b) {
    ControlInput out = u;
    out.delta = std::clamp(out.delta, -b.delta_abs, b.delta_abs);
    out.a_lon = std::clamp(out.a_lon, b.a_min, b.a_max);
    return out;
}

}  // namespace

LpvMpcController::LpvMpcController(ControllerConfig cfg)
    : cfg_(std::move(cfg)), solver_(cfg_.solver) {
    if (cfg_.horizon < 1) throw DomainError("LpvMpcController: horizon must be >= 1");
    if (cfg_.trust.e_p.empty()) cfg_.trust.e_p = TrustRegionConfig::defaults().e_p;
    if (cfg_.kind == ControllerKind::lpv_standard) cfg_.trust.enabled = false;
    cfg_.vehicle.validate();
}

void LpvMpcController::reset() {
    initialized_ = false;
    has_prev_plan_ = false;
    warm_.reset();
    warm_rows_ = 0;
    u_prev_ = {};
    prev_states_.clear();
    prev_inputs_.clear();
}

LpvMpcController::Prepared LpvMpcController::prepare(
    const VehicleState& z, std::span<const ReferenceState> refs,
    std::span<const EllipseObstacle> obstacles, const RoadBoundary& road) const {
    const int n = cfg_.horizon;
    if (refs.size() != static_cast<std::size_t>(n) + 1)
        throw DimensionMismatch("lpv step: reference window must have N+1 entries");

    const SchedulingTrajectory p_hat =
        initialized_ ? p_hat_ : init_scheduling(z, u_prev_, n);

    std::vector<LpvMatrices> models;
    models.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        models.push_back(lpv_discretize(
            lpv_continuous(p_hat.entries[static_cast<std::size_t>(i)], cfg_.vehicle),
            cfg_.vehicle.t_s));

    Prepared prep;
    prep.ops = qp::condense(models);
    prep.p0_used = p_hat.entries.front();

    const auto z_ref = stack_reference(refs, z.psi);
    auto [hessian, linear] =
        qp::build_cost(prep.ops, cfg_.q, cfg_.r, cfg_.terminal_weight(),
                       cfg_.trust.e_p, z, z_ref);

    const auto [state_box, input_box] = box_rows(cfg_.bounds);
    const auto rate = rate_rows(u_prev_, n, cfg_.bounds);
    const auto road_rows = road_tangent_rows(road, refs);

    for (const auto& obs : obstacles) {
        prep.obstacle = obstacle_tangent(obs, refs, road);
        if (prep.obstacle.active) break;
    }

    HalfspacePolytope trust;
    if (cfg_.trust.enabled && has_prev_plan_) {
        std::vector<VehicleState> z_hat(static_cast<std::size_t>(n) + 1);
        for (int i = 0; i < n; ++i)
            z_hat[static_cast<std::size_t>(i)] = prev_states_[static_cast<std::size_t>(i)];
        z_hat[static_cast<std::size_t>(n)] = prev_states_.back();
        std::vector<ControlInput> u_hat(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const std::size_t src = std::min(static_cast<std::size_t>(i) + 1,
                                             prev_inputs_.size() - 1);
            u_hat[static_cast<std::size_t>(i)] = prev_inputs_[src];
        }
        trust = trust_region_rows(z_hat, u_hat, cfg_.trust);
    }

    prep.qp = qp::assemble_qp(prep.ops, std::move(hessian), std::move(linear),
                              state_box, input_box, rate, road_rows,
                              prep.obstacle, trust, z);
    return prep;
}

qp::CondensedQp LpvMpcController::build_step_qp(
    const VehicleState& z, std::span<const ReferenceState> refs,
    std::span<const EllipseObstacle> obstacles, const RoadBoundary& road) const {
    return prepare(z, refs, obstacles, road).qp;
}

StepResult LpvMpcController::step(const VehicleState& z,
                                  std::span<const ReferenceState> refs,
                                  std::span<const EllipseObstacle> obstacles,
                                  const RoadBoundary& road) {
    const int n = cfg_.horizon;
    if (!initialized_) {
        p_hat_ = init_scheduling(z, u_prev_, n);
        initialized_ = true;
    }

    Prepared prep = prepare(z, refs, obstacles, road);

    std::optional<qp::WarmStart> warm;
    if (warm_ && warm_->primal.size() == prep.qp.dim()) {
        warm = warm_;
        if (warm_rows_ != prep.qp.rows()) warm->dual.clear();
    }

    const auto t0 = std::chrono::steady_clock::now();
    const qp::QpSolution sol = solver_.solve(prep.qp, warm);
    const auto t1 = std::chrono::steady_clock::now();
    if (observer_) observer_(prep.qp, sol);

    StepResult out;
    out.diagnostics.solver_status = sol.status;
    out.diagnostics.qp_iterations = sol.iterations;
    out.diagnostics.solve_time = std::chrono::duration<double>(t1 - t0).count();
    out.diagnostics.obstacle_active = prep.obstacle.active;

    if (sol.status != qp::QpStatus::solved) {
        // hold the previous input; rate rows are satisfied by construction
        out.input = clamp_to_box(u_prev_, cfg_.bounds);
        out.diagnostics.fallback = true;
        out.plan.states = {z};
        out.plan.inputs = {out.input};
        out.diagnostics.scheduling_error =
            sched_distance(prep.p0_used, scheduling_of(z, out.input));
        p_hat_ = shift_scheduling(p_hat_);
        if (has_prev_plan_) {
            prev_states_.erase(prev_states_.begin());
            prev_states_.push_back(prev_states_.back());
            prev_inputs_.erase(prev_inputs_.begin());
            prev_inputs_.push_back(prev_inputs_.back());
        }
        warm_.reset();
        u_prev_ = out.input;
        return out;
    }

    const std::size_t nu = 2 * static_cast<std::size_t>(n);
    out.input = {sol.primal[0], sol.primal[1]};
    out.diagnostics.objective = sol.objective;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c)
            out.diagnostics.slack_max[static_cast<std::size_t>(c)] = std::max(
                out.diagnostics.slack_max[static_cast<std::size_t>(c)],
                std::fabs(sol.primal[nu + 4 * static_cast<std::size_t>(i) +
                                     static_cast<std::size_t>(c)]));

    // open-loop plan from the prediction operators
    std::span<const double> u_star(sol.primal.data(), nu);
    auto z_pred = linalg::matvec(prep.ops.phi, z.to_array());
    const auto gu = linalg::matvec(prep.ops.gamma, u_star);
    for (std::size_t i = 0; i < z_pred.size(); ++i) z_pred[i] += gu[i];

    out.plan.states.resize(static_cast<std::size_t>(n) + 1);
    out.plan.states[0] = z;
    for (int i = 1; i <= n; ++i) {
        std::array<double, 6> zi{};
        for (int c = 0; c < 6; ++c)
            zi[static_cast<std::size_t>(c)] =
                z_pred[6 * static_cast<std::size_t>(i - 1) + static_cast<std::size_t>(c)];
        out.plan.states[static_cast<std::size_t>(i)] = VehicleState::from_array(zi);
    }
    out.plan.inputs.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.plan.inputs[static_cast<std::size_t>(i)] = {
            sol.primal[2 * static_cast<std::size_t>(i)],
            sol.primal[2 * static_cast<std::size_t>(i) + 1]};

    out.diagnostics.scheduling_error =
        sched_distance(prep.p0_used, scheduling_of(z, out.input));

    // scheduling update from the solved plan, then the one-step shift
    for (int i = 0; i <= n; ++i) {
        const VehicleState& zi = out.plan.states[static_cast<std::size_t>(i)];
        const std::size_t ui = std::min(static_cast<std::size_t>(i),
                                        out.plan.inputs.size() - 1);
        p_hat_.entries[static_cast<std::size_t>(i)] =
            scheduling_of(zi, out.plan.inputs[ui]);
    }
    p_hat_ = shift_scheduling(p_hat_);

    prev_states_.assign(out.plan.states.begin() + 1, out.plan.states.end());
    prev_inputs_ = out.plan.inputs;
    has_prev_plan_ = true;

    // warm start for the next step: shift the input and slack blocks
    qp::WarmStart next;
    next.primal.assign(prep.qp.dim(), 0.0);
    for (int i = 0; i < n; ++i) {
        const std::size_t src = std::min(static_cast<std::size_t>(i) + 1,
                                         static_cast<std::size_t>(n) - 1);
        next.primal[2 * static_cast<std::size_t>(i)] = sol.primal[2 * src];
        next.primal[2 * static_cast<std::size_t>(i) + 1] = sol.primal[2 * src + 1];
        for (int c = 0; c < 4; ++c) {
            const std::size_t esrc = std::min(static_cast<std::size_t>(i) + 1,
                                              static_cast<std::size_t>(n) - 1);
            next.primal[nu + 4 * static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(c)] =
                sol.primal[nu + 4 * esrc + static_cast<std::size_t>(c)];
        }
    }
    next.dual = sol.dual;
    warm_ = std::move(next);
    warm_rows_ = prep.qp.rows();

    u_prev_ = out.input;
    return out;
}

}  // namespace lpvmpc
