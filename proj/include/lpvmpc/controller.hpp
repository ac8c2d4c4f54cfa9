#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpvmpc/constraints.hpp"
#include "lpvmpc/qp.hpp"
#include "lpvmpc/reference.hpp"
#include "lpvmpc/vehicle_model.hpp"

// The three controllers: trust-region LPVMPC, standard LPVMPC (trust region
// disabled), and the SQP-based NMPC baseline.

namespace lpvmpc {

enum class ControllerKind { lpv_trust, lpv_standard, nmpc_sqp };

const char* to_string(ControllerKind kind);
std::optional<ControllerKind> controller_kind_from(const std::string& name);

struct SqpSettings {
    int max_outer = 25;
    double step_tolerance = 1e-4;
    double merit_penalty = 1e5;
    int max_backtracks = 12;
};

struct ControllerConfig {
    ControllerKind kind = ControllerKind::lpv_trust;
    int horizon = 8;
    linalg::Matrix q;  // 6x6
    linalg::Matrix r;  // 2x2
    linalg::Matrix p;  // 6x6; empty means p = q
    TrustRegionConfig trust = TrustRegionConfig::defaults();
    qp::SolverSettings solver;
    SqpSettings sqp;
    MpcBounds bounds = MpcBounds::defaults(0.05);
    VehicleParams vehicle;

    linalg::Matrix terminal_weight() const { return p.empty() ? q : p; }
};

struct SchedulingTrajectory {
    std::vector<SchedulingVector> entries;  // N + 1 values p_hat_{0..N}
};

// All N+1 entries copy the clamped scheduling of (z0, u0).
SchedulingTrajectory init_scheduling(const VehicleState& z0,
                                     const ControlInput& u0, int n);

// Shift by one step with tail-hold.
SchedulingTrajectory shift_scheduling(const SchedulingTrajectory& prev);

struct StepDiagnostics {
    qp::QpStatus solver_status = qp::QpStatus::max_iterations;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 4> slack_max{};  // eps channels (v, nu, psi, delta)
    double solve_time = 0.0;            // seconds around the solver call only
    bool obstacle_active = false;
    double scheduling_error = 0.0;  // inf-norm of p_hat[0] vs realized p
    int qp_iterations = 0;
    int sqp_iterations = 0;
    bool sqp_converged = true;
    bool fallback = false;  // input came from the hold-previous policy
};

struct OpenLoopPlan {
    std::vector<VehicleState> states;   // z_0..z_N, z_0 measured
    std::vector<ControlInput> inputs;   // u_0..u_{N-1}
};

struct StepResult {
    ControlInput input;
    OpenLoopPlan plan;
    StepDiagnostics diagnostics;
};

using QpObserver =
    std::function<void(const qp::CondensedQp&, const qp::QpSolution&)>;

class LpvMpcController {
public:
    explicit LpvMpcController(ControllerConfig cfg);

    StepResult step(const VehicleState& z, std::span<const ReferenceState> refs,
                    std::span<const EllipseObstacle> obstacles,
                    const RoadBoundary& road);

    // Assembles the QP the next step() call would solve, without mutating
    // controller state. Exposed for matrix-level cross checks.
    qp::CondensedQp build_step_qp(const VehicleState& z,
                                  std::span<const ReferenceState> refs,
                                  std::span<const EllipseObstacle> obstacles,
                                  const RoadBoundary& road) const;

    void reset();
    void set_qp_observer(QpObserver observer) { observer_ = std::move(observer); }
    const ControllerConfig& config() const { return cfg_; }
    const SchedulingTrajectory& scheduling() const { return p_hat_; }

private:
    struct Prepared {
        qp::PredictionOperators ops;
        qp::CondensedQp qp;
        ObstacleHalfspace obstacle;
        SchedulingVector p0_used;
    };
    Prepared prepare(const VehicleState& z, std::span<const ReferenceState> refs,
                     std::span<const EllipseObstacle> obstacles,
                     const RoadBoundary& road) const;

    ControllerConfig cfg_;
    qp::AdmmSolver solver_;
    QpObserver observer_;
    SchedulingTrajectory p_hat_;
    std::vector<VehicleState> prev_states_;  // z*_{1..N} of the last solve
    std::vector<ControlInput> prev_inputs_;  // u*_{0..N-1}
    ControlInput u_prev_{};
    std::optional<qp::WarmStart> warm_;
    std::size_t warm_rows_ = 0;
    bool initialized_ = false;
    bool has_prev_plan_ = false;
};

class NmpcSqpController {
public:
    explicit NmpcSqpController(ControllerConfig cfg);

    StepResult step(const VehicleState& z, std::span<const ReferenceState> refs,
                    std::span<const EllipseObstacle> obstacles,
                    const RoadBoundary& road);

    void reset();
    void set_qp_observer(QpObserver observer) { observer_ = std::move(observer); }
    const ControllerConfig& config() const { return cfg_; }

private:
    ControllerConfig cfg_;
    qp::AdmmSolver solver_;
    QpObserver observer_;
    std::vector<ControlInput> prev_inputs_;
    linalg::Vector warm_dual_;  // inner-QP dual carried across iterations
    ControlInput u_prev_{};
    bool has_prev_plan_ = false;
};

// Reference stack for steps 1..N with the yaw sequence unwrapped so the
// tracking error never jumps by 2 pi.
std::vector<double> stack_reference(std::span<const ReferenceState> refs,
                                    double psi_anchor);

}  // namespace lpvmpc
