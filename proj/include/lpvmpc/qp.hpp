#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpvmpc/constraints.hpp"
#include "lpvmpc/linalg.hpp"
#include "lpvmpc/vehicle_model.hpp"

// Condenses the LPV prediction model into dense prediction operators,
// assembles the tracking QP with slacks, and solves it with an embedded
// operator-splitting dense QP method.

namespace lpvmpc::qp {

using linalg::Matrix;
using linalg::Vector;

struct PredictionOperators {
    Matrix phi;    // (6N) x 6
    Matrix gamma;  // (6N) x (2N), block lower-triangular
    int horizon = 0;
};

// Row-group sizes of an assembled QP, in stacking order.
struct RowLayout {
    std::size_t input_box = 0;
    std::size_t rate = 0;
    std::size_t state_box = 0;
    std::size_t road = 0;
    std::size_t obstacle = 0;
    std::size_t trust = 0;
    std::size_t slack_nonneg = 0;
};

// Dense QP over the decision vector [U (2N); E (4N)]:
//   min 1/2 x^T hessian x + linear^T x   s.t.  ineq_g x <= ineq_h
struct CondensedQp {
    Matrix hessian;
    Vector linear;
    Matrix ineq_g;
    Vector ineq_h;
    int horizon = 0;       // 0 when not an MPC-shaped problem
    int n_inputs = 0;      // width of the U block (= dim when no slack block)
    RowLayout layout;

    std::size_t dim() const { return linear.size(); }
    std::size_t rows() const { return ineq_h.size(); }
};

enum class QpStatus { solved, max_iterations, infeasible };

const char* to_string(QpStatus s);

struct QpSolution {
    Vector primal;
    Vector dual;
    double objective = 0.0;
    QpStatus status = QpStatus::max_iterations;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    bool polished = false;
};

struct SolverSettings {
    double tolerance = 1e-6;        // unscaled primal/dual residual target
    int max_iterations = 4000;
    double sigma = 1e-6;
    double alpha = 1.6;             // over-relaxation
    double rho0 = 0.1;
    int rho_interval = 25;          // residual balancing period
    int check_interval = 10;
    double infeas_threshold = 1e-7;
    int infeas_persistence = 50;    // iterations the certificate must hold
    bool polish = true;
    int polish_start = 50;          // first optimistic polish attempt
    bool scale = true;              // Ruiz equilibration
    int scaling_iters = 6;
};

struct WarmStart {
    Vector primal;
    Vector dual;  // optional; used only when sizes match
};

// Prediction operators per the ordered products of the discrete LPV matrices.
PredictionOperators condense(std::span<const LpvMatrices> a_seq,
                             std::span<const LpvMatrices> b_seq);
PredictionOperators condense(std::span<const LpvMatrices> models);

// Tracking cost over [U; E]:
//   H_UU = 2 (R_hat + Gamma^T Q_hat Gamma),  f_U = 2 Gamma^T Q_hat (Phi z0 - Z_ref),
//   H_EE = 2 blockdiag(E_p), with Q_hat embedding q per step and p at the
//   terminal block. z_ref is the stacked 6N reference.
std::pair<Matrix, Vector> build_cost(const PredictionOperators& ops,
                                     const Matrix& q_weight,
                                     const Matrix& r_weight,
                                     const Matrix& p_weight, const Matrix& e_p,
                                     const VehicleState& z0,
                                     std::span<const double> z_ref);

// Maps all constraint groups into the condensed decision space. state_box and
// input_box are per-step polytopes; rate is over the 2N input stack; road is
// over the 6N state stack; trust is over [Z; U] with slack channels.
CondensedQp assemble_qp(const PredictionOperators& ops, Matrix hessian,
                        Vector linear, const HalfspacePolytope& state_box,
                        const HalfspacePolytope& input_box,
                        const HalfspacePolytope& rate,
                        const HalfspacePolytope& road,
                        const ObstacleHalfspace& obstacle,
                        const HalfspacePolytope& trust, const VehicleState& z0);

// Plain-text dump (row-major, dimension headers) for external cross-checking.
void dump_qp(const CondensedQp& qp, const std::string& path);

// Operator-splitting dense QP solver with over-relaxation, periodic residual
// balancing, Ruiz equilibration, and an active-set polish step. An instance
// owns reusable workspace; use one instance per caller.
class AdmmSolver {
public:
    AdmmSolver() = default;
    explicit AdmmSolver(SolverSettings settings) : settings_(settings) {}

    QpSolution solve(const CondensedQp& qp,
                     const std::optional<WarmStart>& warm = std::nullopt);

    const SolverSettings& settings() const { return settings_; }
    SolverSettings& settings() { return settings_; }

private:
    SolverSettings settings_;
};

QpSolution solve_qp(const CondensedQp& qp,
                    const std::optional<WarmStart>& warm = std::nullopt,
                    const SolverSettings& settings = {});

}  // namespace lpvmpc::qp
