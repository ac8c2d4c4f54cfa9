#include <cmath>
#include <cstdio>
#include <fstream>

#include "lpvmpc/qp.hpp"
#include "lpvmpc/simd_kernels.hpp"

namespace lpvmpc::qp {

namespace {

// 6x6 product c = a * b on the fixed-size LPV blocks.
std::array<std::array<double, 6>, 6> mul66(
    const std::array<std::array<double, 6>, 6>& a,
    const std::array<std::array<double, 6>, 6>& b) {
    std::array<std::array<double, 6>, 6> c{};
    for (int i = 0; i < 6; ++i)
        for (int k = 0; k < 6; ++k) {
            const double aik = a[i][k];
            if (aik == 0.0) continue;
            for (int j = 0; j < 6; ++j) c[i][j] += aik * b[k][j];
        }
    return c;
}

}  // namespace

PredictionOperators condense(std::span<const LpvMatrices> a_seq,
                             std::span<const LpvMatrices> b_seq) {
    if (a_seq.size() != b_seq.size() || a_seq.empty())
        throw DimensionMismatch("condense: sequences must be nonempty and equal length");
    const int n = static_cast<int>(a_seq.size());
    PredictionOperators ops;
    ops.horizon = n;
    ops.phi = Matrix(6 * static_cast<std::size_t>(n), 6);
    ops.gamma = Matrix(6 * static_cast<std::size_t>(n), 2 * static_cast<std::size_t>(n));

    // phi row-block i = A_i ... A_0, built by the recursion P_i = A_i P_{i-1}
    std::array<std::array<double, 6>, 6> prod = a_seq[0].a;
    auto write_phi = [&](int i, const std::array<std::array<double, 6>, 6>& m) {
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c)
                ops.phi(6 * static_cast<std::size_t>(i) + r, c) = m[r][c];
    };
    write_phi(0, prod);
    for (int i = 1; i < n; ++i) {
        prod = mul66(a_seq[static_cast<std::size_t>(i)].a, prod);
        write_phi(i, prod);
    }

    // gamma row-block i = [A_i * gamma_{i-1} | B_i | 0], column blocks j <= i
    for (int i = 0; i < n; ++i) {
        const std::size_t row0 = 6 * static_cast<std::size_t>(i);
        if (i > 0) {
            const auto& ai = a_seq[static_cast<std::size_t>(i)].a;
            const std::size_t prev0 = 6 * static_cast<std::size_t>(i - 1);
            const std::size_t width = 2 * static_cast<std::size_t>(i);
            for (int r = 0; r < 6; ++r) {
                double* dst = ops.gamma.row(row0 + r);
                for (int k = 0; k < 6; ++k) {
                    const double v = ai[r][k];
                    if (v != 0.0)
                        simd::axpy(v, ops.gamma.row(prev0 + k), dst, width);
                }
            }
        }
        const auto& bi = b_seq[static_cast<std::size_t>(i)].b;
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 2; ++c)
                ops.gamma(row0 + r, 2 * static_cast<std::size_t>(i) + c) = bi[r][c];
    }
    return ops;
}

PredictionOperators condense(std::span<const LpvMatrices> models) {
    return condense(models, models);
}

std::pair<Matrix, Vector> build_cost(const PredictionOperators& ops,
                                     const Matrix& q_weight,
                                     const Matrix& r_weight,
                                     const Matrix& p_weight, const Matrix& e_p,
                                     const VehicleState& z0,
                                     std::span<const double> z_ref) {
    const int n = ops.horizon;
    const std::size_t nu = 2 * static_cast<std::size_t>(n);
    const std::size_t nz = 6 * static_cast<std::size_t>(n);
    const std::size_t ne = 4 * static_cast<std::size_t>(n);
    if (q_weight.rows() != 6 || q_weight.cols() != 6 || r_weight.rows() != 2 ||
        r_weight.cols() != 2 || p_weight.rows() != 6 || p_weight.cols() != 6)
        throw DimensionMismatch("build_cost: weight dimensions");
    if (!e_p.empty() && (e_p.rows() != 4 || e_p.cols() != 4))
        throw DimensionMismatch("build_cost: e_p must be 4x4");
    if (z_ref.size() != nz) throw DimensionMismatch("build_cost: z_ref length");

    // Q_hat = blockdiag(q, ..., q, p)
    Matrix q_hat(nz, nz);
    for (int i = 0; i < n; ++i) {
        const Matrix& blk = i == n - 1 ? p_weight : q_weight;
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c)
                q_hat(6 * static_cast<std::size_t>(i) + r,
                      6 * static_cast<std::size_t>(i) + c) = blk(r, c);
    }

    const std::size_t dim = nu + ne;
    Matrix hessian(dim, dim);
    Vector linear(dim, 0.0);

    // H_UU = 2 (R_hat + Gamma^T Q_hat Gamma)
    Matrix gtqg = linalg::quadratic_form(ops.gamma, q_hat, ops.gamma);
    for (std::size_t i = 0; i < nu; ++i)
        for (std::size_t j = 0; j < nu; ++j) hessian(i, j) = 2.0 * gtqg(i, j);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                hessian(2 * static_cast<std::size_t>(i) + r,
                        2 * static_cast<std::size_t>(i) + c) += 2.0 * r_weight(r, c);

    // H_EE = 2 blockdiag(e_p)
    if (!e_p.empty())
        for (int i = 0; i < n; ++i)
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c)
                    hessian(nu + 4 * static_cast<std::size_t>(i) + r,
                            nu + 4 * static_cast<std::size_t>(i) + c) =
                        2.0 * e_p(r, c);

    linalg::symmetrize(hessian);

    // f_U = 2 Gamma^T Q_hat (Phi z0 - Z_ref)
    const auto z0a = z0.to_array();
    Vector err = linalg::matvec(ops.phi, z0a);
    for (std::size_t i = 0; i < nz; ++i) err[i] -= z_ref[i];
    Vector qerr = linalg::matvec(q_hat, err);
    Vector f_u = linalg::matvec_transpose(ops.gamma, qerr);
    for (std::size_t i = 0; i < nu; ++i) linear[i] = 2.0 * f_u[i];

    return {std::move(hessian), std::move(linear)};
}

namespace {

// Writes rows of `src` (over the 6N state stack) mapped through (gamma, phi,
// z0) into the condensed matrix at row offset `at`:
//   G_cond = src_g * gamma (U block),  h_cond = src_h - src_g * phi * z0.
void map_state_rows(const HalfspacePolytope& src, const PredictionOperators& ops,
                    const Vector& phi_z0, CondensedQp& qp, std::size_t& at) {
    const std::size_t nu = 2 * static_cast<std::size_t>(ops.horizon);
    for (std::size_t r = 0; r < src.rows(); ++r) {
        const double* row = src.g.row(r);
        double* dst = qp.ineq_g.row(at);
        for (std::size_t k = 0; k < src.dim(); ++k)
            if (row[k] != 0.0) simd::axpy(row[k], ops.gamma.row(k), dst, nu);
        double rhs = src.h[r];
        rhs -= simd::dot(row, phi_z0.data(), src.dim());
        qp.ineq_h[at] = rhs;
        if (src.soft[r] >= 0)
            qp.ineq_g(at, nu + static_cast<std::size_t>(src.soft[r])) = -1.0;
        ++at;
    }
}

}  // namespace

CondensedQp assemble_qp(const PredictionOperators& ops, Matrix hessian,
                        Vector linear, const HalfspacePolytope& state_box,
                        const HalfspacePolytope& input_box,
                        const HalfspacePolytope& rate,
                        const HalfspacePolytope& road,
                        const ObstacleHalfspace& obstacle,
                        const HalfspacePolytope& trust, const VehicleState& z0) {
    const int n = ops.horizon;
    const std::size_t nu = 2 * static_cast<std::size_t>(n);
    const std::size_t nz = 6 * static_cast<std::size_t>(n);
    const std::size_t ne = 4 * static_cast<std::size_t>(n);
    const std::size_t dim = nu + ne;
    if (hessian.rows() != dim || linear.size() != dim)
        throw DimensionMismatch("assemble_qp: cost dimensions");
    if (state_box.rows() > 0 && state_box.dim() != 6)
        throw DimensionMismatch("assemble_qp: state box must be per-step (6)");
    if (input_box.rows() > 0 && input_box.dim() != 2)
        throw DimensionMismatch("assemble_qp: input box must be per-step (2)");
    if (rate.rows() > 0 && rate.dim() != nu)
        throw DimensionMismatch("assemble_qp: rate rows over 2N");
    if (road.rows() > 0 && road.dim() != nz)
        throw DimensionMismatch("assemble_qp: road rows over 6N");
    if (trust.rows() > 0 && trust.dim() != nz + nu)
        throw DimensionMismatch("assemble_qp: trust rows over [Z; U]");

    CondensedQp qp;
    qp.horizon = n;
    qp.n_inputs = static_cast<int>(nu);
    qp.hessian = std::move(hessian);
    qp.linear = std::move(linear);

    std::size_t obstacle_rows = 0;
    if (obstacle.active)
        for (int s : obstacle.steps)
            if (s >= 1 && s <= n) ++obstacle_rows;

    qp.layout.input_box = input_box.rows() * static_cast<std::size_t>(n);
    qp.layout.rate = rate.rows();
    qp.layout.state_box = state_box.rows() * static_cast<std::size_t>(n);
    qp.layout.road = road.rows();
    qp.layout.obstacle = obstacle_rows;
    qp.layout.trust = trust.rows();
    qp.layout.slack_nonneg = ne;

    const std::size_t total = qp.layout.input_box + qp.layout.rate +
                              qp.layout.state_box + qp.layout.road +
                              qp.layout.obstacle + qp.layout.trust +
                              qp.layout.slack_nonneg;
    qp.ineq_g = Matrix(total, dim);
    qp.ineq_h.assign(total, 0.0);

    const auto z0a = z0.to_array();
    const Vector phi_z0 = linalg::matvec(ops.phi, z0a);

    std::size_t at = 0;

    // input boxes, replicated per step over the U block
    for (int i = 0; i < n; ++i)
        for (std::size_t r = 0; r < input_box.rows(); ++r) {
            for (std::size_t c = 0; c < 2; ++c)
                qp.ineq_g(at, 2 * static_cast<std::size_t>(i) + c) = input_box.g(r, c);
            qp.ineq_h[at++] = input_box.h[r];
        }

    // rate rows, direct over U
    for (std::size_t r = 0; r < rate.rows(); ++r) {
        for (std::size_t c = 0; c < nu; ++c) qp.ineq_g(at, c) = rate.g(r, c);
        qp.ineq_h[at++] = rate.h[r];
    }

    // state boxes replicated over the Z stack, then mapped through gamma/phi
    if (state_box.rows() > 0) {
        HalfspacePolytope stacked;
        stacked.g = Matrix(state_box.rows() * static_cast<std::size_t>(n), nz);
        stacked.h.assign(state_box.rows() * static_cast<std::size_t>(n), 0.0);
        stacked.soft.assign(stacked.h.size(), -1);
        for (int i = 0; i < n; ++i)
            for (std::size_t r = 0; r < state_box.rows(); ++r) {
                const std::size_t row = static_cast<std::size_t>(i) * state_box.rows() + r;
                for (std::size_t c = 0; c < 6; ++c)
                    stacked.g(row, 6 * static_cast<std::size_t>(i) + c) = state_box.g(r, c);
                stacked.h[row] = state_box.h[r];
            }
        map_state_rows(stacked, ops, phi_z0, qp, at);
    }

    // road rows (already over the Z stack)
    map_state_rows(road, ops, phi_z0, qp, at);

    // obstacle tangent: -a3 X_i - b3 Y_i <= -c3 at each inside step
    if (obstacle_rows > 0) {
        HalfspacePolytope obs;
        obs.g = Matrix(obstacle_rows, nz);
        obs.h.assign(obstacle_rows, 0.0);
        obs.soft.assign(obstacle_rows, -1);
        std::size_t r = 0;
        for (int s : obstacle.steps) {
            if (s < 1 || s > n) continue;
            const std::size_t col = 6 * static_cast<std::size_t>(s - 1);
            obs.g(r, col) = -obstacle.a3;
            obs.g(r, col + 1) = -obstacle.b3;
            obs.h[r++] = -obstacle.c3;
        }
        map_state_rows(obs, ops, phi_z0, qp, at);
    }

    // trust rows: Z part mapped, U part direct, slack coefficient -1
    for (std::size_t r = 0; r < trust.rows(); ++r) {
        const double* row = trust.g.row(r);
        double* dst = qp.ineq_g.row(at);
        for (std::size_t k = 0; k < nz; ++k)
            if (row[k] != 0.0) simd::axpy(row[k], ops.gamma.row(k), dst, nu);
        for (std::size_t c = 0; c < nu; ++c) dst[c] += row[nz + c];
        qp.ineq_h[at] = trust.h[r] - simd::dot(row, phi_z0.data(), nz);
        if (trust.soft[r] >= 0)
            qp.ineq_g(at, nu + static_cast<std::size_t>(trust.soft[r])) = -1.0;
        ++at;
    }

    // slack nonnegativity
    for (std::size_t c = 0; c < ne; ++c) {
        qp.ineq_g(at, nu + c) = -1.0;
        qp.ineq_h[at++] = 0.0;
    }

    return qp;
}

void dump_qp(const CondensedQp& qp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write qp dump: " + path);
    char buf[64];
    auto emit_matrix = [&](const char* name, const Matrix& m) {
        out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
                out << buf << (j + 1 == m.cols() ? '\n' : ' ');
            }
        }
    };
    auto emit_vector = [&](const char* name, const Vector& v) {
        out << name << ' ' << v.size() << '\n';
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            out << buf << (i + 1 == v.size() ? '\n' : ' ');
        }
    };
    out << "# condensed qp, row-major\n";
    emit_matrix("hessian", qp.hessian);
    emit_vector("linear", qp.linear);
    emit_matrix("ineq_g", qp.ineq_g);
    emit_vector("ineq_h", qp.ineq_h);
}

}  // namespace lpvmpc::qp
