#include "lpvmpc/linalg.hpp"

#include <cmath>

#include "lpvmpc/common.hpp"
#include "lpvmpc/simd_kernels.hpp"

namespace lpvmpc::linalg {

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (x.size() != a.cols()) throw DimensionMismatch("matvec: size mismatch");
    Vector y(a.rows(), 0.0);
    if (!a.empty()) simd::gemv(a.data(), a.rows(), a.cols(), x.data(), y.data());
    return y;
}

Vector matvec_transpose(const Matrix& a, std::span<const double> x) {
    if (x.size() != a.rows()) throw DimensionMismatch("matvec_transpose: size mismatch");
    Vector y(a.cols(), 0.0);
    if (!a.empty()) simd::gemv_t(a.data(), a.rows(), a.cols(), x.data(), y.data());
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: size mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k)
            if (ai[k] != 0.0) simd::axpy(ai[k], b.row(k), ci, b.cols());
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix quadratic_form(const Matrix& a, const Matrix& q, const Matrix& b) {
    Matrix qb = q.empty() ? b : matmul(q, b);
    if (a.rows() != qb.rows()) throw DimensionMismatch("quadratic_form: size mismatch");
    Matrix c(a.cols(), qb.cols());
    // c = a^T qb accumulated row by row
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.row(k);
        const double* qk = qb.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i)
            if (ak[i] != 0.0) simd::axpy(ak[i], qk, c.row(i), qb.cols());
    }
    return c;
}

void add_scaled_identity(Matrix& a, double s) {
    const std::size_t n = a.rows() < a.cols() ? a.rows() : a.cols();
    for (std::size_t i = 0; i < n; ++i) a(i, i) += s;
}

void symmetrize(Matrix& a) {
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("dot: size mismatch");
    return simd::dot(x.data(), y.data(), x.size());
}

double inf_norm(std::span<const double> x) {
    return x.empty() ? 0.0 : simd::inf_norm(x.data(), x.size());
}

bool Cholesky::factor(const Matrix& a) {
    n_ = a.rows();
    if (a.cols() != n_) throw DimensionMismatch("cholesky: matrix not square");
    l_ = Matrix(n_, n_);
    for (std::size_t j = 0; j < n_; ++j) {
        double d = a(j, j) - simd::dot(l_.row(j), l_.row(j), j);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        l_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n_; ++i)
            l_(i, j) = (a(i, j) - simd::dot(l_.row(i), l_.row(j), j)) / ljj;
    }
    return true;
}

void Cholesky::solve(std::span<double> b) const {
    if (b.size() != n_) throw DimensionMismatch("cholesky solve: size mismatch");
    // forward: L z = b
    for (std::size_t i = 0; i < n_; ++i)
        b[i] = (b[i] - simd::dot(l_.row(i), b.data(), i)) / l_(i, i);
    // backward: L^T x = z
    for (std::size_t ii = n_; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n_; ++j) s -= l_(j, ii) * b[j];
        b[ii] = s / l_(ii, ii);
    }
}

Vector Cholesky::solve_copy(std::span<const double> b) const {
    Vector x(b.begin(), b.end());
    solve(x);
    return x;
}

}  // namespace lpvmpc::linalg
