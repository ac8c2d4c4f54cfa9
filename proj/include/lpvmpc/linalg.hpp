#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Small dense row-major matrix type plus the handful of operations the MPC
// stack needs. All arithmetic inner loops route through lpvmpc::simd.

namespace lpvmpc::linalg {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

Vector matvec(const Matrix& a, std::span<const double> x);
Vector matvec_transpose(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// c = a^T diag_or_full_q b; q may be empty (identity)
Matrix quadratic_form(const Matrix& a, const Matrix& q, const Matrix& b);

void add_scaled_identity(Matrix& a, double s);
void symmetrize(Matrix& a);

double dot(std::span<const double> x, std::span<const double> y);
double inf_norm(std::span<const double> x);

// Cholesky factorization of a symmetric positive definite matrix.
class Cholesky {
public:
    // Returns false if the matrix is not numerically positive definite.
    bool factor(const Matrix& a);
    // Solve A x = b in place.
    void solve(std::span<double> b) const;
    Vector solve_copy(std::span<const double> b) const;
    std::size_t size() const { return n_; }

private:
    std::size_t n_ = 0;
    Matrix l_;
};

}  // namespace lpvmpc::linalg
