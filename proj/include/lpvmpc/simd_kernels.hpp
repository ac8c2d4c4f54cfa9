#pragma once

#include <cstddef>

// Scalar reference kernels plus AVX2 variants for the dense linear algebra
// inner loops. The backend is picked once at startup (CPU detection, or the
// LPVMPC_SIMD environment variable: "scalar" | "avx2" | "auto") and can be
// overridden programmatically for equivalence tests.

namespace lpvmpc::simd {

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend backend);  // throws DomainError if unsupported
bool avx2_available();

// x . y
double dot(const double* x, const double* y, std::size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

// x *= a
void scal(double a, double* x, std::size_t n);

// y = A x, A row-major (rows x cols)
void gemv(const double* a, std::size_t rows, std::size_t cols,
          const double* x, double* y);

// y = A^T x, A row-major (rows x cols), y has cols entries
void gemv_t(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y);

// out[i] = min(v[i], hi[i])
void clip_upper(const double* v, const double* hi, double* out, std::size_t n);

// max_i |x[i]|
double inf_norm(const double* x, std::size_t n);

// max_i |x[i] - y[i]|
double inf_norm_diff(const double* x, const double* y, std::size_t n);

}  // namespace lpvmpc::simd
