#include "lpvmpc/simd_kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "lpvmpc/common.hpp"

#if defined(__x86_64__) || defined(__i386__)
#define LPVMPC_X86 1
#include <immintrin.h>
#else
#define LPVMPC_X86 0
#endif

namespace lpvmpc::simd {

namespace {

// ---------------------------------------------------------------- scalar ---

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i)
        y[i] = dot_scalar(a + i * cols, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols,
                   const double* x, double* y) {
    std::memset(y, 0, cols * sizeof(double));
    for (std::size_t i = 0; i < rows; ++i)
        axpy_scalar(x[i], a + i * cols, y, cols);
}

void clip_upper_scalar(const double* v, const double* hi, double* out,
                       std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = v[i] < hi[i] ? v[i] : hi[i];
}

double inf_norm_scalar(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(x[i]);
        if (a > m) m = a;
    }
    return m;
}

double inf_norm_diff_scalar(const double* x, const double* y, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(x[i] - y[i]);
        if (a > m) m = a;
    }
    return m;
}

// ----------------------------------------------------------------- avx2 ----

#if LPVMPC_X86

__attribute__((target("avx2,fma"))) double dot_avx2(const double* x,
                                                    const double* y,
                                                    std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                               acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                               _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                               acc0);
    acc0 = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc0);
    __m128d hi = _mm256_extractf128_pd(acc0, 1);
    lo = _mm_add_pd(lo, hi);
    double acc = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

__attribute__((target("avx2,fma"))) void axpy_avx2(double a, const double* x,
                                                   double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2,fma"))) void scal_avx2(double a, double* x,
                                                   std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

__attribute__((target("avx2,fma"))) void gemv_avx2(const double* a,
                                                   std::size_t rows,
                                                   std::size_t cols,
                                                   const double* x,
                                                   double* y) {
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot_avx2(a + i * cols, x, cols);
}

__attribute__((target("avx2,fma"))) void gemv_t_avx2(const double* a,
                                                     std::size_t rows,
                                                     std::size_t cols,
                                                     const double* x,
                                                     double* y) {
    std::memset(y, 0, cols * sizeof(double));
    for (std::size_t i = 0; i < rows; ++i)
        axpy_avx2(x[i], a + i * cols, y, cols);
}

__attribute__((target("avx2"))) void clip_upper_avx2(const double* v,
                                                     const double* hi,
                                                     double* out,
                                                     std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_min_pd(_mm256_loadu_pd(v + i),
                                                _mm256_loadu_pd(hi + i)));
    for (; i < n; ++i) out[i] = v[i] < hi[i] ? v[i] : hi[i];
}

__attribute__((target("avx2"))) double inf_norm_avx2(const double* x,
                                                     std::size_t n) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d vm = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vm = _mm256_max_pd(vm, _mm256_and_pd(mask, _mm256_loadu_pd(x + i)));
    __m128d lo = _mm256_castpd256_pd128(vm);
    __m128d hi = _mm256_extractf128_pd(vm, 1);
    lo = _mm_max_pd(lo, hi);
    double m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) {
        const double a = std::fabs(x[i]);
        if (a > m) m = a;
    }
    return m;
}

__attribute__((target("avx2"))) double inf_norm_diff_avx2(const double* x,
                                                          const double* y,
                                                          std::size_t n) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d vm = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d =
            _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        vm = _mm256_max_pd(vm, _mm256_and_pd(mask, d));
    }
    __m128d lo = _mm256_castpd256_pd128(vm);
    __m128d hi = _mm256_extractf128_pd(vm, 1);
    lo = _mm_max_pd(lo, hi);
    double m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) {
        const double a = std::fabs(x[i] - y[i]);
        if (a > m) m = a;
    }
    return m;
}

#endif  // LPVMPC_X86

// ------------------------------------------------------------- dispatch ----

struct Dispatch {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scal)(double, double*, std::size_t);
    void (*gemv)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*gemv_t)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*clip_upper)(const double*, const double*, double*, std::size_t);
    double (*inf_norm)(const double*, std::size_t);
    double (*inf_norm_diff)(const double*, const double*, std::size_t);
};

constexpr Dispatch kScalar{dot_scalar,       axpy_scalar,
                           scal_scalar,      gemv_scalar,
                           gemv_t_scalar,    clip_upper_scalar,
                           inf_norm_scalar,  inf_norm_diff_scalar};

#if LPVMPC_X86
constexpr Dispatch kAvx2{dot_avx2,       axpy_avx2,
                         scal_avx2,      gemv_avx2,
                         gemv_t_avx2,    clip_upper_avx2,
                         inf_norm_avx2,  inf_norm_diff_avx2};
#endif

bool detect_avx2() {
#if LPVMPC_X86
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend initial_backend() {
    const char* env = std::getenv("LPVMPC_SIMD");
    if (env != nullptr) {
        const std::string v(env);
        if (v == "scalar") return Backend::scalar;
        if (v == "avx2" && detect_avx2()) return Backend::avx2;
        // "auto" or anything else falls through to detection
    }
    return detect_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend> g_backend{initial_backend()};

const Dispatch& table() {
#if LPVMPC_X86
    return g_backend.load(std::memory_order_relaxed) == Backend::avx2 ? kAvx2
                                                                      : kScalar;
#else
    return kScalar;
#endif
}

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

bool avx2_available() { return detect_avx2(); }

void set_backend(Backend backend) {
    if (backend == Backend::avx2 && !detect_avx2())
        throw DomainError("simd: avx2 backend not available on this cpu");
    g_backend.store(backend, std::memory_order_relaxed);
}

double dot(const double* x, const double* y, std::size_t n) {
    return table().dot(x, y, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
    table().axpy(a, x, y, n);
}
void scal(double a, double* x, std::size_t n) { table().scal(a, x, n); }
void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x,
          double* y) {
    table().gemv(a, rows, cols, x, y);
}
void gemv_t(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
    table().gemv_t(a, rows, cols, x, y);
}
void clip_upper(const double* v, const double* hi, double* out, std::size_t n) {
    table().clip_upper(v, hi, out, n);
}
double inf_norm(const double* x, std::size_t n) { return table().inf_norm(x, n); }
double inf_norm_diff(const double* x, const double* y, std::size_t n) {
    return table().inf_norm_diff(x, y, n);
}

}  // namespace lpvmpc::simd
