#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lpvmpc/linalg.hpp"
#include "lpvmpc/simd_kernels.hpp"

using namespace lpvmpc;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

struct BackendGuard {
    simd::Backend saved = simd::active_backend();
    ~BackendGuard() { simd::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar and avx2 kernels agree on random inputs") {
    if (!simd::avx2_available()) {
        MESSAGE("avx2 not available; dispatch falls back to scalar");
        return;
    }
    BackendGuard guard;
    std::mt19937_64 rng(7);
    // sizes straddling the vector width, including ragged tails
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 16u, 31u, 48u, 90u, 257u}) {
        auto x = random_vec(rng, n);
        auto y = random_vec(rng, n);
        const std::size_t rows = 1 + n % 13;
        auto a = random_vec(rng, rows * n);
        auto xr = random_vec(rng, rows);

        simd::set_backend(simd::Backend::scalar);
        const double dot_s = simd::dot(x.data(), y.data(), n);
        const double norm_s = simd::inf_norm(x.data(), n);
        const double diff_s = simd::inf_norm_diff(x.data(), y.data(), n);
        auto axpy_s = y;
        simd::axpy(1.7, x.data(), axpy_s.data(), n);
        std::vector<double> gemv_s(rows), gemvt_s(n), clip_s(n);
        simd::gemv(a.data(), rows, n, x.data(), gemv_s.data());
        simd::gemv_t(a.data(), rows, n, xr.data(), gemvt_s.data());
        simd::clip_upper(x.data(), y.data(), clip_s.data(), n);
        auto scal_s = x;
        simd::scal(-0.3, scal_s.data(), n);

        simd::set_backend(simd::Backend::avx2);
        CHECK(simd::dot(x.data(), y.data(), n) == doctest::Approx(dot_s).epsilon(1e-12));
        CHECK(simd::inf_norm(x.data(), n) == norm_s);
        CHECK(simd::inf_norm_diff(x.data(), y.data(), n) == diff_s);
        auto axpy_v = y;
        simd::axpy(1.7, x.data(), axpy_v.data(), n);
        std::vector<double> gemv_v(rows), gemvt_v(n), clip_v(n);
        simd::gemv(a.data(), rows, n, x.data(), gemv_v.data());
        simd::gemv_t(a.data(), rows, n, xr.data(), gemvt_v.data());
        simd::clip_upper(x.data(), y.data(), clip_v.data(), n);
        auto scal_v = x;
        simd::scal(-0.3, scal_v.data(), n);

        for (std::size_t i = 0; i < n; ++i) {
            CHECK(axpy_v[i] == doctest::Approx(axpy_s[i]).epsilon(1e-12));
            CHECK(gemvt_v[i] == doctest::Approx(gemvt_s[i]).epsilon(1e-12));
            CHECK(clip_v[i] == clip_s[i]);
            CHECK(scal_v[i] == scal_s[i]);
        }
        for (std::size_t i = 0; i < rows; ++i)
            CHECK(gemv_v[i] == doctest::Approx(gemv_s[i]).epsilon(1e-12));
    }
}

TEST_CASE("backend selection is explicit and reversible") {
    BackendGuard guard;
    simd::set_backend(simd::Backend::scalar);
    CHECK(simd::active_backend() == simd::Backend::scalar);
    if (simd::avx2_available()) {
        simd::set_backend(simd::Backend::avx2);
        CHECK(simd::active_backend() == simd::Backend::avx2);
    }
}

TEST_CASE("cholesky factors and solves an spd system") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial) % 12;
        linalg::Matrix m(n, n);
        auto raw = random_vec(rng, n * n);
        linalg::Matrix g(n, n);
        std::copy(raw.begin(), raw.end(), g.data());
        // m = g g^T + I
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                m(i, j) = simd::dot(g.row(i), g.row(j), n) + (i == j ? 1.0 : 0.0);
        auto b = random_vec(rng, n);
        linalg::Cholesky chol;
        REQUIRE(chol.factor(m));
        auto x = chol.solve_copy(b);
        auto mx = linalg::matvec(m, x);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(mx[i] == doctest::Approx(b[i]).epsilon(1e-9));
    }
}

TEST_CASE("cholesky rejects an indefinite matrix") {
    linalg::Matrix m(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    linalg::Cholesky chol;
    CHECK_FALSE(chol.factor(m));
}

TEST_CASE("matmul and transpose round trip") {
    std::mt19937_64 rng(3);
    linalg::Matrix a(4, 3), b(3, 5);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) a(i, j) = static_cast<double>(i + 2 * j);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) b(i, j) = static_cast<double>(i) - 0.5 * j;
    auto c = linalg::matmul(a, b);
    REQUIRE(c.rows() == 4);
    REQUIRE(c.cols() == 5);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 3; ++k) ref += a(i, k) * b(k, j);
            CHECK(c(i, j) == doctest::Approx(ref));
        }
    auto at = linalg::transpose(a);
    auto x = random_vec(rng, 4);
    auto y1 = linalg::matvec(at, x);
    auto y2 = linalg::matvec_transpose(a, x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(y1[i] == doctest::Approx(y2[i]));
}
