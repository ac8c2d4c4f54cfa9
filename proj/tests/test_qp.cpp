#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "lpvmpc/qp.hpp"
#include "support/qp_oracles.hpp"

using namespace lpvmpc;
using qp::CondensedQp;
using qp::PredictionOperators;

namespace {

LpvMatrices scalar_model(double a, double b) {
    // scalar analogue embedded in the (v_lon, a_lon) channel: state 3rd
    // component, input 2nd component
    LpvMatrices m;
    m.discrete = true;
    for (int i = 0; i < 6; ++i) m.a[i][i] = i == 2 ? a : 0.0;
    m.b[2][1] = b;
    return m;
}

std::vector<LpvMatrices> random_models(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    std::vector<LpvMatrices> out;
    for (int s = 0; s < n; ++s) {
        LpvMatrices m;
        m.discrete = true;
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) m.a[i][j] = u(rng) * 0.3 + (i == j ? 1.0 : 0.0);
            for (int j = 0; j < 2; ++j) m.b[i][j] = u(rng);
        }
        out.push_back(m);
    }
    return out;
}

CondensedQp plain_qp(std::size_t n, const std::vector<double>& h,
                     const std::vector<double>& f,
                     const std::vector<double>& a,
                     const std::vector<double>& b) {
    CondensedQp qp;
    qp.hessian = linalg::Matrix(n, n);
    std::copy(h.begin(), h.end(), qp.hessian.data());
    qp.linear = f;
    const std::size_t m = b.size();
    qp.ineq_g = linalg::Matrix(m, n);
    std::copy(a.begin(), a.end(), qp.ineq_g.data());
    qp.ineq_h = b;
    qp.n_inputs = static_cast<int>(n);
    return qp;
}

qp_oracle::DenseProblem to_oracle(const CondensedQp& qp) {
    qp_oracle::DenseProblem p;
    p.n = qp.dim();
    p.m = qp.rows();
    p.h.assign(qp.hessian.data(), qp.hessian.data() + p.n * p.n);
    p.f = qp.linear;
    p.a.assign(qp.ineq_g.data(), qp.ineq_g.data() + p.m * p.n);
    p.b = qp.ineq_h;
    return p;
}

}  // namespace

TEST_CASE("condense matches the scalar recursion") {
    std::vector<LpvMatrices> models = {scalar_model(2.0, 1.0), scalar_model(2.0, 1.0)};
    const auto ops = qp::condense(models);
    // phi = [2; 4] in the scalar channel (state row 2)
    CHECK(ops.phi(2, 2) == doctest::Approx(2.0));
    CHECK(ops.phi(8, 2) == doctest::Approx(4.0));
    // gamma = [[1, 0], [2, 1]] in the (state 2, input 1) channel
    CHECK(ops.gamma(2, 1) == doctest::Approx(1.0));
    CHECK(ops.gamma(2, 3) == doctest::Approx(0.0));
    CHECK(ops.gamma(8, 1) == doctest::Approx(2.0));
    CHECK(ops.gamma(8, 3) == doctest::Approx(1.0));
}

TEST_CASE("condense with identity dynamics and no input") {
    std::vector<LpvMatrices> models(3);
    for (auto& m : models) {
        m.discrete = true;
        for (int i = 0; i < 6; ++i) m.a[i][i] = 1.0;
    }
    const auto ops = qp::condense(models);
    for (int blk = 0; blk < 3; ++blk)
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                CHECK(ops.phi(6 * blk + i, j) == (i == j ? 1.0 : 0.0));
    for (std::size_t i = 0; i < ops.gamma.rows(); ++i)
        for (std::size_t j = 0; j < ops.gamma.cols(); ++j)
            CHECK(ops.gamma(i, j) == 0.0);
}

TEST_CASE("condense single step returns the model") {
    std::mt19937_64 rng(3);
    const auto models = random_models(rng, 1);
    const auto ops = qp::condense(models);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) CHECK(ops.phi(i, j) == models[0].a[i][j]);
        for (int j = 0; j < 2; ++j) CHECK(ops.gamma(i, j) == models[0].b[i][j]);
    }
    CHECK_THROWS_AS(qp::condense(std::span<const LpvMatrices>{}), DimensionMismatch);
}

TEST_CASE("rollout equivalence: stacked prediction equals the recursion") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int n : {1, 4, 8, 15}) {
        for (int trial = 0; trial < 25; ++trial) {
            const auto models = random_models(rng, n);
            const auto ops = qp::condense(models);
            std::array<double, 6> z{};
            for (auto& v : z) v = u(rng);
            std::vector<double> inputs(2 * static_cast<std::size_t>(n));
            for (auto& v : inputs) v = u(rng);

            auto pred = linalg::matvec(ops.phi, z);
            auto gu = linalg::matvec(ops.gamma, inputs);
            for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += gu[i];

            std::array<double, 6> zi = z;
            double scale = 1.0;
            for (int s = 0; s < n; ++s) {
                std::array<double, 6> zn{};
                for (int i = 0; i < 6; ++i) {
                    for (int j = 0; j < 6; ++j) zn[i] += models[s].a[i][j] * zi[j];
                    for (int j = 0; j < 2; ++j)
                        zn[i] += models[s].b[i][j] * inputs[2 * s + j];
                }
                zi = zn;
                for (int i = 0; i < 6; ++i) {
                    scale = std::max(scale, std::fabs(zi[i]));
                    CHECK(std::fabs(pred[6 * s + i] - zi[i]) <= 1e-9 * scale);
                }
            }
        }
    }
}

TEST_CASE("build_cost reference cancellation and scaling invariance") {
    std::mt19937_64 rng(11);
    const int n = 4;
    const auto models = random_models(rng, n);
    const auto ops = qp::condense(models);
    auto q = linalg::Matrix::identity(6);
    auto r = linalg::Matrix::identity(2);
    auto p = linalg::Matrix::identity(6);
    auto ep = linalg::Matrix::identity(4);
    const VehicleState z0{0.3, -0.2, 5.0, 0.1, 0.2, 0.05};

    // z_ref = Phi z0 makes the linear term vanish
    const auto zref = linalg::matvec(ops.phi, z0.to_array());
    auto [h1, f1] = qp::build_cost(ops, q, r, p, ep, z0, zref);
    for (std::size_t i = 0; i < f1.size(); ++i) CHECK(std::fabs(f1[i]) < 1e-12);

    // hessian symmetric
    for (std::size_t i = 0; i < h1.rows(); ++i)
        for (std::size_t j = 0; j < h1.cols(); ++j)
            CHECK(h1(i, j) == doctest::Approx(h1(j, i)).epsilon(1e-12));

    // doubling q and r doubles both pieces (argmin unchanged)
    auto q2 = q, r2 = r, p2 = p, ep2 = ep;
    for (int i = 0; i < 6; ++i) {
        q2(i, i) *= 2.0;
        p2(i, i) *= 2.0;
    }
    for (int i = 0; i < 2; ++i) r2(i, i) *= 2.0;
    for (int i = 0; i < 4; ++i) ep2(i, i) *= 2.0;
    std::vector<double> zref_off = zref;
    for (auto& v : zref_off) v += 0.5;
    auto [ha, fa] = qp::build_cost(ops, q, r, p, ep, z0, zref_off);
    auto [hb, fb] = qp::build_cost(ops, q2, r2, p2, ep2, z0, zref_off);
    for (std::size_t i = 0; i < ha.rows(); ++i)
        for (std::size_t j = 0; j < ha.cols(); ++j)
            CHECK(hb(i, j) == doctest::Approx(2.0 * ha(i, j)).epsilon(1e-12));
    for (std::size_t i = 0; i < fa.size(); ++i)
        CHECK(fb[i] == doctest::Approx(2.0 * fa[i]).epsilon(1e-12));
}

TEST_CASE("build_cost scalar hand example: minimize (u - 1)^2") {
    // scalar N=1 with a = 1, b = 1, q_terminal = 1, r = 0, z0 = 0, z_ref = 1
    std::vector<LpvMatrices> models = {scalar_model(1.0, 1.0)};
    const auto ops = qp::condense(models);
    linalg::Matrix q(6, 6), r(2, 2), p(6, 6), ep(4, 4);
    p(2, 2) = 1.0;  // terminal weight on the scalar channel
    VehicleState z0{};
    std::vector<double> zref(6, 0.0);
    zref[2] = 1.0;
    auto [h, f] = qp::build_cost(ops, q, r, p, ep, z0, zref);
    // decision [u1 u2 | e...]: channel u2 carries the scalar input
    CHECK(h(1, 1) == doctest::Approx(2.0));
    CHECK(f[1] == doctest::Approx(-2.0));
    // unconstrained argmin: u = -f/h = 1
    CHECK(-f[1] / h(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("assemble_qp maps rows through the prediction operators") {
    std::mt19937_64 rng(13);
    const int n = 3;
    const auto models = random_models(rng, n);
    const auto ops = qp::condense(models);
    auto q = linalg::Matrix::identity(6);
    auto r = linalg::Matrix::identity(2);
    auto ep = linalg::Matrix::identity(4);
    const VehicleState z0{1.0, 2.0, 8.0, 0.0, 0.1, 0.0};
    std::vector<double> zref(6 * n, 0.0);
    auto [h, f] = qp::build_cost(ops, q, r, q, ep, z0, zref);

    HalfspacePolytope none;
    SUBCASE("no constraints leaves only slack nonnegativity") {
        const auto qp_ = qp::assemble_qp(ops, h, f, none, none, none, none,
                                         ObstacleHalfspace{}, none, z0);
        CHECK(qp_.rows() == 4 * static_cast<std::size_t>(n));
        CHECK(qp_.dim() == 6 * static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < qp_.rows(); ++i) {
            CHECK(qp_.ineq_h[i] == 0.0);
            CHECK(qp_.ineq_g(i, 2 * static_cast<std::size_t>(n) + i) == -1.0);
        }
    }

    SUBCASE("a state upper bound maps through gamma with phi offset") {
        HalfspacePolytope state;
        state.g = linalg::Matrix(1, 6);
        state.g(0, 2) = 1.0;  // v_lon <= 9
        state.h = {9.0};
        state.soft = {-1};
        const auto qp_ = qp::assemble_qp(ops, h, f, state, none, none, none,
                                         ObstacleHalfspace{}, none, z0);
        REQUIRE(qp_.layout.state_box == 3);
        const auto phi_z0 = linalg::matvec(ops.phi, z0.to_array());
        for (int i = 0; i < n; ++i) {
            const std::size_t row = static_cast<std::size_t>(i);
            for (std::size_t c = 0; c < 2 * static_cast<std::size_t>(n); ++c)
                CHECK(qp_.ineq_g(row, c) ==
                      doctest::Approx(ops.gamma(6 * static_cast<std::size_t>(i) + 2, c)));
            CHECK(qp_.ineq_h[row] ==
                  doctest::Approx(9.0 - phi_z0[6 * static_cast<std::size_t>(i) + 2]));
        }
    }

    SUBCASE("obstacle row touches only the XY columns of its step") {
        ObstacleHalfspace obs;
        obs.active = true;
        obs.a3 = 2.0;
        obs.b3 = -1.0;
        obs.c3 = 5.0;
        obs.steps = {2};
        const auto qp_ = qp::assemble_qp(ops, h, f, none, none, none, none, obs,
                                         none, z0);
        REQUIRE(qp_.layout.obstacle == 1);
        const std::size_t row = 0;
        // row equals -(a3, b3) applied to state block 2 through gamma
        for (std::size_t c = 0; c < 2 * static_cast<std::size_t>(n); ++c) {
            const double expect = -2.0 * ops.gamma(6, c) + 1.0 * ops.gamma(7, c);
            CHECK(qp_.ineq_g(row, c) == doctest::Approx(expect));
        }
    }
}

TEST_CASE("solver handles the textbook toy problems") {
    SUBCASE("unconstrained: min 1/2 u^2 - u") {
        auto qp_ = plain_qp(1, {1.0}, {-1.0}, {}, {});
        const auto sol = qp::solve_qp(qp_);
        REQUIRE(sol.status == qp::QpStatus::solved);
        CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(sol.objective == doctest::Approx(-0.5).epsilon(1e-8));
    }
    SUBCASE("active bound: min u^2 s.t. u >= 1") {
        auto qp_ = plain_qp(1, {2.0}, {0.0}, {-1.0}, {-1.0});
        const auto sol = qp::solve_qp(qp_);
        REQUIRE(sol.status == qp::QpStatus::solved);
        CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("symmetric equality pair: min u1^2 + u2^2 s.t. u1 + u2 = 2") {
        auto qp_ = plain_qp(2, {2.0, 0.0, 0.0, 2.0}, {0.0, 0.0},
                            {1.0, 1.0, -1.0, -1.0}, {2.0, -2.0});
        const auto sol = qp::solve_qp(qp_);
        REQUIRE(sol.status == qp::QpStatus::solved);
        CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(sol.primal[1] == doctest::Approx(1.0).epsilon(1e-7));
    }
    SUBCASE("infeasible pair is detected") {
        auto qp_ = plain_qp(1, {2.0}, {0.0}, {1.0, -1.0}, {-1.0, -1.0});
        const auto sol = qp::solve_qp(qp_);
        CHECK(sol.status == qp::QpStatus::infeasible);
    }
}

TEST_CASE("solver matches the active-set enumeration oracle") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> un(1, 6), um(1, 8);
    int solved = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = un(rng), m = um(rng);
        // strictly convex hessian: G G^T + mu I
        std::vector<double> g(n * n), h(n * n, 0.0), f(n), a(m * n), b(m);
        for (auto& v : g) v = u(rng);
        const double mu = 0.1 + 0.9 * std::fabs(u(rng));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = i == j ? mu : 0.0;
                for (std::size_t k = 0; k < n; ++k) acc += g[i * n + k] * g[j * n + k];
                h[i * n + j] = acc;
            }
        for (auto& v : f) v = 2.0 * u(rng);
        for (auto& v : a) v = u(rng);
        // rhs anchored at a random feasible point
        std::vector<double> x0(n);
        for (auto& v : x0) v = u(rng);
        for (std::size_t i = 0; i < m; ++i) {
            double ax = 0.0;
            for (std::size_t j = 0; j < n; ++j) ax += a[i * n + j] * x0[j];
            b[i] = ax + std::fabs(u(rng));
        }

        auto qp_ = plain_qp(n, h, f, a, b);
        const auto sol = qp::solve_qp(qp_);
        REQUIRE(sol.status == qp::QpStatus::solved);
        ++solved;

        const auto oracle = qp_oracle::active_set_enumeration(to_oracle(qp_));
        REQUIRE(oracle.feasible);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::fabs(sol.primal[i] - oracle.x[i]) <= 1e-6);

        const auto kkt = qp_oracle::verify_kkt(to_oracle(qp_), sol.primal, sol.dual);
        CHECK(kkt.stationarity <= 1e-6);
        CHECK(kkt.primal <= 1e-6);
        CHECK(kkt.comp_slack <= 1e-6);
        CHECK(kkt.dual_min >= -1e-9);
    }
    CHECK(solved == 100);
}

TEST_CASE("warm starting changes iterations, not the solution") {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t n = 5, m = 7;
    std::vector<double> g(n * n), h(n * n, 0.0), f(n), a(m * n), b(m);
    for (auto& v : g) v = u(rng);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = i == j ? 0.5 : 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += g[i * n + k] * g[j * n + k];
            h[i * n + j] = acc;
        }
    for (auto& v : f) v = u(rng);
    for (auto& v : a) v = u(rng);
    for (std::size_t i = 0; i < m; ++i) b[i] = 0.3 + std::fabs(u(rng));
    auto qp_ = plain_qp(n, h, f, a, b);

    const auto cold = qp::solve_qp(qp_);
    REQUIRE(cold.status == qp::QpStatus::solved);
    qp::WarmStart warm{cold.primal, cold.dual};
    const auto hot = qp::solve_qp(qp_, warm);
    REQUIRE(hot.status == qp::QpStatus::solved);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::fabs(hot.primal[i] - cold.primal[i]) <= 1e-6);
    CHECK(hot.iterations <= cold.iterations);
}

TEST_CASE("qp dump writes a parsable matrix file") {
    auto qp_ = plain_qp(2, {2.0, 0.0, 0.0, 2.0}, {1.0, -1.0}, {1.0, 0.0}, {3.0});
    const auto dir = std::filesystem::temp_directory_path() / "lpvmpc_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "qp.txt").string();
    qp::dump_qp(qp_, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line.find("condensed qp") != std::string::npos);
    std::string tag;
    std::size_t rows = 0, cols = 0;
    in >> tag >> rows >> cols;
    CHECK(tag == "hessian");
    CHECK(rows == 2);
    CHECK(cols == 2);
    double v = 0.0;
    in >> v;
    CHECK(v == 2.0);
}
