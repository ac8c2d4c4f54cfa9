#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "lpvmpc/reference.hpp"

using namespace lpvmpc;

TEST_CASE("heading_ref basic quadrants") {
    CHECK(heading_ref({0, 0}, {1, 0}) == doctest::Approx(0.0));
    CHECK(heading_ref({0, 0}, {0, 1}) == doctest::Approx(std::numbers::pi / 2));
    CHECK(heading_ref({0, 0}, {-1, 0}) == doctest::Approx(std::numbers::pi));
    CHECK_THROWS_AS(heading_ref({1, 1}, {1, 1}), DegenerateWaypoint);
}

TEST_CASE("heading_ref is rotation equivariant") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    std::uniform_real_distribution<double> uphi(-std::numbers::pi, std::numbers::pi);
    for (int t = 0; t < 200; ++t) {
        const Waypoint a{u(rng), u(rng)};
        const Waypoint b{a.x + u(rng) * 0.1 + 0.5, a.y + u(rng) * 0.1};
        const double phi = uphi(rng);
        const double c = std::cos(phi), s = std::sin(phi);
        const Waypoint ar{c * a.x - s * a.y, s * a.x + c * a.y};
        const Waypoint br{c * b.x - s * b.y, s * b.x + c * b.y};
        const double h0 = heading_ref(a, b);
        const double h1 = heading_ref(ar, br);
        CHECK(std::fabs(wrap_angle(h1 - h0 - phi)) < 1e-10);
    }
}

TEST_CASE("yaw_rate_ref uses the shortest signed angle") {
    CHECK(yaw_rate_ref(0.1, 0.1, 0.05) == doctest::Approx(0.0));
    CHECK(yaw_rate_ref(0.2, 0.1, 0.05) == doctest::Approx(2.0));
    // wraps through +/-pi instead of jumping by ~2 pi
    CHECK(yaw_rate_ref(-std::numbers::pi + 0.01, std::numbers::pi - 0.01, 0.05) ==
          doctest::Approx(0.4));
}

TEST_CASE("body_frame_speeds rotates the displacement") {
    {
        const auto [v, nu] = body_frame_speeds({0, 0}, {0.5, 0}, 0.0, 0.05);
        CHECK(v == doctest::Approx(10.0));
        CHECK(nu == doctest::Approx(0.0));
    }
    {
        const auto [v, nu] =
            body_frame_speeds({0, 0}, {0, 0.5}, std::numbers::pi / 2, 0.05);
        CHECK(v == doctest::Approx(10.0));
        CHECK(nu == doctest::Approx(0.0).epsilon(1e-12));
    }
    // with psi_ref = heading, the lateral speed vanishes and the longitudinal
    // speed is the displacement norm over t_s
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int t = 0; t < 200; ++t) {
        const Waypoint a{u(rng), u(rng)};
        const Waypoint b{a.x + 0.3 + 0.1 * u(rng), a.y + 0.1 * u(rng)};
        const double psi = heading_ref(a, b);
        const auto [v, nu] = body_frame_speeds(a, b, psi, 0.05);
        CHECK(std::fabs(nu) < 1e-9);
        CHECK(v == doctest::Approx(std::hypot(b.x - a.x, b.y - a.y) / 0.05));
    }
}

TEST_CASE("reference window on a straight line") {
    std::vector<Waypoint> wps;
    for (int i = 0; i < 30; ++i) wps.push_back({0.5 * i, 0.0});
    const auto win = build_reference_window(wps, 3, 8, 0.05);
    REQUIRE(win.size() == 9);
    for (const auto& r : win) {
        CHECK(r.psi == doctest::Approx(0.0));
        CHECK(r.omega == doctest::Approx(0.0));
        CHECK(r.v_lon == doctest::Approx(10.0));
        CHECK(r.v_lat == doctest::Approx(0.0));
    }
    CHECK(win[0].x == doctest::Approx(1.5));
    CHECK(win[8].x == doctest::Approx(5.5));
}

TEST_CASE("reference window on a circle") {
    const double radius = 200.0, speed = 10.0, ts = 0.05;
    const auto wps = circular_track({0, 0}, radius, speed, 80, ts);
    const auto win = build_reference_window(wps, 2, 20, ts);
    const double omega_expect = speed * ts / radius / ts;  // dtheta / t_s
    for (std::size_t i = 1; i < win.size(); ++i) {
        CHECK(win[i].v_lon == doctest::Approx(speed).epsilon(1e-4));
        CHECK(std::fabs(win[i].v_lat) < 1e-9);
        CHECK(win[i].omega == doctest::Approx(omega_expect).epsilon(1e-9));
        // curvature consistency bound
        CHECK(std::fabs(win[i].omega - win[i].v_lon / radius) <=
              1e-6 * win[i].v_lon / radius);
    }
}

TEST_CASE("reference window pads past the last waypoint") {
    std::vector<Waypoint> wps = {{0, 0}, {0.5, 0}, {1.0, 0}, {1.5, 0}};
    const auto win = build_reference_window(wps, 2, 5, 0.05);
    REQUIRE(win.size() == 6);
    CHECK(win[1].x == doctest::Approx(1.5));
    for (std::size_t i = 2; i < win.size(); ++i) {
        CHECK(win[i].x == doctest::Approx(1.5));
        CHECK(win[i].omega == 0.0);
        CHECK(win[i].psi == doctest::Approx(win[1].psi));
    }
    CHECK_THROWS_AS(build_reference_window({}, 0, 3, 0.05), EmptyTrajectory);
}

TEST_CASE("circular_track spacing and closure") {
    const auto wps = circular_track({0, 0}, 50.0, 10.0, 700, 0.05);
    CHECK(wps[0].x == doctest::Approx(50.0));
    CHECK(wps[0].y == doctest::Approx(0.0));
    for (std::size_t i = 1; i < 10; ++i) {
        const double d = std::hypot(wps[i].x - wps[i - 1].x, wps[i].y - wps[i - 1].y);
        CHECK(d == doctest::Approx(0.5).epsilon(1e-5));
    }
    // full loop: n * 0.5 = 2 pi R at n ~ 628.3
    const std::size_t n_loop = static_cast<std::size_t>(
        std::round(2.0 * std::numbers::pi * 50.0 / 0.5));
    const double gap = std::hypot(wps[n_loop].x - 50.0, wps[n_loop].y - 0.0);
    CHECK(gap < 0.25);
    CHECK_THROWS_AS(circular_track({0, 0}, -1.0, 10.0, 10, 0.05), DomainError);
    CHECK_THROWS_AS(circular_track({0, 0}, 50.0, 0.0, 10, 0.05), DomainError);
}

TEST_CASE("waypoint csv round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "lpvmpc_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "wps.csv").string();
    const auto wps = circular_track({3, -2}, 25.0, 8.0, 40, 0.05, 0.7);
    save_waypoints_csv(path, wps);
    const auto back = load_waypoints_csv(path);
    REQUIRE(back.size() == wps.size());
    for (std::size_t i = 0; i < wps.size(); ++i) {
        CHECK(back[i].x == wps[i].x);
        CHECK(back[i].y == wps[i].y);
    }
    CHECK_THROWS_AS(load_waypoints_csv((dir / "missing.csv").string()), IoError);
}
