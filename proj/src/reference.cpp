#include "lpvmpc/reference.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lpvmpc {

namespace {
constexpr double kMinDisplacement = 1e-12;  // meters
}

double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a <= 0.0) a += two_pi;
    return a - std::numbers::pi;
}

double heading_ref(const Waypoint& prev, const Waypoint& cur) {
    const double dx = cur.x - prev.x;
    const double dy = cur.y - prev.y;
    if (std::hypot(dx, dy) < kMinDisplacement)
        throw DegenerateWaypoint("heading_ref: consecutive waypoints coincide");
    return std::atan2(dy, dx);
}

double yaw_rate_ref(double psi_cur, double psi_prev, double t_s) {
    return wrap_angle(psi_cur - psi_prev) / t_s;
}

std::pair<double, double> body_frame_speeds(const Waypoint& prev,
                                            const Waypoint& cur,
                                            double psi_ref, double t_s) {
    const double dx = cur.x - prev.x;
    const double dy = cur.y - prev.y;
    if (std::hypot(dx, dy) < kMinDisplacement)
        throw DegenerateWaypoint("body_frame_speeds: consecutive waypoints coincide");
    const double c = std::cos(psi_ref);
    const double s = std::sin(psi_ref);
    return {(c * dx + s * dy) / t_s, (-s * dx + c * dy) / t_s};
}

std::vector<ReferenceState> build_reference_window(
    std::span<const Waypoint> waypoints, std::size_t k, int n, double t_s) {
    if (waypoints.empty())
        throw EmptyTrajectory("build_reference_window: no waypoints");

    const std::size_t last = waypoints.size() - 1;
    std::vector<ReferenceState> out;
    out.reserve(static_cast<std::size_t>(n) + 1);

    // Heading at global index j (forward difference at j = 0).
    auto heading_at = [&](std::size_t j) {
        if (waypoints.size() < 2) return 0.0;
        if (j == 0) return heading_ref(waypoints[0], waypoints[1]);
        return heading_ref(waypoints[j - 1], waypoints[j]);
    };

    for (int i = 0; i <= n; ++i) {
        const std::size_t j = k + static_cast<std::size_t>(i);
        if (j > last || waypoints.size() < 2) {
            // Past the end (or degenerate input): repeat, yaw rate zeroed.
            ReferenceState r;
            if (!out.empty()) {
                r = out.back();
            } else {
                r.x = waypoints[last].x;
                r.y = waypoints[last].y;
            }
            r.omega = 0.0;
            out.push_back(r);
            continue;
        }
        ReferenceState r;
        r.x = waypoints[j].x;
        r.y = waypoints[j].y;
        r.psi = heading_at(j);
        const std::size_t jp = j == 0 ? 1 : j;  // displacement pair (jp-1, jp)
        const auto [v_lon, v_lat] =
            body_frame_speeds(waypoints[jp - 1], waypoints[jp], r.psi, t_s);
        r.v_lon = v_lon;
        r.v_lat = v_lat;
        r.omega = j == 0 ? 0.0 : yaw_rate_ref(r.psi, heading_at(j - 1), t_s);
        out.push_back(r);
    }
    return out;
}

std::vector<Waypoint> circular_track(const Waypoint& center, double radius,
                                     double speed, std::size_t n_points,
                                     double t_s, double start_angle) {
    if (!(radius > 0.0)) throw DomainError("circular_track: radius must be positive");
    if (!(speed > 0.0)) throw DomainError("circular_track: speed must be positive");
    const double dtheta = speed * t_s / radius;
    std::vector<Waypoint> out;
    out.reserve(n_points);
    for (std::size_t j = 0; j < n_points; ++j) {
        const double th = start_angle + dtheta * static_cast<double>(j);
        out.push_back({center.x + radius * std::cos(th),
                       center.y + radius * std::sin(th)});
    }
    return out;
}

std::vector<Waypoint> load_waypoints_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open waypoint file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw EmptyTrajectory("empty waypoint file: " + path);
    // header must be "x,y" (tolerate trailing whitespace/CR)
    std::string header = line;
    while (!header.empty() && (header.back() == '\r' || header.back() == ' '))
        header.pop_back();
    if (header != "x,y")
        throw IoError("waypoint file missing 'x,y' header: " + path);
    std::vector<Waypoint> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string xs, ys;
        if (!std::getline(ss, xs, ',') || !std::getline(ss, ys))
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed waypoint row");
        try {
            out.push_back({std::stod(xs), std::stod(ys)});
        } catch (const std::exception&) {
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed waypoint row");
        }
    }
    if (out.empty()) throw EmptyTrajectory("no waypoints in file: " + path);
    return out;
}

void save_waypoints_csv(const std::string& path,
                        std::span<const Waypoint> waypoints) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write waypoint file: " + path);
    out << "x,y\n";
    char buf[80];
    for (const auto& w : waypoints) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", w.x, w.y);
        out << buf;
    }
}

}  // namespace lpvmpc
