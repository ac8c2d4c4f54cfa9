#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lpvmpc/common.hpp"

// Builds full six-state reference trajectories from XY waypoints, plus the
// circular-track waypoint generator used by the scenarios.

namespace lpvmpc {

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
};

struct ReferenceState {
    double x = 0.0;
    double y = 0.0;
    double v_lon = 0.0;
    double v_lat = 0.0;
    double psi = 0.0;
    double omega = 0.0;
};

// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

// Four-quadrant heading of the forward displacement cur - prev.
double heading_ref(const Waypoint& prev, const Waypoint& cur);

// Shortest signed angle difference divided by t_s.
double yaw_rate_ref(double psi_cur, double psi_prev, double t_s);

// Displacement rotated into the psi_ref body frame, divided by t_s:
// returns (v_lon_ref, v_lat_ref).
std::pair<double, double> body_frame_speeds(const Waypoint& prev,
                                            const Waypoint& cur,
                                            double psi_ref, double t_s);

// Reference states for horizon steps k..k+n (n + 1 entries). Windows past the
// last waypoint repeat the final reference with omega_ref = 0.
std::vector<ReferenceState> build_reference_window(
    std::span<const Waypoint> waypoints, std::size_t k, int n, double t_s);

// Equally spaced waypoints on a circle, arc spacing speed * t_s, starting at
// start_angle and advancing counterclockwise.
std::vector<Waypoint> circular_track(const Waypoint& center, double radius,
                                     double speed, std::size_t n_points,
                                     double t_s, double start_angle = 0.0);

// CSV with header "x,y", meters.
std::vector<Waypoint> load_waypoints_csv(const std::string& path);
void save_waypoints_csv(const std::string& path,
                        std::span<const Waypoint> waypoints);

}  // namespace lpvmpc
