#pragma once

#include <span>
#include <string>
#include <vector>

#include "lpvmpc/linalg.hpp"
#include "lpvmpc/reference.hpp"
#include "lpvmpc/vehicle_model.hpp"

// Producers for every linear inequality row of the MPC: box state/input
// bounds, input-rate bounds, road-boundary tangents, the adaptive obstacle
// tangent halfspace, and the trust-region soft rows.

namespace lpvmpc {

// Stacked rows g x <= h. The column space depends on the producer and is
// documented per operation. soft[r] is -1 for a hard row, otherwise the slack
// channel the row may borrow (the assembler adds the -1 slack coefficient).
struct HalfspacePolytope {
    linalg::Matrix g;
    linalg::Vector h;
    std::vector<int> soft;

    std::size_t rows() const { return h.size(); }
    std::size_t dim() const { return g.cols(); }
    // Appends g_row x <= rhs; returns the row index.
    std::size_t append(std::span<const double> g_row, double rhs, int slack = -1);
};

struct EllipseObstacle {
    double cx = 0.0;  // center (m)
    double cy = 0.0;
    double rx = 1.0;  // semi-axes (m)
    double ry = 1.0;
    enum class Side { left, right };
    Side side = Side::right;  // overtaking side relative to travel direction
};

// G(X, Y) = ry^2 (X-cx)^2 + rx^2 (Y-cy)^2 - rx^2 ry^2; negative inside.
double ellipse_gauge(const EllipseObstacle& obs, double x, double y);

struct ObstacleHalfspace {
    double a3 = 0.0;
    double b3 = 0.0;
    double c3 = 0.0;  // active halfspace: a3 X + b3 Y >= c3
    bool active = false;
    // Horizon indices (into the reference window) whose reference points lie
    // inside the ellipse; the tangent row is enforced at these steps.
    std::vector<int> steps;
};

struct RoadBoundary {
    double center_x = 0.0;
    double center_y = 0.0;
    double radius = 50.0;  // center-line radius (m)
    double r1 = -1.0;      // inner offset (m), r1 < r2
    double r2 = 4.0;       // outer offset (m)
};

struct TrustRegionConfig {
    // per-scheduling-state error bound (v_lon, v_lat, psi)
    std::array<double, 3> e_z_max{0.5, 0.3, 0.1};
    double e_u_max = 0.05;      // steering error bound (rad)
    linalg::Matrix e_p;         // 4x4 slack penalty weight, PSD
    bool enabled = true;

    static TrustRegionConfig defaults();
};

// Table II box bounds (plus the input-rate limits quoted alongside them).
struct MpcBounds {
    double x_min = -1.0, x_max = 1500.0;
    double y_min = -600.0, y_max = 800.0;
    double v_min = kSpeedMin, v_max = kSpeedMax;
    double v_lat_abs = 10.0;
    double psi_abs = 0.0;    // pi
    double omega_abs = 0.0;  // pi / (3 t_s)
    double delta_abs = 0.0;  // 34 pi / 180
    double a_min = -6.0, a_max = 2.0;
    double delta_rate = 0.0;  // 25 pi / 180 per step
    double a_rate = 1.5;      // per step

    static MpcBounds defaults(double t_s);
};

// State box rows (12 x 6) and input box rows (4 x 2), both per-step spaces.
std::pair<HalfspacePolytope, HalfspacePolytope> box_rows(const MpcBounds& bounds);

// Rate rows over the stacked input space (4N x 2N): step 0 against u_prev,
// steps i >= 1 coupling consecutive horizon inputs.
HalfspacePolytope rate_rows(const ControlInput& u_prev, int n,
                            const MpcBounds& bounds);

// Single tangent halfspace from the first reference point inside the ellipse,
// projected to the boundary along the road's lateral normal toward the
// overtaking side. Inactive (no row) when no reference point is inside.
ObstacleHalfspace obstacle_tangent(const EllipseObstacle& obs,
                                   std::span<const ReferenceState> ref_window,
                                   const RoadBoundary& road);

// Two road-boundary tangent rows per horizon step i = 1..N over the stacked
// state space (2N x 6N), tangent to the circles of radius R+r1 / R+r2 at the
// radial projection of the reference point.
HalfspacePolytope road_tangent_rows(const RoadBoundary& road,
                                    std::span<const ReferenceState> ref_window);

// Soft scheduling-trust-region rows over [Z (6N); U (2N)] with slack channels
// into the 4N slack block: states i = 1..N-1 (channels 4i+0..2), inputs
// i = 0..N-1 (channel 4i+3). z_hat has N+1 entries (index 0 unused).
HalfspacePolytope trust_region_rows(std::span<const VehicleState> z_hat,
                                    std::span<const ControlInput> u_hat,
                                    const TrustRegionConfig& cfg);

}  // namespace lpvmpc
