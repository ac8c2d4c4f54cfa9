#include "lpvmpc/constraints.hpp"

#include <cmath>
#include <numbers>

namespace lpvmpc {

std::size_t HalfspacePolytope::append(std::span<const double> g_row, double rhs,
                                      int slack) {
    if (g.empty()) {
        g = linalg::Matrix(0, g_row.size());
    }
    if (g_row.size() != g.cols())
        throw DimensionMismatch("HalfspacePolytope::append: row width mismatch");
    linalg::Matrix grown(rows() + 1, g.cols());
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) grown(i, j) = g(i, j);
    for (std::size_t j = 0; j < g.cols(); ++j) grown(rows(), j) = g_row[j];
    g = std::move(grown);
    h.push_back(rhs);
    soft.push_back(slack);
    return rows() - 1;
}

TrustRegionConfig TrustRegionConfig::defaults() {
    TrustRegionConfig cfg;
    cfg.e_p = linalg::Matrix::identity(4);
    for (int i = 0; i < 4; ++i) cfg.e_p(i, i) = 1e3;
    return cfg;
}

MpcBounds MpcBounds::defaults(double t_s) {
    MpcBounds b;
    b.psi_abs = std::numbers::pi;
    b.omega_abs = std::numbers::pi / (3.0 * t_s);
    b.delta_abs = 34.0 * std::numbers::pi / 180.0;
    b.delta_rate = 25.0 * std::numbers::pi / 180.0;
    return b;
}

std::pair<HalfspacePolytope, HalfspacePolytope> box_rows(const MpcBounds& bounds) {
    HalfspacePolytope state;
    state.g = linalg::Matrix(12, 6);
    state.h.assign(12, 0.0);
    state.soft.assign(12, -1);
    const double hi[6] = {bounds.x_max,    bounds.y_max,   bounds.v_max,
                          bounds.v_lat_abs, bounds.psi_abs, bounds.omega_abs};
    const double lo[6] = {bounds.x_min,     bounds.y_min,    bounds.v_min,
                          -bounds.v_lat_abs, -bounds.psi_abs, -bounds.omega_abs};
    for (int i = 0; i < 6; ++i) {
        state.g(i, i) = 1.0;
        state.h[i] = hi[i];
        state.g(6 + i, i) = -1.0;
        state.h[6 + i] = -lo[i];
    }

    HalfspacePolytope input;
    input.g = linalg::Matrix(4, 2);
    input.h.assign(4, 0.0);
    input.soft.assign(4, -1);
    input.g(0, 0) = 1.0;
    input.h[0] = bounds.delta_abs;
    input.g(1, 1) = 1.0;
    input.h[1] = bounds.a_max;
    input.g(2, 0) = -1.0;
    input.h[2] = bounds.delta_abs;
    input.g(3, 1) = -1.0;
    input.h[3] = -bounds.a_min;
    return {state, input};
}

HalfspacePolytope rate_rows(const ControlInput& u_prev, int n,
                            const MpcBounds& bounds) {
    HalfspacePolytope out;
    const std::size_t dim = 2 * static_cast<std::size_t>(n);
    out.g = linalg::Matrix(4 * static_cast<std::size_t>(n), dim);
    out.h.assign(4 * static_cast<std::size_t>(n), 0.0);
    out.soft.assign(out.h.size(), -1);
    const double prev[2] = {u_prev.delta, u_prev.a_lon};
    const double rate[2] = {bounds.delta_rate, bounds.a_rate};
    std::size_t r = 0;
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 2; ++c) {
            const std::size_t col = 2 * static_cast<std::size_t>(i) + c;
            if (i == 0) {
                out.g(r, col) = 1.0;
                out.h[r++] = prev[c] + rate[c];
                out.g(r, col) = -1.0;
                out.h[r++] = rate[c] - prev[c];
            } else {
                out.g(r, col) = 1.0;
                out.g(r, col - 2) = -1.0;
                out.h[r++] = rate[c];
                out.g(r, col) = -1.0;
                out.g(r, col - 2) = 1.0;
                out.h[r++] = rate[c];
            }
        }
    }
    return out;
}

double ellipse_gauge(const EllipseObstacle& obs, double x, double y) {
    const double dx = x - obs.cx;
    const double dy = y - obs.cy;
    return obs.ry * obs.ry * dx * dx + obs.rx * obs.rx * dy * dy -
           obs.rx * obs.rx * obs.ry * obs.ry;
}

namespace {

// Root of the (positive, convex) gauge along p0 + s d for s > 0, bisected to
// 1e-10 m. Returns false if no bracket is found within the search budget.
bool ray_exit(const EllipseObstacle& obs, double x0, double y0, double dx,
              double dy, double& x_out, double& y_out) {
    double s_hi = 0.5 * std::min(obs.rx, obs.ry);
    int budget = 80;
    while (ellipse_gauge(obs, x0 + s_hi * dx, y0 + s_hi * dy) < 0.0) {
        s_hi *= 2.0;
        if (--budget == 0) return false;
    }
    double s_lo = 0.0;
    while (s_hi - s_lo > 1e-10) {
        const double s = 0.5 * (s_lo + s_hi);
        if (ellipse_gauge(obs, x0 + s * dx, y0 + s * dy) < 0.0)
            s_lo = s;
        else
            s_hi = s;
    }
    const double s = 0.5 * (s_lo + s_hi);
    x_out = x0 + s * dx;
    y_out = y0 + s * dy;
    return true;
}

}  // namespace

ObstacleHalfspace obstacle_tangent(const EllipseObstacle& obs,
                                   std::span<const ReferenceState> ref_window,
                                   const RoadBoundary& road) {
    (void)road;  // projection direction comes from the reference heading
    ObstacleHalfspace out;
    double deepest = 0.0;
    std::size_t anchor = 0;
    for (std::size_t i = 0; i < ref_window.size(); ++i) {
        const double g = ellipse_gauge(obs, ref_window[i].x, ref_window[i].y);
        if (g < 0.0) {
            out.steps.push_back(static_cast<int>(i));
            if (g < deepest) {
                deepest = g;
                anchor = i;
            }
        }
    }
    if (out.steps.empty()) return out;  // inactive, sentinel row absent

    // Anchor the tangent at the deepest interior point: its lateral-normal
    // projection exits on the overtaking side, so the halfspace asks for a
    // lateral shift. Entry-edge points would project out the rear of the
    // ellipse and turn the row into a stop line.
    const ReferenceState& q = ref_window[anchor];
    // Lateral normal of the road at the reference point, toward the
    // configured overtaking side (left = +90 deg from travel direction).
    const double sgn = obs.side == EllipseObstacle::Side::left ? 1.0 : -1.0;
    const double dx = -sgn * std::sin(q.psi);
    const double dy = sgn * std::cos(q.psi);

    double px = 0.0, py = 0.0;
    if (!ray_exit(obs, q.x, q.y, dx, dy, px, py)) {
        // Radial fallback from the ellipse center through the reference point.
        const double ex = q.x - obs.cx;
        const double ey = q.y - obs.cy;
        const double norm = std::hypot(ex, ey);
        if (norm < 1e-9)
            throw ProjectionFailure(
                "obstacle_tangent: reference point coincides with obstacle center");
        const double s = obs.rx * obs.ry /
                         std::sqrt(obs.ry * obs.ry * ex * ex + obs.rx * obs.rx * ey * ey);
        px = obs.cx + s * ex;
        py = obs.cy + s * ey;
    }

    out.a3 = obs.ry * obs.ry * (px - obs.cx);
    out.b3 = obs.rx * obs.rx * (py - obs.cy);
    out.c3 = out.a3 * px + out.b3 * py;
    out.active = true;
    return out;
}

HalfspacePolytope road_tangent_rows(const RoadBoundary& road,
                                    std::span<const ReferenceState> ref_window) {
    if (ref_window.size() < 2)
        throw DimensionMismatch("road_tangent_rows: window too short");
    const int n = static_cast<int>(ref_window.size()) - 1;
    HalfspacePolytope out;
    out.g = linalg::Matrix(2 * static_cast<std::size_t>(n),
                           6 * static_cast<std::size_t>(n));
    out.h.assign(2 * static_cast<std::size_t>(n), 0.0);
    out.soft.assign(out.h.size(), -1);
    for (int i = 1; i <= n; ++i) {
        const ReferenceState& r = ref_window[static_cast<std::size_t>(i)];
        const double ex = r.x - road.center_x;
        const double ey = r.y - road.center_y;
        const double norm = std::hypot(ex, ey);
        if (norm < 1e-9)
            throw DegenerateGeometry("road_tangent_rows: reference point at track center");
        const double nx = ex / norm;
        const double ny = ey / norm;
        const double base = nx * road.center_x + ny * road.center_y;
        const std::size_t row = 2 * static_cast<std::size_t>(i - 1);
        const std::size_t col = 6 * static_cast<std::size_t>(i - 1);
        // outer: n . (p - center) <= R + r2
        out.g(row, col) = nx;
        out.g(row, col + 1) = ny;
        out.h[row] = road.radius + road.r2 + base;
        // inner: n . (p - center) >= R + r1
        out.g(row + 1, col) = -nx;
        out.g(row + 1, col + 1) = -ny;
        out.h[row + 1] = -(road.radius + road.r1 + base);
    }
    return out;
}

HalfspacePolytope trust_region_rows(std::span<const VehicleState> z_hat,
                                    std::span<const ControlInput> u_hat,
                                    const TrustRegionConfig& cfg) {
    HalfspacePolytope out;
    const int n = static_cast<int>(u_hat.size());
    const std::size_t dim = 8 * static_cast<std::size_t>(n);  // [Z; U]
    out.g = linalg::Matrix(0, dim);
    if (!cfg.enabled || n == 0) return out;
    if (z_hat.size() != static_cast<std::size_t>(n) + 1)
        throw DimensionMismatch("trust_region_rows: z_hat must have N+1 entries");

    // rows touching only fixed-size widths; build into a dense matrix directly
    const std::size_t n_rows =
        6 * static_cast<std::size_t>(n > 1 ? n - 1 : 0) + 2 * static_cast<std::size_t>(n);
    out.g = linalg::Matrix(n_rows, dim);
    out.h.assign(n_rows, 0.0);
    out.soft.assign(n_rows, -1);

    std::size_t r = 0;
    // scheduling-relevant states (v_lon, v_lat, psi) of z_1 .. z_{N-1}
    const int comps[3] = {2, 3, 4};
    for (int i = 1; i < n; ++i) {
        const double hat[3] = {z_hat[static_cast<std::size_t>(i)].v_lon,
                               z_hat[static_cast<std::size_t>(i)].v_lat,
                               z_hat[static_cast<std::size_t>(i)].psi};
        for (int c = 0; c < 3; ++c) {
            const std::size_t col = 6 * static_cast<std::size_t>(i - 1) +
                                    static_cast<std::size_t>(comps[c]);
            const int slack = 4 * i + c;
            out.g(r, col) = 1.0;
            out.h[r] = hat[c] + cfg.e_z_max[static_cast<std::size_t>(c)];
            out.soft[r++] = slack;
            out.g(r, col) = -1.0;
            out.h[r] = cfg.e_z_max[static_cast<std::size_t>(c)] - hat[c];
            out.soft[r++] = slack;
        }
    }
    // steering inputs u_0 .. u_{N-1}
    for (int i = 0; i < n; ++i) {
        const std::size_t col =
            6 * static_cast<std::size_t>(n) + 2 * static_cast<std::size_t>(i);
        const int slack = 4 * i + 3;
        const double hat = u_hat[static_cast<std::size_t>(i)].delta;
        out.g(r, col) = 1.0;
        out.h[r] = hat + cfg.e_u_max;
        out.soft[r++] = slack;
        out.g(r, col) = -1.0;
        out.h[r] = cfg.e_u_max - hat;
        out.soft[r++] = slack;
    }
    return out;
}

}  // namespace lpvmpc
