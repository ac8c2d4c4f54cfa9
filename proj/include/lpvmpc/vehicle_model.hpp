#pragma once

#include <array>

#include "lpvmpc/common.hpp"

// Dynamic bicycle model with linear tire forces, fixed-step integrators, and
// the exact parameter-varying re-factorization of the same dynamics.

namespace lpvmpc {

struct VehicleParams {
    double c_alpha_f = 156e3;  // front cornering stiffness (N/rad)
    double c_alpha_r = 193e3;  // rear cornering stiffness (N/rad)
    double l_f = 1.04;         // CoG to front axle (m)
    double l_r = 1.4;          // CoG to rear axle (m)
    double i_z = 2937.0;       // yaw inertia (kg m^2)
    double m = 1919.0;         // mass (kg)
    double t_s = 0.05;         // sampling time (s)

    void validate() const;  // all fields strictly positive

    // Deterministic plant/model mismatch: factor in [-1, 1] scales a fixed
    // +/-10% pattern on the stiffnesses and the mass.
    VehicleParams perturbed(double factor) const;
};

struct VehicleState {
    double x = 0.0;      // global X of CoG (m)
    double y = 0.0;      // global Y of CoG (m)
    double v_lon = 0.0;  // longitudinal body-frame speed (m/s)
    double v_lat = 0.0;  // lateral body-frame speed (m/s)
    double psi = 0.0;    // yaw angle (rad), unwrapped
    double omega = 0.0;  // yaw rate (rad/s)

    std::array<double, 6> to_array() const { return {x, y, v_lon, v_lat, psi, omega}; }
    static VehicleState from_array(const std::array<double, 6>& z) {
        return {z[0], z[1], z[2], z[3], z[4], z[5]};
    }
};

struct ControlInput {
    double delta = 0.0;  // front steering angle (rad)
    double a_lon = 0.0;  // longitudinal acceleration (m/s^2)
};

struct SchedulingVector {
    double v_lon = 0.0;
    double v_lat = 0.0;
    double delta = 0.0;
    double psi = 0.0;
};

struct LpvMatrices {
    std::array<std::array<double, 6>, 6> a{};
    std::array<std::array<double, 2>, 6> b{};
    bool discrete = false;
};

// Right-hand side of the continuous bicycle dynamics. Requires
// z.v_lon >= kSpeedMin (slip angles divide by the longitudinal speed).
std::array<double, 6> dynamics_rhs(const VehicleState& z, const ControlInput& u,
                                   const VehicleParams& par);

// Forward Euler step z + t_s * f(z, u).
VehicleState euler_step(const VehicleState& z, const ControlInput& u,
                        const VehicleParams& par);

// Classical RK4 step with zero-order-hold input (plant truth model).
VehicleState rk4_step(const VehicleState& z, const ControlInput& u,
                      const VehicleParams& par);

// Continuous-time A_c(p), B_c(p).
LpvMatrices lpv_continuous(const SchedulingVector& p, const VehicleParams& par);

// A = I + t_s A_c, B = t_s B_c.
LpvMatrices lpv_discretize(const LpvMatrices& cont, double t_s);

// Extracts p = (v_lon, v_lat, delta, psi); clamps v_lon into
// [kSpeedMin, kSpeedMax] so the LPV matrices are always well defined.
SchedulingVector scheduling_of(const VehicleState& z, const ControlInput& u);

// Analytic Jacobians of dynamics_rhs, row-major 6x6 and 6x2.
void dynamics_jacobians(const VehicleState& z, const ControlInput& u,
                        const VehicleParams& par,
                        std::array<std::array<double, 6>, 6>& jz,
                        std::array<std::array<double, 2>, 6>& ju);

}  // namespace lpvmpc
