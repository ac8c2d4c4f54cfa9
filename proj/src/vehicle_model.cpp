#include "lpvmpc/vehicle_model.hpp"

#include <cmath>

namespace lpvmpc {

namespace {

void require_speed(double v_lon, const char* who) {
    if (!(v_lon >= kSpeedMin))
        throw DomainError(std::string(who) + ": longitudinal speed below minimum");
}

VehicleState add_scaled(const VehicleState& z, const std::array<double, 6>& d,
                        double s) {
    return {z.x + s * d[0],     z.y + s * d[1],   z.v_lon + s * d[2],
            z.v_lat + s * d[3], z.psi + s * d[4], z.omega + s * d[5]};
}

}  // namespace

void VehicleParams::validate() const {
    if (!(c_alpha_f > 0 && c_alpha_r > 0 && l_f > 0 && l_r > 0 && i_z > 0 &&
          m > 0 && t_s > 0))
        throw DomainError("VehicleParams: all fields must be strictly positive");
}

VehicleParams VehicleParams::perturbed(double factor) const {
    VehicleParams p = *this;
    p.c_alpha_f *= 1.0 + 0.1 * factor;
    p.c_alpha_r *= 1.0 - 0.1 * factor;
    p.m *= 1.0 + 0.1 * factor;
    return p;
}

std::array<double, 6> dynamics_rhs(const VehicleState& z, const ControlInput& u,
                                   const VehicleParams& par) {
    require_speed(z.v_lon, "dynamics_rhs");
    const double cp = std::cos(z.psi);
    const double sp = std::sin(z.psi);
    const double alpha_f = u.delta - (z.v_lat + par.l_f * z.omega) / z.v_lon;
    const double alpha_r = (par.l_r * z.omega - z.v_lat) / z.v_lon;
    const double f_yf = par.c_alpha_f * alpha_f;
    const double f_yr = par.c_alpha_r * alpha_r;
    return {
        z.v_lon * cp - z.v_lat * sp,
        z.v_lon * sp + z.v_lat * cp,
        z.omega * z.v_lat + u.a_lon,
        -z.omega * z.v_lon + (2.0 / par.m) * (f_yf * std::cos(u.delta) + f_yr),
        z.omega,
        (2.0 / par.i_z) * (par.l_f * f_yf - par.l_r * f_yr),
    };
}

VehicleState euler_step(const VehicleState& z, const ControlInput& u,
                        const VehicleParams& par) {
    return add_scaled(z, dynamics_rhs(z, u, par), par.t_s);
}

VehicleState rk4_step(const VehicleState& z, const ControlInput& u,
                      const VehicleParams& par) {
    const double h = par.t_s;
    const auto k1 = dynamics_rhs(z, u, par);
    const auto k2 = dynamics_rhs(add_scaled(z, k1, 0.5 * h), u, par);
    const auto k3 = dynamics_rhs(add_scaled(z, k2, 0.5 * h), u, par);
    const auto k4 = dynamics_rhs(add_scaled(z, k3, h), u, par);
    VehicleState out = z;
    std::array<double, 6> s{};
    for (int i = 0; i < 6; ++i) s[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
    out = add_scaled(z, s, h / 6.0);
    return out;
}

LpvMatrices lpv_continuous(const SchedulingVector& p, const VehicleParams& par) {
    require_speed(p.v_lon, "lpv_continuous");
    const double beta_f = 2.0 * par.c_alpha_f / par.m;
    const double beta_r = 2.0 * par.c_alpha_r / par.m;
    const double gamma_f = 2.0 * par.l_f * par.c_alpha_f / par.i_z;
    const double gamma_r = 2.0 * par.l_r * par.c_alpha_r / par.i_z;
    const double cd = std::cos(p.delta);
    const double inv_v = 1.0 / p.v_lon;

    LpvMatrices out;
    out.discrete = false;
    auto& a = out.a;
    a[0][2] = std::cos(p.psi);
    a[0][3] = -std::sin(p.psi);
    a[1][2] = std::sin(p.psi);
    a[1][3] = std::cos(p.psi);
    a[2][5] = p.v_lat;
    a[3][3] = -beta_f * cd * inv_v - beta_r * inv_v;
    a[3][5] = -p.v_lon - beta_f * cd * inv_v * par.l_f + beta_r * inv_v * par.l_r;
    a[4][5] = 1.0;
    a[5][3] = inv_v * (gamma_r - gamma_f);
    a[5][5] = -inv_v * (gamma_f * par.l_f + gamma_r * par.l_r);

    out.b[3][0] = beta_f * cd;
    out.b[5][0] = gamma_f;
    out.b[2][1] = 1.0;
    return out;
}

LpvMatrices lpv_discretize(const LpvMatrices& cont, double t_s) {
    LpvMatrices out;
    out.discrete = true;
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) out.a[i][j] = t_s * cont.a[i][j];
        out.a[i][i] += 1.0;
        for (int j = 0; j < 2; ++j) out.b[i][j] = t_s * cont.b[i][j];
    }
    return out;
}

SchedulingVector scheduling_of(const VehicleState& z, const ControlInput& u) {
    double v = z.v_lon;
    if (v < kSpeedMin) v = kSpeedMin;
    if (v > kSpeedMax) v = kSpeedMax;
    return {v, z.v_lat, u.delta, z.psi};
}

void dynamics_jacobians(const VehicleState& z, const ControlInput& u,
                        const VehicleParams& par,
                        std::array<std::array<double, 6>, 6>& jz,
                        std::array<std::array<double, 2>, 6>& ju) {
    require_speed(z.v_lon, "dynamics_jacobians");
    const double cp = std::cos(z.psi);
    const double sp = std::sin(z.psi);
    const double cd = std::cos(u.delta);
    const double sd = std::sin(u.delta);
    const double inv_v = 1.0 / z.v_lon;
    const double alpha_f = u.delta - (z.v_lat + par.l_f * z.omega) * inv_v;
    const double daf_dv = (z.v_lat + par.l_f * z.omega) * inv_v * inv_v;
    const double dar_dv = -(par.l_r * z.omega - z.v_lat) * inv_v * inv_v;
    const double cf = 2.0 * par.c_alpha_f / par.m;
    const double cr = 2.0 * par.c_alpha_r / par.m;
    const double gf = 2.0 * par.l_f * par.c_alpha_f / par.i_z;
    const double gr = 2.0 * par.l_r * par.c_alpha_r / par.i_z;

    jz = {};
    ju = {};

    jz[0][2] = cp;
    jz[0][3] = -sp;
    jz[0][4] = -z.v_lon * sp - z.v_lat * cp;
    jz[1][2] = sp;
    jz[1][3] = cp;
    jz[1][4] = z.v_lon * cp - z.v_lat * sp;
    jz[2][3] = z.omega;
    jz[2][5] = z.v_lat;
    jz[3][2] = -z.omega + cf * cd * daf_dv + cr * dar_dv;
    jz[3][3] = -(cf * cd + cr) * inv_v;
    jz[3][5] = -z.v_lon - cf * cd * par.l_f * inv_v + cr * par.l_r * inv_v;
    jz[4][5] = 1.0;
    jz[5][2] = gf * daf_dv - gr * dar_dv;
    jz[5][3] = (gr - gf) * inv_v;
    jz[5][5] = -(gf * par.l_f + gr * par.l_r) * inv_v;

    ju[2][1] = 1.0;
    ju[3][0] = cf * (cd - alpha_f * sd);
    ju[5][0] = gf;
}

}  // namespace lpvmpc
