#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lpvmpc/simulation.hpp"

// Plain-text key/value configuration: INI-style sections, one key = value per
// line, '#' comments. Unknown keys are rejected with the key path and line.

namespace lpvmpc::cfg {

struct TrackConfig {
    double center_x = 60.0;
    double center_y = 0.0;
    double radius = 60.0;
    double r1 = -1.0;
    double r2 = 4.0;
};

struct SimSection {
    int duration = 400;
    double speed = 10.0;
    double start_angle = -2.6;
    double perturbation = 0.0;
    std::uint64_t seed = 42;
};

struct AppConfig {
    VehicleParams vehicle;
    TrackConfig track;
    std::vector<EllipseObstacle> obstacles;

    ControllerKind kind = ControllerKind::lpv_trust;
    std::string preset = "scenario1";  // scenario1 | scenario2 | none
    int horizon = 8;
    std::optional<std::vector<double>> q_diag;  // explicit overrides win
    std::optional<std::vector<double>> r_diag;
    std::optional<std::vector<double>> p_diag;

    TrustRegionConfig trust = TrustRegionConfig::defaults();
    double trust_e_p = 1e3;  // scalar, expanded to e_p = trust_e_p * I4

    qp::SolverSettings solver;
    SqpSettings sqp;
    SimSection sim;
    sim::StudyConfig study;
};

AppConfig default_config();

// Parse + validate. `name` is used in error messages (file path or "<text>").
AppConfig parse_config(const std::string& text, const std::string& name);
AppConfig load_config(const std::string& path);

// Emits every effective key; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const AppConfig& c);

// Resolves preset weights for the requested controller kind.
ControllerConfig controller_config(const AppConfig& c, ControllerKind kind);

sim::Scenario make_scenario(const AppConfig& c, ControllerKind kind);

}  // namespace lpvmpc::cfg
