#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lpvmpc/controller.hpp"

// Closed-loop simulation of plant + controller at the sampling rate, the
// seeded multi-scenario feasibility study, and timing aggregation.

namespace lpvmpc::sim {

struct Scenario {
    std::string name = "scenario";
    RoadBoundary road;
    std::vector<EllipseObstacle> obstacles;
    ControllerConfig controller;
    double speed = 10.0;         // reference speed along the track (m/s)
    double start_angle = -2.6;   // rad on the track circle
    int duration = 400;          // closed-loop steps
    double perturbation = 0.0;   // plant parameter mismatch factor in [-1, 1]
    std::uint64_t seed = 42;

    // Initial state on the center line at start_angle, tangent heading.
    VehicleState initial_state() const;
    std::vector<Waypoint> waypoints() const;
};

struct StepRecord {
    int step = 0;
    double time = 0.0;
    VehicleState state;   // plant state the controller acted on
    ControlInput input;   // applied input
    std::uint64_t plan_hash = 0;
    StepDiagnostics diag;
    double obstacle_margin = std::numeric_limits<double>::infinity();
    double road_margin = 0.0;
};

struct TrajectorySummary {
    int steps = 0;
    double rms_xy = 0.0;
    int infeasible_steps = 0;
    double min_obstacle_margin = std::numeric_limits<double>::infinity();
    double min_road_margin = std::numeric_limits<double>::infinity();
    double solve_avg = 0.0;
    double solve_max = 0.0;
    double solve_min = 0.0;
    bool aborted = false;
};

struct TrajectoryLog {
    std::vector<StepRecord> records;
    TrajectorySummary summary;
};

std::uint64_t plan_hash(const OpenLoopPlan& plan);

TrajectoryLog run_closed_loop(const Scenario& scn);

struct StudyRow {
    int id = 0;
    std::uint64_t seed = 0;
    double obstacle_angle = 0.0;
    double obstacle_radius = 0.0;
    int horizon = 0;
    bool standard_feasible = false;
    bool trust_feasible = false;
    int standard_infeasible_steps = 0;
    int trust_infeasible_steps = 0;
};

struct StudyResult {
    std::vector<StudyRow> rows;
    std::vector<TrajectoryLog> standard_logs;
    std::vector<TrajectoryLog> trust_logs;

    // every standard-feasible scenario is also trust-feasible
    bool superset() const;
    bool trust_all_feasible() const;
    bool standard_any_infeasible() const;
};

struct StudyConfig {
    int count = 10;
    std::uint64_t seed = 42;
    double radius_min = 0.7;
    double radius_max = 1.4;
    std::vector<int> horizons = {8, 15};
};

// Seeded stand-in suite: obstacle angle uniform along the track ahead of the
// start, radius uniform in [radius_min, radius_max], horizons cycled.
std::vector<Scenario> make_study_scenarios(const StudyConfig& study,
                                           const Scenario& base);

// Runs lpv_standard and lpv_trust on every scenario with identical settings.
StudyResult feasibility_study(const std::vector<Scenario>& scenarios,
                              bool parallel = true);

struct LabeledLog {
    ControllerKind kind;
    bool has_obstacle = false;
    const TrajectoryLog* log = nullptr;
};

struct TimingRow {
    ControllerKind kind;
    bool has_obstacle = false;
    double avg = 0.0;
    double max = 0.0;
    double min = 0.0;
    int samples = 0;
};

// Seconds, grouped by controller and scenario class; empty groups omitted.
std::vector<TimingRow> timing_report(const std::vector<LabeledLog>& logs);

// CSV emitters (schemas versioned in the header comment line).
void write_trajectory_csv(const std::string& path, const TrajectoryLog& log);
void write_summary_csv(const std::string& path, const TrajectoryLog& log);
void write_study_csv(const std::string& path, const StudyResult& study);
void write_plot_data_csv(const std::string& path, const Scenario& scn,
                         const TrajectoryLog& log);
void write_timing_csv(const std::string& path,
                      const std::vector<TimingRow>& rows);

}  // namespace lpvmpc::sim
