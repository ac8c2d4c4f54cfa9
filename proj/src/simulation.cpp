#include "lpvmpc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <future>
#include <numbers>
#include <random>
#include <thread>

namespace lpvmpc::sim {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void hash_double(std::uint64_t& h, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= kFnvPrime;
    }
}

double road_margin_of(const RoadBoundary& road, double x, double y) {
    const double rho = std::hypot(x - road.center_x, y - road.center_y);
    return std::min(rho - (road.radius + road.r1), (road.radius + road.r2) - rho);
}

double obstacle_margin_of(const std::vector<EllipseObstacle>& obstacles,
                          double x, double y) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& obs : obstacles) m = std::min(m, ellipse_gauge(obs, x, y));
    return m;
}

void csv_write(std::ofstream& out, const char* fmt, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, fmt, v);
    out << buf;
}

}  // namespace

VehicleState Scenario::initial_state() const {
    VehicleState z;
    z.x = road.center_x + road.radius * std::cos(start_angle);
    z.y = road.center_y + road.radius * std::sin(start_angle);
    z.psi = start_angle + std::numbers::pi / 2.0;  // ccw tangent
    z.v_lon = speed;
    z.v_lat = 0.0;
    z.omega = speed / road.radius;
    return z;
}

std::vector<Waypoint> Scenario::waypoints() const {
    const std::size_t count = static_cast<std::size_t>(duration) +
                              static_cast<std::size_t>(controller.horizon) + 3;
    return circular_track({road.center_x, road.center_y}, road.radius, speed,
                          count, controller.vehicle.t_s, start_angle);
}

std::uint64_t plan_hash(const OpenLoopPlan& plan) {
    std::uint64_t h = kFnvOffset;
    for (const auto& z : plan.states) {
        const auto a = z.to_array();
        for (double v : a) hash_double(h, v);
    }
    for (const auto& u : plan.inputs) {
        hash_double(h, u.delta);
        hash_double(h, u.a_lon);
    }
    return h;
}

TrajectoryLog run_closed_loop(const Scenario& scn) {
    if (scn.duration < 1) throw DomainError("run_closed_loop: duration must be >= 1");
    const auto wps = scn.waypoints();
    const double t_s = scn.controller.vehicle.t_s;
    const VehicleParams plant_par = scn.controller.vehicle.perturbed(scn.perturbation);

    LpvMpcController lpv(scn.controller);
    NmpcSqpController nmpc(scn.controller);
    const bool use_nmpc = scn.controller.kind == ControllerKind::nmpc_sqp;

    TrajectoryLog log;
    log.records.reserve(static_cast<std::size_t>(scn.duration));
    VehicleState z = scn.initial_state();

    for (int k = 0; k < scn.duration; ++k) {
        const auto refs = build_reference_window(
            wps, static_cast<std::size_t>(k), scn.controller.horizon, t_s);
        const StepResult res = use_nmpc
                                   ? nmpc.step(z, refs, scn.obstacles, scn.road)
                                   : lpv.step(z, refs, scn.obstacles, scn.road);

        StepRecord rec;
        rec.step = k;
        rec.time = t_s * k;
        rec.state = z;
        rec.input = res.input;
        rec.plan_hash = plan_hash(res.plan);
        rec.diag = res.diagnostics;
        rec.obstacle_margin = obstacle_margin_of(scn.obstacles, z.x, z.y);
        rec.road_margin = road_margin_of(scn.road, z.x, z.y);
        log.records.push_back(rec);

        try {
            z = rk4_step(z, res.input, plant_par);
        } catch (const DomainError&) {
            log.summary.aborted = true;
            break;
        }
    }

    // summary
    auto& s = log.summary;
    s.steps = static_cast<int>(log.records.size());
    double sq = 0.0;
    double t_sum = 0.0;
    s.solve_min = std::numeric_limits<double>::infinity();
    for (const auto& rec : log.records) {
        const auto& wp = wps[static_cast<std::size_t>(rec.step)];
        const double ex = rec.state.x - wp.x;
        const double ey = rec.state.y - wp.y;
        sq += ex * ex + ey * ey;
        if (rec.diag.solver_status != qp::QpStatus::solved) ++s.infeasible_steps;
        s.min_obstacle_margin = std::min(s.min_obstacle_margin, rec.obstacle_margin);
        s.min_road_margin = std::min(s.min_road_margin, rec.road_margin);
        t_sum += rec.diag.solve_time;
        s.solve_max = std::max(s.solve_max, rec.diag.solve_time);
        s.solve_min = std::min(s.solve_min, rec.diag.solve_time);
    }
    if (s.steps > 0) {
        s.rms_xy = std::sqrt(sq / s.steps);
        s.solve_avg = t_sum / s.steps;
    } else {
        s.solve_min = 0.0;
    }
    return log;
}

bool StudyResult::superset() const {
    for (const auto& r : rows)
        if (r.standard_feasible && !r.trust_feasible) return false;
    return true;
}

bool StudyResult::trust_all_feasible() const {
    for (const auto& r : rows)
        if (!r.trust_feasible) return false;
    return !rows.empty();
}

bool StudyResult::standard_any_infeasible() const {
    for (const auto& r : rows)
        if (!r.standard_feasible) return true;
    return false;
}

std::vector<Scenario> make_study_scenarios(const StudyConfig& study,
                                           const Scenario& base) {
    std::mt19937_64 rng(study.seed);
    std::uniform_real_distribution<double> u_angle(0.9, 1.7);
    std::uniform_real_distribution<double> u_radius(study.radius_min,
                                                    study.radius_max);
    std::vector<Scenario> out;
    out.reserve(static_cast<std::size_t>(study.count));
    for (int i = 0; i < study.count; ++i) {
        Scenario s = base;
        s.name = "study_" + std::to_string(i);
        s.seed = study.seed + static_cast<std::uint64_t>(i);
        const double angle = base.start_angle + u_angle(rng);
        const double radius = u_radius(rng);
        EllipseObstacle obs;
        obs.cx = s.road.center_x + s.road.radius * std::cos(angle);
        obs.cy = s.road.center_y + s.road.radius * std::sin(angle);
        obs.rx = radius;
        obs.ry = radius;
        obs.side = EllipseObstacle::Side::right;  // outward for ccw travel
        s.obstacles = {obs};
        s.controller.horizon = study.horizons.empty()
                                   ? base.controller.horizon
                                   : study.horizons[static_cast<std::size_t>(i) %
                                                    study.horizons.size()];
        // run far enough to pass the obstacle and settle back
        const double arc = s.road.radius * (angle - base.start_angle + 0.8);
        s.duration = static_cast<int>(
            std::ceil(arc / (s.speed * s.controller.vehicle.t_s)));
        out.push_back(std::move(s));
    }
    return out;
}

StudyResult feasibility_study(const std::vector<Scenario>& scenarios,
                              bool parallel) {
    StudyResult result;
    const std::size_t n = scenarios.size();
    result.rows.resize(n);
    result.standard_logs.resize(n);
    result.trust_logs.resize(n);

    auto run_one = [&](std::size_t i) {
        Scenario std_scn = scenarios[i];
        std_scn.controller.kind = ControllerKind::lpv_standard;
        std_scn.controller.trust.enabled = false;
        Scenario tr_scn = scenarios[i];
        tr_scn.controller.kind = ControllerKind::lpv_trust;
        tr_scn.controller.trust.enabled = true;

        result.standard_logs[i] = run_closed_loop(std_scn);
        result.trust_logs[i] = run_closed_loop(tr_scn);

        StudyRow row;
        row.id = static_cast<int>(i);
        row.seed = scenarios[i].seed;
        row.horizon = scenarios[i].controller.horizon;
        if (!scenarios[i].obstacles.empty()) {
            const auto& obs = scenarios[i].obstacles.front();
            row.obstacle_radius = obs.rx;
            row.obstacle_angle = std::atan2(obs.cy - scenarios[i].road.center_y,
                                            obs.cx - scenarios[i].road.center_x);
        }
        row.standard_infeasible_steps = result.standard_logs[i].summary.infeasible_steps;
        row.trust_infeasible_steps = result.trust_logs[i].summary.infeasible_steps;
        row.standard_feasible = row.standard_infeasible_steps == 0 &&
                                !result.standard_logs[i].summary.aborted;
        row.trust_feasible = row.trust_infeasible_steps == 0 &&
                             !result.trust_logs[i].summary.aborted;
        result.rows[i] = row;
    };

    if (parallel && n > 1) {
        const std::size_t workers =
            std::max<std::size_t>(1, std::thread::hardware_concurrency());
        std::vector<std::future<void>> pending;
        for (std::size_t i = 0; i < n; ++i) {
            pending.push_back(std::async(std::launch::async, run_one, i));
            if (pending.size() >= workers) {
                for (auto& f : pending) f.get();
                pending.clear();
            }
        }
        for (auto& f : pending) f.get();
    } else {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
    }
    return result;
}

std::vector<TimingRow> timing_report(const std::vector<LabeledLog>& logs) {
    std::vector<TimingRow> rows;
    auto find_row = [&](ControllerKind kind, bool obstacle) -> TimingRow& {
        for (auto& r : rows)
            if (r.kind == kind && r.has_obstacle == obstacle) return r;
        rows.push_back({kind, obstacle, 0.0, 0.0,
                        std::numeric_limits<double>::infinity(), 0});
        return rows.back();
    };
    for (const auto& l : logs) {
        if (l.log == nullptr || l.log->records.empty()) continue;
        TimingRow& r = find_row(l.kind, l.has_obstacle);
        for (const auto& rec : l.log->records) {
            r.avg += rec.diag.solve_time;
            r.max = std::max(r.max, rec.diag.solve_time);
            r.min = std::min(r.min, rec.diag.solve_time);
            ++r.samples;
        }
    }
    for (auto& r : rows) r.avg /= std::max(1, r.samples);
    return rows;
}

void write_trajectory_csv(const std::string& path, const TrajectoryLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trajectory csv: " + path);
    out << "# lpvsim trajectory v1\n";
    out << "step,time,x,y,v_lon,v_lat,psi,omega,delta,a_lon,status,objective,"
           "eps_v,eps_nu,eps_psi,eps_delta,solve_time,qp_iterations,"
           "sqp_iterations,obstacle_active,sched_error,fallback,plan_hash,"
           "obstacle_margin,road_margin\n";
    for (const auto& r : log.records) {
        out << r.step << ',';
        csv_write(out, "%.6f", r.time);
        out << ',';
        const auto z = r.state.to_array();
        for (double v : z) {
            csv_write(out, "%.17g", v);
            out << ',';
        }
        csv_write(out, "%.17g", r.input.delta);
        out << ',';
        csv_write(out, "%.17g", r.input.a_lon);
        out << ',' << qp::to_string(r.diag.solver_status) << ',';
        csv_write(out, "%.17g", r.diag.objective);
        out << ',';
        for (double v : r.diag.slack_max) {
            csv_write(out, "%.17g", v);
            out << ',';
        }
        csv_write(out, "%.6e", r.diag.solve_time);
        out << ',' << r.diag.qp_iterations << ',' << r.diag.sqp_iterations << ','
            << (r.diag.obstacle_active ? 1 : 0) << ',';
        csv_write(out, "%.17g", r.diag.scheduling_error);
        out << ',' << (r.diag.fallback ? 1 : 0) << ',' << r.plan_hash << ',';
        csv_write(out, "%.17g", r.obstacle_margin);
        out << ',';
        csv_write(out, "%.17g", r.road_margin);
        out << '\n';
    }
}

void write_summary_csv(const std::string& path, const TrajectoryLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write summary csv: " + path);
    out << "# lpvsim summary v1\n";
    out << "steps,rms_xy,infeasible_steps,min_obstacle_margin,min_road_margin,"
           "solve_avg,solve_max,solve_min,aborted\n";
    const auto& s = log.summary;
    out << s.steps << ',';
    csv_write(out, "%.17g", s.rms_xy);
    out << ',' << s.infeasible_steps << ',';
    csv_write(out, "%.17g", s.min_obstacle_margin);
    out << ',';
    csv_write(out, "%.17g", s.min_road_margin);
    out << ',';
    csv_write(out, "%.6e", s.solve_avg);
    out << ',';
    csv_write(out, "%.6e", s.solve_max);
    out << ',';
    csv_write(out, "%.6e", s.solve_min);
    out << ',' << (s.aborted ? 1 : 0) << '\n';
}

void write_study_csv(const std::string& path, const StudyResult& study) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write study csv: " + path);
    out << "# lpvsim study v1\n";
    out << "scenario_id,seed,obstacle_angle,obstacle_radius,horizon,"
           "standard_feasible,trust_feasible,standard_infeasible_steps,"
           "trust_infeasible_steps\n";
    for (const auto& r : study.rows) {
        out << r.id << ',' << r.seed << ',';
        csv_write(out, "%.17g", r.obstacle_angle);
        out << ',';
        csv_write(out, "%.17g", r.obstacle_radius);
        out << ',' << r.horizon << ',' << (r.standard_feasible ? 1 : 0) << ','
            << (r.trust_feasible ? 1 : 0) << ',' << r.standard_infeasible_steps
            << ',' << r.trust_infeasible_steps << '\n';
    }
}

void write_plot_data_csv(const std::string& path, const Scenario& scn,
                         const TrajectoryLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write plot data csv: " + path);
    out << "# lpvsim plotdata v1\n";
    out << "series,x,y\n";
    auto emit = [&](const std::string& series, double x, double y) {
        out << series << ',';
        csv_write(out, "%.17g", x);
        out << ',';
        csv_write(out, "%.17g", y);
        out << '\n';
    };
    for (const auto& r : log.records) emit("path", r.state.x, r.state.y);
    const auto wps = scn.waypoints();
    for (std::size_t i = 0; i < static_cast<std::size_t>(log.summary.steps); ++i)
        emit("reference", wps[i].x, wps[i].y);
    const int samples = 256;
    for (int ring = 0; ring < 2; ++ring) {
        const double rr = scn.road.radius + (ring == 0 ? scn.road.r1 : scn.road.r2);
        const std::string series = ring == 0 ? "road_inner" : "road_outer";
        for (int i = 0; i <= samples; ++i) {
            const double th = 2.0 * std::numbers::pi * i / samples;
            emit(series, scn.road.center_x + rr * std::cos(th),
                 scn.road.center_y + rr * std::sin(th));
        }
    }
    for (std::size_t o = 0; o < scn.obstacles.size(); ++o) {
        const auto& obs = scn.obstacles[o];
        const std::string series = "obstacle_" + std::to_string(o);
        for (int i = 0; i <= samples; ++i) {
            const double th = 2.0 * std::numbers::pi * i / samples;
            emit(series, obs.cx + obs.rx * std::cos(th),
                 obs.cy + obs.ry * std::sin(th));
        }
    }
}

void write_timing_csv(const std::string& path,
                      const std::vector<TimingRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write timing csv: " + path);
    out << "# lpvsim timing v1\n";
    out << "controller,scenario_class,avg,max,min,samples\n";
    for (const auto& r : rows) {
        out << to_string(r.kind) << ','
            << (r.has_obstacle ? "obstacle" : "tracking") << ',';
        csv_write(out, "%.4f", r.avg);
        out << ',';
        csv_write(out, "%.4f", r.max);
        out << ',';
        csv_write(out, "%.4f", r.min);
        out << ',' << r.samples << '\n';
    }
}

}  // namespace lpvmpc::sim
