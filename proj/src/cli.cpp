#include "lpvmpc/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace lpvmpc::cli {

namespace fs = std::filesystem;

cfg::AppConfig effective_config(const Options& opt) {
    cfg::AppConfig c = opt.config_path.empty() ? cfg::default_config()
                                               : cfg::load_config(opt.config_path);
    if (opt.controller) {
        const auto kind = controller_kind_from(*opt.controller);
        if (!kind)
            throw ConfigError("--controller must be lpv_trust, lpv_standard, or nmpc_sqp");
        c.kind = *kind;
    }
    if (opt.seed) {
        c.sim.seed = *opt.seed;
        c.study.seed = *opt.seed;
    }
    if (opt.horizon) {
        if (*opt.horizon < 1) throw ConfigError("--horizon must be >= 1");
        c.horizon = *opt.horizon;
    }
    if (opt.trust) {
        if (*opt.trust != "on" && *opt.trust != "off")
            throw ConfigError("--trust must be 'on' or 'off'");
        c.trust.enabled = *opt.trust == "on";
        if (c.kind != ControllerKind::nmpc_sqp)
            c.kind = c.trust.enabled ? ControllerKind::lpv_trust
                                     : ControllerKind::lpv_standard;
    }
    return c;
}

namespace {

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

}  // namespace

int cmd_run(const Options& opt) {
    const cfg::AppConfig c = effective_config(opt);
    const sim::Scenario scn = cfg::make_scenario(c, c.kind);
    const sim::TrajectoryLog log = sim::run_closed_loop(scn);

    ensure_out_dir(opt.out_dir);
    sim::write_trajectory_csv((fs::path(opt.out_dir) / "trajectory.csv").string(), log);
    sim::write_summary_csv((fs::path(opt.out_dir) / "summary.csv").string(), log);
    sim::write_plot_data_csv((fs::path(opt.out_dir) / "plotdata.csv").string(), scn, log);

    std::printf("controller=%s steps=%d rms_xy=%.4f infeasible=%d solve_avg=%.4fs\n",
                to_string(c.kind), log.summary.steps, log.summary.rms_xy,
                log.summary.infeasible_steps, log.summary.solve_avg);
    if (log.summary.aborted) {
        std::fprintf(stderr, "run aborted: plant left the model domain\n");
        return 2;
    }
    if (log.summary.infeasible_steps > 0) {
        std::fprintf(stderr, "infeasible steps: %d\n", log.summary.infeasible_steps);
        return 2;
    }
    return 0;
}

int cmd_study(const Options& opt) {
    const cfg::AppConfig c = effective_config(opt);
    if (c.study.radius_min < 0.7 || c.study.radius_max > 1.4)
        std::fprintf(stderr,
                     "warning: study radii [%g, %g] leave the reference range "
                     "[0.7, 1.4]\n",
                     c.study.radius_min, c.study.radius_max);

    sim::Scenario base = cfg::make_scenario(c, ControllerKind::lpv_trust);
    const auto scenarios = sim::make_study_scenarios(c.study, base);
    const sim::StudyResult result = sim::feasibility_study(scenarios);

    ensure_out_dir(opt.out_dir);
    sim::write_study_csv((fs::path(opt.out_dir) / "study.csv").string(), result);

    std::printf("scenario  radius  horizon  standard  trust\n");
    for (const auto& r : result.rows)
        std::printf("%8d  %6.3f  %7d  %8s  %5s\n", r.id, r.obstacle_radius,
                    r.horizon, r.standard_feasible ? "ok" : "fail",
                    r.trust_feasible ? "ok" : "fail");
    const bool pass = result.superset() && result.trust_all_feasible();
    std::printf("superset=%s trust_all_feasible=%s\n",
                result.superset() ? "yes" : "no",
                result.trust_all_feasible() ? "yes" : "no");
    return pass ? 0 : 2;
}

int cmd_compare(const Options& opt) {
    const cfg::AppConfig c = effective_config(opt);
    const sim::Scenario lpv_scn = cfg::make_scenario(c, ControllerKind::lpv_trust);
    const sim::Scenario nmpc_scn = cfg::make_scenario(c, ControllerKind::nmpc_sqp);

    const sim::TrajectoryLog lpv_log = sim::run_closed_loop(lpv_scn);
    const sim::TrajectoryLog nmpc_log = sim::run_closed_loop(nmpc_scn);

    const bool has_obs = !c.obstacles.empty();
    const auto rows = sim::timing_report({{ControllerKind::lpv_trust, has_obs, &lpv_log},
                                          {ControllerKind::nmpc_sqp, has_obs, &nmpc_log}});

    ensure_out_dir(opt.out_dir);
    sim::write_timing_csv((fs::path(opt.out_dir) / "compare.csv").string(), rows);

    // aligned input traces for plotting
    {
        std::ofstream out(fs::path(opt.out_dir) / "inputs.csv");
        if (!out) throw IoError("cannot write inputs.csv");
        out << "# lpvsim inputs v1\n";
        out << "step,time,delta_lpv,a_lpv,delta_nmpc,a_nmpc\n";
        const std::size_t n = std::min(lpv_log.records.size(), nmpc_log.records.size());
        char buf[160];
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, "%d,%.6f,%.10g,%.10g,%.10g,%.10g\n",
                          lpv_log.records[i].step, lpv_log.records[i].time,
                          lpv_log.records[i].input.delta,
                          lpv_log.records[i].input.a_lon,
                          nmpc_log.records[i].input.delta,
                          nmpc_log.records[i].input.a_lon);
            out << buf;
        }
    }
    {
        std::ofstream out(fs::path(opt.out_dir) / "tracking.csv");
        if (!out) throw IoError("cannot write tracking.csv");
        out << "# lpvsim tracking v1\n";
        out << "controller,rms_xy,infeasible_steps\n";
        char buf[120];
        std::snprintf(buf, sizeof buf, "lpv_trust,%.6f,%d\n", lpv_log.summary.rms_xy,
                      lpv_log.summary.infeasible_steps);
        out << buf;
        std::snprintf(buf, sizeof buf, "nmpc_sqp,%.6f,%d\n", nmpc_log.summary.rms_xy,
                      nmpc_log.summary.infeasible_steps);
        out << buf;
    }

    for (const auto& r : rows)
        std::printf("%-12s avg=%.4fs max=%.4fs min=%.4fs\n", to_string(r.kind),
                    r.avg, r.max, r.min);
    std::printf("rms_xy lpv=%.4f nmpc=%.4f\n", lpv_log.summary.rms_xy,
                nmpc_log.summary.rms_xy);
    return 0;
}

int cmd_dump_defaults() {
    std::fputs(cfg::dump_config(cfg::default_config()).c_str(), stdout);
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"trust-region LPV MPC vehicle simulator"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub, bool with_overrides) {
        sub->add_option("--config", opt.config_path, "configuration file");
        sub->add_option("--out-dir", opt.out_dir, "output directory");
        if (with_overrides) {
            opt.controller.reset();
            sub->add_option_function<std::string>(
                "--controller", [&](const std::string& v) { opt.controller = v; },
                "controller kind (lpv_trust | lpv_standard | nmpc_sqp)");
            sub->add_option_function<std::uint64_t>(
                "--seed", [&](std::uint64_t v) { opt.seed = v; }, "override seed");
            sub->add_option_function<int>(
                "--horizon", [&](int v) { opt.horizon = v; }, "override horizon");
            sub->add_option_function<std::string>(
                "--trust", [&](const std::string& v) { opt.trust = v; },
                "trust region on|off");
        }
    };

    auto* run = app.add_subcommand("run", "run one closed-loop scenario");
    add_common(run, true);
    auto* study = app.add_subcommand("study", "run the feasibility study");
    add_common(study, true);
    auto* compare =
        app.add_subcommand("compare", "compare lpv_trust against nmpc_sqp");
    add_common(compare, true);
    app.add_subcommand("dump-defaults", "print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand("run")) return cmd_run(opt);
        if (app.got_subcommand("study")) return cmd_study(opt);
        if (app.got_subcommand("compare")) return cmd_compare(opt);
        if (app.got_subcommand("dump-defaults")) return cmd_dump_defaults();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}

}  // namespace lpvmpc::cli
