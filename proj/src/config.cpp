#include "lpvmpc/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace lpvmpc::cfg {

namespace {

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

struct ParsedFile {
    std::string name;
    std::map<std::string, Entry> entries;  // "section.key" -> entry

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const auto it = entries.find(key);
        const int line = it != entries.end() ? it->second.line : 0;
        throw ConfigError(name + ":" + std::to_string(line) + ": key '" + key +
                          "' " + what);
    }

    std::optional<std::string> raw(const std::string& key) {
        auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    double number(const std::string& key, double fallback) {
        const auto v = raw(key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const double out = std::stod(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("trailing");
            return out;
        } catch (const std::exception&) {
            fail(key, "is not a number: '" + *v + "'");
        }
    }

    int integer(const std::string& key, int fallback) {
        const double d = number(key, fallback);
        const int i = static_cast<int>(d);
        if (static_cast<double>(i) != d) fail(key, "is not an integer");
        return i;
    }

    std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
        const auto v = raw(key);
        if (!v) return fallback;
        try {
            return std::stoull(*v);
        } catch (const std::exception&) {
            fail(key, "is not an unsigned integer: '" + *v + "'");
        }
    }

    bool boolean(const std::string& key, bool fallback) {
        const auto v = raw(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "on" || *v == "1") return true;
        if (*v == "false" || *v == "off" || *v == "0") return false;
        fail(key, "is not a boolean (true/false/on/off): '" + *v + "'");
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const auto v = raw(key);
        return v ? *v : fallback;
    }

    std::vector<double> number_list(const std::string& key,
                                    const std::vector<double>& fallback) {
        const auto v = raw(key);
        if (!v) return fallback;
        std::vector<double> out;
        std::istringstream ss(*v);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                out.push_back(std::stod(tok));
            } catch (const std::exception&) {
                fail(key, "has a malformed list element: '" + tok + "'");
            }
        }
        if (out.empty()) fail(key, "is an empty list");
        return out;
    }

    void reject_unused() const {
        for (const auto& [key, e] : entries)
            if (!e.used)
                throw ConfigError(name + ":" + std::to_string(e.line) +
                                  ": unknown key '" + key + "'");
    }
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

ParsedFile tokenize(const std::string& text, const std::string& name) {
    ParsedFile out;
    out.name = name;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(name + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(name + ":" + std::to_string(lineno) +
                                  ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
        const std::string path = section.empty() ? key : section + "." + key;
        if (out.entries.count(path))
            throw ConfigError(name + ":" + std::to_string(lineno) +
                              ": duplicate key '" + path + "'");
        out.entries[path] = {value, lineno, false};
    }
    return out;
}

linalg::Matrix diag_matrix(const std::vector<double>& d) {
    linalg::Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

void validate(const AppConfig& c, const std::string& name) {
    auto bad = [&](const std::string& key, const std::string& what) {
        throw ConfigError(name + ": key '" + key + "' " + what);
    };
    c.vehicle.validate();
    if (!(c.track.radius > 0)) bad("track.radius", "must be positive");
    if (!(c.track.r1 < c.track.r2)) bad("track.r1", "must be below track.r2");
    for (std::size_t i = 0; i < c.obstacles.size(); ++i) {
        const auto& o = c.obstacles[i];
        const std::string sec = "obstacle." + std::to_string(i);
        if (!(o.rx > 0)) bad(sec + ".rx", "must be positive");
        if (!(o.ry > 0)) bad(sec + ".ry", "must be positive");
        const double rho =
            std::hypot(o.cx - c.track.center_x, o.cy - c.track.center_y);
        if (rho < c.track.radius + c.track.r1 || rho > c.track.radius + c.track.r2)
            bad(sec + ".cx", "places the obstacle center outside the road annulus");
    }
    if (c.horizon < 1) bad("controller.horizon", "must be >= 1");
    if (c.preset != "scenario1" && c.preset != "scenario2" && c.preset != "none")
        bad("controller.preset", "must be scenario1, scenario2, or none");
    auto check_diag = [&](const std::optional<std::vector<double>>& d,
                          std::size_t len, const std::string& key) {
        if (d && d->size() != len)
            bad(key, "must have " + std::to_string(len) + " entries");
        if (d)
            for (double v : *d)
                if (v < 0) bad(key, "entries must be nonnegative");
    };
    check_diag(c.q_diag, 6, "controller.q");
    check_diag(c.r_diag, 2, "controller.r");
    check_diag(c.p_diag, 6, "controller.p");
    if (c.r_diag)
        for (double v : *c.r_diag)
            if (!(v > 0)) bad("controller.r", "entries must be positive");
    for (double v : c.trust.e_z_max)
        if (v < 0) bad("trust.e_z_max", "entries must be nonnegative");
    if (c.trust.e_u_max < 0) bad("trust.e_u_max", "must be nonnegative");
    if (c.trust_e_p < 0) bad("trust.e_p", "must be nonnegative");
    if (!(c.solver.tolerance > 0)) bad("solver.tolerance", "must be positive");
    if (c.solver.max_iterations < 1) bad("solver.max_iterations", "must be >= 1");
    if (c.sqp.max_outer < 1) bad("sqp.max_outer_iterations", "must be >= 1");
    if (!(c.sqp.step_tolerance > 0)) bad("sqp.step_tolerance", "must be positive");
    if (c.sim.duration < 1) bad("sim.duration", "must be >= 1");
    if (!(c.sim.speed > 0)) bad("sim.speed", "must be positive");
    if (c.study.count < 1) bad("study.count", "must be >= 1");
    if (!(c.study.radius_min > 0)) bad("study.radius_min", "must be positive");
    if (!(c.study.radius_max >= c.study.radius_min))
        bad("study.radius_max", "must be >= study.radius_min");
    if (c.study.horizons.empty()) bad("study.horizons", "must not be empty");
}

}  // namespace

AppConfig default_config() { return AppConfig{}; }

AppConfig parse_config(const std::string& text, const std::string& name) {
    ParsedFile f = tokenize(text, name);
    AppConfig c;

    c.vehicle.c_alpha_f = f.number("vehicle.c_alpha_f", c.vehicle.c_alpha_f);
    c.vehicle.c_alpha_r = f.number("vehicle.c_alpha_r", c.vehicle.c_alpha_r);
    c.vehicle.l_f = f.number("vehicle.l_f", c.vehicle.l_f);
    c.vehicle.l_r = f.number("vehicle.l_r", c.vehicle.l_r);
    c.vehicle.i_z = f.number("vehicle.i_z", c.vehicle.i_z);
    c.vehicle.m = f.number("vehicle.m", c.vehicle.m);
    c.vehicle.t_s = f.number("vehicle.t_s", c.vehicle.t_s);

    c.track.center_x = f.number("track.center_x", c.track.center_x);
    c.track.center_y = f.number("track.center_y", c.track.center_y);
    c.track.radius = f.number("track.radius", c.track.radius);
    c.track.r1 = f.number("track.r1", c.track.r1);
    c.track.r2 = f.number("track.r2", c.track.r2);

    for (int i = 0;; ++i) {
        const std::string sec = "obstacle." + std::to_string(i);
        if (!f.entries.count(sec + ".cx") && !f.entries.count(sec + ".cy") &&
            !f.entries.count(sec + ".rx") && !f.entries.count(sec + ".ry") &&
            !f.entries.count(sec + ".side"))
            break;
        EllipseObstacle o;
        o.cx = f.number(sec + ".cx", 0.0);
        o.cy = f.number(sec + ".cy", 0.0);
        o.rx = f.number(sec + ".rx", 1.0);
        o.ry = f.number(sec + ".ry", 1.0);
        const std::string side = f.text(sec + ".side", "right");
        if (side == "left")
            o.side = EllipseObstacle::Side::left;
        else if (side == "right")
            o.side = EllipseObstacle::Side::right;
        else
            f.fail(sec + ".side", "must be left or right");
        c.obstacles.push_back(o);
    }

    const std::string kind = f.text("controller.kind", to_string(c.kind));
    if (const auto k = controller_kind_from(kind))
        c.kind = *k;
    else
        f.fail("controller.kind", "must be lpv_trust, lpv_standard, or nmpc_sqp");
    c.preset = f.text("controller.preset", c.preset);
    c.horizon = f.integer("controller.horizon", c.horizon);
    if (f.entries.count("controller.q")) c.q_diag = f.number_list("controller.q", {});
    if (f.entries.count("controller.r")) c.r_diag = f.number_list("controller.r", {});
    if (f.entries.count("controller.p")) c.p_diag = f.number_list("controller.p", {});

    c.trust.enabled = f.boolean("trust.enabled", c.trust.enabled);
    {
        const std::vector<double> ez = f.number_list(
            "trust.e_z_max",
            {c.trust.e_z_max[0], c.trust.e_z_max[1], c.trust.e_z_max[2]});
        if (ez.size() != 3) f.fail("trust.e_z_max", "must have 3 entries");
        for (int i = 0; i < 3; ++i) c.trust.e_z_max[static_cast<std::size_t>(i)] = ez[static_cast<std::size_t>(i)];
    }
    c.trust.e_u_max = f.number("trust.e_u_max", c.trust.e_u_max);
    c.trust_e_p = f.number("trust.e_p", c.trust_e_p);

    c.solver.tolerance = f.number("solver.tolerance", c.solver.tolerance);
    c.solver.max_iterations =
        f.integer("solver.max_iterations", c.solver.max_iterations);
    c.solver.infeas_threshold =
        f.number("solver.infeas_threshold", c.solver.infeas_threshold);
    c.solver.infeas_persistence =
        f.integer("solver.infeas_persistence", c.solver.infeas_persistence);

    c.sqp.max_outer = f.integer("sqp.max_outer_iterations", c.sqp.max_outer);
    c.sqp.step_tolerance = f.number("sqp.step_tolerance", c.sqp.step_tolerance);
    c.sqp.merit_penalty = f.number("sqp.merit_penalty", c.sqp.merit_penalty);

    c.sim.duration = f.integer("sim.duration", c.sim.duration);
    c.sim.speed = f.number("sim.speed", c.sim.speed);
    c.sim.start_angle = f.number("sim.start_angle", c.sim.start_angle);
    c.sim.perturbation = f.number("sim.perturbation", c.sim.perturbation);
    c.sim.seed = f.unsigned64("sim.seed", c.sim.seed);

    c.study.count = f.integer("study.count", c.study.count);
    c.study.seed = f.unsigned64("study.seed", c.study.seed);
    c.study.radius_min = f.number("study.radius_min", c.study.radius_min);
    c.study.radius_max = f.number("study.radius_max", c.study.radius_max);
    {
        std::vector<double> hs;
        for (int h : c.study.horizons) hs.push_back(h);
        hs = f.number_list("study.horizons", hs);
        c.study.horizons.clear();
        for (double h : hs) {
            if (h != std::floor(h) || h < 1)
                f.fail("study.horizons", "entries must be positive integers");
            c.study.horizons.push_back(static_cast<int>(h));
        }
    }

    f.reject_unused();
    validate(c, name);
    return c;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string dump_config(const AppConfig& c) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "# lpvsim configuration (all keys at their effective values)\n";
    out << "[vehicle]\n";
    out << "c_alpha_f = " << num(c.vehicle.c_alpha_f) << "\n";
    out << "c_alpha_r = " << num(c.vehicle.c_alpha_r) << "\n";
    out << "l_f = " << num(c.vehicle.l_f) << "\n";
    out << "l_r = " << num(c.vehicle.l_r) << "\n";
    out << "i_z = " << num(c.vehicle.i_z) << "\n";
    out << "m = " << num(c.vehicle.m) << "\n";
    out << "t_s = " << num(c.vehicle.t_s) << "\n";
    out << "\n[track]\n";
    out << "center_x = " << num(c.track.center_x) << "\n";
    out << "center_y = " << num(c.track.center_y) << "\n";
    out << "radius = " << num(c.track.radius) << "\n";
    out << "r1 = " << num(c.track.r1) << "\n";
    out << "r2 = " << num(c.track.r2) << "\n";
    for (std::size_t i = 0; i < c.obstacles.size(); ++i) {
        const auto& o = c.obstacles[i];
        out << "\n[obstacle." << i << "]\n";
        out << "cx = " << num(o.cx) << "\n";
        out << "cy = " << num(o.cy) << "\n";
        out << "rx = " << num(o.rx) << "\n";
        out << "ry = " << num(o.ry) << "\n";
        out << "side = " << (o.side == EllipseObstacle::Side::left ? "left" : "right")
            << "\n";
    }
    out << "\n[controller]\n";
    out << "kind = " << to_string(c.kind) << "\n";
    out << "preset = " << c.preset << "\n";
    out << "horizon = " << c.horizon << "\n";
    auto list = [&](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? "," : "") + num(v[i]);
        return s;
    };
    if (c.q_diag) out << "q = " << list(*c.q_diag) << "\n";
    if (c.r_diag) out << "r = " << list(*c.r_diag) << "\n";
    if (c.p_diag) out << "p = " << list(*c.p_diag) << "\n";
    out << "\n[trust]\n";
    out << "enabled = " << (c.trust.enabled ? "true" : "false") << "\n";
    out << "e_z_max = " << num(c.trust.e_z_max[0]) << "," << num(c.trust.e_z_max[1])
        << "," << num(c.trust.e_z_max[2]) << "\n";
    out << "e_u_max = " << num(c.trust.e_u_max) << "\n";
    out << "e_p = " << num(c.trust_e_p) << "\n";
    out << "\n[solver]\n";
    out << "tolerance = " << num(c.solver.tolerance) << "\n";
    out << "max_iterations = " << c.solver.max_iterations << "\n";
    out << "infeas_threshold = " << num(c.solver.infeas_threshold) << "\n";
    out << "infeas_persistence = " << c.solver.infeas_persistence << "\n";
    out << "\n[sqp]\n";
    out << "max_outer_iterations = " << c.sqp.max_outer << "\n";
    out << "step_tolerance = " << num(c.sqp.step_tolerance) << "\n";
    out << "merit_penalty = " << num(c.sqp.merit_penalty) << "\n";
    out << "\n[sim]\n";
    out << "duration = " << c.sim.duration << "\n";
    out << "speed = " << num(c.sim.speed) << "\n";
    out << "start_angle = " << num(c.sim.start_angle) << "\n";
    out << "perturbation = " << num(c.sim.perturbation) << "\n";
    out << "seed = " << c.sim.seed << "\n";
    out << "\n[study]\n";
    out << "count = " << c.study.count << "\n";
    out << "seed = " << c.study.seed << "\n";
    out << "radius_min = " << num(c.study.radius_min) << "\n";
    out << "radius_max = " << num(c.study.radius_max) << "\n";
    out << "horizons = ";
    for (std::size_t i = 0; i < c.study.horizons.size(); ++i)
        out << (i ? "," : "") << c.study.horizons[i];
    out << "\n";
    return out.str();
}

ControllerConfig controller_config(const AppConfig& c, ControllerKind kind) {
    ControllerConfig cc;
    cc.kind = kind;
    cc.horizon = c.horizon;
    cc.vehicle = c.vehicle;
    cc.bounds = MpcBounds::defaults(c.vehicle.t_s);
    cc.solver = c.solver;
    cc.sqp = c.sqp;
    cc.trust = c.trust;
    cc.trust.e_p = linalg::Matrix::identity(4);
    for (int i = 0; i < 4; ++i) cc.trust.e_p(i, i) = c.trust_e_p;
    if (kind == ControllerKind::lpv_standard) cc.trust.enabled = false;

    const bool nmpc = kind == ControllerKind::nmpc_sqp;
    std::vector<double> q, r;
    if (c.preset == "scenario2") {
        q = nmpc ? std::vector<double>{10, 10, 1000, 1, 1, 1}
                 : std::vector<double>{10, 10, 300, 1, 1, 1};
        r = {0.001, 0.001};
    } else {
        q = nmpc ? std::vector<double>{10, 10, 5, 1, 1, 1}
                 : std::vector<double>{10, 10, 1, 1, 10, 1};
        r = {0.1, 0.1};
    }
    if (c.q_diag) q = *c.q_diag;
    if (c.r_diag) r = *c.r_diag;
    cc.q = diag_matrix(q);
    cc.r = diag_matrix(r);
    if (c.p_diag) cc.p = diag_matrix(*c.p_diag);
    return cc;
}

sim::Scenario make_scenario(const AppConfig& c, ControllerKind kind) {
    sim::Scenario s;
    s.road.center_x = c.track.center_x;
    s.road.center_y = c.track.center_y;
    s.road.radius = c.track.radius;
    s.road.r1 = c.track.r1;
    s.road.r2 = c.track.r2;
    s.obstacles = c.obstacles;
    s.controller = controller_config(c, kind);
    s.speed = c.sim.speed;
    s.start_angle = c.sim.start_angle;
    s.duration = c.sim.duration;
    s.perturbation = c.sim.perturbation;
    s.seed = c.sim.seed;
    return s;
}

}  // namespace lpvmpc::cfg
