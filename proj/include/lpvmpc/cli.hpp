#pragma once

#include <optional>
#include <string>

#include "lpvmpc/config.hpp"

// Command-line front end: run | study | compare | dump-defaults.
// Exit codes: 0 success, 1 error, 2 infeasibility (run: infeasible steps;
// study: feasibility properties not met).

namespace lpvmpc::cli {

struct Options {
    std::string config_path;        // empty = built-in defaults
    std::string out_dir = "out";
    std::optional<std::string> controller;
    std::optional<std::uint64_t> seed;
    std::optional<int> horizon;
    std::optional<std::string> trust;  // "on" | "off"
};

cfg::AppConfig effective_config(const Options& opt);

int cmd_run(const Options& opt);
int cmd_study(const Options& opt);
int cmd_compare(const Options& opt);
int cmd_dump_defaults();

int run_cli(int argc, char** argv);

}  // namespace lpvmpc::cli
