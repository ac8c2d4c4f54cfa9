#include "lpvmpc/cli.hpp"

int main(int argc, char** argv) { return lpvmpc::cli::run_cli(argc, argv); }
