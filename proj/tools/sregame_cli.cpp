// Command-line front end. Talks to the library through the C API only.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sregame/sregame.h"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> paths;
  std::optional<int> grid;
  std::optional<int> workers;
  std::optional<std::string> out;
};

int fail_with(int code) {
  std::cerr << "error: " << sg_last_error() << "\n";
  return code;
}

int run(const std::string& command, const Overrides& o) {
  sg_scenario* s = nullptr;
  int rc = sg_scenario_load(o.config.c_str(), &s);
  if (rc != SG_OK) return fail_with(rc);
  if (o.seed) rc = sg_scenario_set_seed(s, *o.seed);
  if (rc == SG_OK && o.paths) rc = sg_scenario_set_paths(s, *o.paths);
  if (rc == SG_OK && o.grid) rc = sg_scenario_set_steps(s, *o.grid);
  if (rc == SG_OK && o.workers) rc = sg_scenario_set_workers(s, *o.workers);
  if (rc == SG_OK && o.out) rc = sg_scenario_set_output(s, o.out->c_str());
  if (rc != SG_OK) {
    sg_scenario_free(s);
    return fail_with(rc);
  }
  char* report = nullptr;
  rc = sg_command(s, command.c_str(), nullptr, &report);
  if (report) {
    std::cout << report;
    sg_string_free(report);
  }
  sg_scenario_free(s);
  if (rc != SG_OK) return fail_with(rc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching zero-sum LQ games: Riccati solvers, feedback laws, Monte Carlo checks"};
  app.require_subcommand(1);

  Overrides o;
  const char* help[] = {
      "check the standing assumptions and print the constants",
      "solve the Riccati equation(s) and write the tables",
      "solve the game and write the feedback laws and the value",
      "simulate the closed loop under the optimal feedback",
      "run the consistency, equivalence and Monte Carlo saddle checks",
      "solve, simulate and check the portfolio application",
      "print and write the comparison envelope",
  };
  const int n = sg_command_count();
  for (int i = 0; i < n; ++i) {
    CLI::App* sub = app.add_subcommand(sg_command_name(i), help[i]);
    sub->add_option("--config", o.config, "scenario YAML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--paths", o.paths, "Monte Carlo path count")->check(CLI::PositiveNumber);
    sub->add_option("--grid", o.grid, "time steps")->check(CLI::PositiveNumber);
    sub->add_option("--workers", o.workers, "worker threads (0 uses all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", o.out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : SG_INVALID_ARGUMENT;
  }
  for (int i = 0; i < n; ++i)
    if (app.got_subcommand(sg_command_name(i))) return run(sg_command_name(i), o);
  return SG_INVALID_ARGUMENT;
}
