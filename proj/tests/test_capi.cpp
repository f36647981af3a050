#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "sregame/sregame.h"

namespace fs = std::filesystem;

namespace {

std::string scenario(const char* name) {
  return std::string(SREGAME_SCENARIO_DIR) + "/" + name + ".yaml";
}

sg_scenario* load(const char* name) {
  sg_scenario* s = nullptr;
  REQUIRE(sg_scenario_load(scenario(name).c_str(), &s) == SG_OK);
  REQUIRE(s != nullptr);
  return s;
}

}  // namespace

TEST_CASE("load, dump and parse") {
  sg_scenario* s = load("basic");
  char* yaml = nullptr;
  REQUIRE(sg_scenario_dump(s, &yaml) == SG_OK);
  sg_scenario* t = nullptr;
  CHECK(sg_scenario_parse(yaml, &t) == SG_OK);
  char* again = nullptr;
  REQUIRE(sg_scenario_dump(t, &again) == SG_OK);
  CHECK(std::strcmp(yaml, again) == 0);
  sg_string_free(yaml);
  sg_string_free(again);
  sg_scenario_free(t);
  sg_scenario_free(s);
}

TEST_CASE("errors carry codes and messages") {
  sg_scenario* s = nullptr;
  CHECK(sg_scenario_load("/nonexistent.yaml", &s) == SG_CONFIG_ERROR);
  CHECK(s == nullptr);
  CHECK(std::strlen(sg_last_error()) > 0);
  CHECK(sg_scenario_parse("scenario: [", &s) == SG_CONFIG_ERROR);
  CHECK(sg_scenario_load(nullptr, &s) == SG_INVALID_ARGUMENT);
  CHECK(sg_scenario_parse("x: 1", nullptr) == SG_INVALID_ARGUMENT);
  CHECK(std::string(sg_error_name(SG_SADDLE_VIOLATION)) == "SaddleViolation");
  CHECK(std::string(sg_error_name(999)) == "Unknown");
  sg_scenario_free(nullptr);
  sg_solution_free(nullptr);
  sg_string_free(nullptr);
}

TEST_CASE("setters validate their arguments") {
  sg_scenario* s = load("basic");
  CHECK(sg_scenario_set_seed(s, 42) == SG_OK);
  CHECK(sg_scenario_set_paths(s, 0) == SG_INVALID_ARGUMENT);
  CHECK(sg_scenario_set_paths(s, 100) == SG_OK);
  CHECK(sg_scenario_set_steps(s, 0) == SG_INVALID_ARGUMENT);
  CHECK(sg_scenario_set_steps(s, 50) == SG_OK);
  CHECK(sg_scenario_set_workers(s, -1) == SG_INVALID_ARGUMENT);
  CHECK(sg_scenario_set_workers(s, 2) == SG_OK);
  CHECK(sg_scenario_set_output(s, "somewhere") == SG_OK);
  CHECK(std::string(sg_scenario_output(s)) == "somewhere");
  CHECK(sg_scenario_set_seed(nullptr, 1) == SG_INVALID_ARGUMENT);
  sg_scenario_free(s);
}

TEST_CASE("commands") {
  REQUIRE(sg_command_count() == 7);
  CHECK(std::string(sg_command_name(0)) == "validate");
  CHECK(sg_command_name(7) == nullptr);
  CHECK(sg_command_name(-1) == nullptr);

  sg_scenario* s = load("violating");
  char* report = nullptr;
  CHECK(sg_command(s, "validate", nullptr, &report) == SG_ASSUMPTION_VIOLATED);
  REQUIRE(report != nullptr);
  CHECK(std::string(report).find("R11 at node 0, regime 1") != std::string::npos);
  sg_string_free(report);
  sg_scenario_free(s);

  s = load("basic");
  const fs::path out = fs::temp_directory_path() / "sregame_capi";
  fs::remove_all(out);
  CHECK(sg_command(s, "solve-sre", out.string().c_str(), nullptr) == SG_OK);
  CHECK(fs::exists(out / "sre.tsv"));
  CHECK(sg_command(s, "bogus", out.string().c_str(), nullptr) == SG_INVALID_ARGUMENT);
  CHECK(sg_command(s, nullptr, nullptr, nullptr) == SG_INVALID_ARGUMENT);
  fs::remove_all(out);
  sg_scenario_free(s);
}

TEST_CASE("solution accessors") {
  sg_scenario* s = load("basic");
  sg_solution* sol = nullptr;
  REQUIRE(sg_solve(s, &sol) == SG_OK);
  CHECK(sg_solution_nodes(sol) == 101);
  CHECK(sg_solution_regimes(sol) == 2);
  CHECK(sg_solution_constrained(sol) == 0);
  CHECK(sg_solution_time(sol, 100) == doctest::Approx(1.0));
  double p = 0.0;
  CHECK(sg_solution_P(sol, 0, 100, 1, &p) == SG_OK);
  CHECK(p == 0.2);
  CHECK(sg_solution_P(sol, 0, 0, 0, &p) == SG_OK);
  CHECK(std::isfinite(p));
  CHECK(sg_solution_P(sol, 1, 0, 0, &p) == SG_INVALID_ARGUMENT);
  CHECK(sg_solution_P(sol, 0, 101, 0, &p) == SG_INVALID_ARGUMENT);
  CHECK(sg_solution_P(sol, 0, 0, 2, &p) == SG_INVALID_ARGUMENT);
  double phi = 1.0;
  CHECK(sg_solution_phi(sol, 100, 0, &phi) == SG_OK);
  CHECK(phi == 0.0);
  double v = 0.0;
  CHECK(sg_solution_value(sol, &v) == SG_OK);
  CHECK(std::isfinite(v));
  sg_solution_free(sol);
  sg_scenario_free(s);

  s = load("orthant");
  REQUIRE(sg_solve(s, &sol) == SG_OK);
  CHECK(sg_solution_constrained(sol) == 1);
  double p1 = 0.0, p2 = 0.0;
  CHECK(sg_solution_P(sol, 0, 0, 0, &p1) == SG_OK);
  CHECK(sg_solution_P(sol, 1, 0, 0, &p2) == SG_OK);
  CHECK(p1 > 0.0);
  CHECK(p2 > 0.0);
  sg_solution_free(sol);
  sg_scenario_free(s);

  s = load("portfolio_none");
  CHECK(sg_solve(s, &sol) == SG_CONFIG_ERROR);
  CHECK(sol == nullptr);
  sg_scenario_free(s);
}
