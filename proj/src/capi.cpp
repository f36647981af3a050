#include "sregame/sregame.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "sregame/commands.hpp"
#include "sregame/config.hpp"
#include "sregame/game_engine.hpp"
#include "sregame/sre_solver.hpp"

using namespace sregame;

struct sg_scenario {
  ScenarioConfig cfg;
};

struct sg_solution {
  bool constrained = false;
  SRESolution P, P2;
  PhiSolution phi;
  double V = 0.0;
};

namespace {

thread_local std::string g_last_error;

int record(ErrorCode code, const std::string& msg) {
  g_last_error = msg;
  return static_cast<int>(code);
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return record(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return record(ErrorCode::Internal, "out of memory");
  } catch (const std::exception& e) {
    return record(ErrorCode::Internal, e.what());
  } catch (...) {
    return record(ErrorCode::Internal, "unknown exception");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

int null_arg(const char* what) {
  return record(ErrorCode::InvalidArgument, std::string("InvalidArgument: null ") + what);
}

int check_index(const sg_solution* sol, int node, int regime) {
  if (node < 0 || node >= sol->P.grid.nodes() || regime < 0 || regime >= sol->P.regimes)
    return record(ErrorCode::InvalidArgument, "InvalidArgument: node or regime out of range");
  return 0;
}

}  // namespace

extern "C" {

int sg_scenario_load(const char* path, sg_scenario** out) {
  if (!path || !out) return null_arg("argument");
  *out = nullptr;
  return guarded([&] {
    *out = new sg_scenario{load_config(path)};
    return 0;
  });
}

int sg_scenario_parse(const char* yaml_text, sg_scenario** out) {
  if (!yaml_text || !out) return null_arg("argument");
  *out = nullptr;
  return guarded([&] {
    *out = new sg_scenario{parse_config(yaml_text)};
    return 0;
  });
}

void sg_scenario_free(sg_scenario* s) { delete s; }

int sg_scenario_set_seed(sg_scenario* s, uint64_t seed) {
  if (!s) return null_arg("scenario");
  s->cfg.seed = seed;
  return 0;
}

int sg_scenario_set_paths(sg_scenario* s, int64_t paths) {
  if (!s) return null_arg("scenario");
  if (paths < 1) return record(ErrorCode::InvalidArgument, "InvalidArgument: paths must be >= 1");
  s->cfg.paths = paths;
  return 0;
}

int sg_scenario_set_steps(sg_scenario* s, int steps) {
  if (!s) return null_arg("scenario");
  if (steps < 1) return record(ErrorCode::InvalidArgument, "InvalidArgument: steps must be >= 1");
  s->cfg.steps = steps;
  return 0;
}

int sg_scenario_set_workers(sg_scenario* s, int workers) {
  if (!s) return null_arg("scenario");
  if (workers < 0) return record(ErrorCode::InvalidArgument, "InvalidArgument: workers must be >= 0");
  s->cfg.workers = workers;
  return 0;
}

int sg_scenario_set_output(sg_scenario* s, const char* dir) {
  if (!s || !dir) return null_arg("argument");
  s->cfg.output_dir = dir;
  return 0;
}

const char* sg_scenario_output(const sg_scenario* s) { return s ? s->cfg.output_dir.c_str() : nullptr; }

int sg_scenario_dump(const sg_scenario* s, char** yaml_out) {
  if (!s || !yaml_out) return null_arg("argument");
  return guarded([&] {
    *yaml_out = dup(serialize_config(s->cfg));
    return 0;
  });
}

int sg_command(const sg_scenario* s, const char* command, const char* out_dir, char** report) {
  if (!s || !command) return null_arg("argument");
  if (report) *report = nullptr;
  return guarded([&] {
    const CommandResult r = run_command(s->cfg, command, out_dir ? out_dir : s->cfg.output_dir);
    if (report) *report = dup(r.report);
    if (r.code != 0) {
      g_last_error = std::string(error_name(static_cast<ErrorCode>(r.code))) + ": " + command +
                     " reported a failing check";
    }
    return r.code;
  });
}

int sg_command_count(void) { return static_cast<int>(command_names().size()); }

const char* sg_command_name(int index) {
  const auto& n = command_names();
  if (index < 0 || index >= static_cast<int>(n.size())) return nullptr;
  return n[index].c_str();
}

int sg_solve(const sg_scenario* s, sg_solution** out) {
  if (!s || !out) return null_arg("argument");
  *out = nullptr;
  return guarded([&] {
    if (!s->cfg.game) fail(ErrorCode::ConfigError, "sg_solve needs a game scenario");
    const GameModel model = build_model(s->cfg);
    if (model.mode() == CoefficientMode::FactorDriven)
      fail(ErrorCode::InvalidArgument, "sg_solve needs deterministic coefficients");
    auto sol = std::make_unique<sg_solution>();
    SolverOptions opt;
    opt.certify_stride = s->cfg.verification.certify_stride;
    if (model.constrained()) {
      sol->constrained = true;
      auto pr = solve_sre_constrained(model, model.grid(), opt);
      sol->P = std::move(pr.first);
      sol->P2 = std::move(pr.second);
      sol->V = constrained_value(model, sol->P, sol->P2);
    } else {
      sol->P = solve_sre(model, model.grid(), opt);
      sol->phi = solve_linear_bsde(model, sol->P, model.grid());
      sol->V = value_formula(model, sol->P, sol->phi, model.grid());
    }
    *out = sol.release();
    return 0;
  });
}

void sg_solution_free(sg_solution* sol) { delete sol; }

int sg_solution_nodes(const sg_solution* sol) { return sol ? sol->P.grid.nodes() : 0; }

int sg_solution_regimes(const sg_solution* sol) { return sol ? sol->P.regimes : 0; }

int sg_solution_constrained(const sg_solution* sol) { return sol && sol->constrained ? 1 : 0; }

double sg_solution_time(const sg_solution* sol, int node) {
  if (!sol || node < 0 || node >= sol->P.grid.nodes()) return 0.0;
  return sol->P.grid.node(node);
}

int sg_solution_P(const sg_solution* sol, int which, int node, int regime, double* out) {
  if (!sol || !out) return null_arg("argument");
  if (int c = check_index(sol, node, regime)) return c;
  if (which == 0) {
    *out = sol->P.P[node][regime];
  } else if (which == 1 && sol->constrained) {
    *out = sol->P2.P[node][regime];
  } else {
    return record(ErrorCode::InvalidArgument, "InvalidArgument: no such Riccati component");
  }
  return 0;
}

int sg_solution_phi(const sg_solution* sol, int node, int regime, double* out) {
  if (!sol || !out) return null_arg("argument");
  if (sol->constrained)
    return record(ErrorCode::MissingSolution, "MissingSolution: constrained games have no phi");
  if (int c = check_index(sol, node, regime)) return c;
  *out = sol->phi.phi[node][regime];
  return 0;
}

int sg_solution_value(const sg_solution* sol, double* out) {
  if (!sol || !out) return null_arg("argument");
  *out = sol->V;
  return 0;
}

const char* sg_last_error(void) { return g_last_error.c_str(); }

const char* sg_error_name(int code) { return error_name(static_cast<ErrorCode>(code)); }

void sg_string_free(char* s) { std::free(s); }

}  // extern "C"
