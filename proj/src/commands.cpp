#include "sregame/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "sregame/game_engine.hpp"
#include "sregame/paths.hpp"
#include "sregame/portfolio.hpp"
#include "sregame/sre_solver.hpp"

namespace sregame {

namespace {

constexpr double kConsistencyTol = 1e-9;
constexpr double kEquivalenceTol = 1e-8;
constexpr int kTraceCount = 5;

class Report {
 public:
  template <class T>
  void kv(const std::string& k, const T& v) {
    os_ << k << ": " << v << "\n";
  }
  void num(const std::string& k, double v) { kv(k, format_number(v)); }
  void flag(const std::string& k, bool ok) { kv(k, ok ? "pass" : "fail"); }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

struct Writer {
  std::string dir;
  std::vector<std::string> files;
  void put(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    write_file(path, content);
    files.push_back(path);
  }
};

std::string idx(const std::string& base, int j) { return base + "_" + std::to_string(j); }

void report_assumptions(Report& r, const AssumptionReport& a) {
  r.num("c1", a.c1);
  r.num("cbar2", a.cbar2);
  r.num("cunder2", a.cunder2);
  r.num("c3", a.c3);
  r.num("Kbar", a.Kbar);
  r.num("Gbar", a.Gbar);
  r.num("epsilon", a.epsilon);
  r.num("epsbar", a.epsbar);
  r.flag("assumption_DtD_positive", a.assumption1_ok);
  r.num("margin_DtD", a.margin1);
  r.flag("assumption_weights", a.assumption2_ok);
  r.num("margin_weights", a.margin2);
  r.kv("tightest_weight", a.worst_weight.empty() ? "-" : a.worst_weight);
  r.flag("assumption_cbar2_epsilon", a.assumption3_ok);
  r.num("margin_cbar2_epsilon", a.margin3);
  r.kv("degenerate_rate", a.degenerate_rate ? "true" : "false");
}

void report_market(Report& r, const MarketConstants& c) {
  r.num("qtilde", c.qtilde);
  r.num("rtilde", c.rtilde);
  r.num("mutilde", c.mutilde);
  r.num("sigbar", c.sigbar);
  r.num("sigunder", c.sigunder);
  r.num("eps1", c.eps1);
  r.num("eps2", c.eps2);
  r.flag("condition_volatility_floor", c.cond1);
  r.flag("condition_risk_weights", c.cond2);
  r.flag("condition_volatility_cap", c.cond3);
  r.flag("condition_uncorrelated", c.cond4);
}

std::string sre_table(const SRESolution& s, const ComparisonEnvelope* env) {
  TextTable t;
  t.columns = {"t", "regime", "P"};
  if (env) {
    t.columns.push_back("upper");
    t.columns.push_back("lower");
  }
  for (int k = 0; k < s.grid.nodes(); ++k)
    for (int i = 0; i < s.regimes; ++i) {
      std::vector<double> row{s.grid.node(k), static_cast<double>(i), s.P[k][i]};
      if (env) {
        row.push_back(env->upper(s.grid.node(k)));
        row.push_back(env->lower(s.grid.node(k)));
      }
      t.add(std::move(row));
    }
  return t.str();
}

std::string pair_table(const SRESolution& a, const SRESolution& b, const char* na, const char* nb) {
  TextTable t;
  t.columns = {"t", "regime", na, nb};
  for (int k = 0; k < a.grid.nodes(); ++k)
    for (int i = 0; i < a.regimes; ++i)
      t.add({a.grid.node(k), static_cast<double>(i), a.P[k][i], b.P[k][i]});
  return t.str();
}

std::string phi_table(const PhiSolution& p) {
  TextTable t;
  t.columns = {"t", "regime", "phi"};
  for (int k = 0; k < p.grid.nodes(); ++k)
    for (int i = 0; i < p.regimes; ++i) t.add({p.grid.node(k), static_cast<double>(i), p.phi[k][i]});
  return t.str();
}

std::string law_table(const FeedbackLaw& law) {
  TextTable t;
  t.columns = {"t", "regime"};
  const bool lin = law.kind() == LawKind::Unconstrained;
  const char* names1[] = {"K1", "h1"};
  const char* names2[] = {"K2", "h2"};
  const char* cnames1[] = {"v11", "v12"};
  const char* cnames2[] = {"v21", "v22"};
  for (const char* n : lin ? names1 : cnames1)
    for (int j = 0; j < law.m1(); ++j) t.columns.push_back(idx(n, j));
  for (const char* n : lin ? names2 : cnames2)
    for (int j = 0; j < law.m2(); ++j) t.columns.push_back(idx(n, j));
  for (int k = 0; k < law.grid().nodes(); ++k) {
    for (int i = 0; i < law.regimes(); ++i) {
      std::vector<double> row{law.grid().node(k), static_cast<double>(i)};
      auto push = [&](const SVec& v) {
        for (Eigen::Index j = 0; j < v.size(); ++j) row.push_back(v(j));
      };
      if (lin) {
        const auto& g = law.gains(k, i);
        push(g.K1);
        push(g.h1);
        push(g.K2);
        push(g.h2);
      } else {
        push(law.side(k, i, true).v1);
        push(law.side(k, i, false).v1);
        push(law.side(k, i, true).v2);
        push(law.side(k, i, false).v2);
      }
      t.add(std::move(row));
    }
  }
  return t.str();
}

std::string trace_table(const std::vector<PathTrace>& traces, int m1, int m2) {
  TextTable t;
  t.columns = {"path", "t", "regime", "X"};
  for (int j = 0; j < m1; ++j) t.columns.push_back(idx("u1", j));
  for (int j = 0; j < m2; ++j) t.columns.push_back(idx("u2", j));
  for (size_t p = 0; p < traces.size(); ++p) {
    const PathTrace& tr = traces[p];
    for (size_t k = 0; k < tr.t.size(); ++k) {
      std::vector<double> row{static_cast<double>(p), tr.t[k], static_cast<double>(tr.regime[k]), tr.X[k]};
      for (Eigen::Index j = 0; j < tr.u1[k].size(); ++j) row.push_back(tr.u1[k](j));
      for (Eigen::Index j = 0; j < tr.u2[k].size(); ++j) row.push_back(tr.u2[k](j));
      t.add(std::move(row));
    }
  }
  return t.str();
}

std::string envelope_table(const ComparisonEnvelope& env, const TimeGrid& grid) {
  TextTable t;
  t.columns = {"t", "upper", "lower"};
  for (int k = 0; k < grid.nodes(); ++k)
    t.add({grid.node(k), env.upper(grid.node(k)), env.lower(grid.node(k))});
  return t.str();
}

double max_deviation(const SRESolution& a, const SRESolution& b) {
  double d = 0.0;
  for (size_t k = 0; k < a.P.size(); ++k)
    for (size_t i = 0; i < a.P[k].size(); ++i) d = std::max(d, std::abs(a.P[k][i] - b.P[k][i]));
  return d;
}

SolverOptions solver_options(const ScenarioConfig& cfg) {
  SolverOptions o;
  o.certify_stride = cfg.verification.certify_stride;
  return o;
}

// Solved game state shared by the game commands.
struct GameRun {
  GameModel model;
  AssumptionReport rep;
  bool constrained = false;
  SRESolution P, P2;
  PhiSolution phi;
  double V = 0.0;
};

GameRun solve_game(const ScenarioConfig& cfg, Report& r, Writer& w, bool value) {
  GameRun g{build_model(cfg), {}, false, {}, {}, {}, 0.0};
  g.rep = compute_constants(g.model);
  g.constrained = g.model.constrained();
  r.kv("assumptions", g.rep.all_ok() ? "hold" : "not verified");
  const SolverOptions opt = solver_options(cfg);
  if (g.constrained) {
    auto pr = solve_sre_constrained(g.model, g.model.grid(), opt);
    g.P = std::move(pr.first);
    g.P2 = std::move(pr.second);
    for (int i = 0; i < g.model.regime_count(); ++i) {
      r.num(idx("P1_0", i), g.P.P[0][i]);
      r.num(idx("P2_0", i), g.P2.P[0][i]);
    }
    r.flag("bounds", g.P.all_bounds_ok() && g.P2.all_bounds_ok());
    w.put("sre_pair.tsv", pair_table(g.P, g.P2, "P1", "P2"));
    if (value) g.V = constrained_value(g.model, g.P, g.P2);
  } else {
    g.P = solve_sre(g.model, g.model.grid(), opt);
    g.phi = solve_linear_bsde(g.model, g.P, g.model.grid());
    const ComparisonEnvelope env = comparison_envelope(g.model);
    for (int i = 0; i < g.model.regime_count(); ++i) {
      r.num(idx("P_0", i), g.P.P[0][i]);
      r.num(idx("phi_0", i), g.phi.phi[0][i]);
    }
    r.flag("bounds", g.P.all_bounds_ok());
    w.put("sre.tsv", sre_table(g.P, &env));
    w.put("phi.tsv", phi_table(g.phi));
    if (value) g.V = value_formula(g.model, g.P, g.phi, g.model.grid());
  }
  if (value) r.num("V", g.V);
  return g;
}

FeedbackLaw law_for(const GameRun& g) {
  return g.constrained ? build_constrained_feedback(g.model, &g.P, &g.P2)
                       : build_feedback(g.model, &g.P, &g.phi);
}

MCOptions mc_options(const ScenarioConfig& cfg) {
  MCOptions o;
  o.workers = cfg.workers;
  o.soft_sigma = cfg.verification.soft_sigma;
  o.hard_sigma = cfg.verification.hard_sigma;
  return o;
}

// ---------------------------------------------------------------- commands

CommandResult cmd_validate(const ScenarioConfig& cfg) {
  validate_config(cfg);
  Report r;
  r.kv("scenario", cfg.name);
  CommandResult res;
  if (cfg.game) {
    const GameModel model = build_model(cfg);
    const AssumptionReport a = compute_constants(model);
    report_assumptions(r, a);
    if (!a.all_ok()) {
      res.code = static_cast<int>(ErrorCode::AssumptionViolated);
      if (!a.assumption2_ok) r.kv("failing_weight", a.worst_weight);
    }
  } else {
    const MarketConstants c = market_constants(build_market(cfg));
    report_market(r, c);
    if (!c.basic_ok()) res.code = static_cast<int>(ErrorCode::AssumptionViolated);
  }
  r.kv("status", res.code == 0 ? "ok" : error_name(static_cast<ErrorCode>(res.code)));
  res.report = r.str();
  return res;
}

CommandResult cmd_solve_sre(const ScenarioConfig& cfg, Writer& w, bool game) {
  Report r;
  r.kv("scenario", cfg.name);
  CommandResult res;
  const GameModel model = build_model(cfg);
  if (model.mode() == CoefficientMode::FactorDriven) {
    if (game) fail(ErrorCode::InvalidArgument, "feedback laws need deterministic coefficients");
    const PathBundle bundle(model, model.grid(), cfg.paths, cfg.seed);
    const RandomSRESolution s =
        solve_sre_random(model, model.grid(), bundle, cfg.verification.basis_degree);
    for (int i = 0; i < s.regimes; ++i) r.num(idx("P_0", i), s.P0[i]);
    r.kv("bound_violations", s.bound_violations);
    double worst = 0.0;
    for (double v : s.residual) worst = std::max(worst, std::abs(v));
    r.num("max_mean_residual", worst);
    TextTable t;
    t.columns = {"t", "mean_residual"};
    for (int k = 0; k < model.grid().steps; ++k) t.add({model.grid().node(k), s.residual[k]});
    w.put("random_residual.tsv", t.str());
    TextTable p0;
    p0.columns = {"regime", "P0"};
    for (int i = 0; i < s.regimes; ++i) p0.add({static_cast<double>(i), s.P0[i]});
    w.put("random_P0.tsv", p0.str());
    res.report = r.str();
    return res;
  }
  const GameRun g = solve_game(cfg, r, w, game);
  if (game) w.put("law.tsv", law_table(law_for(g)));
  res.report = r.str();
  return res;
}

CommandResult cmd_simulate(const ScenarioConfig& cfg, Writer& w) {
  Report r;
  r.kv("scenario", cfg.name);
  const GameRun g = solve_game(cfg, r, w, true);
  const FeedbackLaw law = law_for(g);
  const PathBundle bundle(g.model, g.model.grid(), cfg.paths, cfg.seed);
  Policy opt;
  opt.label = "optimal";
  const auto est = estimate_objective(g.model, &law, {opt}, bundle, mc_options(cfg));
  r.kv("paths", cfg.paths);
  r.num("J", est[0].J);
  r.num("J_stderr", est[0].J_stderr);
  w.put("trace.tsv", trace_table(trace_paths(g.model, &law, opt, bundle, kTraceCount),
                                 g.model.dims().m1, g.model.dims().m2));
  CommandResult res;
  res.report = r.str();
  return res;
}

CommandResult cmd_verify(const ScenarioConfig& cfg, Writer& w) {
  Report r;
  r.kv("scenario", cfg.name);
  CommandResult res;
  bool hard_fail = false, check_fail = false;
  const GameModel model = build_model(cfg);

  if (model.mode() == CoefficientMode::FactorDriven) {
    const PathBundle bundle(model, model.grid(), cfg.paths, cfg.seed);
    const RandomSRESolution s =
        solve_sre_random(model, model.grid(), bundle, cfg.verification.basis_degree);
    bool terminal = true;
    for (std::int64_t m = 0; m < s.paths; ++m)
      for (int i = 0; i < s.regimes; ++i)
        terminal = terminal && s.at(m, model.grid().steps, i) == model.G()[i];
    r.flag("terminal_condition", terminal);
    r.kv("bound_violations", s.bound_violations);
    for (int i = 0; i < s.regimes; ++i) r.num(idx("P_0", i), s.P0[i]);
    check_fail = !terminal || s.bound_violations > 0;
    res.code = check_fail ? static_cast<int>(ErrorCode::CheckFailed) : 0;
    r.kv("status", res.code == 0 ? "ok" : error_name(static_cast<ErrorCode>(res.code)));
    res.report = r.str();
    return res;
  }

  SolverOptions sopt = solver_options(cfg);
  if (model.constrained() && sopt.certify_stride == 0) sopt.certify_stride = 1;
  ScenarioConfig c2 = cfg;
  c2.verification.certify_stride = sopt.certify_stride;
  const GameRun g = solve_game(c2, r, w, true);
  const FeedbackLaw law = law_for(g);
  const PathBundle bundle(g.model, g.model.grid(), cfg.paths, cfg.seed);

  bool terminal = true;
  for (int i = 0; i < model.regime_count(); ++i) {
    terminal = terminal && g.P.P[model.grid().steps][i] == model.G()[i];
    if (g.constrained) terminal = terminal && g.P2.P[model.grid().steps][i] == model.G()[i];
    else terminal = terminal && g.phi.phi[model.grid().steps][i] == 0.0;
  }
  r.flag("terminal_condition", terminal);
  const bool bounds = g.P.all_bounds_ok() && (!g.constrained || g.P2.all_bounds_ok());
  check_fail = check_fail || !terminal || (g.rep.all_ok() && !bounds);
  if (g.constrained) r.kv("minimax_certified_every", sopt.certify_stride);

  const ConsistencyResult cons = consistency_check(law, 1000, 2.0, cfg.seed);
  r.num("consistency_u1_gap", cons.max_u1_gap);
  r.num("consistency_u2_gap", cons.max_u2_gap);
  const bool cons_ok = cons.max_u1_gap <= kConsistencyTol && cons.max_u2_gap <= kConsistencyTol;
  r.flag("consistency", cons_ok);
  check_fail = check_fail || !cons_ok;

  if (!g.constrained && model.homogeneous()) {
    // Full-space cones reproduce the unconstrained solution.
    const auto pr = solve_sre_constrained(model, model.grid(), sopt);
    const double dev = std::max(max_deviation(pr.first, g.P), max_deviation(pr.second, g.P));
    const FeedbackLaw claw = build_constrained_feedback(model, &pr.first, &pr.second);
    const double ldev = law_distance(claw, law, 100, 2.0, cfg.seed + 1);
    r.num("example1_max_deviation", dev);
    r.num("example1_law_deviation", ldev);
    const bool ok = dev <= kEquivalenceTol && ldev <= kEquivalenceTol;
    r.flag("example1_equivalence", ok);
    check_fail = check_fail || !ok;
  }

  if (!g.constrained && !cfg.verification.truncation_levels.empty()) {
    const auto seq = monotone_truncated_sequence(model, model.grid(), cfg.verification.truncation_levels);
    bool mono = true;
    for (size_t j = 0; j < seq.size(); ++j) {
      for (int i = 0; i < model.regime_count(); ++i) {
        r.num("truncated_P0_k" + std::to_string(cfg.verification.truncation_levels[j]) + "_" +
                  std::to_string(i),
              seq[j].P[0][i]);
        if (j > 0 && seq[j].P[0][i] > seq[j - 1].P[0][i] + 1e-9) mono = false;
      }
    }
    r.flag("truncated_monotone", mono);
    check_fail = check_fail || !mono;
  }

  SimulationReport sim;
  if (g.constrained) {
    sim = constrained_check(g.model, law, g.V, bundle, mc_options(cfg));
  } else {
    const auto perts = random_perturbations(model, cfg.verification.perturbations,
                                            cfg.verification.perturbation_scale,
                                            cfg.verification.perturbation_seed);
    sim = saddle_check(g.model, law, g.V, bundle, perts, mc_options(cfg));
  }
  w.put("simulation_report.txt", sim.to_text());
  r.num("J", sim.J);
  r.num("J_stderr", sim.J_stderr);
  for (const auto& v : sim.verdicts)
    r.kv("verdict " + v.name, v.soft_ok ? "pass" : (v.hard_ok ? "soft-fail" : "hard-fail"));
  hard_fail = sim.hard_failed;

  if (hard_fail) res.code = static_cast<int>(ErrorCode::SaddleViolation);
  else if (check_fail) res.code = static_cast<int>(ErrorCode::CheckFailed);
  r.kv("status", res.code == 0 ? "ok" : error_name(static_cast<ErrorCode>(res.code)));
  res.report = r.str();
  return res;
}

CommandResult cmd_portfolio(const ScenarioConfig& cfg, Writer& w) {
  Report r;
  r.kv("scenario", cfg.name);
  CommandResult res;
  const MarketSpec market = build_market(cfg);
  const PortfolioSolution sol = solve_portfolio(market);
  report_market(r, sol.constants);
  r.kv("constraint", constraint_name(sol.constraint));
  r.flag("eps2_bound", sol.eps2_ok);
  r.num("V", sol.V);

  // The generic solver on the mapped game is the oracle for the specialization.
  const GameModel model = to_game(market);
  double dev;
  if (sol.constraint == ShortConstraint::None) {
    dev = max_deviation(sol.Pa, solve_sre(model));
    w.put("portfolio_sre.tsv", sre_table(sol.Pa, nullptr));
  } else {
    const auto pr = solve_sre_constrained(model, model.grid());
    dev = std::max(max_deviation(sol.Pa, pr.first), max_deviation(sol.Pb, pr.second));
    w.put("portfolio_sre.tsv", pair_table(sol.Pa, sol.Pb, "Pa", "Pb"));
  }
  r.num("generic_max_deviation", dev);
  const bool dev_ok = dev <= kEquivalenceTol;
  r.flag("generic_agreement", dev_ok);

  const PathBundle bundle(model, model.grid(), cfg.paths, cfg.seed);
  const PortfolioSimulation sim = simulate_portfolio(market, sol, bundle, cfg.workers);
  r.kv("paths", sim.paths);
  r.num("J", sim.J);
  r.num("J_stderr", sim.J_stderr);
  r.num("min_pi1", sim.min_pi1);
  r.num("min_pi2", sim.min_pi2);
  bool feasible = true;
  if (sol.constraint == ShortConstraint::Short1 || sol.constraint == ShortConstraint::BothNoShort)
    feasible = feasible && sim.min_pi1 >= 0.0;
  if (sol.constraint == ShortConstraint::Short2 || sol.constraint == ShortConstraint::BothNoShort)
    feasible = feasible && sim.min_pi2 >= 0.0;
  r.flag("no_short_feasible", feasible);
  const double se = std::max(sim.J_stderr, 1e-10);
  const double z = std::abs(sim.J - sol.V) / se;
  const double soft = cfg.verification.soft_sigma, hard = cfg.verification.hard_sigma;
  r.num("value_z", z);
  r.kv("verdict value", z <= soft ? "pass" : (z <= hard ? "soft-fail" : "hard-fail"));

  if (z > hard) res.code = static_cast<int>(ErrorCode::SaddleViolation);
  else if (!dev_ok || !feasible) res.code = static_cast<int>(ErrorCode::CheckFailed);
  r.kv("status", res.code == 0 ? "ok" : error_name(static_cast<ErrorCode>(res.code)));
  res.report = r.str();
  return res;
}

CommandResult cmd_bounds(const ScenarioConfig& cfg, Writer& w) {
  Report r;
  r.kv("scenario", cfg.name);
  const GameModel model = cfg.game ? build_model(cfg) : to_game(build_market(cfg));
  const AssumptionReport a = compute_constants(model);
  const ComparisonEnvelope env = comparison_envelope(a, model.horizon(), model.regime_count());
  report_assumptions(r, a);
  r.num("upper_0", env.upper(0.0));
  r.num("upper_T", env.upper(model.horizon()));
  if (cfg.market) r.num("eps2", market_constants(build_market(cfg)).eps2);
  w.put("envelope.tsv", envelope_table(env, model.grid()));
  CommandResult res;
  res.report = r.str();
  return res;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"validate", "solve-sre", "solve-game", "simulate",
                                              "verify",   "portfolio", "bounds"};
  return names;
}

CommandResult run_command(const ScenarioConfig& cfg, const std::string& command,
                          const std::string& out_dir) {
  validate_config(cfg);
  Writer w{out_dir, {}};
  CommandResult res;
  if (command == "validate") {
    res = cmd_validate(cfg);
  } else if (command == "bounds") {
    res = cmd_bounds(cfg, w);
  } else if (command == "portfolio") {
    res = cmd_portfolio(cfg, w);
  } else if (command == "solve-sre" || command == "solve-game" || command == "simulate" ||
             command == "verify") {
    if (!cfg.game) fail(ErrorCode::ConfigError, command + " needs a game scenario");
    if (command == "solve-sre") res = cmd_solve_sre(cfg, w, false);
    else if (command == "solve-game") res = cmd_solve_sre(cfg, w, true);
    else if (command == "simulate") res = cmd_simulate(cfg, w);
    else res = cmd_verify(cfg, w);
  } else {
    fail(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
  }
  res.files = w.files;
  if (command != "validate") {
    Writer rw{out_dir, {}};
    rw.put(command + ".txt", res.report);
    res.files.push_back(rw.files.front());
  }
  return res;
}

}  // namespace sregame
