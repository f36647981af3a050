#include "sregame/game_engine.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace sregame {

namespace {

constexpr double kZeroState = 1e-14;
constexpr double kStderrFloor = 1e-10;

void check_sim_dims(const Dimensions& d) {
  if (d.n > kMaxSimDim || d.m1 > kMaxSimDim || d.m2 > kMaxSimDim)
    fail(ErrorCode::DimensionMismatch, "simulation supports at most 8 Brownian/control dimensions");
}

SVec to_s(const Vec& v) { return SVec(v); }
SMat to_s(const Mat& m) { return SMat(m); }

SVec shift_or_zero(const Vec& v, int dim, const char* what) {
  if (v.size() == 0) return SVec::Zero(dim);
  if (v.size() != dim) fail(ErrorCode::DimensionMismatch, std::string("policy shift ") + what);
  return SVec(v);
}

struct SmallCoeff {
  double A, b, K;
  SVec B1, B2, C, sigma;
  SMat D1, D2, R11, R12, R22;
};

SmallCoeff small(const NodeCoefficients& c) {
  return SmallCoeff{c.A,        c.b,        c.K,        to_s(c.B1),  to_s(c.B2),  to_s(c.C),
                    to_s(c.sigma), to_s(c.D1), to_s(c.D2), to_s(c.R11), to_s(c.R12), to_s(c.R22)};
}

struct PreparedPolicy {
  Policy::Game game;
  SVec a1, c1, a2, c2;
};

struct Recorder {
  std::vector<double>* X = nullptr;
  PathTrace* trace = nullptr;
};

struct Engine {
  const GameModel& model;
  const FeedbackLaw* law;
  std::vector<SmallCoeff> coeff;  // [node * l + i]
  int l, N, n, m1, m2;
  double h;

  Engine(const GameModel& m, const FeedbackLaw* lw, const PathBundle& bundle)
      : model(m), law(lw) {
    check_sim_dims(m.dims());
    if (m.mode() != CoefficientMode::DeterministicPerRegime)
      fail(ErrorCode::InvalidArgument, "closed-loop simulation needs deterministic coefficients");
    if (!(bundle.grid() == m.grid())) fail(ErrorCode::GridMismatch, "path bundle grid differs");
    if (lw && !(lw->grid() == m.grid())) fail(ErrorCode::GridMismatch, "feedback law grid differs");
    l = m.regime_count();
    N = m.grid().steps;
    n = m.dims().n;
    m1 = m.dims().m1;
    m2 = m.dims().m2;
    h = m.grid().dt();
    coeff.reserve(static_cast<size_t>(N + 1) * l);
    for (int k = 0; k <= N; ++k)
      for (int i = 0; i < l; ++i) coeff.push_back(small(m.at(k, i)));
  }

  PreparedPolicy prepare(const Policy& p) const {
    return PreparedPolicy{p.game, shift_or_zero(p.a1, m1, "a1"), shift_or_zero(p.c1, m1, "c1"),
                          shift_or_zero(p.a2, m2, "a2"), shift_or_zero(p.c2, m2, "c2")};
  }

  // Controls at (node, regime, x) and the auxiliary integrand.
  void controls(const PreparedPolicy& p, int k, int i, double x, SVec& u1, SVec& u2,
                double& aux) const {
    aux = 0.0;
    if (!law) {
      u1 = p.a1 + p.c1 * x;
      u2 = p.a2 + p.c2 * x;
      return;
    }
    SVec d1 = p.a1 + p.c1 * x, d2 = p.a2 + p.c2 * x;
    SVec star;
    if (p.game == Policy::Game::Player1) {
      law->u1star(k, i, x, star);
      u1 = star + d1;
      law->beta2(k, i, x, u1, u2);
      u2 += d2;
    } else {
      law->u2star(k, i, x, star);
      u2 = star + d2;
      law->beta1(k, i, x, u2, u1);
      u1 += d1;
    }
    if (law->kind() == LawKind::Unconstrained) {
      const auto& g = law->gains(k, i);
      if (p.game == Policy::Game::Player1)
        aux = d2.dot(g.Rhat22 * d2) + d1.dot(g.Rtilde11 * d1);
      else
        aux = d1.dot(g.Rhat11 * d1) + d2.dot(g.Rtilde22 * d2);
    } else if (x != 0.0) {
      const auto& s = law->side(k, i, x > 0.0);
      const double ax = std::abs(x);
      aux = u1.dot(s.Q11 * u1) + 2.0 * u1.dot(s.Q12 * u2) + u2.dot(s.Q22 * u2) +
            2.0 * ax * (s.c1.dot(u1) + s.c2.dot(u2)) - x * x * s.Htilde;
    }
  }

  // Returns (J, aux integral) for one path.
  std::pair<double, double> run(const PreparedPolicy& p, const PathBuffer& buf, double x0,
                                Recorder rec = Recorder()) const {
    SVec u1(m1), u2(m2), vol(n);
    double x = x0, J = 0.0, A = 0.0, fprev = 0.0, aprev = 0.0;
    for (int k = 0; k <= N; ++k) {
      const int i = buf.regime[k];
      const SmallCoeff& c = coeff[static_cast<size_t>(k) * l + i];
      double a;
      controls(p, k, i, x, u1, u2, a);
      const double f = c.K * x * x + u1.dot(c.R11 * u1) + 2.0 * u1.dot(c.R12 * u2) +
                       u2.dot(c.R22 * u2);
      if (rec.X) rec.X->push_back(x);
      if (rec.trace) {
        rec.trace->t.push_back(model.grid().node(k));
        rec.trace->X.push_back(x);
        rec.trace->regime.push_back(i);
        rec.trace->u1.push_back(Vec(u1));
        rec.trace->u2.push_back(Vec(u2));
      }
      if (k > 0) {
        J += 0.5 * h * (fprev + f);
        A += 0.5 * h * (aprev + a);
      }
      if (k == N) {
        J += model.G()[i] * x * x;
        break;
      }
      fprev = f;
      aprev = a;
      const double drift = c.A * x + c.B1.dot(u1) + c.B2.dot(u2) + c.b;
      vol.noalias() = c.C * x + c.sigma;
      vol.noalias() += c.D1 * u1;
      vol.noalias() += c.D2 * u2;
      double diff = 0.0;
      for (int j = 0; j < n; ++j) diff += vol(j) * buf.dW[static_cast<size_t>(k) * n + j];
      x += drift * h + diff;
      if (!std::isfinite(x))
        fail(ErrorCode::NonFinite, "state became non-finite at step " + std::to_string(k));
    }
    return {J, A};
  }
};

struct Moments {
  double mean = 0.0, stderr_ = 0.0;
};

template <class F>
Moments moments(std::int64_t M, F&& value) {
  double s = 0.0;
  for (std::int64_t m = 0; m < M; ++m) s += value(m);
  const double mean = s / static_cast<double>(M);
  double ss = 0.0;
  for (std::int64_t m = 0; m < M; ++m) {
    const double d = value(m) - mean;
    ss += d * d;
  }
  Moments r;
  r.mean = mean;
  r.stderr_ = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
  return r;
}

Verdict make_verdict(std::string name, double est, double ref, double se, int sided,
                     const MCOptions& opt) {
  Verdict v;
  v.name = std::move(name);
  v.estimate = est;
  v.reference = ref;
  v.stderr_ = se;
  const double s = std::max(se, kStderrFloor);
  const double d = est - ref;
  auto ok = [&](double k) {
    if (sided > 0) return d <= k * s;   // estimate must not exceed reference
    if (sided < 0) return d >= -k * s;  // estimate must not fall below reference
    return std::abs(d) <= k * s;
  };
  v.soft_ok = ok(opt.soft_sigma);
  v.hard_ok = ok(opt.hard_sigma);
  return v;
}

void finalize(SimulationReport& r) {
  r.soft_ok = true;
  r.hard_failed = false;
  for (const auto& v : r.verdicts) {
    r.soft_ok = r.soft_ok && v.soft_ok;
    r.hard_failed = r.hard_failed || !v.hard_ok;
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- feedback laws

int FeedbackLaw::node_of(double t) const {
  const int k = static_cast<int>(std::floor(t / grid_.dt() + 1e-12));
  return std::clamp(k, 0, grid_.steps);
}

void FeedbackLaw::u1star(int node, int i, double x, SVec& out) const {
  if (kind_ == LawKind::Unconstrained) {
    const auto& g = gains(node, i);
    out = g.K1 * x + g.h1;
    return;
  }
  if (x == 0.0) {
    out.setZero(m1_);
    return;
  }
  out = side(node, i, x > 0.0).v1 * std::abs(x);
}

void FeedbackLaw::u2star(int node, int i, double x, SVec& out) const {
  if (kind_ == LawKind::Unconstrained) {
    const auto& g = gains(node, i);
    out = g.K2 * x + g.h2;
    return;
  }
  if (x == 0.0) {
    out.setZero(m2_);
    return;
  }
  out = side(node, i, x > 0.0).v2 * std::abs(x);
}

void FeedbackLaw::beta2(int node, int i, double x, const SVec& u1, SVec& out) const {
  if (kind_ == LawKind::Unconstrained) {
    const auto& g = gains(node, i);
    out.noalias() = g.Mb * u1;
    out += g.kb * x + g.hb;
    return;
  }
  if (x == 0.0) {
    out.setZero(m2_);
    return;
  }
  const ConeSide& s = side(node, i, x > 0.0);
  const double ax = std::abs(x);
  const SVec v1 = ax < kZeroState ? SVec(SVec::Zero(m1_)) : SVec(u1 / ax);
  if ((v1 - s.v1).norm() <= 1e-12 * (1.0 + s.v1.norm())) {
    out = s.v2 * ax;
  } else {
    out = SVec(best_response_min(s.game, cone2_, Vec(v1))) * ax;
  }
}

void FeedbackLaw::beta1(int node, int i, double x, const SVec& u2, SVec& out) const {
  if (kind_ == LawKind::Unconstrained) {
    const auto& g = gains(node, i);
    out.noalias() = g.Ma * u2;
    out += g.ka * x + g.ha;
    return;
  }
  if (x == 0.0) {
    out.setZero(m1_);
    return;
  }
  const ConeSide& s = side(node, i, x > 0.0);
  const double ax = std::abs(x);
  const SVec v2 = ax < kZeroState ? SVec(SVec::Zero(m2_)) : SVec(u2 / ax);
  if ((v2 - s.v2).norm() <= 1e-12 * (1.0 + s.v2.norm())) {
    out = s.v1 * ax;
  } else {
    out = SVec(best_response_max(s.game, cone1_, Vec(v2))) * ax;
  }
}

Vec FeedbackLaw::u1star(double t, int i, double x) const {
  SVec o;
  u1star(node_of(t), i, x, o);
  return Vec(o);
}
Vec FeedbackLaw::u2star(double t, int i, double x) const {
  SVec o;
  u2star(node_of(t), i, x, o);
  return Vec(o);
}
Vec FeedbackLaw::beta2(double t, int i, double x, const Vec& u1) const {
  SVec o;
  beta2(node_of(t), i, x, SVec(u1), o);
  return Vec(o);
}
Vec FeedbackLaw::beta1(double t, int i, double x, const Vec& u2) const {
  SVec o;
  beta1(node_of(t), i, x, SVec(u2), o);
  return Vec(o);
}

FeedbackLaw build_feedback(const GameModel& model, const SRESolution* sre, const PhiSolution* phi) {
  if (!sre) fail(ErrorCode::MissingSolution, "feedback law needs the Riccati solution");
  if (!phi && !model.homogeneous())
    fail(ErrorCode::MissingSolution, "feedback law needs the linear BSDE solution");
  if (!(sre->grid == model.grid()) || (phi && !(phi->grid == model.grid())))
    fail(ErrorCode::GridMismatch, "solution grid differs from the model grid");
  check_sim_dims(model.dims());
  const int l = model.regime_count();
  const Vec zero = Vec::Zero(model.dims().n);

  FeedbackLaw law;
  law.kind_ = LawKind::Unconstrained;
  law.m1_ = model.dims().m1;
  law.m2_ = model.dims().m2;
  law.regimes_ = l;
  law.grid_ = model.grid();
  law.cone1_ = ConeSpec::full(law.m1_);
  law.cone2_ = ConeSpec::full(law.m2_);
  law.linear_.reserve(static_cast<size_t>(model.grid().nodes()) * l);
  for (int k = 0; k < model.grid().nodes(); ++k) {
    for (int i = 0; i < l; ++i) {
      const double f = phi ? phi->phi[k][i] : 0.0;
      const HamiltonianEval e = assemble(sre->P[k][i], sre->Lambda[k][i], f,
                                         phi ? phi->Delta[k][i] : zero, model.at(k, i));
      const auto R11 = e.Rhat11.ldlt();
      const auto R22 = e.Rhat22.ldlt();
      const auto T11 = e.Rtilde11.ldlt();
      const auto T22 = e.Rtilde22.ldlt();
      FeedbackLaw::LinearGains g;
      g.K1 = -T11.solve(e.Chat1 - e.Rhat12 * R22.solve(e.Chat2));
      g.h1 = -T11.solve(e.sigmahat1 - e.Rhat12 * R22.solve(e.sigmahat2));
      g.Mb = -R22.solve(Mat(e.Rhat12.transpose()));
      g.kb = -R22.solve(e.Chat2);
      g.hb = -R22.solve(e.sigmahat2);
      g.K2 = -T22.solve(e.Chat2 - e.Rhat12.transpose() * R11.solve(e.Chat1));
      g.h2 = -T22.solve(e.sigmahat2 - e.Rhat12.transpose() * R11.solve(e.sigmahat1));
      g.Ma = -R11.solve(e.Rhat12);
      g.ka = -R11.solve(e.Chat1);
      g.ha = -R11.solve(e.sigmahat1);
      g.Rhat11 = e.Rhat11;
      g.Rhat22 = e.Rhat22;
      g.Rtilde11 = e.Rtilde11;
      g.Rtilde22 = e.Rtilde22;
      law.linear_.push_back(std::move(g));
    }
  }
  return law;
}

FeedbackLaw build_constrained_feedback(const GameModel& model, const SRESolution* P1,
                                       const SRESolution* P2) {
  if (!P1 || !P2)
    fail(ErrorCode::MissingSolution, "constrained laws need both P1 and P2");
  if (!(P1->grid == model.grid()) || !(P2->grid == model.grid()))
    fail(ErrorCode::GridMismatch, "solution grid differs from the model grid");
  check_sim_dims(model.dims());
  const int l = model.regime_count();

  FeedbackLaw law;
  law.kind_ = LawKind::Constrained;
  law.m1_ = model.dims().m1;
  law.m2_ = model.dims().m2;
  law.regimes_ = l;
  law.grid_ = model.grid();
  law.cone1_ = model.cone1();
  law.cone2_ = model.cone2();
  ConstrainedOptions co;
  co.certify = false;
  auto make_side = [&](const SRESolution& s, int k, int i, bool positive) {
    const auto& c = model.at(k, i);
    const Vec& lam = s.Lambda[k][i];
    const ConstrainedHamiltonianEval e =
        constrained_eval(s.P[k][i], lam, model.cone1(), model.cone2(), c, co);
    const HamiltonianEval h = assemble(s.P[k][i], lam, 0.0, Vec::Zero(lam.size()), c);
    FeedbackLaw::ConeSide side;
    side.game = positive ? cone_game(h) : cone_game(h).flipped();
    side.v1 = positive ? e.vhat11 : e.vhat12;
    side.v2 = positive ? e.vhat21 : e.vhat22;
    side.Q11 = side.game.Q11;
    side.Q12 = side.game.Q12;
    side.Q22 = side.game.Q22;
    side.c1 = side.game.c1;
    side.c2 = side.game.c2;
    side.Htilde = positive ? e.Htilde1 : e.Htilde2;
    return side;
  };
  for (int k = 0; k < model.grid().nodes(); ++k) {
    for (int i = 0; i < l; ++i) {
      law.plus_.push_back(make_side(*P1, k, i, true));
      law.minus_.push_back(make_side(*P2, k, i, false));
    }
  }
  return law;
}

// ---------------------------------------------------------------- simulation

std::vector<PolicyEstimate> estimate_objective(const GameModel& model, const FeedbackLaw* law,
                                               const std::vector<Policy>& policies,
                                               const PathBundle& bundle, const MCOptions& opt) {
  if (policies.empty()) fail(ErrorCode::InvalidArgument, "no policies to simulate");
  const Engine eng(model, law, bundle);
  std::vector<PreparedPolicy> prep;
  for (const auto& p : policies) prep.push_back(eng.prepare(p));
  const std::int64_t M = bundle.size();
  const size_t np = policies.size();
  std::vector<double> J(static_cast<size_t>(M) * np), A(static_cast<size_t>(M) * np);
  const double x0 = model.x0();

  for_each_path(bundle, opt.workers, [&](std::int64_t m, const PathBuffer& buf) {
    for (size_t p = 0; p < np; ++p) {
      const auto r = eng.run(prep[p], buf, x0);
      J[static_cast<size_t>(m) * np + p] = r.first;
      A[static_cast<size_t>(m) * np + p] = r.second;
    }
  });

  std::vector<PolicyEstimate> out(np);
  for (size_t p = 0; p < np; ++p) {
    auto idx = [&](std::int64_t m) { return static_cast<size_t>(m) * np + p; };
    PolicyEstimate& e = out[p];
    e.label = policies[p].label;
    e.paths = M;
    const Moments mj = moments(M, [&](std::int64_t m) { return J[idx(m)]; });
    const Moments ma = moments(M, [&](std::int64_t m) { return A[idx(m)]; });
    const Moments md = moments(M, [&](std::int64_t m) { return J[idx(m)] - J[static_cast<size_t>(m) * np]; });
    e.J = mj.mean;
    e.J_stderr = mj.stderr_;
    e.aux = ma.mean;
    e.aux_stderr = ma.stderr_;
    e.diff = md.mean;
    e.diff_stderr = md.stderr_;
    if (std::isfinite(opt.reference)) {
      const Moments mr = moments(M, [&](std::int64_t m) { return J[idx(m)] - opt.reference - A[idx(m)]; });
      e.residual = mr.mean;
      e.residual_stderr = mr.stderr_;
    } else {
      e.residual = std::numeric_limits<double>::quiet_NaN();
      e.residual_stderr = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

Mat simulate_closed_loop(const GameModel& model, const FeedbackLaw* law, const Policy& policy,
                         const PathBundle& bundle) {
  const Engine eng(model, law, bundle);
  const PreparedPolicy p = eng.prepare(policy);
  Mat X(bundle.size(), model.grid().nodes());
  PathBuffer buf;
  std::vector<double> row;
  for (std::int64_t m = 0; m < bundle.size(); ++m) {
    bundle.fill(m, buf);
    row.clear();
    Recorder rec;
    rec.X = &row;
    eng.run(p, buf, model.x0(), rec);
    for (size_t k = 0; k < row.size(); ++k) X(m, static_cast<Eigen::Index>(k)) = row[k];
  }
  return X;
}

std::vector<PathTrace> trace_paths(const GameModel& model, const FeedbackLaw* law,
                                   const Policy& policy, const PathBundle& bundle, int count) {
  const Engine eng(model, law, bundle);
  const PreparedPolicy p = eng.prepare(policy);
  std::vector<PathTrace> out;
  PathBuffer buf;
  for (std::int64_t m = 0; m < std::min<std::int64_t>(count, bundle.size()); ++m) {
    bundle.fill(m, buf);
    PathTrace tr;
    Recorder rec;
    rec.trace = &tr;
    eng.run(p, buf, model.x0(), rec);
    out.push_back(std::move(tr));
  }
  return out;
}

// ---------------------------------------------------------------- value formulas

double value_formula(const GameModel& model, const SRESolution& sre, const PhiSolution& phi,
                     const TimeGrid& grid) {
  if (!(grid == model.grid()) || !(sre.grid == grid) || !(phi.grid == grid))
    fail(ErrorCode::GridMismatch, "value formula grids differ");
  if (model.mode() != CoefficientMode::DeterministicPerRegime)
    fail(ErrorCode::InvalidArgument, "value formula needs deterministic coefficients");
  const int l = model.regime_count();
  const int N = grid.steps;
  const double h = grid.dt();
  const Vec zero = Vec::Zero(model.dims().n);
  const auto& q = model.regimes();
  const std::vector<Vec> p = regime_marginals(q, model.i0(), grid);

  auto derivatives = [&](int node, const Vec& P, const Vec& f, Vec& dP, Vec& df) {
    dP.resize(l);
    df.resize(l);
    for (int i = 0; i < l; ++i) {
      const auto& c = model.at(node, i);
      const HamiltonianEval e = assemble(P(i), zero, f(i), zero, c);
      double vp = c.K + P(i) * (2.0 * c.A + c.C.squaredNorm()) + e.H1;
      double vf = P(i) * (c.b + c.C.dot(c.sigma)) + c.A * f(i) + e.H2;
      for (int j = 0; j < l; ++j) {
        vp += q.rate(i, j) * P(j);
        vf += q.rate(i, j) * f(j);
      }
      dP(i) = -vp;
      df(i) = -vf;
    }
  };
  auto integrand = [&](int node, const Vec& P, const Vec& f, const Vec& prob) {
    double s = 0.0;
    for (int i = 0; i < l; ++i) {
      const auto& c = model.at(node, i);
      const HamiltonianEval e = assemble(P(i), zero, f(i), zero, c);
      s += prob(i) * (P(i) * c.sigma.squaredNorm() + 2.0 * f(i) * c.b + e.H3);
    }
    return s;
  };

  double integral = 0.0;
  Vec P0(l), P1(l), f0(l), f1(l), dP0, dP1, df0, df1;
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < l; ++i) {
      P0(i) = sre.P[k][i];
      P1(i) = sre.P[k + 1][i];
      f0(i) = phi.phi[k][i];
      f1(i) = phi.phi[k + 1][i];
    }
    derivatives(k, P0, f0, dP0, df0);
    derivatives(k, P1, f1, dP1, df1);
    const Vec Pm = 0.5 * (P0 + P1) + h / 8.0 * (dP0 - dP1);
    const Vec fm = 0.5 * (f0 + f1) + h / 8.0 * (df0 - df1);
    integral += h / 6.0 *
                (integrand(k, P0, f0, p[2 * k]) + 4.0 * integrand(k, Pm, fm, p[2 * k + 1]) +
                 integrand(k, P1, f1, p[2 * k + 2]));
  }
  const double x = model.x0();
  const int i0 = model.i0();
  return sre.P[0][i0] * x * x + 2.0 * phi.phi[0][i0] * x + integral;
}

double constrained_value(const GameModel& model, const SRESolution& P1, const SRESolution& P2) {
  const double x = model.x0();
  const double xp = std::max(x, 0.0), xm = std::max(-x, 0.0);
  return P1.P[0][model.i0()] * xp * xp + P2.P[0][model.i0()] * xm * xm;
}

// ---------------------------------------------------------------- diagnostics

std::vector<Perturbation> random_perturbations(const GameModel& model, int per_target,
                                               double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  auto draw = [&](int dim) {
    Vec v(dim);
    for (int j = 0; j < dim; ++j) v(j) = u(rng);
    return v;
  };
  std::vector<Perturbation> out;
  for (int t = 0; t < 2; ++t) {
    const int dim = t == 0 ? model.dims().m1 : model.dims().m2;
    for (int j = 0; j < per_target; ++j) {
      Perturbation p;
      p.target = t == 0 ? Perturbation::Target::U1 : Perturbation::Target::Beta2;
      p.a = draw(dim);
      p.c = draw(dim);
      out.push_back(std::move(p));
    }
  }
  return out;
}

SimulationReport saddle_check(const GameModel& model, const FeedbackLaw& law, double V,
                              const PathBundle& bundle,
                              const std::vector<Perturbation>& perturbations,
                              const MCOptions& opt) {
  std::vector<Policy> policies(1);
  policies[0].label = "optimal";
  const Perturbation* first_u1 = nullptr;
  const Perturbation* first_b2 = nullptr;
  int nu = 0, nb = 0;
  for (const auto& pert : perturbations) {
    Policy p;
    if (pert.target == Perturbation::Target::U1) {
      p.a1 = pert.a;
      p.c1 = pert.c;
      p.label = "u1 perturbation " + std::to_string(++nu);
      if (!first_u1) first_u1 = &pert;
    } else {
      p.a2 = pert.a;
      p.c2 = pert.c;
      p.label = "beta2 perturbation " + std::to_string(++nb);
      if (!first_b2) first_b2 = &pert;
    }
    policies.push_back(std::move(p));
  }
  if (first_u1 || first_b2) {
    Policy mixed;
    mixed.label = "mixed perturbation";
    if (first_u1) {
      mixed.a1 = first_u1->a;
      mixed.c1 = first_u1->c;
    }
    if (first_b2) {
      mixed.a2 = first_b2->a;
      mixed.c2 = first_b2->c;
    }
    policies.push_back(std::move(mixed));
  }
  MCOptions o = opt;
  o.reference = V;
  const auto est = estimate_objective(model, &law, policies, bundle, o);

  SimulationReport r;
  r.J = est[0].J;
  r.J_stderr = est[0].J_stderr;
  r.paths = bundle.size();
  r.V = V;
  r.policies = est;
  r.verdicts.push_back(make_verdict("value", est[0].J, V, est[0].J_stderr, 0, opt));
  for (size_t p = 1; p <= perturbations.size(); ++p) {
    const bool u1 = perturbations[p - 1].target == Perturbation::Target::U1;
    r.verdicts.push_back(
        make_verdict(est[p].label, est[p].diff, 0.0, est[p].diff_stderr, u1 ? +1 : -1, opt));
  }
  const PolicyEstimate& res = est.back();
  r.residual = res.residual;
  r.residual_stderr = res.residual_stderr;
  r.verdicts.push_back(make_verdict("completing-square residual", res.residual, 0.0,
                                    res.residual_stderr, 0, opt));
  finalize(r);
  return r;
}

SimulationReport constrained_check(const GameModel& model, const FeedbackLaw& law, double V,
                                   const PathBundle& bundle, const MCOptions& opt) {
  if (law.kind() != LawKind::Constrained)
    fail(ErrorCode::InvalidArgument, "constrained check needs constrained laws");
  std::vector<Policy> policies(1);
  policies[0].label = "optimal";
  MCOptions o = opt;
  o.reference = V;
  const auto est = estimate_objective(model, &law, policies, bundle, o);
  SimulationReport r;
  r.J = est[0].J;
  r.J_stderr = est[0].J_stderr;
  r.paths = bundle.size();
  r.V = V;
  r.policies = est;
  r.residual = est[0].aux;
  r.residual_stderr = est[0].aux_stderr;
  r.verdicts.push_back(make_verdict("value", est[0].J, V, est[0].J_stderr, 0, opt));
  r.verdicts.push_back(make_verdict("cone identity residual", est[0].aux, 0.0, est[0].aux_stderr, 0, opt));
  finalize(r);
  return r;
}

std::string SimulationReport::to_text() const {
  std::ostringstream os;
  os << "paths: " << paths << "\n";
  os << "J: " << fmt(J) << "\n";
  os << "J_stderr: " << fmt(J_stderr) << "\n";
  os << "V: " << fmt(V) << "\n";
  os << "residual: " << fmt(residual) << "\n";
  os << "residual_stderr: " << fmt(residual_stderr) << "\n";
  os << "policies:\n";
  for (const auto& p : policies) {
    os << "  - label: " << p.label << "\n";
    os << "    J: " << fmt(p.J) << "\n";
    os << "    J_stderr: " << fmt(p.J_stderr) << "\n";
    os << "    diff: " << fmt(p.diff) << "\n";
    os << "    diff_stderr: " << fmt(p.diff_stderr) << "\n";
    os << "    aux: " << fmt(p.aux) << "\n";
    os << "    aux_stderr: " << fmt(p.aux_stderr) << "\n";
  }
  os << "verdicts:\n";
  for (const auto& v : verdicts) {
    os << "  - name: " << v.name << "\n";
    os << "    estimate: " << fmt(v.estimate) << "\n";
    os << "    reference: " << fmt(v.reference) << "\n";
    os << "    stderr: " << fmt(v.stderr_) << "\n";
    os << "    soft: " << (v.soft_ok ? "pass" : "fail") << "\n";
    os << "    hard: " << (v.hard_ok ? "pass" : "fail") << "\n";
  }
  os << "soft_ok: " << (soft_ok ? "true" : "false") << "\n";
  os << "hard_failed: " << (hard_failed ? "true" : "false") << "\n";
  return os.str();
}

ConsistencyResult consistency_check(const FeedbackLaw& law, int samples, double xscale,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> node(0, law.grid().steps);
  std::uniform_int_distribution<int> regime(0, law.regimes() - 1);
  std::uniform_real_distribution<double> xs(-xscale, xscale);
  ConsistencyResult r;
  r.samples = samples;
  SVec u1, u2, b1, b2;
  for (int s = 0; s < samples; ++s) {
    const int k = node(rng), i = regime(rng);
    const double x = xs(rng);
    law.u1star(k, i, x, u1);
    law.u2star(k, i, x, u2);
    law.beta1(k, i, x, u2, b1);
    law.beta2(k, i, x, u1, b2);
    r.max_u1_gap = std::max(r.max_u1_gap, (u1 - b1).norm());
    r.max_u2_gap = std::max(r.max_u2_gap, (u2 - b2).norm());
  }
  return r;
}

double law_distance(const FeedbackLaw& a, const FeedbackLaw& b, int samples, double xscale,
                    std::uint64_t seed) {
  if (!(a.grid() == b.grid()) || a.regimes() != b.regimes())
    fail(ErrorCode::GridMismatch, "laws live on different grids");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> node(0, a.grid().steps);
  std::uniform_int_distribution<int> regime(0, a.regimes() - 1);
  std::uniform_real_distribution<double> xs(-xscale, xscale);
  double worst = 0.0;
  SVec ua, ub, va, vb, ba, bb;
  for (int s = 0; s < samples; ++s) {
    const int k = node(rng), i = regime(rng);
    const double x = xs(rng);
    a.u1star(k, i, x, ua);
    b.u1star(k, i, x, ub);
    a.u2star(k, i, x, va);
    b.u2star(k, i, x, vb);
    a.beta2(k, i, x, ua, ba);
    b.beta2(k, i, x, ua, bb);
    worst = std::max({worst, (ua - ub).norm(), (va - vb).norm(), (ba - bb).norm()});
  }
  return worst;
}

}  // namespace sregame
