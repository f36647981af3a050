#include "sregame/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sregame {

namespace {

double pos(double v) { return v > 0.0 ? v : 0.0; }
double neg(double v) { return v < 0.0 ? -v : 0.0; }

constexpr double kCorrelationTol = 1e-14;

}  // namespace

const char* constraint_name(ShortConstraint c) {
  switch (c) {
    case ShortConstraint::None: return "none";
    case ShortConstraint::Short1: return "short1";
    case ShortConstraint::Short2: return "short2";
    case ShortConstraint::BothNoShort: return "both";
  }
  return "none";
}

ShortConstraint parse_constraint(const std::string& s) {
  if (s == "none") return ShortConstraint::None;
  if (s == "short1") return ShortConstraint::Short1;
  if (s == "short2") return ShortConstraint::Short2;
  if (s == "both") return ShortConstraint::BothNoShort;
  fail(ErrorCode::ConfigError, "unknown portfolio constraint '" + s + "'");
}

void MarketSpec::validate() const {
  const int l = regimes.count();
  if (static_cast<int>(table.size()) != grid.nodes())
    fail(ErrorCode::DimensionMismatch, "market table needs N+1 nodes");
  if (i0 < 0 || i0 >= l) fail(ErrorCode::DimensionMismatch, "initial regime out of range");
  for (const auto& row : table) {
    if (static_cast<int>(row.size()) != l)
      fail(ErrorCode::DimensionMismatch, "market table needs one entry per regime");
    for (const auto& m : row) {
      if (m.sigma1.size() != 2 || m.sigma2.size() != 2)
        fail(ErrorCode::DimensionMismatch, "stock volatilities must be 2-vectors");
      if (!(m.R1 > 0.0) || !(m.R2 > 0.0))
        fail(ErrorCode::NonPositiveScale, "risk weights must be positive");
      if (!std::isfinite(m.r) || !std::isfinite(m.mu1) || !std::isfinite(m.mu2) ||
          !m.sigma1.allFinite() || !m.sigma2.allFinite())
        fail(ErrorCode::NonFinite, "market data must be finite");
    }
  }
}

MarketSpec constant_market(const RegimeGenerator& regimes, const TimeGrid& grid,
                           const std::vector<MarketPoint>& per_regime, double y1, double y2,
                           int i0, ShortConstraint constraint) {
  if (static_cast<int>(per_regime.size()) != regimes.count())
    fail(ErrorCode::DimensionMismatch, "one market point per regime required");
  MarketSpec m;
  m.regimes = regimes;
  m.grid = grid;
  m.table.assign(grid.nodes(), per_regime);
  m.y1 = y1;
  m.y2 = y2;
  m.i0 = i0;
  m.constraint = constraint;
  m.validate();
  return m;
}

MarketConstants market_constants(const MarketSpec& market) {
  market.validate();
  const int l = market.regimes.count();
  const double T = market.grid.horizon;
  MarketConstants c;
  c.qtilde = market.regimes.max_entry();
  c.rtilde = -std::numeric_limits<double>::infinity();
  c.sigunder = std::numeric_limits<double>::infinity();
  c.cond4 = true;
  double Rmin = std::numeric_limits<double>::infinity();
  for (const auto& row : market.table) {
    for (const auto& m : row) {
      c.rtilde = std::max(c.rtilde, m.r);
      c.mutilde = std::max({c.mutilde, (m.mu1 - m.r) * (m.mu1 - m.r), (m.mu2 - m.r) * (m.mu2 - m.r)});
      const double s1 = m.sigma1.squaredNorm(), s2 = m.sigma2.squaredNorm();
      c.sigbar = std::max({c.sigbar, s1, s2});
      c.sigunder = std::min({c.sigunder, s1, s2});
      Rmin = std::min({Rmin, m.R1, m.R2});
      if (std::abs(m.sigma1.dot(m.sigma2)) > kCorrelationTol) c.cond4 = false;
    }
  }
  const double a = (2.0 * c.rtilde + c.qtilde) * l;
  const double E = expm1_ratio(a, T);  // (e^{aT} - 1) / a
  const double eT = std::exp(a * T);
  // eps1 = 2 mu (e^{aT}-1)[e^{aT}-1 + a e^{aT}] / a^2, eps2 = [e^{aT}-1 + a e^{aT}] / (2a)
  c.eps1 = 2.0 * c.mutilde * E * (E + eT);
  c.eps2 = 0.5 * (E + eT);
  c.cond1 = c.sigunder > 0.0;
  c.cond2 = Rmin > c.eps1 + c.sigbar * c.eps2;
  c.cond3 = 2.0 * c.sigbar < c.eps1;
  return c;
}

GameModel to_game(const MarketSpec& market) {
  market.validate();
  const Dimensions d{2, 1, 1};
  const int l = market.regimes.count();
  GameModel::Table table(market.grid.nodes(), std::vector<NodeCoefficients>(l));
  for (int k = 0; k < market.grid.nodes(); ++k) {
    for (int i = 0; i < l; ++i) {
      const MarketPoint& m = market.at(k, i);
      NodeCoefficients c = NodeCoefficients::zeros(d);
      c.A = m.r;
      c.B1(0) = m.mu1 - m.r;
      c.B2(0) = -(m.mu2 - m.r);
      c.D1.col(0) = m.sigma1;
      c.D2.col(0) = -m.sigma2;
      c.R11(0, 0) = -m.R1;
      c.R22(0, 0) = m.R2;
      table[k][i] = std::move(c);
    }
  }
  ConeSpec c1 = ConeSpec::full(1), c2 = ConeSpec::full(1);
  if (market.constraint == ShortConstraint::Short1 ||
      market.constraint == ShortConstraint::BothNoShort)
    c1 = ConeSpec::orthant(1);
  if (market.constraint == ShortConstraint::Short2 ||
      market.constraint == ShortConstraint::BothNoShort)
    c2 = ConeSpec::orthant(1);
  return GameModel(d, market.regimes, market.grid, std::move(table),
                   std::vector<double>(l, -0.25), market.y1 - market.y2, market.i0, c1, c2);
}

PortfolioGreeks greeks(double P, const Vec& Lambda, const MarketPoint& m, bool check_signs) {
  if (Lambda.size() != 2) fail(ErrorCode::DimensionMismatch, "Lambda must be a 2-vector");
  PortfolioGreeks g;
  g.Phi1 = P * (m.mu1 - m.r) + m.sigma1.dot(Lambda);
  g.Phi2 = -P * (m.mu2 - m.r) - m.sigma2.dot(Lambda);
  g.Psi1 = P * m.sigma1.squaredNorm() - m.R1;
  g.Psi2 = P * m.sigma2.squaredNorm() + m.R2;
  g.Psi3 = -P * m.sigma1.dot(m.sigma2);
  g.Theta = g.Psi1 * g.Psi2 - g.Psi3 * g.Psi3;
  g.Upsilon = g.Psi1 * g.Phi2 * g.Phi2 + g.Psi2 * g.Phi1 * g.Phi1 - 2.0 * g.Psi3 * g.Phi1 * g.Phi2;
  g.Upsilon1 = g.Psi2 * g.Phi1 - g.Psi3 * g.Phi2;
  g.Upsilon2 = g.Psi1 * g.Phi2 - g.Psi3 * g.Phi1;
  if (check_signs && !(g.Psi1 < 0.0 && g.Psi2 > 0.0 && g.Theta < 0.0))
    fail(ErrorCode::SignViolation, "Psi1 < 0, Psi2 > 0, Theta < 0 fails at P = " +
                                       std::to_string(P));
  return g;
}

double gtilde(int variant, double P, const Vec& Lambda, const MarketPoint& m) {
  const PortfolioGreeks g = greeks(P, Lambda, m);
  switch (variant) {
    case 1: {
      const double u = pos(g.Upsilon1);
      return (-u * u - g.Theta * g.Phi2 * g.Phi2) / (g.Theta * g.Psi2);
    }
    case 2: {
      const double u = neg(g.Upsilon1);
      return (-u * u - g.Theta * g.Phi2 * g.Phi2) / (g.Theta * g.Psi2);
    }
    case 3: {
      const double u = pos(g.Upsilon2);
      return (-u * u - g.Theta * g.Phi1 * g.Phi1) / (g.Theta * g.Psi1);
    }
    case 4: {
      const double u = neg(g.Upsilon2);
      return (-u * u - g.Theta * g.Phi1 * g.Phi1) / (g.Theta * g.Psi1);
    }
    case 5:
    case 6: {
      if (std::abs(g.Psi3) > kCorrelationTol)
        fail(ErrorCode::ConditionRequired, "both-no-short generator needs uncorrelated stocks");
      if (variant == 5) {
        const double a = pos(g.Phi1), b = neg(g.Phi2);
        return (a * a - 2.0 * g.Phi1 * a) / g.Psi1 + (b * b + 2.0 * g.Phi2 * b) / g.Psi2;
      }
      const double a = neg(g.Phi1), b = pos(g.Phi2);
      return (a * a + 2.0 * g.Phi1 * a) / g.Psi1 + (b * b - 2.0 * g.Phi2 * b) / g.Psi2;
    }
    default:
      fail(ErrorCode::InvalidArgument, "generator variant must be 1..6");
  }
}

// ---------------------------------------------------------------- feedback laws

PortfolioLaw::PortfolioLaw(const MarketSpec& market, const SRESolution* Pa, const SRESolution* Pb)
    : market_(&market), Pa_(Pa), Pb_(Pb), constraint_(market.constraint) {
  if (!Pa_) fail(ErrorCode::MissingSolution, "portfolio law needs a Riccati solution");
  if (constraint_ != ShortConstraint::None && !Pb_)
    fail(ErrorCode::MissingSolution, "no-short laws need both Riccati solutions");
}

PortfolioGreeks PortfolioLaw::g(int node, int i, bool first) const {
  const SRESolution& s = first ? *Pa_ : *Pb_;
  return greeks(s.P[node][i], s.Lambda[node][i], market_->at(node, i));
}

double PortfolioLaw::pi1(int node, int i, double x) const {
  const double xp = pos(x), xm = neg(x);
  switch (constraint_) {
    case ShortConstraint::None: {
      const auto a = g(node, i, true);
      return -a.Upsilon1 / a.Theta * x;
    }
    case ShortConstraint::Short1: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return -pos(a.Upsilon1) * xp / a.Theta - neg(b.Upsilon1) * xm / b.Theta;
    }
    case ShortConstraint::Short2: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return (a.Psi3 * pos(a.Upsilon2) - a.Phi1 * a.Theta) * xp / (a.Psi1 * a.Theta) +
             (b.Psi3 * neg(b.Upsilon2) + b.Phi1 * b.Theta) * xm / (b.Psi1 * b.Theta);
    }
    case ShortConstraint::BothNoShort: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return pos(a.Phi1) * xp / (-a.Psi1) + neg(b.Phi1) * xm / (-b.Psi1);
    }
  }
  return 0.0;
}

double PortfolioLaw::beta2(int node, int i, double x, double p1) const {
  const double xp = pos(x), xm = neg(x);
  const double ip = x > 0.0 ? 1.0 : 0.0, im = x < 0.0 ? 1.0 : 0.0;
  switch (constraint_) {
    case ShortConstraint::None: {
      const auto a = g(node, i, true);
      return -(a.Psi3 * p1 + a.Phi2 * x) / a.Psi2;
    }
    case ShortConstraint::Short1: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return -(a.Psi3 * p1 * ip + a.Phi2 * xp) / a.Psi2 - (b.Psi3 * p1 * im - b.Phi2 * xm) / b.Psi2;
    }
    case ShortConstraint::Short2: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return neg(a.Psi3 * p1 * ip + a.Phi2 * xp) / a.Psi2 +
             neg(b.Psi3 * p1 * im - b.Phi2 * xm) / b.Psi2;
    }
    case ShortConstraint::BothNoShort:
      return pi2(node, i, x);
  }
  return 0.0;
}

double PortfolioLaw::pi2(int node, int i, double x) const {
  const double xp = pos(x), xm = neg(x);
  switch (constraint_) {
    case ShortConstraint::None: {
      const auto a = g(node, i, true);
      return -a.Upsilon2 / a.Theta * x;
    }
    case ShortConstraint::Short1: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return (a.Psi3 * pos(a.Upsilon1) - a.Phi2 * a.Theta) * xp / (a.Psi2 * a.Theta) +
             (b.Psi3 * neg(b.Upsilon1) + b.Phi2 * b.Theta) * xm / (b.Psi2 * b.Theta);
    }
    case ShortConstraint::Short2: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return -pos(a.Upsilon2) * xp / a.Theta - neg(b.Upsilon2) * xm / b.Theta;
    }
    case ShortConstraint::BothNoShort: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return neg(a.Phi2) * xp / a.Psi2 + pos(b.Phi2) * xm / b.Psi2;
    }
  }
  return 0.0;
}

double PortfolioLaw::beta1(int node, int i, double x, double p2) const {
  const double xp = pos(x), xm = neg(x);
  const double ip = x > 0.0 ? 1.0 : 0.0, im = x < 0.0 ? 1.0 : 0.0;
  switch (constraint_) {
    case ShortConstraint::None: {
      const auto a = g(node, i, true);
      return -(a.Psi3 * p2 + a.Phi1 * x) / a.Psi1;
    }
    case ShortConstraint::Short1: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return -pos(a.Psi3 * p2 * ip + a.Phi1 * xp) / a.Psi1 -
             pos(b.Psi3 * p2 * im - b.Phi1 * xm) / b.Psi1;
    }
    case ShortConstraint::Short2: {
      const auto a = g(node, i, true), b = g(node, i, false);
      return -(a.Psi3 * p2 * ip + a.Phi1 * xp) / a.Psi1 - (b.Psi3 * p2 * im - b.Phi1 * xm) / b.Psi1;
    }
    case ShortConstraint::BothNoShort:
      return pi1(node, i, x);
  }
  return 0.0;
}

// ---------------------------------------------------------------- solver

PortfolioSolution solve_portfolio(const MarketSpec& market, const SolverOptions& opt) {
  market.validate();
  PortfolioSolution sol;
  sol.constraint = market.constraint;
  sol.constants = market_constants(market);
  if (market.constraint == ShortConstraint::BothNoShort && !sol.constants.cond4)
    fail(ErrorCode::ConditionRequired, "both-no-short portfolio needs uncorrelated stocks");
  const GameModel model = to_game(market);
  const int l = market.regimes.count();
  const auto& q = market.regimes;
  const Vec zero = Vec::Zero(2);
  const Vec terminal = Vec::Constant(l, -0.25);

  auto solve_with = [&](int variant) {
    auto F = [&](int node, const Vec& P, Vec& out) {
      out.resize(l);
      for (int i = 0; i < l; ++i) {
        const MarketPoint& m = market.at(node, i);
        double G;
        if (variant == 0) {
          const PortfolioGreeks g = greeks(P(i), zero, m);
          G = -g.Upsilon / g.Theta;
        } else {
          G = gtilde(variant, P(i), zero, m);
        }
        double v = 2.0 * P(i) * m.r + G;
        for (int j = 0; j < l; ++j) v += q.rate(i, j) * P(j);
        out(i) = v;
      }
    };
    SRESolution s = finish_solution(model, market.grid, integrate_backward(market.grid, terminal, F), opt);
    for (int i = 0; i < l; ++i) s.P[market.grid.steps][i] = -0.25;
    return s;
  };

  switch (market.constraint) {
    case ShortConstraint::None:
      sol.Pa = solve_with(0);
      break;
    case ShortConstraint::Short1:
      sol.Pa = solve_with(1);
      sol.Pb = solve_with(2);
      break;
    case ShortConstraint::Short2:
      sol.Pa = solve_with(3);
      sol.Pb = solve_with(4);
      break;
    case ShortConstraint::BothNoShort:
      sol.Pa = solve_with(5);
      sol.Pb = solve_with(6);
      break;
  }

  auto within = [&](const SRESolution& s) {
    for (const auto& row : s.P)
      for (double p : row)
        if (std::abs(p) > sol.constants.eps2 + opt.bound_tol) return false;
    return true;
  };
  sol.eps2_ok = within(sol.Pa) && (sol.Pb.P.empty() || within(sol.Pb));

  // Sign structure of the greeks along the solution when the conditions are claimed.
  if (sol.constants.basic_ok() && sol.eps2_ok) {
    for (int k = 0; k < market.grid.nodes(); ++k)
      for (int i = 0; i < l; ++i) {
        greeks(sol.Pa.P[k][i], zero, market.at(k, i), true);
        if (!sol.Pb.P.empty()) greeks(sol.Pb.P[k][i], zero, market.at(k, i), true);
      }
  }

  const double x = market.y1 - market.y2;
  if (market.constraint == ShortConstraint::None) {
    sol.V = sol.Pa.P[0][market.i0] * x * x;
  } else {
    const double xp = pos(x), xm = neg(x);
    sol.V = sol.Pa.P[0][market.i0] * xp * xp + sol.Pb.P[0][market.i0] * xm * xm;
  }
  return sol;
}

PortfolioSimulation simulate_portfolio(const MarketSpec& market, const PortfolioSolution& sol,
                                       const PathBundle& bundle, int workers) {
  if (!(bundle.grid() == market.grid)) fail(ErrorCode::GridMismatch, "path bundle grid differs");
  if (bundle.brownian_dim() != 2) fail(ErrorCode::DimensionMismatch, "market needs 2 Brownian motions");
  const PortfolioLaw law(market, &sol.Pa, sol.constraint == ShortConstraint::None ? nullptr : &sol.Pb);
  const int N = market.grid.steps;
  const double h = market.grid.dt();
  const double x0 = market.y1 - market.y2;
  const std::int64_t M = bundle.size();
  std::vector<double> J(M), min1(M), min2(M), gap(M);

  for_each_path(bundle, workers, [&](std::int64_t m, const PathBuffer& buf) {
    double x = x0, cost = 0.0, fprev = 0.0;
    double lo1 = std::numeric_limits<double>::infinity(), lo2 = lo1, worst = 0.0;
    for (int k = 0; k <= N; ++k) {
      const int i = buf.regime[k];
      const MarketPoint& mk = market.at(k, i);
      const double p1 = law.pi1(k, i, x);
      const double p2 = law.beta2(k, i, x, p1);
      // Player 2's pair at the same state, for feasibility and consistency.
      const double q2 = law.pi2(k, i, x);
      const double q1 = law.beta1(k, i, x, q2);
      lo1 = std::min({lo1, p1, q1});
      lo2 = std::min({lo2, p2, q2});
      worst = std::max({worst, std::abs(p2 - q2), std::abs(p1 - q1)});
      const double f = -mk.R1 * p1 * p1 + mk.R2 * p2 * p2;
      if (k > 0) cost += 0.5 * h * (fprev + f);
      if (k == N) {
        cost += -0.25 * x * x;
        break;
      }
      fprev = f;
      const double drift = mk.r * x + (mk.mu1 - mk.r) * p1 - (mk.mu2 - mk.r) * p2;
      double diff = 0.0;
      for (int j = 0; j < 2; ++j)
        diff += (mk.sigma1(j) * p1 - mk.sigma2(j) * p2) * buf.dW[static_cast<size_t>(k) * 2 + j];
      x += drift * h + diff;
      if (!std::isfinite(x)) fail(ErrorCode::NonFinite, "wealth gap became non-finite");
    }
    J[m] = cost;
    min1[m] = lo1;
    min2[m] = lo2;
    gap[m] = worst;
  });

  PortfolioSimulation out;
  out.paths = M;
  double s = 0.0;
  for (double v : J) s += v;
  out.J = s / static_cast<double>(M);
  double ss = 0.0;
  for (double v : J) ss += (v - out.J) * (v - out.J);
  out.J_stderr = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
  out.min_pi1 = *std::min_element(min1.begin(), min1.end());
  out.min_pi2 = *std::min_element(min2.begin(), min2.end());
  out.max_consistency_gap = *std::max_element(gap.begin(), gap.end());
  return out;
}

}  // namespace sregame
