#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sregame/game_engine.hpp"
#include "sregame/sre_solver.hpp"

namespace sregame {

enum class ShortConstraint { None, Short1, Short2, BothNoShort };

const char* constraint_name(ShortConstraint c);
ShortConstraint parse_constraint(const std::string& s);

/// Market data at one (time node, regime).
struct MarketPoint {
  double r = 0.0;
  double mu1 = 0.0, mu2 = 0.0;
  Vec sigma1 = Vec::Zero(2), sigma2 = Vec::Zero(2);
  double R1 = 1.0, R2 = 1.0;
};

struct MarketSpec {
  RegimeGenerator regimes;
  TimeGrid grid;
  std::vector<std::vector<MarketPoint>> table;  // [node][regime]
  double y1 = 1.0, y2 = 1.0;
  int i0 = 0;
  ShortConstraint constraint = ShortConstraint::None;

  const MarketPoint& at(int node, int regime) const { return table[node][regime]; }
  void validate() const;
};

MarketSpec constant_market(const RegimeGenerator& regimes, const TimeGrid& grid,
                           const std::vector<MarketPoint>& per_regime, double y1, double y2,
                           int i0, ShortConstraint constraint);

struct MarketConstants {
  double qtilde = 0.0, rtilde = 0.0, mutilde = 0.0, sigbar = 0.0, sigunder = 0.0;
  double eps1 = 0.0, eps2 = 0.0;
  bool cond1 = false, cond2 = false, cond3 = false, cond4 = false;

  bool basic_ok() const { return cond1 && cond2 && cond3; }
};

MarketConstants market_constants(const MarketSpec& market);

/// Wealth-gap game: A = r, B1 = mu1 - r, B2 = -(mu2 - r), D1 = sigma1', D2 = -sigma2',
/// R11 = -R1, R22 = R2, G = -1/4, x0 = y1 - y2, cones from the constraint.
GameModel to_game(const MarketSpec& market);

struct PortfolioGreeks {
  double Phi1 = 0.0, Phi2 = 0.0;
  double Psi1 = 0.0, Psi2 = 0.0, Psi3 = 0.0;
  double Theta = 0.0, Upsilon = 0.0, Upsilon1 = 0.0, Upsilon2 = 0.0;
};

/// With check_signs, raises SignViolation unless Psi1 < 0, Psi2 > 0 and Theta < 0.
PortfolioGreeks greeks(double P, const Vec& Lambda, const MarketPoint& m, bool check_signs = false);

/// Generators Gtilde_1..Gtilde_6 of the no-short Riccati pairs.
double gtilde(int variant, double P, const Vec& Lambda, const MarketPoint& m);

/// Feedback laws of the wealth-gap game for scalar portfolios.
class PortfolioLaw {
 public:
  PortfolioLaw(const MarketSpec& market, const SRESolution* Pa, const SRESolution* Pb);

  double pi1(int node, int i, double x) const;
  double beta2(int node, int i, double x, double pi1) const;
  double pi2(int node, int i, double x) const;
  double beta1(int node, int i, double x, double pi2) const;

  ShortConstraint constraint() const { return constraint_; }

 private:
  PortfolioGreeks g(int node, int i, bool first) const;

  const MarketSpec* market_;
  const SRESolution* Pa_;
  const SRESolution* Pb_;
  ShortConstraint constraint_;
};

struct PortfolioSolution {
  ShortConstraint constraint = ShortConstraint::None;
  MarketConstants constants;
  SRESolution Pa;   // P, P1, P3 or P5
  SRESolution Pb;   // P2, P4 or P6 (empty when unconstrained)
  bool eps2_ok = true;  // |P| <= eps2 at every node
  double V = 0.0;
};

/// Solves the specialized Riccati equation(s) and evaluates the value.
PortfolioSolution solve_portfolio(const MarketSpec& market, const SolverOptions& opt = {});

struct PortfolioSimulation {
  double J = 0.0, J_stderr = 0.0;
  std::int64_t paths = 0;
  double min_pi1 = 0.0, min_pi2 = 0.0;  // over every simulated step
  double max_consistency_gap = 0.0;     // |pi2* - beta2(pi1*)| and |pi1* - beta1(pi2*)|
};

/// Euler simulation of Player 1's optimal pair (pi1*, beta2) with the closed-form laws.
PortfolioSimulation simulate_portfolio(const MarketSpec& market, const PortfolioSolution& sol,
                                       const PathBundle& bundle, int workers = 1);

}  // namespace sregame
