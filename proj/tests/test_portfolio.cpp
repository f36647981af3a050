#include <cmath>
#include <random>

#include "doctest.h"
#include "sregame/game_engine.hpp"
#include "sregame/portfolio.hpp"
#include "support.hpp"

using namespace sregame;
using namespace sgtest;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

MarketPoint point(double r, double mu1, double mu2, Vec s1, Vec s2, double R1 = 0.05,
                  double R2 = 0.05) {
  MarketPoint m;
  m.r = r;
  m.mu1 = mu1;
  m.mu2 = mu2;
  m.sigma1 = std::move(s1);
  m.sigma2 = std::move(s2);
  m.R1 = R1;
  m.R2 = R2;
  return m;
}

MarketSpec market(ShortConstraint c, double y1, double y2, int steps = 100,
                  Vec s1 = v2(0.05, 0.0)) {
  const MarketPoint a = point(0.02, 0.05, 0.05, s1, v2(0.0, 0.05));
  const MarketPoint b = point(0.02, 0.045, 0.055, s1, v2(0.0, 0.05));
  return constant_market(RegimeGenerator(two_state(0.5)), TimeGrid(1.0, steps), {a, b}, y1, y2, 0,
                         c);
}

double max_dev(const SRESolution& a, const SRESolution& b) {
  double d = 0.0;
  for (size_t k = 0; k < a.P.size(); ++k)
    for (size_t i = 0; i < a.P[k].size(); ++i) d = std::max(d, std::abs(a.P[k][i] - b.P[k][i]));
  return d;
}

}  // namespace

TEST_CASE("market constants") {
  const MarketPoint p = point(0.02, 0.05, 0.05, v2(0.2, 0.0), v2(0.0, 0.2));
  const MarketSpec m = constant_market(RegimeGenerator(Mat::Zero(1, 1)), TimeGrid(1.0, 10), {p},
                                       1.0, 1.0, 0, ShortConstraint::None);
  const MarketConstants c = market_constants(m);
  CHECK(c.mutilde == doctest::Approx(0.0009).epsilon(1e-14));
  CHECK(c.sigbar == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(c.sigunder == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(c.qtilde == 0.0);
  CHECK(c.eps2 == doctest::Approx(1.0305400645010467).epsilon(1e-13));
  CHECK(c.eps1 == doctest::Approx(0.003785142408170526).epsilon(1e-13));
  CHECK(c.cond4);

  MarketSpec t = m;
  t.table[4][0].r = 0.03;
  CHECK(market_constants(t).rtilde == 0.03);

  CHECK(market_constants(market(ShortConstraint::None, 1.0, 1.0)).eps2 ==
        doctest::Approx(2.372654382507542).epsilon(1e-13));
}

TEST_CASE("mapped game") {
  const MarketSpec mk = market(ShortConstraint::Short1, 1.2, 1.0);
  const GameModel g = to_game(mk);
  CHECK(g.homogeneous());
  CHECK(g.x0() == doctest::Approx(0.2));
  for (double G : g.G()) CHECK(G == -0.25);
  CHECK(g.cone1().kind() == ConeKind::NonNegOrthant);
  CHECK(g.cone2().is_full());
  const GameModel z = to_game(market(ShortConstraint::None, 1.0, 1.0));
  CHECK(z.x0() == 0.0);
  const SRESolution s = solve_sre(z);
  CHECK(value_formula(z, s, solve_linear_bsde(z, s, z.grid()), z.grid()) == 0.0);
}

TEST_CASE("greeks") {
  const MarketPoint m = point(0.02, 0.06, 0.05, v2(0.2, 0.05), v2(0.03, 0.25), 0.3, 0.4);
  const PortfolioGreeks g0 = greeks(0.0, v2(0.0, 0.0), m);
  CHECK(g0.Phi1 == 0.0);
  CHECK(g0.Phi2 == 0.0);
  CHECK(g0.Psi1 == -0.3);
  CHECK(g0.Psi2 == 0.4);
  CHECK(g0.Psi3 == 0.0);
  CHECK(g0.Theta == doctest::Approx(-0.12));
  CHECK(g0.Upsilon == 0.0);
  for (int v = 1; v <= 4; ++v) CHECK(gtilde(v, 0.0, v2(0.0, 0.0), m) == 0.0);
  const MarketPoint u = point(0.02, 0.06, 0.05, v2(0.2, 0.0), v2(0.0, 0.25), 0.3, 0.4);
  for (int v = 5; v <= 6; ++v) CHECK(gtilde(v, 0.0, v2(0.0, 0.0), u) == 0.0);

  const PortfolioGreeks gu = greeks(-0.2, v2(0.1, -0.05), u);
  CHECK(gu.Psi3 == 0.0);
  CHECK(gu.Upsilon1 == doctest::Approx(gu.Psi2 * gu.Phi1).epsilon(1e-15));
  CHECK(gu.Upsilon2 == doctest::Approx(gu.Psi1 * gu.Phi2).epsilon(1e-15));

  CHECK_THROWS_AS(greeks(10.0, v2(0.0, 0.0), m, true), Error);
}

TEST_CASE("unconstrained generator is the general Hamiltonian") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const MarketPoint m = point(0.02 + 0.02 * u(rng), 0.05 + 0.03 * u(rng), 0.05 + 0.03 * u(rng),
                                v2(0.2 + 0.05 * u(rng), 0.05 * u(rng)),
                                v2(0.05 * u(rng), 0.2 + 0.05 * u(rng)), 0.3, 0.3);
    const MarketSpec mk = constant_market(RegimeGenerator(Mat::Zero(1, 1)), TimeGrid(1.0, 2), {m},
                                          1.0, 1.0, 0, ShortConstraint::None);
    const GameModel g = to_game(mk);
    const double P = 0.5 * u(rng);
    const Vec L = v2(0.1 * u(rng), 0.1 * u(rng));
    const PortfolioGreeks k = greeks(P, L, m);
    const HamiltonianEval h = assemble(P, L, 0.0, Vec::Zero(2), g.at(0, 0));
    CHECK(-k.Upsilon / k.Theta == doctest::Approx(h.H1).epsilon(1e-10));

    // Orthant on player 1 only: the sign-split generators against the cone solver.
    const ConeSpec o = ConeSpec::orthant(1), f = ConeSpec::full(1);
    const auto e1 = constrained_eval(P, L, o, f, g.at(0, 0));
    CHECK(gtilde(1, P, L, m) == doctest::Approx(e1.Htilde1).epsilon(1e-10).scale(1e-6));
    CHECK(gtilde(2, P, L, m) == doctest::Approx(e1.Htilde2).epsilon(1e-10).scale(1e-6));
    const auto e2 = constrained_eval(P, L, f, o, g.at(0, 0));
    CHECK(gtilde(3, P, L, m) == doctest::Approx(e2.Htilde1).epsilon(1e-10).scale(1e-6));
    CHECK(gtilde(4, P, L, m) == doctest::Approx(e2.Htilde2).epsilon(1e-10).scale(1e-6));
    if (k.Upsilon1 >= 0.0) CHECK(gtilde(1, P, L, m) == doctest::Approx(h.H1).epsilon(1e-10));
    if (k.Upsilon1 >= 0.0)
      CHECK(gtilde(2, P, L, m) == doctest::Approx(-k.Phi2 * k.Phi2 / k.Psi2).epsilon(1e-10));
  }
}

TEST_CASE("both-no-short generator") {
  const MarketPoint m = point(0.02, 0.05, 0.07, v2(0.2, 0.0), v2(0.0, 0.25), 0.3, 0.3);
  const MarketSpec mk = constant_market(RegimeGenerator(Mat::Zero(1, 1)), TimeGrid(1.0, 2), {m},
                                        1.0, 1.0, 0, ShortConstraint::BothNoShort);
  const GameModel g = to_game(mk);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const double P = 0.5 * u(rng);
    const Vec L = v2(0.1 * u(rng), 0.1 * u(rng));
    const auto e = constrained_eval(P, L, g.cone1(), g.cone2(), g.at(0, 0));
    CHECK(gtilde(5, P, L, m) == doctest::Approx(e.Htilde1).epsilon(1e-10).scale(1e-6));
    CHECK(gtilde(6, P, L, m) == doctest::Approx(e.Htilde2).epsilon(1e-10).scale(1e-6));
    const PortfolioGreeks k = greeks(P, L, m);
    if (k.Phi1 <= 0.0 && k.Phi2 >= 0.0) CHECK(gtilde(5, P, L, m) == 0.0);
  }
  const MarketPoint c = point(0.02, 0.05, 0.07, v2(0.2, 0.1), v2(0.0, 0.25), 0.3, 0.3);
  CHECK_THROWS_AS(gtilde(5, 0.1, v2(0.0, 0.0), c), Error);
}

TEST_CASE("specialized solves match the generic solver") {
  for (auto c : {ShortConstraint::None, ShortConstraint::Short1, ShortConstraint::Short2,
                 ShortConstraint::BothNoShort}) {
    CAPTURE(constraint_name(c));
    const MarketSpec mk = market(c, 1.3, 1.0);
    const PortfolioSolution sol = solve_portfolio(mk);
    const GameModel g = to_game(mk);
    CHECK(sol.eps2_ok);
    if (c == ShortConstraint::None) {
      const SRESolution s = solve_sre(g);
      CHECK(max_dev(sol.Pa, s) <= 1e-9);
      const PhiSolution p = solve_linear_bsde(g, s, g.grid());
      for (const auto& row : p.phi)
        for (double v : row) CHECK(v == 0.0);
      CHECK(sol.V == doctest::Approx(s.P[0][0] * 0.09).epsilon(1e-12));
    } else {
      const auto pr = solve_sre_constrained(g, g.grid());
      CHECK(max_dev(sol.Pa, pr.first) <= 1e-8);
      CHECK(max_dev(sol.Pb, pr.second) <= 1e-8);
    }
    for (int i = 0; i < 2; ++i) CHECK(sol.Pa.P[100][i] == -0.25);
  }
  const MarketSpec bad = market(ShortConstraint::BothNoShort, 1.3, 1.0, 100, v2(0.05, 0.01));
  try {
    solve_portfolio(bad);
    FAIL("expected ConditionRequired");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConditionRequired);
  }
}

TEST_CASE("portfolio feedback") {
  SUBCASE("uncorrelated stocks decouple the strategies") {
    const MarketSpec mk = market(ShortConstraint::None, 1.3, 1.0);
    const PortfolioSolution sol = solve_portfolio(mk);
    const PortfolioLaw law(mk, &sol.Pa, nullptr);
    for (double p : {-1.0, 0.0, 2.0}) {
      CHECK(law.beta2(10, 0, 0.4, p) == law.beta2(10, 0, 0.4, 0.0));
      CHECK(law.beta1(10, 1, 0.4, p) == law.beta1(10, 1, 0.4, 0.0));
    }
    CHECK(law.pi1(0, 0, 0.0) == 0.0);
    CHECK(law.pi2(0, 0, 0.0) == 0.0);
  }
  SUBCASE("no-short strategies stay nonnegative in simulation") {
    for (double y1 : {1.3, 0.7}) {
      const MarketSpec mk = market(ShortConstraint::BothNoShort, y1, 1.0, 50);
      const PortfolioSolution sol = solve_portfolio(mk);
      const GameModel g = to_game(mk);
      const PortfolioSimulation s = simulate_portfolio(mk, sol, PathBundle(g, g.grid(), 500, 4));
      CHECK(s.min_pi1 >= 0.0);
      CHECK(s.min_pi2 >= 0.0);
      CHECK(s.max_consistency_gap <= 1e-12);
    }
  }
  SUBCASE("zero wealth gap stays at zero") {
    const MarketSpec mk = market(ShortConstraint::None, 1.0, 1.0, 20);
    const PortfolioSolution sol = solve_portfolio(mk);
    const GameModel g = to_game(mk);
    const PortfolioSimulation s = simulate_portfolio(mk, sol, PathBundle(g, g.grid(), 50, 4));
    CHECK(sol.V == 0.0);
    CHECK(s.J == 0.0);
  }
}
