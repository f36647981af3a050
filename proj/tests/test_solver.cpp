#include <cmath>
#include <cstdlib>
#include <random>

#include "doctest.h"
#include "sregame/cone.hpp"
#include "sregame/hamiltonian.hpp"
#include "sregame/paths.hpp"
#include "sregame/sre_solver.hpp"
#include "support.hpp"

using namespace sregame;
using namespace sgtest;

namespace {

double dense_h(const HamiltonianEval& h, const Vec& a, const Vec& b) {
  const Mat inv = h.Rhat.fullPivLu().inverse();
  return -a.dot(inv * b);
}

// Grid version of sup {Hhat1(P~, L~) - k|P - P~| - k|L - L~|} for n = 1.
double grid_envelope(int k, double P, double L, const NodeCoefficients& c,
                     const AssumptionReport& rep) {
  const double rho = truncation_radius(k, std::abs(L), rep);
  double best = -k * std::max(0.0, rep.epsbar - std::abs(P));
  const int NP = 801, NL = 201;
  for (int a = 0; a < NP; ++a) {
    const double Pt = -rep.epsbar + 2.0 * rep.epsbar * a / (NP - 1);
    for (int b = 0; b < NL; ++b) {
      const double Lt = L - rho + 2.0 * rho * b / (NL - 1);
      const double v = h1_value(Pt, vec1(Lt), c) - k * std::abs(P - Pt) - k * std::abs(L - Lt);
      best = std::max(best, v);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("Hamiltonian vanishes without forcing") {
  const auto c = scalar_coeffs(0.3, 0.0, 0.0, 0.0, 0.2, 0.2, 1.0, -5.0, 5.0);
  const HamiltonianEval h = assemble(0.0, vec1(0.0), 0.0, vec1(0.0), c);
  CHECK(h.Chat.norm() == 0.0);
  CHECK(h.sigmahat.norm() == 0.0);
  CHECK(h.H1 == 0.0);
  CHECK(h.H2 == 0.0);
  CHECK(h.H3 == 0.0);
}

TEST_CASE("Hamiltonian hand example") {
  const auto c = scalar_coeffs(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, -5.0, 5.0);
  const HamiltonianEval h = assemble(0.0, vec1(1.0), 0.0, vec1(0.0), c);
  CHECK(h.Chat1(0) == 1.0);
  CHECK(h.Chat2(0) == 1.0);
  CHECK(h.Rhat11(0, 0) == -5.0);
  CHECK(h.Rhat22(0, 0) == 5.0);
  CHECK(std::abs(h.H1) < 1e-15);
  CHECK(std::abs(h.H1_alt) < 1e-15);
}

TEST_CASE("both factorizations match a dense inverse") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const GameModel m = random_model(rng, 1, 3, 2, 2, 4);
    const NodeCoefficients& c = m.at(0, 0);
    Vec L(3), D(3);
    for (int j = 0; j < 3; ++j) {
      L(j) = u(rng);
      D(j) = u(rng);
    }
    const double P = u(rng), phi = u(rng);
    const HamiltonianEval h = assemble(P, L, phi, D, c);
    CHECK(h.H1 == doctest::Approx(h.H1_alt).epsilon(1e-10));
    CHECK(h.H1 == doctest::Approx(dense_h(h, h.Chat, h.Chat)).epsilon(1e-10));
    CHECK(h.H2 == doctest::Approx(dense_h(h, h.Chat, h.sigmahat)).epsilon(1e-10));
    CHECK(h.H3 == doctest::Approx(dense_h(h, h.sigmahat, h.sigmahat)).epsilon(1e-10));
    CHECK(h1_value(P, L, c) == doctest::Approx(h.H1).epsilon(1e-10));
  }
}

TEST_CASE("indefinite blocks raise SingularBlock") {
  const auto c = scalar_coeffs(0.0, 0.1, 0.1, 0.0, 1.0, 1.0, 0.0, -1.0, 1.0);
  // P D'D pushes Rhat11 = -1 + 2 above zero.
  CHECK_THROWS_AS(assemble(2.0, vec1(0.0), 0.0, vec1(0.0), c), Error);
  try {
    assemble(2.0, vec1(0.0), 0.0, vec1(0.0), c);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularBlock);
  }
}

TEST_CASE("truncated Hamiltonian") {
  const auto c = scalar_coeffs(0.1, 0.6, 0.5, 0.2, 0.1, 0.1, 0.5, -0.2, 0.2);
  const GameModel m = scalar_model({c, c}, two_state(0.5), {0.25, 0.25}, 0.1, 10);
  const AssumptionReport rep = compute_constants(m);
  REQUIRE(rep.all_ok());

  SUBCASE("zero function") {
    const auto z = scalar_coeffs(0.0, 0.0, 0.0, 0.0, 0.1, 0.1, 0.0, -0.2, 0.2);
    const GameModel mz = scalar_model({z, z}, two_state(0.5), {0.25, 0.25}, 0.1, 10);
    const AssumptionReport rz = compute_constants(mz);
    for (int k : {1, 4, 64})
      for (double P : {-0.2, 0.0, 0.3}) CHECK(h1_truncated(k, P, vec1(0.0), z, rz) == 0.0);
  }
  SUBCASE("large k recovers H1 and the order in k holds") {
    for (double P : {-0.4, 0.0, 0.2, 0.5}) {
      for (double L : {-0.5, 0.0, 0.7}) {
        const double h = h1_value(P, vec1(L), c);
        double prev = std::numeric_limits<double>::infinity();
        for (int k : {1, 2, 4, 16, 256}) {
          const double hk = h1_truncated(k, P, vec1(L), c, rep);
          CHECK(hk >= h - 1e-12);
          CHECK(hk <= prev + 1e-12);
          CHECK(std::abs(hk) <= h1_bound(rep, std::abs(L)) + 1e-12);
          prev = hk;
        }
        CHECK(h1_truncated(1000000, P, vec1(L), c, rep) == doctest::Approx(h).epsilon(1e-9));
      }
    }
  }
  SUBCASE("dense grid oracle") {
    for (int k : {1, 3}) {
      for (double P : {0.1, 0.4}) {
        const double hk = h1_truncated(k, P, vec1(0.3), c, rep);
        const double g = grid_envelope(k, P, 0.3, c, rep);
        CHECK(hk >= g - 1e-9);
        CHECK(hk - g < 5e-3);
      }
    }
    const double g1 = grid_envelope(1, 0.4, 0.3, c, rep), g3 = grid_envelope(3, 0.4, 0.3, c, rep);
    CHECK(g1 >= g3);
  }
}

TEST_CASE("orthant saddle in one dimension") {
  ConeGame g;
  g.Q11 = mat1(-2.0);
  g.Q12 = mat1(0.0);
  g.Q22 = mat1(3.0);
  for (double c : {-1.5, 0.0, 0.8}) {
    g.c1 = vec1(c);
    g.c2 = vec1(0.4);
    const ConeSaddle s = cone_saddle(g, ConeSpec::orthant(1), ConeSpec::orthant(1));
    // max over v1 >= 0 of -2 v^2 + 2 c v = (c^+)^2 / 2 at v = c^+/2.
    const double cp = std::max(c, 0.0);
    CHECK(s.v1(0) == doctest::Approx(cp / 2.0));
    double grid = -1e300;
    for (int j = 0; j <= 20000; ++j) {
      const double v = 3.0 * j / 20000.0;
      grid = std::max(grid, -2.0 * v * v + 2.0 * c * v);
    }
    // Player 2 sits at 0 since c2 > 0.
    CHECK(s.v2(0) == 0.0);
    CHECK(s.value == doctest::Approx(cp * cp / 2.0));
    CHECK(s.value == doctest::Approx(grid).epsilon(1e-6));
  }
}

TEST_CASE("decoupled cone game splits into two problems") {
  ConeGame g;
  g.Q11 = Mat::Identity(2, 2) * -2.0;
  g.Q12 = Mat::Zero(2, 2);
  g.Q22 = Mat::Identity(2, 2) * 4.0;
  g.c1 = Vec(2);
  g.c1 << 1.0, -0.5;
  g.c2 = Vec(2);
  g.c2 << -2.0, 1.0;
  const ConeSaddle s = cone_saddle(g, ConeSpec::orthant(2), ConeSpec::orthant(2));
  // max part: (1^+)^2/2 + 0; min part: -((-c2)^+)^2/4 per coordinate = -1.
  CHECK(s.value == doctest::Approx(0.5 - 1.0));
  CHECK(s.v1(0) == doctest::Approx(0.5));
  CHECK(s.v1(1) == 0.0);
  CHECK(s.v2(0) == doctest::Approx(0.5));
  CHECK(s.v2(1) == 0.0);
}

TEST_CASE("nested routes agree with enumeration") {
  std::srand(3);
  for (int rep = 0; rep < 30; ++rep) {
    ConeGame g;
    Mat a = Mat::Random(2, 2), b = Mat::Random(2, 2);
    g.Q11 = -(a * a.transpose() + Mat::Identity(2, 2));
    g.Q22 = b * b.transpose() + Mat::Identity(2, 2);
    g.Q12 = 0.3 * Mat::Random(2, 2);
    g.c1 = Vec::Random(2);
    g.c2 = Vec::Random(2);
    const ConeSpec o = ConeSpec::orthant(2);
    const ConeSaddle s = cone_saddle(g, o, o);
    const ConeSaddle mm = nested_min_max(g, o, o);
    const ConeSaddle xm = nested_max_min(g, o, o);
    CHECK(std::abs(s.value - mm.value) <= 1e-9);
    CHECK(std::abs(s.value - xm.value) <= 1e-9);
    CHECK(o.contains(s.v1));
    CHECK(o.contains(s.v2));
    // Saddle inequalities against best responses.
    CHECK(g.payoff(best_response_max(g, o, s.v2), s.v2) <= s.value + 1e-10);
    CHECK(g.payoff(s.v1, best_response_min(g, o, s.v1)) >= s.value - 1e-10);
  }
}

TEST_CASE("constrained evaluation") {
  const auto c = scalar_coeffs(0.1, 0.3, -0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
  SUBCASE("full cones reproduce H1") {
    for (double P : {-0.3, 0.2})
      for (double L : {-0.4, 0.5}) {
        const auto e = constrained_eval(P, vec1(L), ConeSpec::full(1), ConeSpec::full(1), c);
        const double h = h1_value(P, vec1(L), c);
        CHECK(e.Htilde1 == doctest::Approx(h).epsilon(1e-12));
        CHECK(e.Htilde2 == doctest::Approx(h).epsilon(1e-12));
      }
  }
  SUBCASE("signs and minimax") {
    const ConeSpec o = ConeSpec::orthant(1);
    for (double P : {-0.3, 0.2, 0.6})
      for (double L : {-0.4, 0.0, 0.5}) {
        const auto e = constrained_eval(P, vec1(L), o, o, c);
        CHECK(e.certified);
        CHECK(e.f11 >= 0.0);
        CHECK(e.f12 >= 0.0);
        CHECK(e.f21 <= 0.0);
        CHECK(e.f22 <= 0.0);
        CHECK(std::abs(e.Htilde11 - e.Htilde21) <= 1e-8);
        CHECK(std::abs(e.Htilde12 - e.Htilde22) <= 1e-8);
        CHECK(o.contains(e.vhat11));
        CHECK(o.contains(e.vhat21));
      }
  }
}

TEST_CASE("zero generator keeps the terminal value") {
  const auto c = scalar_coeffs(0.0, 0.0, 0.0, 0.0, 0.1, 0.1, 0.0, -1.0, 1.0);
  const GameModel m = scalar_model({c, c}, Mat::Zero(2, 2), {0.3, -0.2}, 1.0, 50);
  const SRESolution s = solve_sre(m);
  for (int k = 0; k <= 50; ++k) {
    CHECK(s.P[k][0] == 0.3);
    CHECK(s.P[k][1] == -0.2);
  }
}

TEST_CASE("scalar closed form") {
  // P' = -(2a P + k0), P(T) = G.
  const double a = 0.3, k0 = 1.0, G = 0.5;
  const auto c = scalar_coeffs(a, 0.0, 0.0, 0.0, 0.1, 0.1, k0, -20.0, 20.0);
  const GameModel m = scalar_model({c}, Mat::Zero(1, 1), {G}, 1.0, 400);
  const SRESolution s = solve_sre(m);
  for (int k = 0; k <= 400; k += 40) {
    const double t = m.grid().node(k);
    const double exact = (G + k0 / (2 * a)) * std::exp(2 * a * (1.0 - t)) - k0 / (2 * a);
    CHECK(s.P[k][0] == doctest::Approx(exact).epsilon(1e-11));
  }
  CHECK(s.P[0][0] == doctest::Approx(2.281257400846103).epsilon(1e-11));
  CHECK(s.P[400][0] == G);
}

TEST_CASE("comparison envelope") {
  const auto c = scalar_coeffs(0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
  const GameModel m = scalar_model({c, c}, two_state(0.5), {0.25, 0.2});
  const AssumptionReport rep = compute_constants(m);
  const ComparisonEnvelope env = comparison_envelope(m);
  CHECK(env.upper(1.0) == doctest::Approx(rep.Gbar).epsilon(1e-14));
  CHECK(env.upper(0.0) == doctest::Approx(rep.epsbar).epsilon(1e-12));
  const double mid = env.upper(0.5);
  CHECK(mid > rep.Gbar);
  CHECK(mid < rep.epsbar);
  CHECK(env.upper(0.25) >= mid);
  CHECK(env.lower(0.3) == -env.upper(0.3));
  const SRESolution s = solve_sre(m);
  CHECK(s.all_bounds_ok());
  for (int k = 0; k < m.grid().nodes(); ++k)
    for (int i = 0; i < 2; ++i) {
      CHECK(s.P[k][i] <= env.upper(m.grid().node(k)) + 1e-8);
      CHECK(s.P[k][i] >= env.lower(m.grid().node(k)) - 1e-8);
    }
}

TEST_CASE("linear BSDE") {
  SUBCASE("homogeneous models give zero") {
    std::mt19937_64 rng(8);
    const GameModel m = random_model(rng, 2, 2, 2, 1, 60, true);
    const SRESolution s = solve_sre(m);
    const PhiSolution p = solve_linear_bsde(m, s, m.grid());
    for (const auto& row : p.phi)
      for (double v : row) CHECK(v == 0.0);
  }
  SUBCASE("constant drift integrates P") {
    const double beta = 0.4;
    const auto c = scalar_coeffs(0.0, 0.0, 0.0, 0.0, 0.1, 0.1, 0.7, -5.0, 5.0, beta);
    const GameModel m = scalar_model({c}, Mat::Zero(1, 1), {0.3}, 1.0, 200);
    const SRESolution s = solve_sre(m);
    const PhiSolution p = solve_linear_bsde(m, s, m.grid());
    // P(t) = 0.3 + 0.7 (1 - t), so phi(t) = beta int_t^1 P = beta [0.3 (1-t) + 0.35 (1-t)^2].
    for (int k = 0; k <= 200; k += 25) {
      const double r = 1.0 - m.grid().node(k);
      CHECK(p.phi[k][0] == doctest::Approx(beta * (0.3 * r + 0.35 * r * r)).epsilon(1e-12));
    }
    CHECK(p.phi[200][0] == 0.0);
  }
  SUBCASE("doubling the drift doubles phi") {
    auto c = scalar_coeffs(0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0, 0.2);
    const GameModel m1 = scalar_model({c, c}, two_state(0.5), {0.25, 0.2});
    c.b = 0.4;
    const GameModel m2 = scalar_model({c, c}, two_state(0.5), {0.25, 0.2});
    const SRESolution s = solve_sre(m1);
    const PhiSolution p1 = solve_linear_bsde(m1, s, m1.grid());
    const PhiSolution p2 = solve_linear_bsde(m2, s, m2.grid());
    for (int k = 0; k < m1.grid().nodes(); k += 10)
      for (int i = 0; i < 2; ++i)
        CHECK(p2.phi[k][i] == doctest::Approx(2.0 * p1.phi[k][i]).epsilon(1e-12));
  }
}

TEST_CASE("constrained solves") {
  std::mt19937_64 rng(11);
  const GameModel m = random_model(rng, 2, 2, 2, 2, 50, true);
  SUBCASE("full cones coincide with the unconstrained equation") {
    const SRESolution s = solve_sre(m);
    const auto pr = solve_sre_constrained(m, m.grid());
    for (int k = 0; k < m.grid().nodes(); ++k)
      for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(pr.first.P[k][i] - s.P[k][i]) <= 1e-8);
        CHECK(std::abs(pr.second.P[k][i] - s.P[k][i]) <= 1e-8);
      }
  }
  SUBCASE("mirrored cones swap the two equations") {
    // X -> -X maps the game with cones (G1, G2) onto the one with (-G1, -G2)
    // and exchanges the X^+ and X^- equations.
    const auto c = scalar_coeffs(0.1, 0.3, -0.25, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
    const auto c2 = scalar_coeffs(-0.1, -0.2, 0.3, 0.1, 0.1, 0.15, 0.3, -6.0, 5.5);
    auto build = [&](ConeSpec g1, ConeSpec g2) {
      return constant_model({1, 1, 1}, RegimeGenerator(two_state(0.5)), TimeGrid(1.0, 50),
                            {c, c2}, {0.25, 0.2}, 1.0, 0, g1, g2);
    };
    const auto a = solve_sre_constrained(build(ConeSpec::orthant(1), ConeSpec::orthant(1)),
                                         TimeGrid(1.0, 50));
    const ConeSpec neg = ConeSpec::generated(mat1(-1.0));
    const auto b = solve_sre_constrained(build(neg, neg), TimeGrid(1.0, 50));
    for (int k = 0; k <= 50; k += 5)
      for (int i = 0; i < 2; ++i) {
        CHECK(a.first.P[k][i] == doctest::Approx(b.second.P[k][i]).epsilon(1e-12));
        CHECK(a.second.P[k][i] == doctest::Approx(b.first.P[k][i]).epsilon(1e-12));
      }
    CHECK(std::abs(a.first.P[0][0] - a.second.P[0][0]) > 1e-6);
  }
  SUBCASE("truncated sequence is monotone and bounded") {
    // Strong player-1 input on a short horizon, so the low levels bind.
    const auto c = scalar_coeffs(0.1, 3.0, 0.1, 0.2, 0.1, 0.1, 0.5, -1.0, 1.0);
    const GameModel ms = scalar_model({c, c}, two_state(0.5), {0.5, 0.5}, 0.02, 20);
    REQUIRE(compute_constants(ms).all_ok());
    const auto seq = monotone_truncated_sequence(ms, ms.grid(), {1, 4, 16});
    const SRESolution full = solve_sre(ms);
    const double eb = compute_constants(ms).epsbar;
    for (size_t j = 0; j < seq.size(); ++j)
      for (int i = 0; i < 2; ++i) {
        CHECK(seq[j].P[0][i] >= full.P[0][i] - 1e-9);
        CHECK(std::abs(seq[j].P[0][i]) <= eb);
        if (j > 0) CHECK(seq[j].P[0][i] <= seq[j - 1].P[0][i] + 1e-9);
      }
    CHECK(seq[0].P[0][0] > full.P[0][0] + 1e-2);
    CHECK(seq[1].P[0][0] > full.P[0][0] + 1e-2);
    CHECK(seq[2].P[0][0] == doctest::Approx(full.P[0][0]).epsilon(1e-9));
    CHECK_THROWS_AS(monotone_truncated_sequence(ms, ms.grid(), {4, 2}), Error);
  }
}

TEST_CASE("grid mismatch") {
  const auto c = scalar_coeffs(0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
  const GameModel m = scalar_model({c, c}, two_state(0.5), {0.25, 0.2}, 1.0, 20);
  try {
    solve_sre(m, TimeGrid(1.0, 40));
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridMismatch);
  }
}

TEST_CASE("random coefficients") {
  const auto c = scalar_coeffs(0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
  const GameModel det = scalar_model({c, c}, two_state(0.5), {0.25, 0.2}, 1.0, 20);
  std::vector<FactorLoading> zero(2, FactorLoading::zeros({1, 1, 1}));
  const GameModel fac(det.dims(), det.regimes(), det.grid(), det.table(), det.G(), det.x0(),
                      det.i0(), det.cone1(), det.cone2(), zero);
  REQUIRE(fac.mode() == CoefficientMode::FactorDriven);
  const PathBundle b(fac, fac.grid(), 400, 5);
  const RandomSRESolution r = solve_sre_random(fac, fac.grid(), b, 2);
  const SRESolution s = solve_sre(det);
  for (int i = 0; i < 2; ++i) CHECK(r.P0[i] == doctest::Approx(s.P[0][i]).epsilon(1e-3));
  for (std::int64_t m = 0; m < r.paths; ++m)
    for (int i = 0; i < 2; ++i) CHECK(r.at(m, 20, i) == det.G()[i]);
  CHECK(r.bound_violations == 0);
  CHECK_THROWS_AS(solve_sre_random(det, det.grid(), b, 2), Error);
}
