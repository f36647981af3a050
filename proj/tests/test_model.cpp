#include <cmath>

#include "doctest.h"
#include "sregame/model.hpp"
#include "support.hpp"

using namespace sregame;
using namespace sgtest;

TEST_CASE("expm1_ratio is continuous at zero") {
  CHECK(expm1_ratio(0.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(expm1_ratio(1e-12, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(expm1_ratio(1.0, 1.0) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-15));
}

TEST_CASE("constants of the reference example") {
  // Kbar = 1, Gbar = 0.25, c1 = 0.5 (q max entry), c3 = 0.25, l = 2, T = 1.
  const auto c = scalar_coeffs(0.0, 0.5, 0.5, 0.0, 1.0, 1.0, 1.0, -50.0, 50.0);
  const GameModel m = scalar_model({c, c}, two_state(0.5), {0.25, 0.25});
  const AssumptionReport r = compute_constants(m);
  CHECK(r.c1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.c3 == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(r.Kbar == 1.0);
  CHECK(r.Gbar == 0.25);
  CHECK(r.epsbar == doctest::Approx(4.7957045711476125).epsilon(1e-13));
  CHECK(r.epsilon == doctest::Approx(8.24037201926092).epsilon(1e-13));
  CHECK(r.cbar2 == 1.0);
  CHECK(r.cunder2 == 1.0);
  CHECK_FALSE(r.degenerate_rate);
}

TEST_CASE("degenerate rate uses the limit form") {
  const auto c = scalar_coeffs(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, -1.0, 1.0);
  const GameModel m = scalar_model({c}, Mat::Zero(1, 1), {0.5}, 2.0);
  const AssumptionReport r = compute_constants(m);
  CHECK(r.c1 == 0.0);
  CHECK(r.cbar2 == 1.0);
  CHECK(r.cunder2 == 1.0);
  CHECK(r.c3 == 0.0);
  CHECK(r.degenerate_rate);
  CHECK(std::isfinite(r.epsbar));
  // epsbar -> 2 Gbar when K = 0 and the rate vanishes.
  CHECK(r.epsbar == doctest::Approx(1.0));
  CHECK(r.epsilon == 0.0);
}

TEST_CASE("a positive eigenvalue of R11 fails the weight assumption") {
  const auto good = scalar_coeffs(0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
  auto bad = good;
  bad.R11 = mat1(0.3);
  const GameModel m = scalar_model({good, bad}, two_state(0.5), {0.25, 0.25});
  const AssumptionReport r = compute_constants(m);
  CHECK_FALSE(r.assumption2_ok);
  CHECK(r.worst_weight.find("R11") == 0);
  CHECK(r.worst_weight.find("regime 1") != std::string::npos);
  CHECK(compute_constants(scalar_model({good, good}, two_state(0.5), {0.25, 0.25})).all_ok());
}

TEST_CASE("scale_cost") {
  const auto c = scalar_coeffs(0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
  const GameModel m = scalar_model({c, c}, two_state(0.5), {-0.25, -0.25});
  const GameModel same = scale_cost(m, 1.0);
  CHECK(same.G() == m.G());
  CHECK(same.at(3, 1).R11(0, 0) == -5.0);
  const GameModel twice = scale_cost(m, 2.0);
  CHECK(twice.G()[0] == -0.5);
  CHECK(twice.at(0, 0).K == 1.0);
  CHECK(twice.at(0, 0).R22(0, 0) == 10.0);
  CHECK_THROWS_AS(scale_cost(m, 0.0), Error);
}

TEST_CASE("rescaling beyond 2 cbar2 / epsilon restores the assumptions") {
  // Large diffusion loadings: 2 cbar2 >= epsilon on the unscaled model.
  const auto c = scalar_coeffs(0.0, 0.1, 0.1, 0.0, 1.0, 1.0, 0.01, -1.0, 1.0);
  const GameModel m = scalar_model({c, c}, two_state(0.2), {0.01, 0.01});
  const AssumptionReport r = compute_constants(m);
  REQUIRE_FALSE(r.assumption3_ok);
  const double ctilde = 1.01 * 2.0 * r.cbar2 / r.epsilon;
  const AssumptionReport s = compute_constants(scale_cost(m, ctilde));
  CHECK(s.assumption1_ok);
  CHECK(s.assumption2_ok);
  CHECK(s.assumption3_ok);
}

TEST_CASE("model validation") {
  const auto c = scalar_coeffs(0.1, 0.3, 0.2, 0.2, 0.1, 0.1, 0.5, -5.0, 5.0);
  CHECK_THROWS_AS(scalar_model({c}, two_state(0.5), {0.25, 0.25}), Error);
  Mat q = two_state(0.5);
  q(0, 0) = -0.4;
  CHECK_THROWS_AS(RegimeGenerator{q}, Error);
  CHECK_THROWS_AS(scalar_model({c, c}, two_state(0.5), {0.25, 0.25}, 1.0, 10, 1.0, 2), Error);
  auto wrong = c;
  wrong.B1 = Vec::Zero(2);
  CHECK_THROWS_AS(scalar_model({wrong, c}, two_state(0.5), {0.25, 0.25}), Error);
  try {
    scalar_model({wrong, c}, two_state(0.5), {0.25, 0.25});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("cones") {
  const ConeSpec o = ConeSpec::orthant(2);
  Vec v(2);
  v << -3.0, 4.0;
  CHECK(o.distance(v) == doctest::Approx(3.0));
  CHECK(ConeSpec::full(2).distance(v) == 0.0);
  Mat rays(2, 2);
  rays << 1.0, 1.0, 0.0, 1.0;
  const ConeSpec g = ConeSpec::generated(rays);
  CHECK(g.rays().col(1).norm() == doctest::Approx(1.0));
  Vec inside(2);
  inside << 2.0, 1.0;
  CHECK(g.contains(inside));
  Vec outside(2);
  outside << 0.0, 1.0;
  CHECK(g.distance(outside) == doctest::Approx(std::sqrt(0.5)));
  Mat dep(2, 2);
  dep << 1.0, 2.0, 1.0, 2.0;
  CHECK_THROWS_AS(ConeSpec::generated(dep), Error);
}
