#pragma once

#include <random>
#include <vector>

#include "sregame/model.hpp"

namespace sgtest {

using namespace sregame;

inline Mat two_state(double rate) {
  Mat q(2, 2);
  q << -rate, rate, rate, -rate;
  return q;
}

inline Mat mat1(double v) { return Mat::Constant(1, 1, v); }
inline Vec vec1(double v) { return Vec::Constant(1, v); }

/// Scalar-control coefficients (n = m1 = m2 = 1).
inline NodeCoefficients scalar_coeffs(double A, double B1, double B2, double C, double D1,
                                      double D2, double K, double R11, double R22,
                                      double b = 0.0, double sigma = 0.0) {
  NodeCoefficients c = NodeCoefficients::zeros({1, 1, 1});
  c.A = A;
  c.B1 = vec1(B1);
  c.B2 = vec1(B2);
  c.C = vec1(C);
  c.D1 = mat1(D1);
  c.D2 = mat1(D2);
  c.K = K;
  c.R11 = mat1(R11);
  c.R22 = mat1(R22);
  c.b = b;
  c.sigma = vec1(sigma);
  return c;
}

inline GameModel scalar_model(const std::vector<NodeCoefficients>& per_regime, Mat q,
                              std::vector<double> G, double T = 1.0, int steps = 100,
                              double x0 = 1.0, int i0 = 0) {
  return constant_model({1, 1, 1}, RegimeGenerator(std::move(q)), TimeGrid(T, steps), per_regime,
                        std::move(G), x0, i0, ConeSpec::full(1), ConeSpec::full(1));
}

/// Random coefficients that satisfy the standing assumptions with some margin.
/// R blocks are scaled after the constants are known.
inline GameModel random_model(std::mt19937_64& rng, int l, int n, int m1, int m2, int steps,
                              bool homogeneous = false, double T = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Dimensions d{n, m1, m2};
  Mat q = Mat::Zero(l, l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j)
      if (i != j) q(i, j) = 0.5 * (1.0 + u(rng));
  for (int i = 0; i < l; ++i) q(i, i) = -(q.row(i).sum());
  std::vector<NodeCoefficients> per;
  std::vector<double> G;
  for (int i = 0; i < l; ++i) {
    NodeCoefficients c = NodeCoefficients::zeros(d);
    c.A = 0.2 * u(rng);
    for (int j = 0; j < m1; ++j) c.B1(j) = 0.3 * u(rng);
    for (int j = 0; j < m2; ++j) c.B2(j) = 0.3 * u(rng);
    for (int j = 0; j < n; ++j) c.C(j) = 0.2 * u(rng);
    // D'D must stay positive definite, so keep a dominant diagonal.
    c.D1 = Mat::Zero(n, m1);
    c.D2 = Mat::Zero(n, m2);
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < m1; ++j) c.D1(r, j) = (r == j ? 0.15 : 0.03 * u(rng));
      for (int j = 0; j < m2; ++j) c.D2(r, j) = (r == j ? 0.15 : 0.03 * u(rng));
    }
    if (!homogeneous) {
      c.b = 0.2 * u(rng);
      for (int j = 0; j < n; ++j) c.sigma(j) = 0.2 * u(rng);
    }
    c.K = 0.5 * u(rng);
    c.R11 = -Mat::Identity(m1, m1);
    c.R22 = Mat::Identity(m2, m2);
    if (m1 > 1) c.R11(0, 1) = c.R11(1, 0) = 0.1 * u(rng);
    if (m2 > 1) c.R22(0, 1) = c.R22(1, 0) = 0.1 * u(rng);
    c.R12 = Mat::Zero(m1, m2);
    for (int a = 0; a < m1; ++a)
      for (int b = 0; b < m2; ++b) c.R12(a, b) = 0.1 * u(rng);
    per.push_back(c);
    G.push_back(0.3 * u(rng));
  }
  GameModel base = constant_model(d, RegimeGenerator(q), TimeGrid(T, steps), per, G, 1.0, 0,
                                  ConeSpec::full(m1), ConeSpec::full(m2));
  const AssumptionReport rep = compute_constants(base);
  const double need = 1.3 * (rep.epsilon + rep.epsbar * rep.cbar2) + 0.5;
  for (auto& c : per) {
    c.R11 *= need;
    c.R22 *= need;
  }
  return constant_model(d, RegimeGenerator(q), TimeGrid(T, steps), per, G, 1.0, 0,
                        ConeSpec::full(m1), ConeSpec::full(m2));
}

}  // namespace sgtest
