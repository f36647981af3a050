#include "sregame/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace sregame {

namespace {

void check_blocks(const Mat& R11, const Mat& R22, double margin) {
  const Mat neg11 = -R11 - margin * Mat::Identity(R11.rows(), R11.cols());
  const Mat pos22 = R22 - margin * Mat::Identity(R22.rows(), R22.cols());
  if (neg11.llt().info() != Eigen::Success)
    fail(ErrorCode::SingularBlock, "Rhat11 is not negative definite with the required margin");
  if (pos22.llt().info() != Eigen::Success)
    fail(ErrorCode::SingularBlock, "Rhat22 is not positive definite with the required margin");
}

double rel_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)); }

// Evaluates sup over t in [0, rho] of h0 + h1 t + h2 t^2 - k t.
double ray_max(double h0, double h1, double h2, double k, double rho) {
  double best = h0;
  best = std::max(best, h0 + (h1 - k) * rho + h2 * rho * rho);
  if (h2 < 0.0) {
    const double t = -(h1 - k) / (2.0 * h2);
    if (t > 0.0 && t < rho) best = std::max(best, h0 + (h1 - k) * t + h2 * t * t);
  }
  return best;
}

template <class F>
double golden_max(F&& f, double a, double b, int iters) {
  const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  double best = std::max(f1, f2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    }
    best = std::max({best, f1, f2});
  }
  return best;
}

const std::vector<Vec>& sphere_directions(int n) {
  thread_local std::vector<std::vector<Vec>> cache;
  if (static_cast<int>(cache.size()) <= n) cache.resize(n + 1);
  auto& dirs = cache[n];
  if (!dirs.empty()) return dirs;
  for (int j = 0; j < n; ++j) {
    dirs.push_back(Vec::Unit(n, j));
    dirs.push_back(-Vec::Unit(n, j));
  }
  std::mt19937_64 rng(0x5eedULL + n);
  std::normal_distribution<double> nd;
  for (int s = 0; s < 256; ++s) {
    Vec d(n);
    for (int j = 0; j < n; ++j) d(j) = nd(rng);
    dirs.push_back(d.normalized());
  }
  return dirs;
}

}  // namespace

HamiltonianEval assemble(double P, const Vec& Lambda, double phi, const Vec& Delta,
                         const NodeCoefficients& c, double margin) {
  const auto m1 = c.B1.size(), m2 = c.B2.size();
  HamiltonianEval h;
  const Mat D = c.D();
  h.Rhat = c.R() + P * D.transpose() * D;
  h.Rhat11 = h.Rhat.topLeftCorner(m1, m1);
  h.Rhat12 = h.Rhat.topRightCorner(m1, m2);
  h.Rhat22 = h.Rhat.bottomRightCorner(m2, m2);
  check_blocks(h.Rhat11, h.Rhat22, margin);

  const Vec B = c.B();
  h.Chat = P * B + D.transpose() * (P * c.C + Lambda);
  h.sigmahat = phi * B + D.transpose() * (P * c.sigma + Delta);
  h.Chat1 = h.Chat.head(m1);
  h.Chat2 = h.Chat.tail(m2);
  h.sigmahat1 = h.sigmahat.head(m1);
  h.sigmahat2 = h.sigmahat.tail(m2);

  // Eliminate v2 first.
  const auto l22 = h.Rhat22.llt();
  h.Rtilde11 = h.Rhat11 - h.Rhat12 * l22.solve(Mat(h.Rhat12.transpose()));
  const auto n11 = Mat(-h.Rtilde11).llt();
  if (n11.info() != Eigen::Success)
    fail(ErrorCode::SingularBlock, "Schur complement Rtilde11 is not negative definite");
  const Vec a = l22.solve(h.Chat2), s2 = l22.solve(h.sigmahat2);
  const Vec w = h.Chat1 - h.Rhat12 * a, ws = h.sigmahat1 - h.Rhat12 * s2;
  const Vec iw = n11.solve(w), iws = n11.solve(ws);  // -(Rtilde11)^{-1} applied
  h.H1 = -h.Chat2.dot(a) + w.dot(iw);
  h.H2 = -h.Chat2.dot(s2) + w.dot(iws);
  h.H3 = -h.sigmahat2.dot(s2) + ws.dot(iws);

  // Eliminate v1 first.
  const auto n11b = Mat(-h.Rhat11).llt();
  const Mat inv11_R12 = -n11b.solve(h.Rhat12);
  h.Rtilde22 = h.Rhat22 - h.Rhat12.transpose() * inv11_R12;
  const auto l22t = h.Rtilde22.llt();
  if (l22t.info() != Eigen::Success)
    fail(ErrorCode::SingularBlock, "Schur complement Rtilde22 is not positive definite");
  const Vec b = -n11b.solve(h.Chat1), s1 = -n11b.solve(h.sigmahat1);
  const Vec z = h.Chat2 - h.Rhat12.transpose() * b, zs = h.sigmahat2 - h.Rhat12.transpose() * s1;
  const Vec iz = l22t.solve(z), izs = l22t.solve(zs);
  h.H1_alt = -h.Chat1.dot(b) - z.dot(iz);
  h.H2_alt = -h.Chat1.dot(s1) - z.dot(izs);
  h.H3_alt = -h.sigmahat1.dot(s1) - zs.dot(izs);

  if (rel_gap(h.H1, h.H1_alt) > 1e-6 || rel_gap(h.H2, h.H2_alt) > 1e-6 ||
      rel_gap(h.H3, h.H3_alt) > 1e-6)
    fail(ErrorCode::Internal, "Schur factorizations of the Hamiltonian disagree");
  return h;
}

double h1_value(double P, const Vec& Lambda, const NodeCoefficients& c) {
  const Mat D = c.D();
  const Mat Rhat = c.R() + P * D.transpose() * D;
  const Vec Chat = P * c.B() + D.transpose() * (P * c.C + Lambda);
  return -Chat.dot(Rhat.partialPivLu().solve(Chat));
}

double h1_bound(const AssumptionReport& rep, double lambda_norm) {
  if (!(rep.epsilon > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 * (rep.c3 * rep.epsbar * rep.epsbar + rep.cbar2 * lambda_norm * lambda_norm) /
         rep.epsilon;
}

double truncation_radius(int k, double lambda_norm, const AssumptionReport& rep) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "truncation level k must be >= 1");
  if (!(rep.epsilon > 0.0)) return 0.0;
  const double shrink = (1.0 + lambda_norm + rep.epsbar) * (1.0 + rep.cbar2 / rep.epsilon) / k;
  // Beyond this radius the quadratic growth of H1 in Lambda could beat the
  // k = 1 penalty and break the uniform bound.
  double cap = std::numeric_limits<double>::infinity();
  if (rep.cbar2 > 0.0) cap = std::max(0.0, rep.epsilon / (2.0 * rep.cbar2) - 2.0 * lambda_norm);
  return std::min(shrink, cap);
}

double h1_truncated(int k, double P, const Vec& Lambda, const NodeCoefficients& c,
                    const AssumptionReport& rep) {
  const double eb = rep.epsbar;
  const double kk = static_cast<double>(k);
  const double rho = truncation_radius(k, Lambda.norm(), rep);
  const int n = static_cast<int>(Lambda.size());
  const Mat D = c.D();
  const Mat DtD = D.transpose() * D;
  const Mat R = c.R();
  const Vec B = c.B();

  // Points with |P~| > epsbar carry Hhat1 = 0.
  double best = -kk * std::max(0.0, eb - std::abs(P));

  auto g = [&](double Pt) -> double {
    const Mat Rhat = R + Pt * DtD;
    const auto lu = Rhat.partialPivLu();
    const Vec c0 = Pt * B + D.transpose() * (Pt * c.C + Lambda);
    const Vec Mc0 = lu.solve(c0);
    const double h0 = -c0.dot(Mc0);
    if (!std::isfinite(h0)) return -std::numeric_limits<double>::infinity();
    if (rho <= 0.0) return h0;
    auto along = [&](const Vec& d) {
      const Vec e = D.transpose() * d;
      const Vec Me = lu.solve(e);
      return ray_max(h0, -2.0 * c0.dot(Me), -e.dot(Me), kk, rho);
    };
    double v = h0;
    if (n == 1) {
      v = std::max({v, along(Vec::Constant(1, 1.0)), along(Vec::Constant(1, -1.0))});
    } else if (n == 2) {
      auto at_angle = [&](double th) {
        Vec d(2);
        d << std::cos(th), std::sin(th);
        return along(d);
      };
      constexpr int J = 64;
      const double step = 2.0 * M_PI / J;
      int arg = 0;
      double top = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < J; ++j) {
        const double val = at_angle(j * step);
        if (val > top) {
          top = val;
          arg = j;
        }
      }
      v = std::max({v, top, golden_max(at_angle, (arg - 1) * step, (arg + 1) * step, 40)});
    } else {
      for (const Vec& d : sphere_directions(n)) v = std::max(v, along(d));
    }
    return v;
  };

  auto psi = [&](double Pt) { return g(Pt) - kk * std::abs(P - Pt); };

  if (std::abs(P) <= eb) best = std::max(best, psi(P));
  if (eb > 0.0) {
    constexpr int G = 128;
    std::vector<double> xs(G + 1), vs(G + 1);
    for (int j = 0; j <= G; ++j) {
      xs[j] = -eb + 2.0 * eb * j / G;
      vs[j] = psi(xs[j]);
      best = std::max(best, vs[j]);
    }
    // Refine around the three best local maxima of the grid.
    std::vector<int> peaks;
    for (int j = 0; j <= G; ++j) {
      const bool left = j == 0 || vs[j] >= vs[j - 1];
      const bool right = j == G || vs[j] >= vs[j + 1];
      if (left && right) peaks.push_back(j);
    }
    std::sort(peaks.begin(), peaks.end(), [&](int a, int b) { return vs[a] > vs[b]; });
    if (peaks.size() > 3) peaks.resize(3);
    for (int j : peaks) {
      const double a = xs[std::max(j - 1, 0)], b = xs[std::min(j + 1, G)];
      if (std::abs(P) <= eb && P > a && P < b) {
        best = std::max(best, golden_max(psi, a, P, 60));
        best = std::max(best, golden_max(psi, P, b, 60));
      } else {
        best = std::max(best, golden_max(psi, a, b, 60));
      }
    }
  }
  return best;
}

ConeGame cone_game(const HamiltonianEval& h) {
  return ConeGame{h.Rhat11, h.Rhat12, h.Rhat22, h.Chat1, h.Chat2};
}

ConstrainedHamiltonianEval constrained_eval(double P, const Vec& Lambda, const ConeSpec& cone1,
                                            const ConeSpec& cone2, const NodeCoefficients& c,
                                            const ConstrainedOptions& opt) {
  const Vec zero = Vec::Zero(Lambda.size());
  const HamiltonianEval h = assemble(P, Lambda, 0.0, zero, c, opt.margin);
  const ConeGame gp = cone_game(h);
  const ConeGame gm = gp.flipped();

  ConstrainedHamiltonianEval e;
  const ConeSaddle sp = cone_saddle(gp, cone1, cone2);
  const ConeSaddle sm = cone_saddle(gm, cone1, cone2);
  e.Htilde1 = sp.value;
  e.Htilde2 = sm.value;
  e.vhat11 = sp.v1;
  e.vhat21 = sp.v2;
  e.vhat12 = sm.v1;
  e.vhat22 = sm.v2;
  e.betahat21 = best_response_min(gp, cone2, e.vhat11);
  e.betahat22 = best_response_min(gm, cone2, e.vhat12);
  e.betahat11 = best_response_max(gp, cone1, e.vhat21);
  e.betahat12 = best_response_max(gm, cone1, e.vhat22);

  auto f1 = [&](const ConeGame& g, const Vec& v1, const Vec& v2) {
    return v1.dot(g.Q11 * v1) + 2.0 * v1.dot(g.Q12 * v2) + 2.0 * g.c1.dot(v1);
  };
  auto f2 = [&](const ConeGame& g, const Vec& v1, const Vec& v2) {
    return v2.dot(g.Q22 * v2) + 2.0 * v1.dot(g.Q12 * v2) + 2.0 * g.c2.dot(v2);
  };
  e.f11 = f1(gp, e.betahat11, e.vhat21);
  e.f12 = f1(gm, e.betahat12, e.vhat22);
  e.f21 = f2(gp, e.vhat11, e.betahat21);
  e.f22 = f2(gm, e.vhat12, e.betahat22);

  if (opt.certify) {
    e.Htilde11 = nested_max_min(gp, cone1, cone2).value;
    e.Htilde21 = nested_min_max(gp, cone1, cone2).value;
    e.Htilde12 = nested_max_min(gm, cone1, cone2).value;
    e.Htilde22 = nested_min_max(gm, cone1, cone2).value;
    const double tol1 = opt.minimax_tol * std::max(1.0, std::abs(e.Htilde1));
    const double tol2 = opt.minimax_tol * std::max(1.0, std::abs(e.Htilde2));
    if (std::abs(e.Htilde11 - e.Htilde21) > tol1 || std::abs(e.Htilde11 - e.Htilde1) > tol1 ||
        std::abs(e.Htilde12 - e.Htilde22) > tol2 || std::abs(e.Htilde12 - e.Htilde2) > tol2)
      fail(ErrorCode::MinimaxGapExceeded,
           "max-min and min-max values of the constrained Hamiltonian differ");
    e.certified = true;
  } else {
    e.Htilde11 = e.Htilde21 = e.Htilde1;
    e.Htilde12 = e.Htilde22 = e.Htilde2;
  }
  return e;
}

double htilde(int sign, double P, const Vec& Lambda, const ConeSpec& cone1,
              const ConeSpec& cone2, const NodeCoefficients& c, double margin) {
  const Vec zero = Vec::Zero(Lambda.size());
  const HamiltonianEval h = assemble(P, Lambda, 0.0, zero, c, margin);
  ConeGame g = cone_game(h);
  if (sign < 0) g = g.flipped();
  return cone_saddle(g, cone1, cone2).value;
}

}  // namespace sregame
