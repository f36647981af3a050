#include "sregame/cone.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace sregame {

namespace {

constexpr int kMaxConstrained = 16;

struct Basis {
  Mat R;
  std::vector<bool> constrained;
};

Basis basis_of(const ConeSpec& cone) {
  Basis b;
  switch (cone.kind()) {
    case ConeKind::FullSpace:
      b.R = Mat::Identity(cone.dim(), cone.dim());
      b.constrained.assign(cone.dim(), false);
      break;
    case ConeKind::NonNegOrthant:
      b.R = Mat::Identity(cone.dim(), cone.dim());
      b.constrained.assign(cone.dim(), true);
      break;
    case ConeKind::FiniteGenerator:
      b.R = cone.rays();
      b.constrained.assign(cone.rays().cols(), true);
      break;
  }
  return b;
}

Mat take(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

Vec take(const Vec& v, const std::vector<int>& idx) {
  Vec out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

std::vector<int> constrained_indices(const std::vector<bool>& mask) {
  std::vector<int> s;
  for (size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) s.push_back(static_cast<int>(j));
  return s;
}

// min lam'Q lam + 2 h'lam subject to lam_j >= 0 on constrained coordinates,
// Q positive definite. Exact: the unique KKT point is found by enumeration.
Vec convex_qp(const Mat& Q, const Vec& h, const std::vector<bool>& mask) {
  const int p = static_cast<int>(h.size());
  const std::vector<int> S = constrained_indices(mask);
  if (S.size() > static_cast<size_t>(kMaxConstrained))
    fail(ErrorCode::ConeUnsupported, "too many constrained coordinates for enumeration");
  const double scale = 1.0 + h.cwiseAbs().maxCoeff() + Q.cwiseAbs().maxCoeff();
  for (double tol_mult : {1e-11, 1e-9, 1e-7}) {
    const double tol = tol_mult * scale;
    Vec best;
    double best_norm = std::numeric_limits<double>::infinity();
    for (unsigned zmask = 0; zmask < (1u << S.size()); ++zmask) {
      std::vector<bool> zero(p, false);
      for (size_t s = 0; s < S.size(); ++s)
        if (zmask & (1u << s)) zero[S[s]] = true;
      std::vector<int> F;
      for (int j = 0; j < p; ++j)
        if (!zero[j]) F.push_back(j);
      Vec lam = Vec::Zero(p);
      if (!F.empty()) {
        Vec sol = take(Q, F, F).llt().solve(-take(h, F));
        for (size_t k = 0; k < F.size(); ++k) lam(F[k]) = sol(k);
      }
      bool ok = true;
      for (int j : F)
        if (mask[j] && lam(j) < -tol) ok = false;
      if (!ok) continue;
      Vec grad = Q * lam + h;
      for (int j = 0; j < p; ++j)
        if (zero[j] && grad(j) < -tol) ok = false;
      if (!ok) continue;
      for (int j = 0; j < p; ++j)
        if (mask[j] && lam(j) < 0.0) lam(j) = 0.0;
      if (lam.norm() < best_norm) {
        best_norm = lam.norm();
        best = lam;
      }
    }
    if (best.size() == p) return best;
  }
  fail(ErrorCode::Internal, "cone quadratic program has no KKT point");
}

struct Reduced {
  Basis b1, b2;
  Mat M11, M12, M22;
  Vec g1, g2;
};

Reduced reduce(const ConeGame& g, const ConeSpec& cone1, const ConeSpec& cone2) {
  Reduced r;
  r.b1 = basis_of(cone1);
  r.b2 = basis_of(cone2);
  if (g.Q11.rows() != cone1.dim() || g.Q22.rows() != cone2.dim())
    fail(ErrorCode::DimensionMismatch, "cone dimensions disagree with the game blocks");
  r.M11 = r.b1.R.transpose() * g.Q11 * r.b1.R;
  r.M12 = r.b1.R.transpose() * g.Q12 * r.b2.R;
  r.M22 = r.b2.R.transpose() * g.Q22 * r.b2.R;
  r.g1 = r.b1.R.transpose() * g.c1;
  r.g2 = r.b2.R.transpose() * g.c2;
  return r;
}

// Inner maximizer in lambda1 coordinates for fixed lambda2.
Vec inner_max(const Reduced& r, const Vec& lam2) {
  return convex_qp(-r.M11, -(r.M12 * lam2 + r.g1), r.b1.constrained);
}

}  // namespace

double ConeGame::payoff(const Vec& v1, const Vec& v2) const {
  return v1.dot(Q11 * v1) + 2.0 * v1.dot(Q12 * v2) + v2.dot(Q22 * v2) + 2.0 * c1.dot(v1) +
         2.0 * c2.dot(v2);
}

ConeGame ConeGame::flipped() const { return ConeGame{Q11, Q12, Q22, -c1, -c2}; }

ConeSaddle cone_saddle(const ConeGame& g, const ConeSpec& cone1, const ConeSpec& cone2) {
  const Reduced r = reduce(g, cone1, cone2);
  const int p1 = static_cast<int>(r.g1.size()), p2 = static_cast<int>(r.g2.size());
  const int p = p1 + p2;
  Mat M(p, p);
  M << r.M11, r.M12, r.M12.transpose(), r.M22;
  Vec h(p);
  h << r.g1, r.g2;
  std::vector<bool> mask(r.b1.constrained);
  mask.insert(mask.end(), r.b2.constrained.begin(), r.b2.constrained.end());
  const std::vector<int> S = constrained_indices(mask);
  if (S.size() > static_cast<size_t>(kMaxConstrained))
    fail(ErrorCode::ConeUnsupported, "too many constrained coordinates for enumeration");

  const double scale = 1.0 + h.cwiseAbs().maxCoeff() + M.cwiseAbs().maxCoeff();
  for (double tol_mult : {1e-11, 1e-9, 1e-7}) {
    const double tol = tol_mult * scale;
    Vec best;
    double best_norm = std::numeric_limits<double>::infinity();
    for (unsigned zmask = 0; zmask < (1u << S.size()); ++zmask) {
      std::vector<bool> zero(p, false);
      for (size_t s = 0; s < S.size(); ++s)
        if (zmask & (1u << s)) zero[S[s]] = true;
      std::vector<int> F;
      for (int j = 0; j < p; ++j)
        if (!zero[j]) F.push_back(j);
      Vec z = Vec::Zero(p);
      if (!F.empty()) {
        Vec sol = take(M, F, F).partialPivLu().solve(-take(h, F));
        for (size_t k = 0; k < F.size(); ++k) z(F[k]) = sol(k);
      }
      bool ok = z.allFinite();
      for (int j : F)
        if (mask[j] && z(j) < -tol) ok = false;
      if (!ok) continue;
      Vec grad = M * z + h;
      for (int j = 0; j < p; ++j) {
        if (!zero[j]) continue;
        // Maximizer coordinates must not gain by moving up, minimizer ones must not lose.
        if (j < p1 && grad(j) > tol) ok = false;
        if (j >= p1 && grad(j) < -tol) ok = false;
      }
      if (!ok) continue;
      for (int j = 0; j < p; ++j)
        if (mask[j] && z(j) < 0.0) z(j) = 0.0;
      if (z.norm() < best_norm) {
        best_norm = z.norm();
        best = z;
      }
    }
    if (best.size() == p) {
      ConeSaddle s;
      s.v1 = r.b1.R * best.head(p1);
      s.v2 = r.b2.R * best.tail(p2);
      s.value = g.payoff(s.v1, s.v2);
      return s;
    }
  }
  fail(ErrorCode::Internal, "cone game has no saddle point");
}

Vec best_response_max(const ConeGame& g, const ConeSpec& cone1, const Vec& v2) {
  const Basis b = basis_of(cone1);
  const Mat Q = -(b.R.transpose() * g.Q11 * b.R);
  const Vec h = -(b.R.transpose() * (g.Q12 * v2 + g.c1));
  return b.R * convex_qp(Q, h, b.constrained);
}

Vec best_response_min(const ConeGame& g, const ConeSpec& cone2, const Vec& v1) {
  const Basis b = basis_of(cone2);
  const Mat Q = b.R.transpose() * g.Q22 * b.R;
  const Vec h = b.R.transpose() * (g.Q12.transpose() * v1 + g.c2);
  return b.R * convex_qp(Q, h, b.constrained);
}

ConeSaddle nested_min_max(const ConeGame& g, const ConeSpec& cone1, const ConeSpec& cone2) {
  const Reduced r = reduce(g, cone1, cone2);
  const auto& mask2 = r.b2.constrained;
  const int p2 = static_cast<int>(r.g2.size());

  auto objective = [&](const Vec& lam2, const Vec& lam1) {
    return lam2.dot(r.M22 * lam2) + 2.0 * r.g2.dot(lam2) + lam1.dot(r.M11 * lam1) +
           2.0 * lam1.dot(r.M12 * lam2 + r.g1);
  };
  auto gradient = [&](const Vec& lam2, const Vec& lam1) {
    return Vec(2.0 * (r.M22 * lam2 + r.g2 + r.M12.transpose() * lam1));
  };
  auto project = [&](Vec v) {
    for (int j = 0; j < p2; ++j)
      if (mask2[j] && v(j) < 0.0) v(j) = 0.0;
    return v;
  };
  const double scale = 1.0 + r.g1.cwiseAbs().maxCoeff() + r.g2.cwiseAbs().maxCoeff() +
                       r.M22.cwiseAbs().maxCoeff() + r.M11.cwiseAbs().maxCoeff();
  auto stationary = [&](const Vec& lam2, const Vec& grad) {
    const double tol = 1e-11 * scale;
    for (int j = 0; j < p2; ++j) {
      if (mask2[j] && lam2(j) <= 0.0) {
        if (grad(j) < -tol) return false;
      } else if (std::abs(grad(j)) > tol) {
        return false;
      }
    }
    return true;
  };

  Eigen::SelfAdjointEigenSolver<Mat> e22(r.M22, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Mat> e11(-r.M11, Eigen::EigenvaluesOnly);
  const double mu11 = e11.eigenvalues().minCoeff();
  if (!(mu11 > 0.0) || !(e22.eigenvalues().minCoeff() > 0.0))
    fail(ErrorCode::SingularBlock, "cone game blocks are not definite");
  const double coupling = r.M12.size() ? r.M12.operatorNorm() : 0.0;
  const double L = 2.0 * (e22.eigenvalues().maxCoeff() + coupling * coupling / mu11);

  Vec lam2 = Vec::Zero(p2);
  Vec lam1 = inner_max(r, lam2);
  for (int iter = 0; iter < 50000; ++iter) {
    Vec grad = gradient(lam2, lam1);
    if (stationary(lam2, grad)) break;

    // Newton step on the current quadratic piece.
    if (iter % 25 == 0) {
      std::vector<int> F1, F2;
      for (int j = 0; j < lam1.size(); ++j)
        if (!r.b1.constrained[j] || lam1(j) > 0.0) F1.push_back(j);
      for (int j = 0; j < p2; ++j)
        if (!mask2[j] || lam2(j) > 0.0 || grad(j) < 0.0) F2.push_back(j);
      if (!F2.empty()) {
        Mat H = 2.0 * r.M22;
        if (!F1.empty()) {
          std::vector<int> all2(p2);
          for (int j = 0; j < p2; ++j) all2[j] = j;
          Mat B = take(r.M12, F1, all2);
          H += 2.0 * B.transpose() * Mat(-take(r.M11, F1, F1)).llt().solve(B);
        }
        Vec step = take(H, F2, F2).llt().solve(-take(grad, F2));
        Vec trial = lam2;
        for (size_t k = 0; k < F2.size(); ++k) trial(F2[k]) += step(k);
        trial = project(trial);
        Vec trial1 = inner_max(r, trial);
        if (objective(trial, trial1) <= objective(lam2, lam1) + 1e-15 * scale) {
          lam2 = trial;
          lam1 = trial1;
          continue;
        }
      }
    }

    Vec next = project(lam2 - grad / L);
    const double moved = (next - lam2).norm();
    lam2 = next;
    lam1 = inner_max(r, lam2);
    if (moved <= 1e-16 * (1.0 + lam2.norm())) break;
  }

  ConeSaddle s;
  s.v1 = r.b1.R * lam1;
  s.v2 = r.b2.R * lam2;
  s.value = objective(lam2, lam1);
  return s;
}

ConeSaddle nested_max_min(const ConeGame& g, const ConeSpec& cone1, const ConeSpec& cone2) {
  ConeGame mirror{-g.Q22, Mat(-g.Q12.transpose()), -g.Q11, -g.c2, -g.c1};
  ConeSaddle m = nested_min_max(mirror, cone2, cone1);
  ConeSaddle s;
  s.v1 = m.v2;
  s.v2 = m.v1;
  s.value = -m.value;
  return s;
}

}  // namespace sregame
