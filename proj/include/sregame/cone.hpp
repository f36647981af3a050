#pragma once

#include "sregame/model.hpp"

namespace sregame {

/// Quadratic payoff L(v1, v2) = v1'Q11 v1 + 2 v1'Q12 v2 + v2'Q22 v2 + 2 c1'v1 + 2 c2'v2,
/// maximized by v1 and minimized by v2. Q11 must be negative definite and
/// Q22 positive definite.
struct ConeGame {
  Mat Q11, Q12, Q22;
  Vec c1, c2;

  double payoff(const Vec& v1, const Vec& v2) const;
  /// Same quadratic part with the linear terms negated.
  ConeGame flipped() const;
};

struct ConeSaddle {
  Vec v1, v2;
  double value = 0.0;
};

/// Saddle point by enumeration of complementary active sets of the joint KKT system.
ConeSaddle cone_saddle(const ConeGame& g, const ConeSpec& cone1, const ConeSpec& cone2);

/// argmax over v1 in cone1 of L(v1, v2) for fixed v2.
Vec best_response_max(const ConeGame& g, const ConeSpec& cone1, const Vec& v2);
/// argmin over v2 in cone2 of L(v1, v2) for fixed v1.
Vec best_response_min(const ConeGame& g, const ConeSpec& cone2, const Vec& v1);

/// min over v2 of max over v1, with the inner problem solved exactly and the
/// outer one by projected gradient followed by Newton polishing.
ConeSaddle nested_min_max(const ConeGame& g, const ConeSpec& cone1, const ConeSpec& cone2);
/// max over v1 of min over v2, same routine applied to the mirrored game.
ConeSaddle nested_max_min(const ConeGame& g, const ConeSpec& cone1, const ConeSpec& cone2);

}  // namespace sregame
