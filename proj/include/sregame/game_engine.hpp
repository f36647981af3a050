#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sregame/hamiltonian.hpp"
#include "sregame/paths.hpp"
#include "sregame/sre_solver.hpp"

namespace sregame {

// Fixed-capacity vectors for the simulation hot loop.
constexpr int kMaxSimDim = 8;
using SVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxSimDim, 1>;
using SMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSimDim, kMaxSimDim>;

enum class LawKind { Unconstrained, Constrained };

/// Optimal controls and strategies of both players, tabulated per (node, regime).
/// Player 1's game uses (u1*, beta2*), Player 2's game (u2*, beta1*).
class FeedbackLaw {
 public:
  struct LinearGains {
    SVec K1, h1;          // u1* = K1 x + h1
    SMat Mb; SVec kb, hb; // beta2*(u1) = Mb u1 + kb x + hb
    SVec K2, h2;          // u2* = K2 x + h2
    SMat Ma; SVec ka, ha; // beta1*(u2) = Ma u2 + ka x + ha
    SMat Rhat11, Rhat22, Rtilde11, Rtilde22;
  };
  struct ConeSide {
    ConeGame game;        // flipped for the X^- side
    SVec v1, v2;          // saddle directions
    SMat Q11, Q12, Q22;
    SVec c1, c2;
    double Htilde = 0.0;
  };

  LawKind kind() const { return kind_; }
  int m1() const { return m1_; }
  int m2() const { return m2_; }
  const TimeGrid& grid() const { return grid_; }
  int regimes() const { return regimes_; }
  int node_of(double t) const;

  void u1star(int node, int i, double x, SVec& out) const;
  void beta2(int node, int i, double x, const SVec& u1, SVec& out) const;
  void u2star(int node, int i, double x, SVec& out) const;
  void beta1(int node, int i, double x, const SVec& u2, SVec& out) const;

  Vec u1star(double t, int i, double x) const;
  Vec beta2(double t, int i, double x, const Vec& u1) const;
  Vec u2star(double t, int i, double x) const;
  Vec beta1(double t, int i, double x, const Vec& u2) const;

  const LinearGains& gains(int node, int i) const { return linear_[node * regimes_ + i]; }
  const ConeSide& side(int node, int i, bool positive) const {
    return (positive ? plus_ : minus_)[node * regimes_ + i];
  }
  const ConeSpec& cone1() const { return cone1_; }
  const ConeSpec& cone2() const { return cone2_; }

 private:
  friend FeedbackLaw build_feedback(const GameModel&, const SRESolution*, const PhiSolution*);
  friend FeedbackLaw build_constrained_feedback(const GameModel&, const SRESolution*,
                                                const SRESolution*);
  LawKind kind_ = LawKind::Unconstrained;
  int m1_ = 1, m2_ = 1, regimes_ = 1;
  TimeGrid grid_;
  ConeSpec cone1_, cone2_;
  std::vector<LinearGains> linear_;
  std::vector<ConeSide> plus_, minus_;
};

/// Unconstrained laws from P and phi. A null phi is accepted for homogeneous models.
FeedbackLaw build_feedback(const GameModel& model, const SRESolution* sre, const PhiSolution* phi);
/// X^+/X^- laws from the constrained pair (P1, P2).
FeedbackLaw build_constrained_feedback(const GameModel& model, const SRESolution* P1,
                                       const SRESolution* P2);

/// Control policy for simulation. With a law, Player1 plays u1 = u1* + a1 + c1 x and
/// Player 2 responds u2 = beta2*(u1) + a2 + c2 x (mirrored for Player2). Without a
/// law both controls are the affine shifts alone. Empty shift vectors mean zero.
struct Policy {
  enum class Game { Player1, Player2 };
  Game game = Game::Player1;
  Vec a1, c1, a2, c2;
  std::string label;
};

struct MCOptions {
  int workers = 1;                                       // 0 = hardware concurrency
  double reference = std::numeric_limits<double>::quiet_NaN();  // V for identity residuals
  double soft_sigma = 3.0, hard_sigma = 5.0;
};

struct PolicyEstimate {
  std::string label;
  double J = 0.0, J_stderr = 0.0;
  // Completing-square penalty (unconstrained laws) or the cone identity integrand.
  double aux = 0.0, aux_stderr = 0.0;
  // Paired difference against the first policy.
  double diff = 0.0, diff_stderr = 0.0;
  // J - reference - aux, pathwise.
  double residual = 0.0, residual_stderr = 0.0;
  std::int64_t paths = 0;
};

/// Simulates every policy on every path of the bundle (common random numbers)
/// and estimates the objective. Per-path results are reduced in path order.
std::vector<PolicyEstimate> estimate_objective(const GameModel& model, const FeedbackLaw* law,
                                               const std::vector<Policy>& policies,
                                               const PathBundle& bundle,
                                               const MCOptions& opt = {});

/// State paths, one row per path.
Mat simulate_closed_loop(const GameModel& model, const FeedbackLaw* law, const Policy& policy,
                         const PathBundle& bundle);

struct PathTrace {
  std::vector<double> t, X;
  std::vector<int> regime;
  std::vector<Vec> u1, u2;
};
std::vector<PathTrace> trace_paths(const GameModel& model, const FeedbackLaw* law,
                                   const Policy& policy, const PathBundle& bundle, int count);

/// V = P(0,i0)x^2 + 2 phi(0,i0)x + int sum_i p_i(t)[P sigma'sigma + 2(phi b + sigma'Delta) + H3] dt.
double value_formula(const GameModel& model, const SRESolution& sre, const PhiSolution& phi,
                     const TimeGrid& grid);
/// P1(0,i0)(x^+)^2 + P2(0,i0)(x^-)^2.
double constrained_value(const GameModel& model, const SRESolution& P1, const SRESolution& P2);

struct Perturbation {
  enum class Target { U1, Beta2 };
  Target target = Target::U1;
  Vec a, c;  // shift a + c x
};

struct Verdict {
  std::string name;
  double estimate = 0.0, reference = 0.0, stderr_ = 0.0;
  bool soft_ok = true, hard_ok = true;
};

struct SimulationReport {
  double J = 0.0, J_stderr = 0.0;
  std::int64_t paths = 0;
  double V = 0.0;
  std::vector<PolicyEstimate> policies;
  std::vector<Verdict> verdicts;
  double residual = 0.0, residual_stderr = 0.0;
  bool soft_ok = true;
  bool hard_failed = false;

  std::string to_text() const;
};

/// Value, perturbation and completing-square checks for an unconstrained law.
SimulationReport saddle_check(const GameModel& model, const FeedbackLaw& law, double V,
                              const PathBundle& bundle, const std::vector<Perturbation>& perturbations,
                              const MCOptions& opt = {});

/// Value and cone-identity checks for a constrained law along the optimal pair.
SimulationReport constrained_check(const GameModel& model, const FeedbackLaw& law, double V,
                                   const PathBundle& bundle, const MCOptions& opt = {});

/// Random perturbations with entries in [-scale, scale], reproducible from seed.
std::vector<Perturbation> random_perturbations(const GameModel& model, int per_target,
                                               double scale, std::uint64_t seed);

struct ConsistencyResult {
  double max_u1_gap = 0.0;  // |u1* - beta1*(u2*)|
  double max_u2_gap = 0.0;  // |u2* - beta2*(u1*)|
  int samples = 0;
};
/// Checks u1* = beta1*(u2*) and u2* = beta2*(u1*) at random (t, i, x).
ConsistencyResult consistency_check(const FeedbackLaw& law, int samples, double xscale,
                                    std::uint64_t seed);

/// Largest difference of u1*, u2* between two laws at random (t, i, x).
double law_distance(const FeedbackLaw& a, const FeedbackLaw& b, int samples, double xscale,
                    std::uint64_t seed);

}  // namespace sregame
