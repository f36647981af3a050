#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "sregame/error.hpp"

namespace sregame {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Dimensions {
  int n = 1;   // Brownian dimension
  int m1 = 1;  // Player 1 control dimension
  int m2 = 1;  // Player 2 control dimension

  int m() const { return m1 + m2; }
  bool operator==(const Dimensions&) const = default;
};

/// Uniform grid t_k = k * T / N, k = 0..N.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 2;

  TimeGrid() = default;
  TimeGrid(double T, int N);

  double dt() const { return horizon / steps; }
  double node(int k) const { return k == steps ? horizon : k * dt(); }
  int nodes() const { return steps + 1; }
  bool operator==(const TimeGrid&) const = default;
};

/// Continuous-time Markov chain generator Q (rows sum to zero).
class RegimeGenerator {
 public:
  RegimeGenerator() : q_(Mat::Zero(1, 1)) {}
  explicit RegimeGenerator(Mat q);

  int count() const { return static_cast<int>(q_.rows()); }
  const Mat& q() const { return q_; }
  double rate(int i, int j) const { return q_(i, j); }
  /// max over all (i, j) of q_ij, i.e. the largest off-diagonal rate (0 when l = 1).
  double max_entry() const;

 private:
  Mat q_;
};

/// State-equation and running-cost coefficients at one (grid node, regime).
/// Coefficients are piecewise constant on [t_k, t_{k+1}).
struct NodeCoefficients {
  double A = 0.0;
  Vec B1, B2;
  double b = 0.0;
  Vec C;
  Mat D1, D2;
  Vec sigma;
  double K = 0.0;
  Mat R11, R12, R22;

  static NodeCoefficients zeros(const Dimensions& d);
  Vec B() const;
  Mat D() const;
  Mat R() const;
};

/// Bounded factor loadings for the random-coefficient mode:
///   coeff(t, i, w) = base(t, i) + tanh(w) * loading(i),
/// with w the factor state (first Brownian coordinate on the path).
struct FactorLoading {
  double A = 0.0;
  Vec B1, B2;
  Vec C;
  double K = 0.0;

  static FactorLoading zeros(const Dimensions& d);
  bool is_zero() const;
};

enum class CoefficientMode { DeterministicPerRegime, FactorDriven };

enum class ConeKind { FullSpace, NonNegOrthant, FiniteGenerator };

/// Closed convex cone. FiniteGenerator cones are {R lambda : lambda >= 0} with
/// R holding unit-norm, linearly independent rays as columns.
class ConeSpec {
 public:
  ConeSpec() = default;
  static ConeSpec full(int dim);
  static ConeSpec orthant(int dim);
  static ConeSpec generated(const Mat& rays);

  ConeKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Mat& rays() const { return rays_; }
  bool is_full() const { return kind_ == ConeKind::FullSpace; }

  /// Euclidean distance from v to the cone.
  double distance(const Vec& v) const;
  bool contains(const Vec& v, double tol = 1e-12) const { return distance(v) <= tol; }
  std::string describe() const;

  bool operator==(const ConeSpec& o) const;

 private:
  ConeKind kind_ = ConeKind::FullSpace;
  int dim_ = 1;
  Mat rays_;
};

struct AssumptionReport {
  double c1 = 0.0, cbar2 = 0.0, cunder2 = 0.0, c3 = 0.0;
  double Kbar = 0.0, Gbar = 0.0;
  double epsilon = 0.0, epsbar = 0.0;
  bool assumption1_ok = false;  // D_k' D_k uniformly positive definite
  bool assumption2_ok = false;  // weight-matrix definiteness margins
  bool assumption3_ok = false;  // 2 cbar2 < epsilon
  double margin1 = 0.0, margin2 = 0.0, margin3 = 0.0;
  std::string worst_weight;     // e.g. "R11 at node 3, regime 1"
  bool degenerate_rate = false; // c1 * l below the series-limit threshold

  bool all_ok() const { return assumption1_ok && assumption2_ok && assumption3_ok; }
};

class GameModel {
 public:
  using Table = std::vector<std::vector<NodeCoefficients>>;  // [node][regime]

  GameModel(Dimensions dims, RegimeGenerator regimes, TimeGrid grid, Table table,
            std::vector<double> G, double x0, int i0,
            ConeSpec cone1, ConeSpec cone2,
            std::optional<std::vector<FactorLoading>> loadings = std::nullopt);

  const Dimensions& dims() const { return dims_; }
  const RegimeGenerator& regimes() const { return regimes_; }
  int regime_count() const { return regimes_.count(); }
  const TimeGrid& grid() const { return grid_; }
  double horizon() const { return grid_.horizon; }
  const std::vector<double>& G() const { return G_; }
  double x0() const { return x0_; }
  int i0() const { return i0_; }
  const ConeSpec& cone1() const { return cone1_; }
  const ConeSpec& cone2() const { return cone2_; }
  const Table& table() const { return table_; }

  CoefficientMode mode() const {
    return loadings_ ? CoefficientMode::FactorDriven : CoefficientMode::DeterministicPerRegime;
  }
  const std::optional<std::vector<FactorLoading>>& loadings() const { return loadings_; }

  const NodeCoefficients& at(int node, int regime) const { return table_[node][regime]; }
  /// Coefficients on a path with factor state w (equals at() in deterministic mode).
  NodeCoefficients at(int node, int regime, double factor) const;

  /// b == 0 and sigma == 0 everywhere.
  bool homogeneous() const;
  bool constrained() const { return !cone1_.is_full() || !cone2_.is_full(); }

  GameModel with_initial(double x0, int i0) const;
  GameModel with_cones(ConeSpec c1, ConeSpec c2) const;
  GameModel with_table(Table table, std::vector<double> G) const;
  GameModel with_generator(RegimeGenerator regimes) const;
  GameModel without_factor() const;

 private:
  void validate() const;

  Dimensions dims_;
  RegimeGenerator regimes_;
  TimeGrid grid_;
  Table table_;
  std::vector<double> G_;
  double x0_ = 0.0;
  int i0_ = 0;
  ConeSpec cone1_, cone2_;
  std::optional<std::vector<FactorLoading>> loadings_;
};

/// (e^{a T} - 1) / a, continuous at a = 0.
double expm1_ratio(double a, double T);

AssumptionReport compute_constants(const GameModel& model);

/// Multiplies K, R11, R12, R22 and G by ctilde > 0.
GameModel scale_cost(const GameModel& model, double ctilde);

/// Builds a model with constant-in-time coefficients per regime.
GameModel constant_model(const Dimensions& dims, const RegimeGenerator& regimes,
                         const TimeGrid& grid,
                         const std::vector<NodeCoefficients>& per_regime,
                         std::vector<double> G, double x0, int i0,
                         ConeSpec cone1, ConeSpec cone2);

}  // namespace sregame
