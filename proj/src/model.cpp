#include "sregame/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sregame {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kSymTol = 1e-12;
constexpr double kDegenerateRate = 1e-8;

bool finite(const Mat& m) { return m.allFinite(); }

void check_shape(const Mat& m, Eigen::Index r, Eigen::Index c, const char* name, int node,
                 int regime) {
  if (m.rows() != r || m.cols() != c) {
    std::ostringstream os;
    os << name << " at node " << node << ", regime " << regime << " is " << m.rows() << "x"
       << m.cols() << ", expected " << r << "x" << c;
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

double max_eig(const Mat& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_eig(const Mat& s) {
  if (s.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Least-squares projection coefficients onto a finitely generated cone:
// min |R lambda - v| over lambda >= 0, by enumeration of the supporting face.
Vec cone_projection(const Mat& rays, const Vec& v) {
  const int p = static_cast<int>(rays.cols());
  Vec best = Vec::Zero(rays.rows());
  double best_dist = v.norm();
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    std::vector<int> idx;
    for (int j = 0; j < p; ++j)
      if (mask & (1u << j)) idx.push_back(j);
    Mat sub(rays.rows(), idx.size());
    for (size_t k = 0; k < idx.size(); ++k) sub.col(k) = rays.col(idx[k]);
    Vec lam = sub.colPivHouseholderQr().solve(v);
    if ((lam.array() < 0.0).any()) continue;
    Vec proj = sub * lam;
    double d = (v - proj).norm();
    if (d < best_dist) {
      best_dist = d;
      best = proj;
    }
  }
  return best;
}

}  // namespace

TimeGrid::TimeGrid(double T, int N) : horizon(T), steps(N) {
  if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorCode::InvalidArgument, "horizon must be > 0");
  if (N < 2) fail(ErrorCode::InvalidArgument, "grid needs N >= 2 steps");
}

RegimeGenerator::RegimeGenerator(Mat q) : q_(std::move(q)) {
  if (q_.rows() < 1 || q_.rows() != q_.cols())
    fail(ErrorCode::DimensionMismatch, "generator must be a non-empty square matrix");
  if (!finite(q_)) fail(ErrorCode::InvalidArgument, "generator has non-finite entries");
  for (Eigen::Index i = 0; i < q_.rows(); ++i) {
    for (Eigen::Index j = 0; j < q_.cols(); ++j)
      if (i != j && q_(i, j) < 0.0)
        fail(ErrorCode::InvalidArgument, "generator has a negative off-diagonal rate");
    if (std::abs(q_.row(i).sum()) > kRowSumTol)
      fail(ErrorCode::InvalidArgument, "generator row " + std::to_string(i) + " does not sum to 0");
  }
}

double RegimeGenerator::max_entry() const { return q_.maxCoeff(); }

NodeCoefficients NodeCoefficients::zeros(const Dimensions& d) {
  NodeCoefficients c;
  c.B1 = Vec::Zero(d.m1);
  c.B2 = Vec::Zero(d.m2);
  c.C = Vec::Zero(d.n);
  c.D1 = Mat::Zero(d.n, d.m1);
  c.D2 = Mat::Zero(d.n, d.m2);
  c.sigma = Vec::Zero(d.n);
  c.R11 = Mat::Zero(d.m1, d.m1);
  c.R12 = Mat::Zero(d.m1, d.m2);
  c.R22 = Mat::Zero(d.m2, d.m2);
  return c;
}

Vec NodeCoefficients::B() const {
  Vec b(B1.size() + B2.size());
  b << B1, B2;
  return b;
}

Mat NodeCoefficients::D() const {
  Mat d(D1.rows(), D1.cols() + D2.cols());
  d << D1, D2;
  return d;
}

Mat NodeCoefficients::R() const {
  const auto m1 = R11.rows(), m2 = R22.rows();
  Mat r(m1 + m2, m1 + m2);
  r.topLeftCorner(m1, m1) = R11;
  r.topRightCorner(m1, m2) = R12;
  r.bottomLeftCorner(m2, m1) = R12.transpose();
  r.bottomRightCorner(m2, m2) = R22;
  return r;
}

FactorLoading FactorLoading::zeros(const Dimensions& d) {
  FactorLoading f;
  f.B1 = Vec::Zero(d.m1);
  f.B2 = Vec::Zero(d.m2);
  f.C = Vec::Zero(d.n);
  return f;
}

bool FactorLoading::is_zero() const {
  return A == 0.0 && K == 0.0 && B1.isZero(0.0) && B2.isZero(0.0) && C.isZero(0.0);
}

ConeSpec ConeSpec::full(int dim) {
  ConeSpec c;
  c.kind_ = ConeKind::FullSpace;
  c.dim_ = dim;
  return c;
}

ConeSpec ConeSpec::orthant(int dim) {
  ConeSpec c;
  c.kind_ = ConeKind::NonNegOrthant;
  c.dim_ = dim;
  return c;
}

ConeSpec ConeSpec::generated(const Mat& rays) {
  if (rays.cols() < 1 || rays.rows() < 1)
    fail(ErrorCode::InvalidArgument, "generated cone needs at least one ray");
  if (rays.cols() > rays.rows())
    fail(ErrorCode::ConeUnsupported, "generated cone rays must be linearly independent");
  ConeSpec c;
  c.kind_ = ConeKind::FiniteGenerator;
  c.dim_ = static_cast<int>(rays.rows());
  c.rays_ = rays;
  for (Eigen::Index j = 0; j < rays.cols(); ++j) {
    double nrm = rays.col(j).norm();
    if (!(nrm > 0.0)) fail(ErrorCode::InvalidArgument, "generated cone has a zero ray");
    c.rays_.col(j) /= nrm;
  }
  Eigen::FullPivLU<Mat> lu(c.rays_);
  if (lu.rank() < rays.cols())
    fail(ErrorCode::ConeUnsupported, "generated cone rays must be linearly independent");
  return c;
}

double ConeSpec::distance(const Vec& v) const {
  switch (kind_) {
    case ConeKind::FullSpace:
      return 0.0;
    case ConeKind::NonNegOrthant:
      return v.cwiseMin(0.0).norm();
    case ConeKind::FiniteGenerator:
      return (v - cone_projection(rays_, v)).norm();
  }
  return 0.0;
}

std::string ConeSpec::describe() const {
  switch (kind_) {
    case ConeKind::FullSpace: return "full";
    case ConeKind::NonNegOrthant: return "orthant";
    case ConeKind::FiniteGenerator: return "rays";
  }
  return "?";
}

bool ConeSpec::operator==(const ConeSpec& o) const {
  if (kind_ != o.kind_ || dim_ != o.dim_) return false;
  if (kind_ != ConeKind::FiniteGenerator) return true;
  return rays_.rows() == o.rays_.rows() && rays_.cols() == o.rays_.cols() && rays_ == o.rays_;
}

GameModel::GameModel(Dimensions dims, RegimeGenerator regimes, TimeGrid grid, Table table,
                     std::vector<double> G, double x0, int i0, ConeSpec cone1, ConeSpec cone2,
                     std::optional<std::vector<FactorLoading>> loadings)
    : dims_(dims),
      regimes_(std::move(regimes)),
      grid_(grid),
      table_(std::move(table)),
      G_(std::move(G)),
      x0_(x0),
      i0_(i0),
      cone1_(std::move(cone1)),
      cone2_(std::move(cone2)),
      loadings_(std::move(loadings)) {
  validate();
}

void GameModel::validate() const {
  const int l = regimes_.count();
  const auto& d = dims_;
  if (d.n < 1 || d.m1 < 1 || d.m2 < 1)
    fail(ErrorCode::DimensionMismatch, "dimensions n, m1, m2 must be >= 1");
  if (!(grid_.horizon > 0.0) || grid_.steps < 2)
    fail(ErrorCode::InvalidArgument, "grid needs T > 0 and N >= 2");
  if (i0_ < 0 || i0_ >= l) fail(ErrorCode::InvalidArgument, "initial regime out of range");
  if (!std::isfinite(x0_)) fail(ErrorCode::InvalidArgument, "initial state is not finite");
  if (static_cast<int>(G_.size()) != l)
    fail(ErrorCode::DimensionMismatch, "terminal weight G needs one entry per regime");
  for (double g : G_)
    if (!std::isfinite(g)) fail(ErrorCode::InvalidArgument, "terminal weight is not finite");
  if (static_cast<int>(table_.size()) != grid_.nodes())
    fail(ErrorCode::DimensionMismatch, "coefficient table needs N+1 nodes");
  for (int k = 0; k < grid_.nodes(); ++k) {
    if (static_cast<int>(table_[k].size()) != l)
      fail(ErrorCode::DimensionMismatch, "coefficient table needs one entry per regime");
    for (int i = 0; i < l; ++i) {
      const auto& c = table_[k][i];
      check_shape(c.B1, d.m1, 1, "B1", k, i);
      check_shape(c.B2, d.m2, 1, "B2", k, i);
      check_shape(c.C, d.n, 1, "C", k, i);
      check_shape(c.D1, d.n, d.m1, "D1", k, i);
      check_shape(c.D2, d.n, d.m2, "D2", k, i);
      check_shape(c.sigma, d.n, 1, "sigma", k, i);
      check_shape(c.R11, d.m1, d.m1, "R11", k, i);
      check_shape(c.R12, d.m1, d.m2, "R12", k, i);
      check_shape(c.R22, d.m2, d.m2, "R22", k, i);
      bool ok = std::isfinite(c.A) && std::isfinite(c.b) && std::isfinite(c.K) &&
                finite(c.B1) && finite(c.B2) && finite(c.C) && finite(c.D1) && finite(c.D2) &&
                finite(c.sigma) && finite(c.R11) && finite(c.R12) && finite(c.R22);
      if (!ok) fail(ErrorCode::InvalidArgument, "non-finite coefficient at node " +
                                                    std::to_string(k));
      if ((c.R11 - c.R11.transpose()).cwiseAbs().maxCoeff() > kSymTol ||
          (c.R22 - c.R22.transpose()).cwiseAbs().maxCoeff() > kSymTol)
        fail(ErrorCode::InvalidArgument, "R11 and R22 must be symmetric");
    }
  }
  if (cone1_.dim() != d.m1 || cone2_.dim() != d.m2)
    fail(ErrorCode::DimensionMismatch, "cone dimensions must match m1, m2");
  if (constrained() && !homogeneous())
    fail(ErrorCode::InvalidArgument,
         "cone-constrained games require homogeneous dynamics (b = 0, sigma = 0)");
  if (loadings_) {
    if (static_cast<int>(loadings_->size()) != l)
      fail(ErrorCode::DimensionMismatch, "factor loadings need one entry per regime");
    for (const auto& f : *loadings_) {
      if (f.B1.size() != d.m1 || f.B2.size() != d.m2 || f.C.size() != d.n)
        fail(ErrorCode::DimensionMismatch, "factor loading shapes disagree with (n, m1, m2)");
    }
  }
}

NodeCoefficients GameModel::at(int node, int regime, double factor) const {
  NodeCoefficients c = table_[node][regime];
  if (!loadings_) return c;
  const auto& f = (*loadings_)[regime];
  const double s = std::tanh(factor);
  c.A += s * f.A;
  c.B1 += s * f.B1;
  c.B2 += s * f.B2;
  c.C += s * f.C;
  c.K += s * f.K;
  return c;
}

bool GameModel::homogeneous() const {
  for (const auto& row : table_)
    for (const auto& c : row)
      if (c.b != 0.0 || !c.sigma.isZero(0.0)) return false;
  return true;
}

GameModel GameModel::with_initial(double x0, int i0) const {
  return GameModel(dims_, regimes_, grid_, table_, G_, x0, i0, cone1_, cone2_, loadings_);
}

GameModel GameModel::with_cones(ConeSpec c1, ConeSpec c2) const {
  return GameModel(dims_, regimes_, grid_, table_, G_, x0_, i0_, std::move(c1), std::move(c2),
                   loadings_);
}

GameModel GameModel::with_table(Table table, std::vector<double> G) const {
  return GameModel(dims_, regimes_, grid_, std::move(table), std::move(G), x0_, i0_, cone1_,
                   cone2_, loadings_);
}

GameModel GameModel::with_generator(RegimeGenerator regimes) const {
  return GameModel(dims_, std::move(regimes), grid_, table_, G_, x0_, i0_, cone1_, cone2_,
                   loadings_);
}

GameModel GameModel::without_factor() const {
  return GameModel(dims_, regimes_, grid_, table_, G_, x0_, i0_, cone1_, cone2_, std::nullopt);
}

double expm1_ratio(double a, double T) {
  const double x = a * T;
  if (std::abs(x) < kDegenerateRate) return T * (1.0 + x / 2.0 + x * x / 6.0);
  return std::expm1(x) / a;
}

AssumptionReport compute_constants(const GameModel& model) {
  AssumptionReport r;
  const int l = model.regime_count();
  const double T = model.horizon();
  const double qmax = model.regimes().max_entry();

  double c1 = -std::numeric_limits<double>::infinity();
  double cbar2 = 0.0, cunder2 = std::numeric_limits<double>::infinity(), c3 = 0.0, Kbar = 0.0;

  // In factor mode tanh(w) ranges over (-1, 1); every scanned quantity is
  // convex in tanh(w), so the supremum sits at the endpoints.
  std::vector<double> factors = {0.0};
  if (model.loadings()) factors = {-std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity()};

  for (int k = 0; k < model.grid().nodes(); ++k) {
    for (int i = 0; i < l; ++i) {
      for (double w : factors) {
        const NodeCoefficients c = model.at(k, i, w);
        c1 = std::max(c1, 2.0 * c.A + c.C.squaredNorm() + qmax);
        const Mat g1 = c.D1.transpose() * c.D1;
        const Mat g2 = c.D2.transpose() * c.D2;
        cbar2 = std::max({cbar2, max_eig(g1), max_eig(g2)});
        cunder2 = std::min({cunder2, min_eig(g1), min_eig(g2)});
        c3 = std::max({c3, (c.B1 + c.D1.transpose() * c.C).squaredNorm(),
                       (c.B2 + c.D2.transpose() * c.C).squaredNorm()});
        Kbar = std::max(Kbar, std::abs(c.K));
      }
    }
  }
  double Gbar = 0.0;
  for (double g : model.G()) Gbar = std::max(Gbar, std::abs(g));

  r.c1 = std::max(c1, 0.0);
  r.cbar2 = cbar2;
  r.cunder2 = std::max(cunder2, 0.0);
  r.c3 = c3;
  r.Kbar = Kbar;
  r.Gbar = Gbar;

  const double a = r.c1 * l;
  r.degenerate_rate = a * T < kDegenerateRate;
  const double ratio = expm1_ratio(a, T);  // (e^{aT} - 1) / a
  const double growth = std::exp(a * T);
  // epsbar = c1 l eps / (4 c3 (e^{c1 l T} - 1)) simplifies to
  // 2 [Kbar (e^{c1 l T} - 1) / (c1 l) + Gbar e^{c1 l T}].
  r.epsbar = 2.0 * (Kbar * ratio + Gbar * growth);
  r.epsilon = 4.0 * c3 * ratio * r.epsbar;

  const double need = r.epsilon + r.epsbar * r.cbar2;
  r.margin1 = r.cunder2;
  r.assumption1_ok = cunder2 > 0.0;

  double margin2 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < model.grid().nodes(); ++k) {
    for (int i = 0; i < l; ++i) {
      const auto& c = model.at(k, i);
      const double s11 = -need - max_eig(c.R11);
      const double s22 = min_eig(c.R22) - need;
      if (s11 < margin2) {
        margin2 = s11;
        r.worst_weight = "R11 at node " + std::to_string(k) + ", regime " + std::to_string(i);
      }
      if (s22 < margin2) {
        margin2 = s22;
        r.worst_weight = "R22 at node " + std::to_string(k) + ", regime " + std::to_string(i);
      }
    }
  }
  r.margin2 = margin2;
  r.assumption2_ok = margin2 >= 0.0;
  r.margin3 = r.epsilon - 2.0 * r.cbar2;
  r.assumption3_ok = r.margin3 > 0.0;
  return r;
}

GameModel scale_cost(const GameModel& model, double ctilde) {
  if (!(ctilde > 0.0) || !std::isfinite(ctilde))
    fail(ErrorCode::NonPositiveScale, "cost scale must be > 0");
  GameModel::Table table = model.table();
  for (auto& row : table) {
    for (auto& c : row) {
      c.K *= ctilde;
      c.R11 *= ctilde;
      c.R12 *= ctilde;
      c.R22 *= ctilde;
    }
  }
  std::vector<double> G = model.G();
  for (double& g : G) g *= ctilde;
  std::optional<std::vector<FactorLoading>> loadings = model.loadings();
  if (loadings)
    for (auto& f : *loadings) f.K *= ctilde;
  return GameModel(model.dims(), model.regimes(), model.grid(), std::move(table), std::move(G),
                   model.x0(), model.i0(), model.cone1(), model.cone2(), std::move(loadings));
}

GameModel constant_model(const Dimensions& dims, const RegimeGenerator& regimes,
                         const TimeGrid& grid, const std::vector<NodeCoefficients>& per_regime,
                         std::vector<double> G, double x0, int i0, ConeSpec cone1,
                         ConeSpec cone2) {
  GameModel::Table table(grid.nodes(), per_regime);
  return GameModel(dims, regimes, grid, std::move(table), std::move(G), x0, i0,
                   std::move(cone1), std::move(cone2));
}

}  // namespace sregame
