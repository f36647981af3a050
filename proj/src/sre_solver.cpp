#include "sregame/sre_solver.hpp"

#include <algorithm>
#include <cmath>

namespace sregame {

namespace {

void require_grid(const GameModel& model, const TimeGrid& grid) {
  if (!(grid == model.grid()))
    fail(ErrorCode::GridMismatch, "solver grid differs from the model's coefficient grid");
}

double hamiltonian_margin(const AssumptionReport& rep) {
  return rep.all_ok() ? 0.5 * rep.epsilon : 0.0;
}

// K + P (2A + C'C) + 2 C'Lambda + sum_j q_ij P_j, without the Hamiltonian term.
double linear_part(const NodeCoefficients& c, const RegimeGenerator& q, int i, const Vec& P,
                   const Vec& Lambda) {
  double v = c.K + P(i) * (2.0 * c.A + c.C.squaredNorm()) + 2.0 * c.C.dot(Lambda);
  for (int j = 0; j < q.count(); ++j) v += q.rate(i, j) * P(j);
  return v;
}

}  // namespace

double ComparisonEnvelope::upper(double t) const {
  const double s = horizon - t;
  return Gbar * std::exp(rate * s) + slope * expm1_ratio(rate, s);
}

ComparisonEnvelope comparison_envelope(const AssumptionReport& rep, double horizon,
                                       int regimes) {
  ComparisonEnvelope e;
  e.horizon = horizon;
  e.rate = rep.c1 * regimes;
  e.Gbar = rep.Gbar;
  e.Kbar = rep.Kbar;
  e.epsbar = rep.epsbar;
  e.degenerate = rep.degenerate_rate;
  // 2 c3 epsbar^2 / epsilon = epsbar / (2 E) with E = (e^{c1 l T} - 1) / (c1 l),
  // which stays finite when c3 = 0.
  e.slope = rep.Kbar + rep.epsbar / (2.0 * expm1_ratio(e.rate, horizon));
  return e;
}

ComparisonEnvelope comparison_envelope(const GameModel& model) {
  return comparison_envelope(compute_constants(model), model.horizon(), model.regime_count());
}

bool SRESolution::all_bounds_ok() const {
  for (size_t k = 0; k < bound_ok.size(); ++k)
    for (size_t i = 0; i < bound_ok[k].size(); ++i)
      if (!bound_ok[k][i] || !envelope_ok[k][i]) return false;
  return true;
}

std::vector<Vec> integrate_backward(const TimeGrid& grid, const Vec& terminal,
                                    const BackwardGenerator& F) {
  const int N = grid.steps;
  const double h = grid.dt();
  std::vector<Vec> y(N + 1);
  y[N] = terminal;
  Vec k1(terminal.size()), k2(terminal.size()), k3(terminal.size()), k4(terminal.size());
  for (int k = N - 1; k >= 0; --k) {
    const Vec& yn = y[k + 1];
    F(k, yn, k1);
    F(k, yn + 0.5 * h * k1, k2);
    F(k, yn + 0.5 * h * k2, k3);
    F(k, yn + h * k3, k4);
    y[k] = yn + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y[k].allFinite())
      fail(ErrorCode::StepRejected, "non-finite stage derivative at node " + std::to_string(k));
  }
  return y;
}

SRESolution finish_solution(const GameModel& model, const TimeGrid& grid,
                            const std::vector<Vec>& values, const SolverOptions& opt) {
  const AssumptionReport rep = compute_constants(model);
  const ComparisonEnvelope env = comparison_envelope(rep, model.horizon(), model.regime_count());
  const int l = model.regime_count();
  SRESolution s;
  s.grid = grid;
  s.regimes = l;
  s.n = model.dims().n;
  s.epsbar = rep.epsbar;
  s.assumptions_ok = rep.all_ok();
  s.P.assign(grid.nodes(), std::vector<double>(l));
  s.Lambda.assign(grid.nodes(), std::vector<Vec>(l, Vec::Zero(s.n)));
  s.bound_ok.assign(grid.nodes(), std::vector<char>(l, 1));
  s.envelope_ok.assign(grid.nodes(), std::vector<char>(l, 1));
  for (int k = 0; k < grid.nodes(); ++k) {
    const double up = env.upper(grid.node(k));
    for (int i = 0; i < l; ++i) {
      const double p = values[k](i);
      s.P[k][i] = p;
      s.bound_ok[k][i] = std::abs(p) <= rep.epsbar + opt.bound_tol;
      s.envelope_ok[k][i] = std::abs(p) <= up + opt.bound_tol;
    }
  }
  if (s.assumptions_ok && opt.raise_on_bound_violation && !s.all_bounds_ok())
    fail(ErrorCode::BoundViolation, "solution leaves the comparison envelope");
  return s;
}

SRESolution solve_sre(const GameModel& model, const TimeGrid& grid, const SolverOptions& opt) {
  require_grid(model, grid);
  const AssumptionReport rep = compute_constants(model);
  const double margin = hamiltonian_margin(rep);
  const int l = model.regime_count();
  const Vec zero = Vec::Zero(model.dims().n);
  const auto& q = model.regimes();
  auto F = [&](int node, const Vec& P, Vec& out) {
    out.resize(l);
    for (int i = 0; i < l; ++i) {
      const auto& c = model.at(node, i);
      const HamiltonianEval h = assemble(P(i), zero, 0.0, zero, c, margin);
      out(i) = linear_part(c, q, i, P, zero) + h.H1;
    }
  };
  const Vec terminal = Eigen::Map<const Vec>(model.G().data(), l);
  SRESolution s = finish_solution(model, grid, integrate_backward(grid, terminal, F), opt);
  for (int i = 0; i < l; ++i) s.P[grid.steps][i] = model.G()[i];
  return s;
}

std::pair<SRESolution, SRESolution> solve_sre_constrained(const GameModel& model,
                                                          const TimeGrid& grid,
                                                          const SolverOptions& opt) {
  require_grid(model, grid);
  if (!model.homogeneous())
    fail(ErrorCode::InvalidArgument, "constrained solve requires b = 0 and sigma = 0");
  const AssumptionReport rep = compute_constants(model);
  const double margin = hamiltonian_margin(rep);
  const int l = model.regime_count();
  const Vec zero = Vec::Zero(model.dims().n);
  const auto& q = model.regimes();
  const Vec terminal = Eigen::Map<const Vec>(model.G().data(), l);

  auto solve_sign = [&](int sign) {
    int last_certified = -1;
    auto F = [&](int node, const Vec& P, Vec& out) {
      out.resize(l);
      const bool certify = opt.certify_stride > 0 && node % opt.certify_stride == 0 &&
                           node != last_certified;
      if (certify) last_certified = node;
      for (int i = 0; i < l; ++i) {
        const auto& c = model.at(node, i);
        double H;
        if (certify) {
          ConstrainedOptions co;
          co.margin = margin;
          const auto e = constrained_eval(P(i), zero, model.cone1(), model.cone2(), c, co);
          H = sign > 0 ? e.Htilde1 : e.Htilde2;
        } else {
          H = htilde(sign, P(i), zero, model.cone1(), model.cone2(), c, margin);
        }
        out(i) = linear_part(c, q, i, P, zero) + H;
      }
    };
    SRESolution s = finish_solution(model, grid, integrate_backward(grid, terminal, F), opt);
    for (int i = 0; i < l; ++i) s.P[grid.steps][i] = model.G()[i];
    return s;
  };
  SRESolution p1 = solve_sign(+1);
  SRESolution p2 = solve_sign(-1);
  return {std::move(p1), std::move(p2)};
}

PhiSolution solve_linear_bsde(const GameModel& model, const SRESolution& sre,
                              const TimeGrid& grid) {
  if (!(sre.grid == grid) || !(grid == model.grid()) || sre.regimes != model.regime_count())
    fail(ErrorCode::GridMismatch, "Riccati solution and BSDE grids differ");
  const int l = model.regime_count();
  const int N = grid.steps;
  const double h = grid.dt();
  const Vec zero = Vec::Zero(model.dims().n);
  const auto& q = model.regimes();

  // dP/dt with the node-k coefficients, for Hermite midpoint values.
  auto Pdot = [&](int node, const Vec& P) {
    Vec d(l);
    for (int i = 0; i < l; ++i) {
      const auto& c = model.at(node, i);
      d(i) = -(linear_part(c, q, i, P, zero) + assemble(P(i), zero, 0.0, zero, c).H1);
    }
    return d;
  };

  PhiSolution out;
  out.grid = grid;
  out.regimes = l;
  out.phi.assign(grid.nodes(), std::vector<double>(l, 0.0));
  out.Delta.assign(grid.nodes(), std::vector<Vec>(l, zero));

  auto G = [&](int node, const Vec& P, const Vec& phi) {
    Vec g(l);
    for (int i = 0; i < l; ++i) {
      const auto& c = model.at(node, i);
      const HamiltonianEval e = assemble(P(i), zero, phi(i), zero, c);
      double v = P(i) * (c.b + c.C.dot(c.sigma)) + c.A * phi(i) + e.H2;
      for (int j = 0; j < l; ++j) v += q.rate(i, j) * phi(j);
      g(i) = v;
    }
    return g;
  };

  Vec phi = Vec::Zero(l);
  for (int k = N - 1; k >= 0; --k) {
    Vec P0(l), P1(l);
    for (int i = 0; i < l; ++i) {
      P0(i) = sre.P[k][i];
      P1(i) = sre.P[k + 1][i];
    }
    const Vec Pm = 0.5 * (P0 + P1) + h / 8.0 * (Pdot(k, P0) - Pdot(k, P1));
    const Vec k1 = G(k, P1, phi);
    const Vec k2 = G(k, Pm, phi + 0.5 * h * k1);
    const Vec k3 = G(k, Pm, phi + 0.5 * h * k2);
    const Vec k4 = G(k, P0, phi + h * k3);
    phi = phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!phi.allFinite()) fail(ErrorCode::StepRejected, "non-finite linear BSDE step");
    for (int i = 0; i < l; ++i) out.phi[k][i] = phi(i);
  }
  return out;
}

std::vector<SRESolution> monotone_truncated_sequence(const GameModel& model, const TimeGrid& grid,
                                                     const std::vector<int>& ks,
                                                     const SolverOptions& opt) {
  require_grid(model, grid);
  for (size_t j = 0; j < ks.size(); ++j) {
    if (ks[j] < 1) fail(ErrorCode::InvalidArgument, "truncation levels must be >= 1");
    if (j > 0 && ks[j] <= ks[j - 1])
      fail(ErrorCode::InvalidArgument, "truncation levels must be increasing");
  }
  const AssumptionReport rep = compute_constants(model);
  const int l = model.regime_count();
  const Vec zero = Vec::Zero(model.dims().n);
  const auto& q = model.regimes();
  const Vec terminal = Eigen::Map<const Vec>(model.G().data(), l);

  std::vector<SRESolution> out;
  for (int k : ks) {
    auto F = [&](int node, const Vec& P, Vec& res) {
      res.resize(l);
      for (int i = 0; i < l; ++i) {
        const auto& c = model.at(node, i);
        res(i) = linear_part(c, q, i, P, zero) + h1_truncated(k, P(i), zero, c, rep);
      }
    };
    SRESolution s = finish_solution(model, grid, integrate_backward(grid, terminal, F), opt);
    for (int i = 0; i < l; ++i) s.P[grid.steps][i] = model.G()[i];
    if (!out.empty() && rep.all_ok() && opt.raise_on_bound_violation) {
      const SRESolution& prev = out.back();
      for (int node = 0; node < grid.nodes(); ++node)
        for (int i = 0; i < l; ++i)
          if (s.P[node][i] > prev.P[node][i] + opt.bound_tol)
            fail(ErrorCode::BoundViolation, "truncated solutions are not monotone in k");
    }
    out.push_back(std::move(s));
  }
  return out;
}

RandomSRESolution solve_sre_random(const GameModel& model, const TimeGrid& grid,
                                   const PathBundle& paths, int basis_degree,
                                   const SolverOptions& opt) {
  require_grid(model, grid);
  if (model.mode() != CoefficientMode::FactorDriven)
    fail(ErrorCode::InvalidArgument, "random-coefficient solve needs factor loadings");
  if (!(paths.grid() == grid)) fail(ErrorCode::GridMismatch, "path bundle grid differs");
  if (basis_degree < 0) fail(ErrorCode::InvalidArgument, "basis degree must be >= 0");

  const AssumptionReport rep = compute_constants(model);
  const int l = model.regime_count();
  const int n = model.dims().n;
  const int N = grid.steps;
  const int nodes = grid.nodes();
  const double h = grid.dt();
  const std::int64_t M = paths.size();
  const auto& q = model.regimes();

  RandomSRESolution out;
  out.grid = grid;
  out.regimes = l;
  out.n = n;
  out.paths = M;
  out.basis_degree = basis_degree;
  out.epsbar = rep.epsbar;
  out.P.assign(static_cast<size_t>(M) * nodes * l, 0.0);
  out.Lambda.assign(static_cast<size_t>(M) * nodes * l * n, 0.0);
  out.residual.assign(N, 0.0);

  // Brownian increments and factor states for every path.
  std::vector<double> dW(static_cast<size_t>(M) * N * n), factor(static_cast<size_t>(M) * nodes);
  {
    PathBuffer buf;
    for (std::int64_t m = 0; m < M; ++m) {
      paths.fill(m, buf);
      std::copy(buf.dW.begin(), buf.dW.end(), dW.begin() + static_cast<size_t>(m) * N * n);
      std::copy(buf.factor.begin(), buf.factor.end(),
                factor.begin() + static_cast<size_t>(m) * nodes);
    }
  }
  auto Pidx = [&](std::int64_t m, int k, int i) {
    return (static_cast<size_t>(m) * nodes + k) * l + i;
  };

  for (std::int64_t m = 0; m < M; ++m)
    for (int i = 0; i < l; ++i) out.P[Pidx(m, N, i)] = model.G()[i];

  Vec w(M);
  Mat Psi;
  Vec Y(M), Yhat(M), target(M);
  std::vector<Mat> Lam(l, Mat::Zero(M, n));
  std::vector<Vec> Ycond(l, Vec::Zero(M));

  for (int k = N - 1; k >= 0; --k) {
    for (std::int64_t m = 0; m < M; ++m) w(m) = factor[static_cast<size_t>(m) * nodes + k];
    const double mean = w.mean();
    const double sd = std::sqrt((w.array() - mean).square().sum() / std::max<std::int64_t>(M - 1, 1));
    const int degree = sd > 1e-12 ? basis_degree : 0;
    Psi.resize(M, degree + 1);
    for (std::int64_t m = 0; m < M; ++m) {
      const double z = degree > 0 ? (w(m) - mean) / sd : 0.0;
      double p = 1.0;
      for (int d = 0; d <= degree; ++d) {
        Psi(m, d) = p;
        p *= z;
      }
    }
    const Mat normal = Psi.transpose() * Psi / static_cast<double>(M);
    Eigen::SelfAdjointEigenSolver<Mat> es(normal, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
      fail(ErrorCode::RegressionIllConditioned,
           "regression basis is ill-conditioned at node " + std::to_string(k));
    const auto ldlt = normal.ldlt();
    auto regress = [&](const Vec& y) {
      const Vec beta = ldlt.solve(Psi.transpose() * y / static_cast<double>(M));
      return Vec(Psi * beta);
    };

    for (int i = 0; i < l; ++i) {
      for (std::int64_t m = 0; m < M; ++m) Y(m) = out.P[Pidx(m, k + 1, i)];
      Ycond[i] = regress(Y);
      const Vec resid = Y - Ycond[i];
      for (int j = 0; j < n; ++j) {
        for (std::int64_t m = 0; m < M; ++m)
          target(m) = resid(m) * dW[(static_cast<size_t>(m) * N + k) * n + j] / h;
        Lam[i].col(j) = regress(target);
      }
    }

    double resid_sum = 0.0;
    Vec P(l), k1(l), k2(l), k3(l), k4(l), Pn(l);
    std::vector<NodeCoefficients> coeffs(l);
    std::vector<Vec> lam(l);
    for (std::int64_t m = 0; m < M; ++m) {
      for (int i = 0; i < l; ++i) {
        coeffs[i] = model.at(k, i, w(m));
        lam[i] = Lam[i].row(m).transpose();
        P(i) = Ycond[i](m);
      }
      auto F = [&](const Vec& y, Vec& res) {
        for (int i = 0; i < l; ++i)
          res(i) = linear_part(coeffs[i], q, i, y, lam[i]) + h1_value(y(i), lam[i], coeffs[i]);
      };
      F(P, k1);
      F(P + 0.5 * h * k1, k2);
      F(P + 0.5 * h * k2, k3);
      F(P + h * k3, k4);
      Pn = P + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!Pn.allFinite()) fail(ErrorCode::StepRejected, "non-finite random-mode step");
      F(Pn, k1);
      for (int i = 0; i < l; ++i) {
        out.P[Pidx(m, k, i)] = Pn(i);
        for (int j = 0; j < n; ++j) out.Lambda[Pidx(m, k, i) * n + j] = lam[i](j);
        double dm = 0.0;
        for (int j = 0; j < n; ++j) dm += lam[i](j) * dW[(static_cast<size_t>(m) * N + k) * n + j];
        resid_sum += out.P[Pidx(m, k + 1, i)] - Pn(i) + k1(i) * h - dm;
      }
    }
    out.residual[k] = resid_sum / (static_cast<double>(M) * l);
  }

  out.P0.assign(l, 0.0);
  for (int i = 0; i < l; ++i) {
    double s = 0.0;
    for (std::int64_t m = 0; m < M; ++m) s += out.P[Pidx(m, 0, i)];
    out.P0[i] = s / static_cast<double>(M);
  }
  for (double p : out.P)
    if (std::abs(p) > rep.epsbar + opt.bound_tol) ++out.bound_violations;
  return out;
}

}  // namespace sregame
