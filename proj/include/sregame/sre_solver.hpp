#pragma once

#include <functional>
#include <vector>

#include "sregame/hamiltonian.hpp"
#include "sregame/model.hpp"
#include "sregame/paths.hpp"

namespace sregame {

/// Closed-form comparison functions Pbar(t) and Punder(t) = -Pbar(t).
struct ComparisonEnvelope {
  double horizon = 1.0;
  double rate = 0.0;  // c1 * l
  double Gbar = 0.0, Kbar = 0.0, epsbar = 0.0;
  double slope = 0.0;  // Kbar + (2 c3 epsbar^2) / epsilon
  bool degenerate = false;

  double upper(double t) const;
  double lower(double t) const { return -upper(t); }
};

ComparisonEnvelope comparison_envelope(const GameModel& model);
ComparisonEnvelope comparison_envelope(const AssumptionReport& rep, double horizon, int regimes);

struct SRESolution {
  TimeGrid grid;
  int regimes = 1;
  int n = 1;
  CoefficientMode mode = CoefficientMode::DeterministicPerRegime;
  std::vector<std::vector<double>> P;       // [node][regime]
  std::vector<std::vector<Vec>> Lambda;     // [node][regime]
  std::vector<std::vector<char>> bound_ok;  // |P| <= epsbar
  std::vector<std::vector<char>> envelope_ok;
  double epsbar = 0.0;
  bool assumptions_ok = false;

  bool all_bounds_ok() const;
  double at(int node, int regime) const { return P[node][regime]; }
};

struct PhiSolution {
  TimeGrid grid;
  int regimes = 1;
  std::vector<std::vector<double>> phi;     // [node][regime]
  std::vector<std::vector<Vec>> Delta;      // [node][regime]
};

struct SolverOptions {
  double bound_tol = 1e-8;
  bool raise_on_bound_violation = true;  // only when all assumptions hold
  int certify_stride = 0;                // constrained solves: certify minimax every k-th node
};

/// Backward classical RK4 for y' = -F(node, y) from y(T) = terminal, with
/// coefficients frozen on [t_k, t_{k+1}). Returns y at every node.
using BackwardGenerator = std::function<void(int node, const Vec& y, Vec& out)>;
std::vector<Vec> integrate_backward(const TimeGrid& grid, const Vec& terminal,
                                    const BackwardGenerator& F);

SRESolution solve_sre(const GameModel& model, const TimeGrid& grid,
                      const SolverOptions& opt = {});
inline SRESolution solve_sre(const GameModel& model) { return solve_sre(model, model.grid()); }

std::pair<SRESolution, SRESolution> solve_sre_constrained(const GameModel& model,
                                                          const TimeGrid& grid,
                                                          const SolverOptions& opt = {});

PhiSolution solve_linear_bsde(const GameModel& model, const SRESolution& sre,
                              const TimeGrid& grid);

std::vector<SRESolution> monotone_truncated_sequence(const GameModel& model, const TimeGrid& grid,
                                                     const std::vector<int>& ks,
                                                     const SolverOptions& opt = {});

/// Wraps per-node generator values into a solution and certifies the bounds.
SRESolution finish_solution(const GameModel& model, const TimeGrid& grid,
                            const std::vector<Vec>& values, const SolverOptions& opt);

struct RandomSRESolution {
  TimeGrid grid;
  int regimes = 1, n = 1;
  std::int64_t paths = 0;
  int basis_degree = 0;
  std::vector<double> P;        // [(m * nodes + k) * l + i]
  std::vector<double> Lambda;   // [((m * nodes + k) * l + i) * n + j]
  std::vector<double> residual;   // mean discretized-BSDE residual per step
  std::vector<double> P0;         // per regime, mean over paths at t = 0
  std::int64_t bound_violations = 0;
  double epsbar = 0.0;

  double at(std::int64_t m, int k, int i) const {
    return P[(static_cast<size_t>(m) * grid.nodes() + k) * regimes + i];
  }
};

RandomSRESolution solve_sre_random(const GameModel& model, const TimeGrid& grid,
                                   const PathBundle& paths, int basis_degree,
                                   const SolverOptions& opt = {});

}  // namespace sregame
