#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sregame/model.hpp"

namespace sregame {

/// One sampled path. Row k of dW is the increment over [t_k, t_{k+1}).
struct PathBuffer {
  std::vector<double> dW;    // steps * n
  std::vector<int> regime;   // alpha(t_k), k = 0..steps
  std::vector<double> factor;  // W_1(t_k), k = 0..steps
  std::vector<double> jump_times;
};

/// Lazily generated bundle of (W, alpha) paths. Path m is a pure function of
/// (seed, m): Brownian and regime draws come from separate counter-seeded
/// streams, so any subset of paths can be regenerated in any order.
class PathBundle {
 public:
  PathBundle(const GameModel& model, const TimeGrid& grid, std::int64_t paths,
             std::uint64_t seed);

  std::int64_t size() const { return paths_; }
  std::uint64_t seed() const { return seed_; }
  const TimeGrid& grid() const { return grid_; }
  int brownian_dim() const { return n_; }
  int initial_regime() const { return i0_; }

  void fill(std::int64_t m, PathBuffer& out) const;
  PathBuffer path(std::int64_t m) const {
    PathBuffer b;
    fill(m, b);
    return b;
  }

 private:
  TimeGrid grid_;
  Mat q_;
  int n_ = 1;
  int i0_ = 0;
  std::int64_t paths_ = 0;
  std::uint64_t seed_ = 0;
};

PathBundle sample_paths(const GameModel& model, const TimeGrid& grid, std::int64_t paths,
                        std::uint64_t seed);

int resolve_workers(int workers, std::int64_t paths);

/// Calls body(m, path) for every path, in contiguous chunks on up to `workers`
/// threads (0 = hardware concurrency). Bodies must only write path-indexed slots.
using PathVisitor = std::function<void(std::int64_t, const PathBuffer&)>;
void for_each_path(const PathBundle& bundle, int workers, const PathVisitor& body);

/// Marginal law of alpha at the grid nodes and midpoints, from dp/dt = Q'p.
/// Entry 2k is t_k, entry 2k+1 the midpoint of [t_k, t_{k+1}].
std::vector<Vec> regime_marginals(const RegimeGenerator& q, int i0, const TimeGrid& grid);

}  // namespace sregame
