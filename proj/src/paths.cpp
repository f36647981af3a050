#include "sregame/paths.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

namespace sregame {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::int64_t m, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(m) * 4 + stream));
}

}  // namespace

PathBundle::PathBundle(const GameModel& model, const TimeGrid& grid, std::int64_t paths,
                       std::uint64_t seed)
    : grid_(grid),
      q_(model.regimes().q()),
      n_(model.dims().n),
      i0_(model.i0()),
      paths_(paths),
      seed_(seed) {
  if (paths < 1) fail(ErrorCode::InvalidArgument, "path count must be >= 1");
}

void PathBundle::fill(std::int64_t m, PathBuffer& out) const {
  const int N = grid_.steps;
  const double dt = grid_.dt();
  const double sdt = std::sqrt(dt);

  std::mt19937_64 bm(stream_seed(seed_, m, 0));
  std::normal_distribution<double> normal;
  out.dW.resize(static_cast<size_t>(N) * n_);
  out.factor.resize(N + 1);
  out.factor[0] = 0.0;
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < n_; ++j) out.dW[static_cast<size_t>(k) * n_ + j] = sdt * normal(bm);
    out.factor[k + 1] = out.factor[k] + out.dW[static_cast<size_t>(k) * n_];
  }

  std::mt19937_64 rg(stream_seed(seed_, m, 1));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  out.regime.resize(N + 1);
  out.jump_times.clear();
  int state = i0_;
  double clock = 0.0;
  double next_jump = std::numeric_limits<double>::infinity();
  auto draw_jump = [&]() {
    const double rate = -q_(state, state);
    if (rate <= 0.0) {
      next_jump = std::numeric_limits<double>::infinity();
      return;
    }
    std::exponential_distribution<double> hold(rate);
    next_jump = clock + hold(rg);
  };
  draw_jump();
  for (int k = 0; k <= N; ++k) {
    const double t = grid_.node(k);
    while (next_jump <= t) {
      const double rate = -q_(state, state);
      double u = unif(rg) * rate;
      int target = state;
      for (int j = 0; j < q_.cols(); ++j) {
        if (j == state) continue;
        target = j;
        u -= q_(state, j);
        if (u < 0.0) break;
      }
      state = target;
      clock = next_jump;
      out.jump_times.push_back(clock);
      draw_jump();
    }
    out.regime[k] = state;
  }
}

PathBundle sample_paths(const GameModel& model, const TimeGrid& grid, std::int64_t paths,
                        std::uint64_t seed) {
  return PathBundle(model, grid, paths, seed);
}

int resolve_workers(int w, std::int64_t M) {
  if (w <= 0) w = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<int>(std::min<std::int64_t>(w, M));
}

void for_each_path(const PathBundle& bundle, int workers, const PathVisitor& body) {
  const std::int64_t M = bundle.size();
  const int W = resolve_workers(workers, M);
  auto chunk = [&](std::int64_t lo, std::int64_t hi, std::exception_ptr& err) {
    try {
      PathBuffer buf;
      for (std::int64_t m = lo; m < hi; ++m) {
        bundle.fill(m, buf);
        body(m, buf);
      }
    } catch (...) {
      err = std::current_exception();
    }
  };
  std::vector<std::exception_ptr> errors(W);
  if (W == 1) {
    chunk(0, M, errors[0]);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < W; ++w) {
      const std::int64_t lo = M * w / W, hi = M * (w + 1) / W;
      threads.emplace_back(chunk, lo, hi, std::ref(errors[w]));
    }
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Vec> regime_marginals(const RegimeGenerator& q, int i0, const TimeGrid& grid) {
  const int l = q.count();
  const Mat Qt = q.q().transpose();
  const double h = grid.dt() / 2.0;
  std::vector<Vec> out;
  out.reserve(2 * grid.steps + 1);
  Vec p = Vec::Unit(l, i0);
  out.push_back(p);
  for (int s = 0; s < 2 * grid.steps; ++s) {
    const Vec k1 = Qt * p;
    const Vec k2 = Qt * (p + 0.5 * h * k1);
    const Vec k3 = Qt * (p + 0.5 * h * k2);
    const Vec k4 = Qt * (p + h * k3);
    p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back(p);
  }
  return out;
}

}  // namespace sregame
