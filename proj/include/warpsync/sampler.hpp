#pragma once

// t-walk: a two-point, tuning-free Metropolis-Hastings sampler. Each iteration moves one of
// the two coupled points with one of four kernels (traverse, walk, blow, hop) applied to a
// random subset of coordinates. Energy is -log target; +inf energy means out of support.

#include "warpsync/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <utility>

namespace warpsync {

using EnergyFn = std::function<double(const Vector&)>;
using Rng = std::mt19937_64;

struct TwalkConstants {
  double walk_scale = 1.5;    ///< aw
  double traverse_scale = 6;  ///< at
  double expected_moved = 4;  ///< coordinates moved per step, on average: p = min(n, 4) / n
  double p_traverse = 0.4918;
  double p_walk = 0.4918;
  double p_blow = 0.0082;
  double p_hop = 0.0082;
};

enum class Kernel { Traverse, Walk, Blow, Hop };

struct ChainState {
  Vector x, xp;
  double energy_x = 0.0, energy_xp = 0.0;
  std::uint64_t iteration = 0;
};

struct StepInfo {
  Kernel kernel = Kernel::Traverse;
  bool moved_x = true;  ///< false when the move proposed for x'
  bool accepted = false;
};

class TWalk {
 public:
  TWalk(EnergyFn energy, Index dim, TwalkConstants constants = {});

  /// One Metropolis-Hastings update of x or x'. Proposals with infinite energy are rejected.
  StepInfo step(ChainState& state, Rng& rng) const;

  [[nodiscard]] Index dim() const { return dim_; }
  [[nodiscard]] const TwalkConstants& constants() const { return c_; }

 private:
  double uniform(Rng& rng) const;
  double draw_beta(Rng& rng) const;
  Eigen::Array<bool, Eigen::Dynamic, 1> draw_subset(Rng& rng) const;

  EnergyFn energy_;
  Index dim_;
  TwalkConstants c_;
  double p_phi_;
};

struct McmcControls {
  Index samples = 3000;   ///< retained samples
  int thinning = 1;       ///< multiplier: keep one state every n * thinning iterations
  std::optional<std::uint64_t> burn_in;        ///< default 100 * n * thinning
  std::optional<std::uint64_t> thin_interval;  ///< default n * thinning
  std::uint64_t seed = 1;

  [[nodiscard]] std::uint64_t burn_in_for(Index n) const {
    return burn_in.value_or(100ULL * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(thinning));
  }
  [[nodiscard]] std::uint64_t interval_for(Index n) const {
    return thin_interval.value_or(static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(thinning));
  }
};

struct Chain {
  Matrix samples;        ///< retained samples x parameters (x of the coupled pair)
  Vector log_objective;  ///< -energy at each retained sample
  std::uint64_t accepted = 0;
  std::uint64_t iterations = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thin_interval = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] double acceptance_rate() const {
    return iterations ? static_cast<double>(accepted) / static_cast<double>(iterations) : 0.0;
  }
};

/// Runs burn-in then keeps every interval-th state until `samples` are retained.
/// Throws RuntimeFailure when an initial point has infinite energy.
Chain run_mcmc(const EnergyFn& energy, std::pair<Vector, Vector> init, const McmcControls& controls, Rng& rng,
               const TwalkConstants& constants = {});

/// Two independent prior draws with finite energy, differing in every coordinate.
/// Throws RuntimeFailure after `budget` unsuccessful draws.
std::pair<Vector, Vector> init_points(const std::function<Vector(Rng&)>& draw, const EnergyFn& energy, Rng& rng,
                                      int budget = 10000);

/// Integrated autocorrelation time by Geyer's initial positive sequence. 1 for a constant
/// series; throws DataError for fewer than `min_length` values.
double iat(const Eigen::Ref<const Vector>& series, Index min_length = 100);

}  // namespace warpsync
