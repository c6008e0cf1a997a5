#pragma once

#include <cstdint>

#include "avmtbf/model.hpp"

// Stochastic validation of the analytical failure rate: per exposure window,
// perception errors arrive as a Poisson count and each error independently
// falls into a dangerous situation with the leaf's probability. The
// per-error Bernoulli sum collapses to one Binomial thinning draw, which is
// distribution-identical.
//
// Randomness is counter based: every (seed, trial, stream) tuple owns an
// independent substream, so results are bit-identical regardless of how
// trials are scheduled.

namespace avmtbf::montecarlo {

/// Philox4x32-10 keyed by (seed, trial, stream); each call consumes one
/// counter block lane.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t trial, std::uint32_t stream);

  std::uint64_t next_u64();
  /// Uniform draw in (0, 1].
  double uniform();

 private:
  void refill();

  std::uint32_t key_[2];
  std::uint32_t counter_[4];
  std::uint32_t block_[4];
  int cursor_ = 4;  // consumed lanes in block_
};

/// Exact Poisson sampling (exponential waiting times for small means,
/// transformed rejection for large ones).
std::int64_t sample_poisson(CounterRng& rng, double mean);

/// Exact Binomial sampling by geometric skips over the success positions.
std::int64_t sample_binomial(CounterRng& rng, std::int64_t n, double p);

/// Streaming mean/variance with a numerically stable pairwise combine, so
/// per-chunk results merge in a fixed order independent of scheduling.
struct RunningStats {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  static RunningStats merge(const RunningStats& a, const RunningStats& b);
  double variance() const;  // sample variance
};

struct SimulationConfig {
  double horizon_hours = 1.0;
  std::int64_t trials = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LeafTarget {
  double lambda_p_per_hour = 0.0;
  double p_s = 0.0;
};

struct SimulationResult {
  double empirical_lambda_per_hour = 0.0;
  double std_error_per_hour = 0.0;
  std::int64_t trials = 0;
  double horizon_hours = 0.0;
  std::uint64_t seed = 0;
  double analytical_lambda_per_hour = 0.0;
};

SimulationResult simulate_leaf(const LeafTarget& target, const SimulationConfig& config);

/// Per trial, one exposure window: sample the mission profile and speed
/// range, then run every terminal leaf path of that cell as an independent
/// thinned Poisson stream. The expectation equals the analytical rate.
SimulationResult simulate_tree(const model::FailureModelTree& tree,
                               const SimulationConfig& config);

nlohmann::json simulation_result_to_json(const SimulationResult& result);

}  // namespace avmtbf::montecarlo
