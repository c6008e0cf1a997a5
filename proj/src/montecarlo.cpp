#include "avmtbf/montecarlo.hpp"

#include <cmath>
#include <vector>

#include "avmtbf/errors.hpp"

namespace avmtbf::montecarlo {

namespace {
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t trial, std::uint32_t stream) {
  key_[0] = static_cast<std::uint32_t>(seed);
  key_[1] = static_cast<std::uint32_t>(seed >> 32);
  counter_[0] = static_cast<std::uint32_t>(trial);
  counter_[1] = static_cast<std::uint32_t>(trial >> 32);
  counter_[2] = stream;
  counter_[3] = 0;  // block index, bumped per refill
  block_[0] = block_[1] = block_[2] = block_[3] = 0;
}

void CounterRng::refill() {
  std::uint32_t x0 = counter_[0], x1 = counter_[1], x2 = counter_[2], x3 = counter_[3];
  std::uint32_t k0 = key_[0], k1 = key_[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * x0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * x2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t y0 = hi1 ^ x1 ^ k0;
    const std::uint32_t y1 = lo1;
    const std::uint32_t y2 = hi0 ^ x3 ^ k1;
    const std::uint32_t y3 = lo0;
    x0 = y0;
    x1 = y1;
    x2 = y2;
    x3 = y3;
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  block_[0] = x0;
  block_[1] = x1;
  block_[2] = x2;
  block_[3] = x3;
  counter_[3] += 1;
  cursor_ = 0;
}

std::uint64_t CounterRng::next_u64() {
  if (cursor_ > 2) refill();
  const std::uint64_t lo = block_[cursor_];
  const std::uint64_t hi = block_[cursor_ + 1];
  cursor_ += 2;
  return (hi << 32) | lo;
}

double CounterRng::uniform() {
  // 53 bits, shifted into (0, 1] so log() is always finite
  return ((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::int64_t sample_poisson(CounterRng& rng, double mean) {
  if (!(mean >= 0.0)) throw ValidationError("poisson mean must be >= 0");
  if (mean == 0.0) return 0;
  if (mean < 30.0) {
    // sum exponential inter-arrival times until the window is exceeded
    std::int64_t count = -1;
    double t = 0.0;
    while (t <= mean) {
      t += -std::log(rng.uniform());
      count += 1;
    }
    return count;
  }
  // transformed rejection with squeeze (Hoermann's PTRS)
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  while (true) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * log_mean - mean - std::lgamma(k + 1.0)) {
      return static_cast<std::int64_t>(k);
    }
  }
}

std::int64_t sample_binomial(CounterRng& rng, std::int64_t n, double p) {
  if (n < 0) throw ValidationError("binomial n must be >= 0");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binomial p must lie in [0,1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - sample_binomial(rng, n, 1.0 - p);
  // skip over failures with geometric gaps; exact and O(n*p) expected
  const double log_q = std::log1p(-p);
  std::int64_t count = 0;
  std::int64_t position = -1;
  while (true) {
    position += 1 + static_cast<std::int64_t>(std::floor(std::log(rng.uniform()) / log_q));
    if (position >= n) return count;
    count += 1;
  }
}

void RunningStats::add(double x) {
  count += 1;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

RunningStats RunningStats::merge(const RunningStats& a, const RunningStats& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  RunningStats out;
  out.count = a.count + b.count;
  const double delta = b.mean - a.mean;
  out.mean = a.mean + delta * (static_cast<double>(b.count) / static_cast<double>(out.count));
  out.m2 = a.m2 + b.m2 +
           delta * delta * (static_cast<double>(a.count) * static_cast<double>(b.count) /
                            static_cast<double>(out.count));
  return out;
}

double RunningStats::variance() const {
  return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
}

void SimulationConfig::validate() const {
  if (!(horizon_hours > 0.0)) throw ValidationError("simulation horizon must be > 0 hours");
  if (trials < 1) throw ValidationError("simulation needs at least one trial");
}

namespace {

constexpr std::uint32_t kStreamSelection = 0;  // profile/range draw
constexpr std::uint32_t kStreamLeafBase = 1;   // leaf substreams start here

// One terminal path of a leaf: error rate scale and total acceptance
// probability (product of conditional probabilities down the path times the
// terminal situation probability; always within [0,1]).
struct TerminalPath {
  double rate_scale = 1.0;
  double accept_probability = 0.0;
};

void flatten_children(const std::vector<model::RefinementNode>& children, double prob_factor,
                      double rate_factor, std::vector<TerminalPath>& out) {
  for (const auto& child : children) {
    const double p = prob_factor * child.conditional_probability;
    const double r = rate_factor * child.rate_multiplier;
    if (child.situation_probability) {
      out.push_back({r, p * (*child.situation_probability)});
    } else {
      flatten_children(child.children, p, r, out);
    }
  }
}

std::vector<TerminalPath> flatten_leaf(const model::Leaf& leaf) {
  std::vector<TerminalPath> paths;
  if (leaf.situation_probability) {
    paths.push_back({1.0, *leaf.situation_probability});
  } else {
    flatten_children(leaf.children, 1.0, 1.0, paths);
  }
  return paths;
}

double run_leaf_paths(CounterRng& rng, double lambda_p, double horizon,
                      const std::vector<TerminalPath>& paths) {
  double failures = 0.0;
  for (const auto& path : paths) {
    const double mean = lambda_p * path.rate_scale * horizon;
    if (mean <= 0.0) continue;
    const std::int64_t errors = sample_poisson(rng, mean);
    failures += static_cast<double>(sample_binomial(rng, errors, path.accept_probability));
  }
  return failures;
}

SimulationResult summarize(const RunningStats& stats, const SimulationConfig& config,
                           double analytical) {
  SimulationResult result;
  result.trials = stats.count;
  result.horizon_hours = config.horizon_hours;
  result.seed = config.seed;
  result.empirical_lambda_per_hour = stats.mean / config.horizon_hours;
  result.std_error_per_hour =
      std::sqrt(stats.variance() / static_cast<double>(stats.count)) / config.horizon_hours;
  result.analytical_lambda_per_hour = analytical;
  return result;
}

constexpr std::int64_t kChunk = 8192;

}  // namespace

SimulationResult simulate_leaf(const LeafTarget& target, const SimulationConfig& config) {
  config.validate();
  if (!(target.lambda_p_per_hour >= 0.0)) {
    throw ValidationError("simulate_leaf: error rate must be >= 0");
  }
  if (!(target.p_s >= 0.0 && target.p_s <= 1.0)) {
    throw ValidationError("simulate_leaf: situation probability must lie in [0,1]");
  }
  const std::vector<TerminalPath> paths{{1.0, target.p_s}};
  RunningStats total;
  for (std::int64_t chunk_start = 0; chunk_start < config.trials; chunk_start += kChunk) {
    const std::int64_t chunk_end = std::min(config.trials, chunk_start + kChunk);
    RunningStats chunk;
    for (std::int64_t trial = chunk_start; trial < chunk_end; ++trial) {
      CounterRng rng(config.seed, static_cast<std::uint64_t>(trial), kStreamLeafBase);
      chunk.add(run_leaf_paths(rng, target.lambda_p_per_hour, config.horizon_hours, paths));
    }
    total = RunningStats::merge(total, chunk);
  }
  return summarize(total, config, target.lambda_p_per_hour * target.p_s);
}

SimulationResult simulate_tree(const model::FailureModelTree& tree,
                               const SimulationConfig& config) {
  config.validate();
  const model::ModelResult analytical = model::failure_rate_extended(tree);

  // Flatten the tree into cells selectable by one categorical draw over
  // (profile, range); the residual probability mass produces no failures.
  struct Cell {
    double probability = 0.0;
    std::array<std::vector<TerminalPath>, 2> paths;
    std::array<double, 2> rates{0.0, 0.0};
  };
  std::vector<Cell> cells;
  for (const auto& profile : tree.profiles) {
    for (std::size_t i = 0; i < profile.partition.size(); ++i) {
      Cell cell;
      cell.probability = profile.probability * profile.range_probabilities[i];
      for (int t = 0; t < 2; ++t) {
        cell.paths[t] = flatten_leaf(profile.leaves[t][i]);
        cell.rates[t] = profile.leaves[t][i].error_rate_per_hour;
      }
      cells.push_back(std::move(cell));
    }
  }

  // Leaf substreams are numbered over cells with a nonzero chance of
  // producing failures, so a degenerate one-leaf tree consumes the same
  // substream as simulate_leaf.
  std::vector<std::uint32_t> cell_stream(cells.size(), 0);
  std::uint32_t next_stream = kStreamLeafBase;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    bool live = false;
    for (int t = 0; t < 2; ++t) {
      for (const auto& path : cells[c].paths[t]) {
        if (cells[c].rates[t] * path.rate_scale > 0.0 && path.accept_probability > 0.0) {
          live = true;
        }
      }
    }
    cell_stream[c] = live ? next_stream++ : 0;
  }
  const bool single_cell = cells.size() == 1;

  RunningStats total;
  for (std::int64_t chunk_start = 0; chunk_start < config.trials; chunk_start += kChunk) {
    const std::int64_t chunk_end = std::min(config.trials, chunk_start + kChunk);
    RunningStats chunk;
    for (std::int64_t trial = chunk_start; trial < chunk_end; ++trial) {
      std::size_t selected = 0;
      if (!single_cell) {
        CounterRng selector(config.seed, static_cast<std::uint64_t>(trial), kStreamSelection);
        const double u = selector.uniform();
        double acc = 0.0;
        selected = cells.size();  // residual: outside modeled exposure
        for (std::size_t c = 0; c < cells.size(); ++c) {
          acc += cells[c].probability;
          if (u <= acc) {
            selected = c;
            break;
          }
        }
      }
      double failures = 0.0;
      if (selected < cells.size() && cell_stream[selected] != 0) {
        const Cell& cell = cells[selected];
        CounterRng rng(config.seed, static_cast<std::uint64_t>(trial), cell_stream[selected]);
        for (int t = 0; t < 2; ++t) {
          failures += run_leaf_paths(rng, cell.rates[t], config.horizon_hours, cell.paths[t]);
        }
      }
      chunk.add(failures);
    }
    total = RunningStats::merge(total, chunk);
  }
  return summarize(total, config, analytical.lambda_per_hour);
}

nlohmann::json simulation_result_to_json(const SimulationResult& result) {
  nlohmann::json doc;
  doc["schema"] = "avmtbf-simulation/1";
  doc["units"] = {{"rate", "failures_per_hour"}, {"horizon", "hours"}};
  doc["empirical_lambda_per_hour"] = result.empirical_lambda_per_hour;
  doc["std_error_per_hour"] = result.std_error_per_hour;
  doc["analytical_lambda_per_hour"] = result.analytical_lambda_per_hour;
  doc["trials"] = result.trials;
  doc["horizon_hours"] = result.horizon_hours;
  doc["seed"] = result.seed;
  return doc;
}

}  // namespace avmtbf::montecarlo
