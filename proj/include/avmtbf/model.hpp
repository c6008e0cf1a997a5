#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "avmtbf/perception.hpp"
#include "avmtbf/situations.hpp"
#include "avmtbf/speed_partition.hpp"

#include "json.hpp"

// Probability-tree failure model. A vehicle-level failure (collision) is a
// perception error arriving in a potentially dangerous traffic situation:
//
//   lambda = sum_m p_m * sum_i p_i * sum_t rate(t,m,i) * p_s(t,m,i)
//
// Conditional probabilities multiply down the tree and contributions add
// across branches. Leaves can be refined into conditional sub-situations.
// Rates are failures (or errors) per hour; MTBF is 1/lambda in hours.

namespace avmtbf::model {

/// Conditional sub-situation under a leaf: occurs with probability
/// `conditional_probability`, inside which the error rate is scaled by
/// `rate_multiplier` and the situation probability is either terminal or
/// refined further. Sibling conditional probabilities may sum to less than
/// one; the residual mass causes no failures.
struct RefinementNode {
  std::string label;
  double conditional_probability = 1.0;
  double rate_multiplier = 1.0;
  std::optional<double> situation_probability;
  std::vector<RefinementNode> children;
};

/// One (speed range, error type) leaf: an error rate and the probability of
/// the matching dangerous situation, optionally refined. The rate may be
/// split into named additive components (e.g. hardware/software); the split
/// is kept for reports and summed for evaluation.
struct Leaf {
  double error_rate_per_hour = 0.0;
  std::map<std::string, double> rate_components;  // optional, sums to the rate
  std::optional<double> situation_probability;
  std::vector<RefinementNode> children;
};

struct MissionProfile {
  std::string name;
  double probability = 1.0;  // p_m
  SpeedRangePartition partition;
  std::vector<double> range_probabilities;       // p_i per range
  std::array<std::vector<Leaf>, 2> leaves;       // [0] Type I, [1] Type II

  const std::vector<Leaf>& for_type(perception::ErrorType t) const {
    return leaves[t == perception::ErrorType::TypeI ? 0 : 1];
  }
};

struct FailureModelTree {
  std::vector<MissionProfile> profiles;

  void validate() const;  // throws ValidationError
};

struct BranchContribution {
  std::string path;  // profile/range/error-type[/refinement...]
  double rate_per_hour = 0.0;
  double share = 0.0;  // of the total failure rate; 0 when lambda == 0
};

struct ModelResult {
  double lambda_per_hour = 0.0;
  double mtbf_hours = 0.0;  // +infinity when lambda == 0
  std::vector<BranchContribution> branches;
};

/// Sum of rate * situation-probability products (the one-profile,
/// one-range special case of the tree).
double failure_rate_simple(std::span<const std::pair<double, double>> rate_and_probability);

ModelResult failure_rate_extended(const FailureModelTree& tree);

/// Exposure-weighted probability that a perception error can manifest as a
/// failure: sum_i p_i * p_s_i.
double kappa(std::span<const double> p_i, std::span<const double> p_s);

/// Perception error rate budget for a target MTBF: (1/target)/kappa.
/// Throws UnsatisfiableError when kappa is 0.
double required_error_rate(double target_mtbf_hours, double kappa);

/// Hours of driving per severe accident. Returns +infinity for zero
/// accidents.
double human_baseline_mtbf_hours(double accident_count, double total_vehicle_km,
                                 double average_speed_kmh);

nlohmann::json serialize_tree(const FailureModelTree& tree);
FailureModelTree deserialize_tree(const nlohmann::json& doc);

/// Builds a single-profile tree from extracted tables. Type II leaves take
/// the lead-vehicle situation probabilities; Type I leaves take the close
/// follower probabilities. Partitions must match.
FailureModelTree tree_from_tables(const std::string& profile_name,
                                  const situations::SituationTable& situations_table,
                                  const perception::ErrorRateTable& rates);

std::string render_tree_text(const FailureModelTree& tree, const ModelResult& result);

nlohmann::json result_to_json(const ModelResult& result);

}  // namespace avmtbf::model
