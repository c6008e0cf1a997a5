#include "avmtbf/model.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "avmtbf/errors.hpp"
#include "avmtbf/units.hpp"

namespace avmtbf::model {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kProbTol = 1e-9;

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError(what + " must lie in [0,1], got " + std::to_string(p));
  }
}

void validate_refinement(const std::vector<RefinementNode>& children, const std::string& where) {
  double sum = 0.0;
  for (const auto& child : children) {
    check_probability(child.conditional_probability, where + ": conditional probability");
    if (!(child.rate_multiplier >= 0.0)) {
      throw ValidationError(where + ": rate multiplier must be >= 0");
    }
    sum += child.conditional_probability;
    const bool terminal = child.situation_probability.has_value();
    if (terminal == !child.children.empty()) {
      throw ValidationError(where + "/" + child.label +
                            ": refinement node needs either a situation probability or children");
    }
    if (terminal) {
      check_probability(*child.situation_probability, where + "/" + child.label +
                                                          ": situation probability");
    } else {
      validate_refinement(child.children, where + "/" + child.label);
    }
  }
  if (sum > 1.0 + kProbTol) {
    throw ValidationError(where + ": refinement conditional probabilities sum to " +
                          std::to_string(sum) + " > 1");
  }
}

void validate_leaf(const Leaf& leaf, const std::string& where) {
  if (!(leaf.error_rate_per_hour >= 0.0) || !std::isfinite(leaf.error_rate_per_hour)) {
    throw ValidationError(where + ": error rate must be finite and >= 0");
  }
  if (!leaf.rate_components.empty()) {
    double sum = 0.0;
    for (const auto& [name, rate] : leaf.rate_components) {
      if (!(rate >= 0.0)) {
        throw ValidationError(where + ": rate component '" + name + "' must be >= 0");
      }
      sum += rate;
    }
    if (std::abs(sum - leaf.error_rate_per_hour) >
        1e-9 * std::max(1.0, leaf.error_rate_per_hour)) {
      throw ValidationError(where + ": rate components do not sum to the leaf rate");
    }
  }
  const bool terminal = leaf.situation_probability.has_value();
  if (terminal == !leaf.children.empty()) {
    throw ValidationError(where + ": leaf needs either a situation probability or children");
  }
  if (terminal) {
    check_probability(*leaf.situation_probability, where + ": situation probability");
  } else {
    validate_refinement(leaf.children, where);
  }
}

}  // namespace

void FailureModelTree::validate() const {
  if (profiles.empty()) {
    throw ValidationError("failure model tree has no mission profiles");
  }
  double p_m_sum = 0.0;
  std::string names;
  for (const auto& profile : profiles) {
    check_probability(profile.probability, "profile '" + profile.name + "': probability");
    p_m_sum += profile.probability;
    names += names.empty() ? profile.name : ", " + profile.name;
    profile.partition.validate();
    const std::size_t n = profile.partition.size();
    if (profile.range_probabilities.size() != n) {
      throw ValidationError("profile '" + profile.name +
                            "': range probabilities do not match the speed partition");
    }
    for (double p : profile.range_probabilities) {
      check_probability(p, "profile '" + profile.name + "': range probability");
    }
    for (int t = 0; t < 2; ++t) {
      if (profile.leaves[t].size() != n) {
        throw ValidationError("profile '" + profile.name +
                              "': leaf count does not match the speed partition");
      }
      for (std::size_t i = 0; i < n; ++i) {
        validate_leaf(profile.leaves[t][i], "profile '" + profile.name + "' range " +
                                                profile.partition.label_kmh(i) + " " +
                                                (t == 0 ? "type1" : "type2"));
      }
    }
  }
  if (std::abs(p_m_sum - 1.0) > 1e-9) {
    throw ValidationError("mission profile probabilities {" + names + "} sum to " +
                          std::to_string(p_m_sum) + ", expected 1");
  }
}

double failure_rate_simple(std::span<const std::pair<double, double>> rate_and_probability) {
  double lambda = 0.0;
  for (const auto& [rate, p] : rate_and_probability) {
    if (!(rate >= 0.0)) throw ValidationError("failure_rate_simple: rate must be >= 0");
    check_probability(p, "failure_rate_simple: situation probability");
    lambda += rate * p;
  }
  return lambda;
}

namespace {

struct BranchSink {
  std::vector<BranchContribution>& out;

  void emit(const std::string& path, double rate) { out.push_back({path, rate, 0.0}); }
};

// Walks refinement children, multiplying conditional probabilities and rate
// multipliers down the path; emits one branch per terminal node.
double evaluate_children(const std::vector<RefinementNode>& children, double base_rate,
                         double outer_factor, const std::string& path, BranchSink& sink) {
  double total = 0.0;
  for (const auto& child : children) {
    const double factor = outer_factor * child.conditional_probability * child.rate_multiplier;
    const std::string child_path = path + "/" + child.label;
    if (child.situation_probability) {
      const double rate = base_rate * factor * (*child.situation_probability);
      sink.emit(child_path, rate);
      total += rate;
    } else {
      total += evaluate_children(child.children, base_rate, factor, child_path, sink);
    }
  }
  return total;
}

}  // namespace

ModelResult failure_rate_extended(const FailureModelTree& tree) {
  tree.validate();
  ModelResult result;
  BranchSink sink{result.branches};
  double lambda = 0.0;
  for (const auto& profile : tree.profiles) {
    for (std::size_t i = 0; i < profile.partition.size(); ++i) {
      const double weight = profile.probability * profile.range_probabilities[i];
      for (int t = 0; t < 2; ++t) {
        const Leaf& leaf = profile.leaves[t][i];
        const std::string path = profile.name + "/" + profile.partition.label_kmh(i) + "/" +
                                 (t == 0 ? "type1" : "type2");
        if (leaf.situation_probability) {
          const double rate =
              weight * leaf.error_rate_per_hour * (*leaf.situation_probability);
          sink.emit(path, rate);
          lambda += rate;
        } else {
          lambda += evaluate_children(leaf.children, weight * leaf.error_rate_per_hour, 1.0,
                                      path, sink);
        }
      }
    }
  }
  result.lambda_per_hour = lambda;
  result.mtbf_hours = lambda > 0.0 ? 1.0 / lambda : kInf;
  for (auto& branch : result.branches) {
    branch.share = lambda > 0.0 ? branch.rate_per_hour / lambda : 0.0;
  }
  return result;
}

double kappa(std::span<const double> p_i, std::span<const double> p_s) {
  if (p_i.size() != p_s.size()) {
    throw ValidationError("kappa: probability vectors have different lengths (" +
                          std::to_string(p_i.size()) + " vs " + std::to_string(p_s.size()) + ")");
  }
  if (p_i.empty()) {
    throw ValidationError("kappa: empty probability vectors");
  }
  double k = 0.0;
  for (std::size_t i = 0; i < p_i.size(); ++i) {
    check_probability(p_i[i], "kappa: p_i");
    check_probability(p_s[i], "kappa: p_s");
    k += p_i[i] * p_s[i];
  }
  return k;
}

double required_error_rate(double target_mtbf_hours, double kappa) {
  if (!(target_mtbf_hours > 0.0)) {
    throw ValidationError("required_error_rate: target MTBF must be > 0 hours");
  }
  check_probability(kappa, "required_error_rate: kappa");
  if (kappa == 0.0) {
    throw UnsatisfiableError(
        "required_error_rate: kappa is 0, no perception error can manifest as a failure and no "
        "finite error rate requirement exists");
  }
  return (1.0 / target_mtbf_hours) / kappa;
}

double human_baseline_mtbf_hours(double accident_count, double total_vehicle_km,
                                 double average_speed_kmh) {
  if (!(total_vehicle_km > 0.0) || !(average_speed_kmh > 0.0)) {
    throw ValidationError("human baseline: vehicle km and average speed must be > 0");
  }
  if (!(accident_count >= 0.0)) {
    throw ValidationError("human baseline: accident count must be >= 0");
  }
  const double driven_hours = total_vehicle_km / average_speed_kmh;
  if (accident_count == 0.0) return kInf;
  return driven_hours / accident_count;
}

namespace {

constexpr const char* kTreeSchema = "avmtbf-tree/1";

nlohmann::json refinement_to_json(const RefinementNode& node) {
  nlohmann::json j;
  j["label"] = node.label;
  j["probability"] = node.conditional_probability;
  if (node.rate_multiplier != 1.0) j["rate_multiplier"] = node.rate_multiplier;
  if (node.situation_probability) {
    j["situation_probability"] = *node.situation_probability;
  } else {
    nlohmann::json children = nlohmann::json::array();
    for (const auto& child : node.children) children.push_back(refinement_to_json(child));
    j["children"] = std::move(children);
  }
  return j;
}

RefinementNode refinement_from_json(const nlohmann::json& j) {
  RefinementNode node;
  node.label = j.at("label").get<std::string>();
  node.conditional_probability = j.at("probability").get<double>();
  node.rate_multiplier = j.value("rate_multiplier", 1.0);
  if (j.contains("situation_probability")) {
    node.situation_probability = j.at("situation_probability").get<double>();
  }
  if (j.contains("children")) {
    for (const auto& child : j.at("children")) {
      node.children.push_back(refinement_from_json(child));
    }
  }
  return node;
}

nlohmann::json leaf_to_json(const Leaf& leaf) {
  nlohmann::json j;
  if (leaf.rate_components.empty()) {
    j["error_rate_per_hour"] = leaf.error_rate_per_hour;
  } else {
    j["error_rate_per_hour"] = leaf.rate_components;
  }
  if (leaf.situation_probability) {
    j["situation_probability"] = *leaf.situation_probability;
  } else {
    nlohmann::json children = nlohmann::json::array();
    for (const auto& child : leaf.children) children.push_back(refinement_to_json(child));
    j["children"] = std::move(children);
  }
  return j;
}

Leaf leaf_from_json(const nlohmann::json& j) {
  Leaf leaf;
  const auto& rate = j.at("error_rate_per_hour");
  if (rate.is_object()) {
    double sum = 0.0;
    for (const auto& [name, value] : rate.items()) {
      leaf.rate_components[name] = value.get<double>();
      sum += value.get<double>();
    }
    leaf.error_rate_per_hour = sum;
  } else {
    leaf.error_rate_per_hour = rate.get<double>();
  }
  if (j.contains("situation_probability")) {
    leaf.situation_probability = j.at("situation_probability").get<double>();
  }
  if (j.contains("children")) {
    for (const auto& child : j.at("children")) {
      leaf.children.push_back(refinement_from_json(child));
    }
  }
  return leaf;
}

}  // namespace

nlohmann::json serialize_tree(const FailureModelTree& tree) {
  tree.validate();
  nlohmann::json doc;
  doc["schema"] = kTreeSchema;
  doc["units"] = {{"rate", "errors_per_hour"}, {"speed", "km_h"}};
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& profile : tree.profiles) {
    nlohmann::json p;
    p["name"] = profile.name;
    p["probability"] = profile.probability;
    nlohmann::json ranges = nlohmann::json::array();
    for (std::size_t i = 0; i < profile.partition.size(); ++i) {
      ranges.push_back({units::ms_to_kmh(profile.partition.lower_ms(i)),
                        units::ms_to_kmh(profile.partition.upper_ms(i))});
    }
    p["speed_ranges_kmh"] = std::move(ranges);
    p["range_probabilities"] = profile.range_probabilities;
    for (int t = 0; t < 2; ++t) {
      nlohmann::json leaves = nlohmann::json::array();
      for (const auto& leaf : profile.leaves[t]) leaves.push_back(leaf_to_json(leaf));
      p[t == 0 ? "type1" : "type2"] = std::move(leaves);
    }
    profiles.push_back(std::move(p));
  }
  doc["profiles"] = std::move(profiles);
  return doc;
}

FailureModelTree deserialize_tree(const nlohmann::json& doc) {
  if (!doc.contains("schema")) {
    throw ValidationError("tree document: missing schema version");
  }
  if (doc.at("schema") != kTreeSchema) {
    throw ValidationError("tree document: unknown schema version '" +
                          doc.at("schema").get<std::string>() + "' (expected " + kTreeSchema +
                          ")");
  }
  FailureModelTree tree;
  for (const auto& p : doc.at("profiles")) {
    MissionProfile profile;
    profile.name = p.at("name").get<std::string>();
    profile.probability = p.at("probability").get<double>();
    std::vector<double> boundaries;
    const auto& ranges = p.at("speed_ranges_kmh");
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (i == 0) boundaries.push_back(ranges[i][0].get<double>());
      boundaries.push_back(ranges[i][1].get<double>());
    }
    profile.partition = SpeedRangePartition::from_kmh(boundaries);
    profile.range_probabilities = p.at("range_probabilities").get<std::vector<double>>();
    for (int t = 0; t < 2; ++t) {
      const char* key = t == 0 ? "type1" : "type2";
      if (p.contains(key)) {
        for (const auto& leaf : p.at(key)) {
          profile.leaves[t].push_back(leaf_from_json(leaf));
        }
      } else {
        // absent error type: zero-rate leaves
        Leaf zero;
        zero.situation_probability = 0.0;
        profile.leaves[t].assign(profile.partition.size(), zero);
      }
    }
    tree.profiles.push_back(std::move(profile));
  }
  tree.validate();
  return tree;
}

FailureModelTree tree_from_tables(const std::string& profile_name,
                                  const situations::SituationTable& situations_table,
                                  const perception::ErrorRateTable& rates) {
  if (!(situations_table.partition == rates.partition)) {
    throw ValidationError(
        "situation table and error rate table use different speed partitions");
  }
  MissionProfile profile;
  profile.name = profile_name;
  profile.probability = 1.0;
  profile.partition = situations_table.partition;
  profile.range_probabilities = situations_table.p_i;
  const std::size_t n = profile.partition.size();
  for (std::size_t i = 0; i < n; ++i) {
    Leaf type1;
    type1.error_rate_per_hour = rates.cells[0][i].rate_per_hour;
    type1.situation_probability =
        i < situations_table.p_follower_close.size() ? situations_table.p_follower_close[i] : 0.0;
    profile.leaves[0].push_back(std::move(type1));

    Leaf type2;
    type2.error_rate_per_hour = rates.cells[1][i].rate_per_hour;
    type2.situation_probability = situations_table.p_s[i];
    profile.leaves[1].push_back(std::move(type2));
  }
  FailureModelTree tree;
  tree.profiles.push_back(std::move(profile));
  tree.validate();
  return tree;
}

namespace {

void render_children(std::ostringstream& os, const std::vector<RefinementNode>& children,
                     const std::string& indent) {
  for (const auto& child : children) {
    os << indent << "+- " << child.label << " (q=" << std::setprecision(4) << std::fixed
       << child.conditional_probability;
    if (child.rate_multiplier != 1.0) os << ", rate x" << child.rate_multiplier;
    if (child.situation_probability) {
      os << ", p_S=" << *child.situation_probability;
    }
    os << ")\n";
    render_children(os, child.children, indent + "   ");
  }
}

}  // namespace

std::string render_tree_text(const FailureModelTree& tree, const ModelResult& result) {
  std::ostringstream os;
  os << "vehicle failure rate: " << std::setprecision(6) << result.lambda_per_hour << " /h";
  if (std::isinf(result.mtbf_hours)) {
    os << "   MTBF: inf\n";
  } else {
    os << "   MTBF: " << result.mtbf_hours << " h (" << std::setprecision(1) << std::fixed
       << units::hours_to_seconds(result.mtbf_hours) << " s)\n";
  }
  os.unsetf(std::ios::fixed);
  for (const auto& profile : tree.profiles) {
    os << "+- profile " << profile.name << " (p_m=" << std::setprecision(4) << std::fixed
       << profile.probability << ")\n";
    for (std::size_t i = 0; i < profile.partition.size(); ++i) {
      os << "   +- " << profile.partition.label_kmh(i)
         << " km/h (p_i=" << profile.range_probabilities[i] << ")\n";
      for (int t = 0; t < 2; ++t) {
        const Leaf& leaf = profile.leaves[t][i];
        if (leaf.error_rate_per_hour == 0.0 && leaf.situation_probability &&
            *leaf.situation_probability == 0.0) {
          continue;
        }
        os << "      +- " << (t == 0 ? "type1" : "type2")
           << ": rate=" << std::setprecision(6) << leaf.error_rate_per_hour << "/h";
        if (leaf.situation_probability) {
          os << ", p_S=" << std::setprecision(4) << *leaf.situation_probability;
        }
        os << "\n";
        render_children(os, leaf.children, "         ");
      }
    }
  }
  os << "branches:\n";
  for (const auto& branch : result.branches) {
    if (branch.rate_per_hour == 0.0) continue;
    os << "  " << std::left << std::setw(40) << branch.path << std::right << std::setw(14)
       << std::setprecision(6) << std::fixed << branch.rate_per_hour << " /h  "
       << std::setw(6) << std::setprecision(1) << branch.share * 100.0 << "%\n";
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

nlohmann::json result_to_json(const ModelResult& result) {
  nlohmann::json doc;
  doc["schema"] = "avmtbf-result/1";
  doc["units"] = {{"rate", "failures_per_hour"}, {"mtbf", "hours"}};
  doc["lambda_per_hour"] = result.lambda_per_hour;
  if (std::isinf(result.mtbf_hours)) {
    doc["mtbf_hours"] = "inf";
    doc["mtbf_seconds"] = "inf";
  } else {
    doc["mtbf_hours"] = result.mtbf_hours;
    doc["mtbf_seconds"] = units::hours_to_seconds(result.mtbf_hours);
  }
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& branch : result.branches) {
    branches.push_back({{"path", branch.path},
                        {"rate_per_hour", branch.rate_per_hour},
                        {"share", branch.share}});
  }
  doc["branches"] = std::move(branches);
  return doc;
}

}  // namespace avmtbf::model
