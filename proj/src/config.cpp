#include "avmtbf/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "avmtbf/errors.hpp"
#include "avmtbf/units.hpp"

namespace avmtbf::config {

namespace {

constexpr const char* kSchema = "avmtbf-config/1";

void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ValidationError("config: unknown key '" + where + key + "'");
    }
  }
}

}  // namespace

SpeedRangePartition RunConfig::partition() const {
  return SpeedRangePartition::from_kmh(speed_boundaries_kmh);
}

situations::ExtractionOptions RunConfig::extraction_options() const {
  return {ttc_limit_s, assumed_rear_accel_ms2, mode_threshold_ms2};
}

void RunConfig::validate() const {
  rss.validate();
  braking.validate();
  follower_braking.validate();
  severity.validate();
  partition().validate();
  if (!(ttc_limit_s > 0.0)) throw ValidationError("config: ttc_limit_s must be > 0");
  if (!(assumed_rear_accel_ms2 >= 0.0)) {
    throw ValidationError("config: assumed_rear_accel_ms2 must be >= 0");
  }
  if (!(mode_threshold_ms2 > 0.0)) throw ValidationError("config: mode_threshold_ms2 must be > 0");
  if (!(tolerance.distance_m >= 0.0) || !(tolerance.velocity_ms >= 0.0)) {
    throw ValidationError("config: match tolerances must be >= 0");
  }
}

RunConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("config: document must be a JSON object");
  reject_unknown_keys(doc,
                      {"schema", "rss", "braking", "follower_braking", "severity_thresholds_kmh",
                       "speed_ranges_kmh", "ttc_limit_s", "assumed_rear_accel_ms2",
                       "mode_threshold_ms2", "counting", "match_tolerance",
                       "speed_independent_rates"},
                      "");
  if (doc.contains("schema") && doc.at("schema") != kSchema) {
    throw ValidationError("config: unknown schema version '" +
                          doc.at("schema").get<std::string>() + "' (expected " + kSchema + ")");
  }

  RunConfig cfg;
  if (doc.contains("rss")) {
    const auto& j = doc.at("rss");
    reject_unknown_keys(
        j, {"response_time_s", "max_accel_ms2", "min_brake_ms2", "max_brake_front_ms2"}, "rss.");
    cfg.rss.response_time_s = j.value("response_time_s", cfg.rss.response_time_s);
    cfg.rss.max_accel_ms2 = j.value("max_accel_ms2", cfg.rss.max_accel_ms2);
    cfg.rss.min_brake_ms2 = j.value("min_brake_ms2", cfg.rss.min_brake_ms2);
    cfg.rss.max_brake_front_ms2 = j.value("max_brake_front_ms2", cfg.rss.max_brake_front_ms2);
  }
  auto read_profile = [&](const char* key, kinematics::BrakingProfile& profile) {
    if (!doc.contains(key)) return;
    const auto& j = doc.at(key);
    reject_unknown_keys(j, {"reaction_time_s", "deceleration_ms2"}, std::string(key) + ".");
    profile.reaction_time_s = j.value("reaction_time_s", profile.reaction_time_s);
    profile.deceleration_ms2 = j.value("deceleration_ms2", profile.deceleration_ms2);
  };
  read_profile("braking", cfg.braking);
  cfg.follower_braking = cfg.braking;
  read_profile("follower_braking", cfg.follower_braking);
  if (doc.contains("severity_thresholds_kmh")) {
    const auto& j = doc.at("severity_thresholds_kmh");
    reject_unknown_keys(j, {"s1_min", "severe_min", "s3_min"}, "severity_thresholds_kmh.");
    cfg.severity.s1_min_ms =
        units::kmh_to_ms(j.value("s1_min", units::ms_to_kmh(cfg.severity.s1_min_ms)));
    cfg.severity.severe_min_ms =
        units::kmh_to_ms(j.value("severe_min", units::ms_to_kmh(cfg.severity.severe_min_ms)));
    cfg.severity.s3_min_ms =
        units::kmh_to_ms(j.value("s3_min", units::ms_to_kmh(cfg.severity.s3_min_ms)));
  }
  if (doc.contains("speed_ranges_kmh")) {
    cfg.speed_boundaries_kmh.clear();
    const auto& ranges = doc.at("speed_ranges_kmh");
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      const double lo = ranges[i][0].get<double>();
      const double hi = ranges[i][1].get<double>();
      if (i == 0) {
        cfg.speed_boundaries_kmh.push_back(lo);
      } else if (cfg.speed_boundaries_kmh.back() != lo) {
        throw ValidationError("config: speed_ranges_kmh must be contiguous");
      }
      cfg.speed_boundaries_kmh.push_back(hi);
    }
  }
  cfg.ttc_limit_s = doc.value("ttc_limit_s", cfg.ttc_limit_s);
  cfg.assumed_rear_accel_ms2 = doc.value("assumed_rear_accel_ms2", cfg.assumed_rear_accel_ms2);
  cfg.mode_threshold_ms2 = doc.value("mode_threshold_ms2", cfg.mode_threshold_ms2);
  if (doc.contains("counting")) {
    cfg.counting = perception::counting_mode_from_name(doc.at("counting").get<std::string>());
  }
  if (doc.contains("match_tolerance")) {
    const auto& j = doc.at("match_tolerance");
    reject_unknown_keys(j, {"distance_m", "velocity_ms"}, "match_tolerance.");
    cfg.tolerance.distance_m = j.value("distance_m", cfg.tolerance.distance_m);
    cfg.tolerance.velocity_ms = j.value("velocity_ms", cfg.tolerance.velocity_ms);
  }
  cfg.speed_independent_rates = doc.value("speed_independent_rates", cfg.speed_independent_rates);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(path.string() + ": cannot open config file");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(doc);
}

nlohmann::json config_to_json(const RunConfig& config) {
  nlohmann::json ranges = nlohmann::json::array();
  for (std::size_t i = 0; i + 1 < config.speed_boundaries_kmh.size(); ++i) {
    ranges.push_back({config.speed_boundaries_kmh[i], config.speed_boundaries_kmh[i + 1]});
  }
  return {
      {"schema", kSchema},
      {"rss",
       {{"response_time_s", config.rss.response_time_s},
        {"max_accel_ms2", config.rss.max_accel_ms2},
        {"min_brake_ms2", config.rss.min_brake_ms2},
        {"max_brake_front_ms2", config.rss.max_brake_front_ms2}}},
      {"braking",
       {{"reaction_time_s", config.braking.reaction_time_s},
        {"deceleration_ms2", config.braking.deceleration_ms2}}},
      {"follower_braking",
       {{"reaction_time_s", config.follower_braking.reaction_time_s},
        {"deceleration_ms2", config.follower_braking.deceleration_ms2}}},
      {"severity_thresholds_kmh",
       {{"s1_min", units::ms_to_kmh(config.severity.s1_min_ms)},
        {"severe_min", units::ms_to_kmh(config.severity.severe_min_ms)},
        {"s3_min", units::ms_to_kmh(config.severity.s3_min_ms)}}},
      {"speed_ranges_kmh", std::move(ranges)},
      {"ttc_limit_s", config.ttc_limit_s},
      {"assumed_rear_accel_ms2", config.assumed_rear_accel_ms2},
      {"mode_threshold_ms2", config.mode_threshold_ms2},
      {"counting", perception::counting_mode_name(config.counting)},
      {"match_tolerance",
       {{"distance_m", config.tolerance.distance_m},
        {"velocity_ms", config.tolerance.velocity_ms}}},
      {"speed_independent_rates", config.speed_independent_rates},
  };
}

}  // namespace avmtbf::config
