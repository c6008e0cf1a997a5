#pragma once

#include <filesystem>
#include <vector>

#include "avmtbf/kinematics.hpp"
#include "avmtbf/perception.hpp"
#include "avmtbf/situations.hpp"
#include "avmtbf/speed_partition.hpp"

#include "json.hpp"

// Run configuration shared by all CLI commands. Loaded from a single JSON
// document (schema avmtbf-config/1) with every default documented; unknown
// keys are rejected. Command line flags override file values and the
// effective configuration is echoed into every output for provenance.

namespace avmtbf::config {

struct RunConfig {
  kinematics::RssParams rss;                     // 0.5 s, 2, 4, 8 m/s^2
  kinematics::BrakingProfile braking;            // ego emergency stop: 0.5 s, 8 m/s^2
  kinematics::BrakingProfile follower_braking;   // rear vehicle in false-alarm runs
  kinematics::SeverityThresholds severity;       // 10 / 30 / 65 km/h
  std::vector<double> speed_boundaries_kmh{80.0, 100.0, 130.0, 180.0};
  double ttc_limit_s = 5.0;
  double assumed_rear_accel_ms2 = 2.0;
  double mode_threshold_ms2 = 0.1;
  perception::CountingMode counting = perception::CountingMode::ErrorFrames;
  perception::MatchTolerance tolerance;          // 0.1 m, 0.1 m/s
  bool speed_independent_rates = true;

  SpeedRangePartition partition() const;
  situations::ExtractionOptions extraction_options() const;

  void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace avmtbf::config
