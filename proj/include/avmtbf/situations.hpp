#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avmtbf/speed_partition.hpp"

#include "json.hpp"

// Mining of drone-recorded highway trajectories: lead-vehicle driving modes
// and the per-speed-range probability of being in a potentially dangerous
// car-following situation.
//
// Per speed range i the extractor reports
//   p_s = p_decelerating + p_accelerating_close + p_constant_close
// where a decelerating lead counts unconditionally and an accelerating or
// constant-speed lead counts only when it is slower than the ego vehicle
// and the time to collision is within the limit.

namespace avmtbf::situations {

struct TrackFrame {
  std::int64_t frame_index = 0;
  std::int64_t vehicle_id = 0;
  int lane_id = 0;
  double position_m = 0.0;        // longitudinal, along the road
  double speed_ms = 0.0;          // magnitude
  double accel_ms2 = 0.0;         // signed, along the driving direction
  std::int64_t preceding_id = 0;  // 0 = no same-lane vehicle ahead
  double length_m = 0.0;          // 0 = unknown, gap falls back to raw positions
};

struct Recording {
  std::string name;
  double frame_rate_hz = 25.0;
  std::vector<TrackFrame> frames;
};

/// Loads one tracks CSV (with its sibling *_recordingMeta.csv) or every
/// "*_tracks.csv" in a directory, sorted by filename. Required columns:
/// frame,id,laneId,x,xVelocity,xAcceleration,precedingId,width. Vehicles
/// driving in negative x direction are normalized: speed = |xVelocity| and
/// the acceleration sign follows the driving direction.
std::vector<Recording> ingest_tracks(const std::filesystem::path& file_or_dir);

enum class DrivingMode { Accelerating, Decelerating, Constant };

/// Dead-band classification of the lead's longitudinal acceleration.
DrivingMode classify_mode(double accel_ms2, double threshold_ms2);

struct ExtractionOptions {
  double ttc_limit_s = 5.0;             // inclusive
  double assumed_rear_accel_ms2 = 2.0;  // closing assumption for the rear vehicle
  double mode_threshold_ms2 = 0.1;
};

struct RangeCounts {
  std::int64_t frames = 0;  // in-range ego frames, the probability denominator
  std::int64_t frames_with_lead = 0;
  std::int64_t lead_decelerating = 0;
  std::int64_t lead_accelerating = 0;
  std::int64_t lead_constant = 0;
  std::int64_t lead_accelerating_close = 0;
  std::int64_t lead_constant_close = 0;
  std::int64_t follower_close = 0;

  RangeCounts& merge(const RangeCounts& other);
};

struct SituationTable {
  SpeedRangePartition partition;
  ExtractionOptions options;
  std::vector<RangeCounts> counts;
  std::vector<double> p_i;        // speed range share of retained frames
  std::vector<double> p_d;        // lead decelerating
  std::vector<double> p_a_close;  // lead accelerating, slower, TTC within limit
  std::vector<double> p_c_close;  // lead constant, slower, TTC within limit
  std::vector<double> p_s;        // total situation probability
  std::vector<double> p_follower_close;  // some vehicle follows ego within TTC limit
  std::int64_t retained_frames = 0;
  std::int64_t discarded_frames = 0;   // ego speed outside the partition
  std::int64_t dangling_lead_refs = 0; // precedingId with no row in the frame
  std::int64_t raw_gap_frames = 0;     // gap taken from raw positions (no lead length)
};

/// Per-recording tallies merge additively; the result does not depend on
/// recording order.
SituationTable extract_situation_table(const std::vector<Recording>& recordings,
                                       const SpeedRangePartition& partition,
                                       const ExtractionOptions& options = {});

/// p_i over retained frames. Errors when every frame is out of range.
std::vector<double> speed_distribution(const std::vector<Recording>& recordings,
                                       const SpeedRangePartition& partition);

/// Probability that some same-lane vehicle follows the ego vehicle with a
/// TTC within the limit (the dangerous constellation for false alarms).
std::vector<double> rear_follower_probability(const std::vector<Recording>& recordings,
                                              const SpeedRangePartition& partition,
                                              const ExtractionOptions& options = {});

/// Two-sample Kolmogorov-Smirnov statistic between empirical samples.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct ConvergenceRow {
  std::size_t recordings_so_far = 0;  // k, after adding recording k+1
  std::string added_recording;
  std::int64_t cumulative_samples = 0;
  double ks_cumulative = 0.0;  // KS(cumulative after k, cumulative after k+1)
  double ks_increment = 0.0;   // KS(cumulative after k, recording k+1 alone)
};

/// Distribution-shift report over retained speeds as recordings accumulate.
/// Requires at least two recordings.
std::vector<ConvergenceRow> convergence_report(const std::vector<Recording>& recordings,
                                               const SpeedRangePartition& partition);

std::string render_table_text(const SituationTable& table);

nlohmann::json situation_table_to_json(const SituationTable& table);
SituationTable situation_table_from_json(const nlohmann::json& doc);

}  // namespace avmtbf::situations
