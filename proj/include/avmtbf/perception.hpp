#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avmtbf/kinematics.hpp"
#include "avmtbf/speed_partition.hpp"

#include "json.hpp"

// Classification of perception errors against ground truth and estimation of
// per-speed-range error rates from pre-associated perception logs.
//
// Type II: the perceived scene is less dangerous than reality (miss, object
// reported farther or faster). Type I: more dangerous than reality (false
// alarm, object reported closer or slower). A Type II error is safety
// relevant when it flips the planner's distance judgment:
// d_perceived > d_safe > d_real (a missing detection counts as d = inf);
// Type I mirrors the indicator. A severe error is a safety-relevant Type II
// whose worst-case impact (standing lead, ego at road maximum speed)
// exceeds the severity threshold.

namespace avmtbf::perception {

enum class ErrorType { TypeI, TypeII };

const char* error_type_name(ErrorType t);

/// One ground-truth/perception pair for one object in one frame. Object
/// presence on either side is keyed by the distance field; a present object
/// always has a distance, velocity is optional extra information.
struct ObjectObservation {
  std::int64_t frame_index = 0;
  std::string object_id;
  std::optional<double> real_distance_m;
  std::optional<double> perceived_distance_m;
  std::optional<double> real_velocity_ms;
  std::optional<double> perceived_velocity_ms;
  double ego_speed_ms = 0.0;

  void validate() const;  // throws ValidationError
};

/// Absolute tolerances below which perceived == real counts as no error.
struct MatchTolerance {
  double distance_m = 0.1;
  double velocity_ms = 0.1;
};

/// nullopt when perception matches reality within tolerance. Distance
/// disagreement decides first; velocity is consulted only when the
/// distances agree (lead-object convention: farther or faster = Type II).
std::optional<ErrorType> classify_error_type(const ObjectObservation& obs,
                                             const MatchTolerance& tol = {});

/// d_per > d_rss > d_real (strict); pass +infinity as d_per for a miss.
bool is_safety_relevant_type2(double d_per_m, double d_real_m, double d_rss_m);

/// Mirror for false alarms: d_per < d_rss < d_real; pass +infinity as
/// d_real when no real object exists.
bool is_safety_relevant_type1(double d_per_m, double d_real_m, double d_rss_m);

struct ErrorAssessment {
  std::optional<ErrorType> error_type;
  bool safety_relevant = false;
  bool severe = false;
  double worst_case_delta_v_ms = 0.0;
};

/// Severity of a safety-relevant Type II error under the worst-case
/// assumption: the missed lead stands still and the ego drives at the road
/// maximum speed. Throws ValidationError when the observation is not a
/// Type II error with a real object.
ErrorAssessment assess_severity(const ObjectObservation& obs, double road_max_speed_ms,
                                const kinematics::BrakingProfile& profile,
                                const kinematics::SeverityThresholds& thresholds = {});

/// Everything needed to run the full classify -> relevance -> severity chain.
struct AssessmentContext {
  kinematics::RssParams rss;
  kinematics::BrakingProfile braking;
  kinematics::SeverityThresholds severity;
  MatchTolerance tolerance;
  double road_max_speed_ms = units::kmh_to_ms(130.0);
};

/// Full chain for one observation. Severity is only assessed for Type II
/// errors; a Type I error's collision outcome depends on the follower
/// constellation, which an ego perception log does not record, so its
/// severity masking lives in the follower-situation probability instead.
ErrorAssessment assess_observation(const ObjectObservation& obs, const AssessmentContext& ctx);

struct PerceptionLog {
  double frame_rate_hz = 0.0;
  std::int64_t total_frames = 0;
  std::vector<ObjectObservation> observations;

  void validate() const;
};

enum class CountingMode { ErrorFrames, ErrorEvents };

const char* counting_mode_name(CountingMode m);
CountingMode counting_mode_from_name(const std::string& name);

struct ErrorRateCell {
  double rate_per_hour = 0.0;
  std::int64_t error_count = 0;  // frames or events, per counting mode
  double exposure_hours = 0.0;
};

struct ErrorRateTable {
  SpeedRangePartition partition;
  CountingMode counting = CountingMode::ErrorFrames;
  bool speed_independent = true;
  double frame_rate_hz = 0.0;
  std::int64_t total_frames = 0;
  // cells[0] = Type I (safety-relevant), cells[1] = Type II (severe)
  std::array<std::vector<ErrorRateCell>, 2> cells;
  std::int64_t discarded_frames = 0;     // ego speed outside the partition
  std::int64_t unattributed_frames = 0;  // no ego speed known (per-range mode)

  const std::vector<ErrorRateCell>& for_type(ErrorType t) const {
    return cells[t == ErrorType::TypeI ? 0 : 1];
  }
};

/// Raw per-shard tallies. Merging is additive, associative and commutative,
/// so log shards can be counted in parallel and combined in any grouping.
struct ErrorCounts {
  std::int64_t known_speed_frames = 0;
  std::int64_t discarded_frames = 0;
  std::vector<std::int64_t> frames_per_range;                  // exposure, known in-range
  std::array<std::vector<std::int64_t>, 2> error_frames;       // [type][range]
  std::array<std::vector<std::int64_t>, 2> error_events;       // [type][range]

  static ErrorCounts zero(std::size_t ranges);
  ErrorCounts& merge(const ErrorCounts& other);
};

struct ErrorRateOptions {
  AssessmentContext context;
  CountingMode counting = CountingMode::ErrorFrames;
  /// Pool errors and exposure over all in-range frames and replicate the
  /// resulting rate into every range (miss rates treated as independent of
  /// ego speed). When false, errors and exposure are attributed to the
  /// range of the frame's ego speed.
  bool speed_independent = true;
};

/// Tally one log (or shard). Frames with no observation rows carry no ego
/// speed; they are pooled as presumed-in-range exposure in
/// speed-independent mode and reported as unattributed otherwise.
ErrorCounts count_errors(const PerceptionLog& log, const SpeedRangePartition& partition,
                         const ErrorRateOptions& opts);

ErrorRateTable error_rate_table(const PerceptionLog& log, const SpeedRangePartition& partition,
                                const ErrorRateOptions& opts);

/// CSV columns: frame,object_id,real_distance,perceived_distance,
/// real_velocity,perceived_velocity,ego_speed. Empty field = absent.
/// Distances m, velocities m/s. The JSON sidecar provides frame_rate_hz,
/// total_frames (optional, defaults to max frame + 1) and road_max_speed_kmh.
struct LoadedPerceptionLog {
  PerceptionLog log;
  double road_max_speed_ms = 0.0;
};

LoadedPerceptionLog load_perception_log(const std::filesystem::path& csv_path,
                                        const std::filesystem::path& sidecar_path);

nlohmann::json rate_table_to_json(const ErrorRateTable& table);
ErrorRateTable rate_table_from_json(const nlohmann::json& doc);

}  // namespace avmtbf::perception
