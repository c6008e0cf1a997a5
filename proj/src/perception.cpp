#include "avmtbf/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "avmtbf/csv.hpp"
#include "avmtbf/errors.hpp"

namespace avmtbf::perception {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* error_type_name(ErrorType t) {
  return t == ErrorType::TypeI ? "type1" : "type2";
}

void ObjectObservation::validate() const {
  if (!real_distance_m && !perceived_distance_m) {
    throw ValidationError("observation frame " + std::to_string(frame_index) + " object '" +
                          object_id + "': neither real nor perceived object present");
  }
  if (real_distance_m && *real_distance_m < 0.0) {
    throw ValidationError("observation: real distance must be >= 0");
  }
  if (perceived_distance_m && *perceived_distance_m < 0.0) {
    throw ValidationError("observation: perceived distance must be >= 0");
  }
  if (!real_distance_m && real_velocity_ms) {
    throw ValidationError("observation: real velocity without real distance");
  }
  if (!perceived_distance_m && perceived_velocity_ms) {
    throw ValidationError("observation: perceived velocity without perceived distance");
  }
  if (!(ego_speed_ms >= 0.0)) {
    throw ValidationError("observation: ego speed must be >= 0");
  }
}

std::optional<ErrorType> classify_error_type(const ObjectObservation& obs,
                                             const MatchTolerance& tol) {
  obs.validate();
  if (!obs.perceived_distance_m) return ErrorType::TypeII;  // miss
  if (!obs.real_distance_m) return ErrorType::TypeI;        // false alarm

  const double dist_err = *obs.perceived_distance_m - *obs.real_distance_m;
  if (dist_err > tol.distance_m) return ErrorType::TypeII;  // reported farther
  if (dist_err < -tol.distance_m) return ErrorType::TypeI;  // reported closer

  if (obs.real_velocity_ms && obs.perceived_velocity_ms) {
    const double vel_err = *obs.perceived_velocity_ms - *obs.real_velocity_ms;
    if (vel_err > tol.velocity_ms) return ErrorType::TypeII;  // reported faster
    if (vel_err < -tol.velocity_ms) return ErrorType::TypeI;  // reported slower
  }
  return std::nullopt;
}

bool is_safety_relevant_type2(double d_per_m, double d_real_m, double d_rss_m) {
  return d_per_m > d_rss_m && d_rss_m > d_real_m;
}

bool is_safety_relevant_type1(double d_per_m, double d_real_m, double d_rss_m) {
  return d_per_m < d_rss_m && d_rss_m < d_real_m;
}

ErrorAssessment assess_severity(const ObjectObservation& obs, double road_max_speed_ms,
                                const kinematics::BrakingProfile& profile,
                                const kinematics::SeverityThresholds& thresholds) {
  auto type = classify_error_type(obs);
  if (type != ErrorType::TypeII || !obs.real_distance_m) {
    throw ValidationError("assess_severity expects a safety-relevant Type II error");
  }
  ErrorAssessment a;
  a.error_type = ErrorType::TypeII;
  a.safety_relevant = true;
  a.worst_case_delta_v_ms =
      kinematics::impact_delta_v_standing(road_max_speed_ms, *obs.real_distance_m, profile);
  a.severe = kinematics::severe(kinematics::severity_from_delta_v(a.worst_case_delta_v_ms, thresholds));
  return a;
}

ErrorAssessment assess_observation(const ObjectObservation& obs, const AssessmentContext& ctx) {
  ErrorAssessment a;
  a.error_type = classify_error_type(obs, ctx.tolerance);
  if (!a.error_type) return a;

  // Worst case for the relevance judgment: ego at road maximum speed, lead
  // standing, so the safety envelope is the largest it can get.
  const double d_rss = kinematics::rss_longitudinal_distance(ctx.road_max_speed_ms, 0.0, ctx.rss);
  if (*a.error_type == ErrorType::TypeII) {
    const double d_per = obs.perceived_distance_m ? *obs.perceived_distance_m : kInf;
    const double d_real = obs.real_distance_m ? *obs.real_distance_m : kInf;
    a.safety_relevant = is_safety_relevant_type2(d_per, d_real, d_rss);
    if (a.safety_relevant) {
      a.worst_case_delta_v_ms =
          kinematics::impact_delta_v_standing(ctx.road_max_speed_ms, d_real, ctx.braking);
      a.severe =
          kinematics::severe(kinematics::severity_from_delta_v(a.worst_case_delta_v_ms, ctx.severity));
    }
  } else {
    const double d_per = obs.perceived_distance_m ? *obs.perceived_distance_m : 0.0;
    const double d_real = obs.real_distance_m ? *obs.real_distance_m : kInf;
    a.safety_relevant = is_safety_relevant_type1(d_per, d_real, d_rss);
    // severe stays false: the outcome of a phantom braking maneuver depends
    // on the follower, which this log does not observe
  }
  return a;
}

void PerceptionLog::validate() const {
  if (!(frame_rate_hz > 0.0)) {
    throw ValidationError("perception log: frame rate must be > 0");
  }
  if (observations.empty()) {
    throw ValidationError("perception log: no observations");
  }
  if (total_frames <= 0) {
    throw ValidationError("perception log: total_frames must be > 0");
  }
  std::set<std::pair<std::int64_t, std::string>> seen;
  for (const auto& obs : observations) {
    obs.validate();
    if (obs.frame_index < 0 || obs.frame_index >= total_frames) {
      throw ValidationError("perception log: frame index " + std::to_string(obs.frame_index) +
                            " outside [0, " + std::to_string(total_frames) + ")");
    }
    if (!seen.emplace(obs.frame_index, obs.object_id).second) {
      throw ValidationError("perception log: duplicate (frame, object) pair: frame " +
                            std::to_string(obs.frame_index) + ", object '" + obs.object_id + "'");
    }
  }
}

const char* counting_mode_name(CountingMode m) {
  return m == CountingMode::ErrorFrames ? "error-frames" : "error-events";
}

CountingMode counting_mode_from_name(const std::string& name) {
  if (name == "error-frames") return CountingMode::ErrorFrames;
  if (name == "error-events") return CountingMode::ErrorEvents;
  throw ValidationError("unknown counting mode '" + name +
                        "' (expected 'error-frames' or 'error-events')");
}

ErrorCounts ErrorCounts::zero(std::size_t ranges) {
  ErrorCounts c;
  c.frames_per_range.assign(ranges, 0);
  for (auto& v : c.error_frames) v.assign(ranges, 0);
  for (auto& v : c.error_events) v.assign(ranges, 0);
  return c;
}

ErrorCounts& ErrorCounts::merge(const ErrorCounts& other) {
  known_speed_frames += other.known_speed_frames;
  discarded_frames += other.discarded_frames;
  for (std::size_t i = 0; i < frames_per_range.size(); ++i) {
    frames_per_range[i] += other.frames_per_range[i];
  }
  for (int t = 0; t < 2; ++t) {
    for (std::size_t i = 0; i < error_frames[t].size(); ++i) {
      error_frames[t][i] += other.error_frames[t][i];
      error_events[t][i] += other.error_events[t][i];
    }
  }
  return *this;
}

ErrorCounts count_errors(const PerceptionLog& log, const SpeedRangePartition& partition,
                         const ErrorRateOptions& opts) {
  log.validate();
  partition.validate();
  const std::size_t n = partition.size();
  ErrorCounts counts = ErrorCounts::zero(n);

  // Frame exposure: ego speed of a frame comes from its first observation row.
  std::map<std::int64_t, double> frame_speed;
  for (const auto& obs : log.observations) {
    frame_speed.emplace(obs.frame_index, obs.ego_speed_ms);
  }
  for (const auto& [frame, speed] : frame_speed) {
    auto range = partition.range_of(speed);
    counts.known_speed_frames += 1;
    if (range) {
      counts.frames_per_range[*range] += 1;
    } else {
      counts.discarded_frames += 1;
    }
  }

  // Qualifying rows: severe Type II, safety-relevant Type I.
  struct Qualifier {
    std::int64_t frame;
    std::size_t range;
  };
  std::array<std::map<std::string, std::vector<Qualifier>>, 2> per_object;
  for (const auto& obs : log.observations) {
    auto range = partition.range_of(obs.ego_speed_ms);
    if (!range) continue;  // discarded exposure
    ErrorAssessment a = assess_observation(obs, opts.context);
    if (!a.error_type) continue;
    const bool qualifies =
        (*a.error_type == ErrorType::TypeII) ? a.severe : a.safety_relevant;
    if (!qualifies) continue;
    const int t = (*a.error_type == ErrorType::TypeI) ? 0 : 1;
    per_object[t][obs.object_id].push_back({obs.frame_index, *range});
  }

  for (int t = 0; t < 2; ++t) {
    for (auto& [object, rows] : per_object[t]) {
      std::sort(rows.begin(), rows.end(),
                [](const Qualifier& a, const Qualifier& b) { return a.frame < b.frame; });
      for (std::size_t k = 0; k < rows.size(); ++k) {
        counts.error_frames[t][rows[k].range] += 1;
        // an event starts wherever the frame run breaks; it is attributed
        // to the speed range of its first frame
        if (k == 0 || rows[k].frame != rows[k - 1].frame + 1) {
          counts.error_events[t][rows[k].range] += 1;
        }
      }
    }
  }
  return counts;
}

ErrorRateTable error_rate_table(const PerceptionLog& log, const SpeedRangePartition& partition,
                                const ErrorRateOptions& opts) {
  ErrorCounts counts = count_errors(log, partition, opts);
  const std::size_t n = partition.size();

  ErrorRateTable table;
  table.partition = partition;
  table.counting = opts.counting;
  table.speed_independent = opts.speed_independent;
  table.frame_rate_hz = log.frame_rate_hz;
  table.total_frames = log.total_frames;
  table.discarded_frames = counts.discarded_frames;
  for (auto& v : table.cells) v.assign(n, ErrorRateCell{});

  const auto& error_counts =
      (opts.counting == CountingMode::ErrorFrames) ? counts.error_frames : counts.error_events;

  if (opts.speed_independent) {
    // Frames without any observation row carry no ego speed; they are still
    // driving exposure, so they are pooled as in-range.
    const std::int64_t silent_frames = log.total_frames - counts.known_speed_frames;
    const std::int64_t exposure_frames =
        silent_frames + (counts.known_speed_frames - counts.discarded_frames);
    const double exposure_hours = exposure_frames / log.frame_rate_hz / 3600.0;
    for (int t = 0; t < 2; ++t) {
      std::int64_t total = 0;
      for (std::size_t i = 0; i < n; ++i) total += error_counts[t][i];
      const double rate = exposure_hours > 0.0 ? total / exposure_hours : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        table.cells[t][i] = {rate, total, exposure_hours};
      }
    }
  } else {
    table.unattributed_frames = log.total_frames - counts.known_speed_frames;
    for (int t = 0; t < 2; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const double exposure_hours = counts.frames_per_range[i] / log.frame_rate_hz / 3600.0;
        const double rate = exposure_hours > 0.0 ? error_counts[t][i] / exposure_hours : 0.0;
        table.cells[t][i] = {rate, error_counts[t][i], exposure_hours};
      }
    }
  }
  return table;
}

LoadedPerceptionLog load_perception_log(const std::filesystem::path& csv_path,
                                        const std::filesystem::path& sidecar_path) {
  csv::Table t = csv::read_file(csv_path);
  const std::size_t c_frame = t.column("frame");
  const std::size_t c_object = t.column("object_id");
  const std::size_t c_rd = t.column("real_distance");
  const std::size_t c_pd = t.column("perceived_distance");
  const std::size_t c_rv = t.column("real_velocity");
  const std::size_t c_pv = t.column("perceived_velocity");
  const std::size_t c_ego = t.column("ego_speed");

  LoadedPerceptionLog loaded;
  loaded.log.observations.reserve(t.rows.size());
  std::int64_t max_frame = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ObjectObservation obs;
    obs.frame_index = csv::parse_int(t, r, c_frame);
    obs.object_id = t.rows[r][c_object];
    obs.real_distance_m = csv::parse_double_opt(t, r, c_rd);
    obs.perceived_distance_m = csv::parse_double_opt(t, r, c_pd);
    obs.real_velocity_ms = csv::parse_double_opt(t, r, c_rv);
    obs.perceived_velocity_ms = csv::parse_double_opt(t, r, c_pv);
    obs.ego_speed_ms = csv::parse_double(t, r, c_ego);
    max_frame = std::max(max_frame, obs.frame_index);
    loaded.log.observations.push_back(std::move(obs));
  }

  std::ifstream meta_in(sidecar_path);
  if (!meta_in) {
    throw DataError(sidecar_path.string() + ": cannot open perception log sidecar");
  }
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(sidecar_path.string() + ": invalid JSON: " + e.what());
  }
  if (!meta.contains("frame_rate_hz")) {
    throw DataError(sidecar_path.string() + ": missing 'frame_rate_hz'");
  }
  if (!meta.contains("road_max_speed_kmh")) {
    throw DataError(sidecar_path.string() + ": missing 'road_max_speed_kmh'");
  }
  loaded.log.frame_rate_hz = meta.at("frame_rate_hz").get<double>();
  loaded.log.total_frames =
      meta.contains("total_frames") ? meta.at("total_frames").get<std::int64_t>() : max_frame + 1;
  loaded.road_max_speed_ms = units::kmh_to_ms(meta.at("road_max_speed_kmh").get<double>());
  try {
    loaded.log.validate();
  } catch (const ValidationError& e) {
    throw DataError(csv_path.string() + ": " + e.what());
  }
  return loaded;
}

nlohmann::json rate_table_to_json(const ErrorRateTable& table) {
  nlohmann::json doc;
  doc["schema"] = "avmtbf-rates/1";
  doc["units"] = {{"rate", "errors_per_hour"}, {"exposure", "hours"}, {"speed", "km_h"}};
  nlohmann::json ranges = nlohmann::json::array();
  for (std::size_t i = 0; i < table.partition.size(); ++i) {
    ranges.push_back({units::ms_to_kmh(table.partition.lower_ms(i)),
                      units::ms_to_kmh(table.partition.upper_ms(i))});
  }
  doc["speed_ranges_kmh"] = ranges;
  doc["counting"] = counting_mode_name(table.counting);
  doc["speed_independent"] = table.speed_independent;
  doc["frame_rate_hz"] = table.frame_rate_hz;
  doc["total_frames"] = table.total_frames;
  doc["discarded_frames"] = table.discarded_frames;
  doc["unattributed_frames"] = table.unattributed_frames;
  for (int t = 0; t < 2; ++t) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : table.cells[t]) {
      cells.push_back({{"rate_per_hour", cell.rate_per_hour},
                       {"count", cell.error_count},
                       {"exposure_hours", cell.exposure_hours}});
    }
    doc[t == 0 ? "type1" : "type2"] = std::move(cells);
  }
  return doc;
}

ErrorRateTable rate_table_from_json(const nlohmann::json& doc) {
  if (!doc.contains("schema") || doc.at("schema") != "avmtbf-rates/1") {
    throw ValidationError("rate table: unknown or missing schema version (expected avmtbf-rates/1)");
  }
  ErrorRateTable table;
  std::vector<double> boundaries;
  const auto& ranges = doc.at("speed_ranges_kmh");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (i == 0) boundaries.push_back(ranges[i][0].get<double>());
    boundaries.push_back(ranges[i][1].get<double>());
  }
  table.partition = SpeedRangePartition::from_kmh(boundaries);
  table.counting = counting_mode_from_name(doc.at("counting").get<std::string>());
  table.speed_independent = doc.at("speed_independent").get<bool>();
  table.frame_rate_hz = doc.value("frame_rate_hz", 0.0);
  table.total_frames = doc.value("total_frames", std::int64_t{0});
  table.discarded_frames = doc.value("discarded_frames", std::int64_t{0});
  table.unattributed_frames = doc.value("unattributed_frames", std::int64_t{0});
  for (int t = 0; t < 2; ++t) {
    const auto& cells = doc.at(t == 0 ? "type1" : "type2");
    if (cells.size() != table.partition.size()) {
      throw ValidationError("rate table: cell count does not match the speed partition");
    }
    for (const auto& c : cells) {
      table.cells[t].push_back({c.at("rate_per_hour").get<double>(),
                                c.at("count").get<std::int64_t>(),
                                c.at("exposure_hours").get<double>()});
    }
  }
  return table;
}

}  // namespace avmtbf::perception
