#include "avmtbf/situations.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include "avmtbf/csv.hpp"
#include "avmtbf/errors.hpp"
#include "avmtbf/kinematics.hpp"
#include "avmtbf/units.hpp"

namespace avmtbf::situations {

namespace fs = std::filesystem;

namespace {

double read_frame_rate(const fs::path& meta_path) {
  csv::Table meta = csv::read_file(meta_path);
  const std::size_t col = meta.column("frameRate");
  return csv::parse_double(meta, 0, col);
}

fs::path meta_path_for(const fs::path& tracks_path) {
  std::string name = tracks_path.filename().string();
  const std::string suffix = "_tracks.csv";
  if (name.size() > suffix.size() && name.ends_with(suffix)) {
    name = name.substr(0, name.size() - suffix.size()) + "_recordingMeta.csv";
    return tracks_path.parent_path() / name;
  }
  fs::path p = tracks_path;
  p.replace_extension();
  return fs::path(p.string() + "_recordingMeta.csv");
}

Recording load_recording(const fs::path& tracks_path) {
  csv::Table t = csv::read_file(tracks_path);
  const std::size_t c_frame = t.column("frame");
  const std::size_t c_id = t.column("id");
  const std::size_t c_lane = t.column("laneId");
  const std::size_t c_x = t.column("x");
  const std::size_t c_vx = t.column("xVelocity");
  const std::size_t c_ax = t.column("xAcceleration");
  const std::size_t c_prec = t.column("precedingId");
  const std::size_t c_width = t.column("width");

  Recording rec;
  rec.name = tracks_path.filename().string();
  rec.frame_rate_hz = read_frame_rate(meta_path_for(tracks_path));
  if (!(rec.frame_rate_hz > 0.0)) {
    throw DataError(meta_path_for(tracks_path).string() + ": frameRate must be > 0");
  }
  rec.frames.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TrackFrame f;
    f.frame_index = csv::parse_int(t, r, c_frame);
    f.vehicle_id = csv::parse_int(t, r, c_id);
    f.lane_id = static_cast<int>(csv::parse_int(t, r, c_lane));
    f.position_m = csv::parse_double(t, r, c_x);
    const double vx = csv::parse_double(t, r, c_vx);
    const double ax = csv::parse_double(t, r, c_ax);
    // normalize both driving directions: positive speed, acceleration signed
    // along the direction of travel
    f.speed_ms = std::abs(vx);
    f.accel_ms2 = vx < 0.0 ? -ax : ax;
    f.preceding_id = csv::parse_int(t, r, c_prec);
    f.length_m = csv::parse_double(t, r, c_width);
    rec.frames.push_back(f);
  }
  return rec;
}

}  // namespace

std::vector<Recording> ingest_tracks(const fs::path& file_or_dir) {
  std::vector<fs::path> files;
  if (fs::is_directory(file_or_dir)) {
    for (const auto& entry : fs::directory_iterator(file_or_dir)) {
      if (entry.is_regular_file() && entry.path().filename().string().ends_with("_tracks.csv")) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw DataError(file_or_dir.string() + ": no recordings (*_tracks.csv) found");
    }
  } else if (fs::exists(file_or_dir)) {
    files.push_back(file_or_dir);
  } else {
    throw DataError(file_or_dir.string() + ": no such file or directory");
  }

  std::vector<Recording> recordings;
  recordings.reserve(files.size());
  for (const auto& f : files) recordings.push_back(load_recording(f));
  return recordings;
}

DrivingMode classify_mode(double accel_ms2, double threshold_ms2) {
  if (!(threshold_ms2 > 0.0)) {
    throw ValidationError("mode threshold must be > 0");
  }
  if (accel_ms2 > threshold_ms2) return DrivingMode::Accelerating;
  if (accel_ms2 < -threshold_ms2) return DrivingMode::Decelerating;
  return DrivingMode::Constant;
}

RangeCounts& RangeCounts::merge(const RangeCounts& other) {
  frames += other.frames;
  frames_with_lead += other.frames_with_lead;
  lead_decelerating += other.lead_decelerating;
  lead_accelerating += other.lead_accelerating;
  lead_constant += other.lead_constant;
  lead_accelerating_close += other.lead_accelerating_close;
  lead_constant_close += other.lead_constant_close;
  follower_close += other.follower_close;
  return *this;
}

namespace {

struct Tallies {
  std::vector<RangeCounts> ranges;
  std::int64_t discarded = 0;
  std::int64_t dangling = 0;
  std::int64_t raw_gap = 0;

  explicit Tallies(std::size_t n) : ranges(n) {}

  Tallies& merge(const Tallies& other) {
    for (std::size_t i = 0; i < ranges.size(); ++i) ranges[i].merge(other.ranges[i]);
    discarded += other.discarded;
    dangling += other.dangling;
    raw_gap += other.raw_gap;
    return *this;
  }
};

double gap_between(const TrackFrame& rear, const TrackFrame& front, Tallies& tally) {
  double gap = std::abs(front.position_m - rear.position_m);
  if (front.length_m > 0.0) {
    gap -= front.length_m;
  } else {
    tally.raw_gap += 1;
  }
  return std::max(0.0, gap);
}

bool ttc_within(const TrackFrame& rear, const TrackFrame& front, double gap,
                const ExtractionOptions& opts) {
  kinematics::FollowState state{rear.speed_ms, front.speed_ms, gap};
  return kinematics::ttc_seconds(state, opts.assumed_rear_accel_ms2) <= opts.ttc_limit_s;
}

Tallies tally_recording(const Recording& rec, const SpeedRangePartition& partition,
                        const ExtractionOptions& opts) {
  Tallies tally(partition.size());

  // group rows per frame index
  std::map<std::int64_t, std::vector<const TrackFrame*>> by_frame;
  for (const auto& f : rec.frames) by_frame[f.frame_index].push_back(&f);

  for (const auto& [frame_index, rows] : by_frame) {
    auto find_vehicle = [&](std::int64_t id) -> const TrackFrame* {
      for (const TrackFrame* f : rows) {
        if (f->vehicle_id == id) return f;
      }
      return nullptr;
    };

    for (const TrackFrame* ego : rows) {
      auto range = partition.range_of(ego->speed_ms);
      if (!range) {
        tally.discarded += 1;
        continue;
      }
      RangeCounts& cell = tally.ranges[*range];
      cell.frames += 1;

      // same-lane lead
      if (ego->preceding_id != 0) {
        const TrackFrame* lead = find_vehicle(ego->preceding_id);
        if (lead == nullptr) {
          tally.dangling += 1;
        } else if (lead->lane_id == ego->lane_id) {
          cell.frames_with_lead += 1;
          const DrivingMode mode = classify_mode(lead->accel_ms2, opts.mode_threshold_ms2);
          switch (mode) {
            case DrivingMode::Decelerating:
              cell.lead_decelerating += 1;
              break;
            case DrivingMode::Accelerating: {
              cell.lead_accelerating += 1;
              const double gap = gap_between(*ego, *lead, tally);
              if (lead->speed_ms < ego->speed_ms && ttc_within(*ego, *lead, gap, opts)) {
                cell.lead_accelerating_close += 1;
              }
              break;
            }
            case DrivingMode::Constant: {
              cell.lead_constant += 1;
              const double gap = gap_between(*ego, *lead, tally);
              if (lead->speed_ms < ego->speed_ms && ttc_within(*ego, *lead, gap, opts)) {
                cell.lead_constant_close += 1;
              }
              break;
            }
          }
        }
      }

      // same-lane follower within the TTC limit (false-alarm constellation)
      for (const TrackFrame* other : rows) {
        if (other == ego || other->preceding_id != ego->vehicle_id ||
            other->lane_id != ego->lane_id) {
          continue;
        }
        double gap = std::abs(ego->position_m - other->position_m);
        if (ego->length_m > 0.0) gap -= ego->length_m;
        gap = std::max(0.0, gap);
        kinematics::FollowState state{other->speed_ms, ego->speed_ms, gap};
        if (kinematics::ttc_seconds(state, opts.assumed_rear_accel_ms2) <= opts.ttc_limit_s) {
          cell.follower_close += 1;
          break;
        }
      }
    }
  }
  return tally;
}

}  // namespace

SituationTable extract_situation_table(const std::vector<Recording>& recordings,
                                       const SpeedRangePartition& partition,
                                       const ExtractionOptions& options) {
  partition.validate();
  if (recordings.empty()) {
    throw DataError("no recordings to extract situations from");
  }

  Tallies total(partition.size());
  for (const auto& rec : recordings) {
    total.merge(tally_recording(rec, partition, options));
  }

  SituationTable table;
  table.partition = partition;
  table.options = options;
  table.counts = total.ranges;
  table.discarded_frames = total.discarded;
  table.dangling_lead_refs = total.dangling;
  table.raw_gap_frames = total.raw_gap;
  for (const auto& cell : table.counts) table.retained_frames += cell.frames;
  if (table.retained_frames == 0) {
    throw DataError("every frame is outside the speed partition");
  }

  const std::size_t n = partition.size();
  table.p_i.resize(n);
  table.p_d.resize(n);
  table.p_a_close.resize(n);
  table.p_c_close.resize(n);
  table.p_s.resize(n);
  table.p_follower_close.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const RangeCounts& c = table.counts[i];
    const double denom = static_cast<double>(c.frames);
    table.p_i[i] = c.frames / static_cast<double>(table.retained_frames);
    table.p_d[i] = denom > 0 ? c.lead_decelerating / denom : 0.0;
    table.p_a_close[i] = denom > 0 ? c.lead_accelerating_close / denom : 0.0;
    table.p_c_close[i] = denom > 0 ? c.lead_constant_close / denom : 0.0;
    table.p_s[i] = table.p_d[i] + table.p_a_close[i] + table.p_c_close[i];
    table.p_follower_close[i] = denom > 0 ? c.follower_close / denom : 0.0;
  }
  return table;
}

std::vector<double> speed_distribution(const std::vector<Recording>& recordings,
                                       const SpeedRangePartition& partition) {
  partition.validate();
  std::vector<std::int64_t> counts(partition.size(), 0);
  std::int64_t retained = 0;
  for (const auto& rec : recordings) {
    for (const auto& f : rec.frames) {
      if (auto range = partition.range_of(f.speed_ms)) {
        counts[*range] += 1;
        retained += 1;
      }
    }
  }
  if (retained == 0) {
    throw DataError("every frame is outside the speed partition");
  }
  std::vector<double> p(partition.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = counts[i] / static_cast<double>(retained);
  }
  return p;
}

std::vector<double> rear_follower_probability(const std::vector<Recording>& recordings,
                                              const SpeedRangePartition& partition,
                                              const ExtractionOptions& options) {
  SituationTable table = extract_situation_table(recordings, partition, options);
  return table.p_follower_close;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw ValidationError("ks statistic needs non-empty samples");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  while (i < a.size() || j < b.size()) {
    double x;
    if (i == a.size()) {
      x = b[j];
    } else if (j == b.size()) {
      x = a[i];
    } else {
      x = std::min(a[i], b[j]);
    }
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

std::vector<ConvergenceRow> convergence_report(const std::vector<Recording>& recordings,
                                               const SpeedRangePartition& partition) {
  partition.validate();
  if (recordings.size() < 2) {
    throw DataError("convergence report needs at least two recordings");
  }
  auto retained_speeds = [&](const Recording& rec) {
    std::vector<double> speeds;
    for (const auto& f : rec.frames) {
      if (partition.range_of(f.speed_ms)) speeds.push_back(f.speed_ms);
    }
    return speeds;
  };

  std::vector<ConvergenceRow> rows;
  std::vector<double> cumulative = retained_speeds(recordings[0]);
  if (cumulative.empty()) {
    throw DataError(recordings[0].name + ": no frames within the speed partition");
  }
  for (std::size_t k = 1; k < recordings.size(); ++k) {
    std::vector<double> increment = retained_speeds(recordings[k]);
    if (increment.empty()) {
      throw DataError(recordings[k].name + ": no frames within the speed partition");
    }
    std::vector<double> next = cumulative;
    next.insert(next.end(), increment.begin(), increment.end());
    ConvergenceRow row;
    row.recordings_so_far = k;
    row.added_recording = recordings[k].name;
    row.cumulative_samples = static_cast<std::int64_t>(next.size());
    row.ks_cumulative = ks_statistic(cumulative, next);
    row.ks_increment = ks_statistic(cumulative, increment);
    rows.push_back(std::move(row));
    cumulative = std::move(next);
  }
  return rows;
}

std::string render_table_text(const SituationTable& table) {
  std::ostringstream os;
  const std::size_t n = table.partition.size();
  auto row = [&](const std::string& label, const std::vector<double>& values) {
    os << std::left << std::setw(34) << label;
    for (std::size_t i = 0; i < n; ++i) {
      os << std::right << std::setw(10) << std::fixed << std::setprecision(3) << values[i];
    }
    os << "\n";
  };
  os << std::left << std::setw(34) << "Speed range [km/h]";
  for (std::size_t i = 0; i < n; ++i) {
    os << std::right << std::setw(10) << table.partition.label_kmh(i);
  }
  os << "\n";
  row("Speed probability [p_i]", table.p_i);
  row("Lead decelerating [p_d]", table.p_d);
  row("Lead accelerating, close [p_a]", table.p_a_close);
  row("Lead constant speed, close [p_c]", table.p_c_close);
  row("Total situation probability [p_S]", table.p_s);
  row("Follower close [p_F]", table.p_follower_close);
  return os.str();
}

nlohmann::json situation_table_to_json(const SituationTable& table) {
  nlohmann::json doc;
  doc["schema"] = "avmtbf-situations/1";
  doc["units"] = {{"speed", "km_h"}, {"ttc", "seconds"}};
  nlohmann::json ranges = nlohmann::json::array();
  for (std::size_t i = 0; i < table.partition.size(); ++i) {
    const RangeCounts& c = table.counts[i];
    ranges.push_back({{"range_kmh",
                       {units::ms_to_kmh(table.partition.lower_ms(i)),
                        units::ms_to_kmh(table.partition.upper_ms(i))}},
                      {"p_i", table.p_i[i]},
                      {"p_d", table.p_d[i]},
                      {"p_a_close", table.p_a_close[i]},
                      {"p_c_close", table.p_c_close[i]},
                      {"p_s", table.p_s[i]},
                      {"p_follower_close", table.p_follower_close[i]},
                      {"counts",
                       {{"frames", c.frames},
                        {"frames_with_lead", c.frames_with_lead},
                        {"lead_decelerating", c.lead_decelerating},
                        {"lead_accelerating", c.lead_accelerating},
                        {"lead_constant", c.lead_constant},
                        {"lead_accelerating_close", c.lead_accelerating_close},
                        {"lead_constant_close", c.lead_constant_close},
                        {"follower_close", c.follower_close}}}});
  }
  doc["ranges"] = std::move(ranges);
  doc["options"] = {{"ttc_limit_s", table.options.ttc_limit_s},
                    {"assumed_rear_accel_ms2", table.options.assumed_rear_accel_ms2},
                    {"mode_threshold_ms2", table.options.mode_threshold_ms2}};
  doc["retained_frames"] = table.retained_frames;
  doc["discarded_frames"] = table.discarded_frames;
  doc["dangling_lead_refs"] = table.dangling_lead_refs;
  doc["raw_gap_frames"] = table.raw_gap_frames;
  return doc;
}

SituationTable situation_table_from_json(const nlohmann::json& doc) {
  if (!doc.contains("schema") || doc.at("schema") != "avmtbf-situations/1") {
    throw ValidationError(
        "situation table: unknown or missing schema version (expected avmtbf-situations/1)");
  }
  SituationTable table;
  std::vector<double> boundaries;
  const auto& ranges = doc.at("ranges");
  if (ranges.empty()) {
    throw ValidationError("situation table: no speed ranges");
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& r = ranges[i].at("range_kmh");
    if (i == 0) boundaries.push_back(r[0].get<double>());
    boundaries.push_back(r[1].get<double>());
  }
  table.partition = SpeedRangePartition::from_kmh(boundaries);
  for (const auto& r : ranges) {
    table.p_i.push_back(r.at("p_i").get<double>());
    table.p_d.push_back(r.at("p_d").get<double>());
    table.p_a_close.push_back(r.at("p_a_close").get<double>());
    table.p_c_close.push_back(r.at("p_c_close").get<double>());
    table.p_s.push_back(r.at("p_s").get<double>());
    table.p_follower_close.push_back(r.value("p_follower_close", 0.0));
    RangeCounts c;
    if (r.contains("counts")) {
      const auto& j = r.at("counts");
      c.frames = j.value("frames", std::int64_t{0});
      c.frames_with_lead = j.value("frames_with_lead", std::int64_t{0});
      c.lead_decelerating = j.value("lead_decelerating", std::int64_t{0});
      c.lead_accelerating = j.value("lead_accelerating", std::int64_t{0});
      c.lead_constant = j.value("lead_constant", std::int64_t{0});
      c.lead_accelerating_close = j.value("lead_accelerating_close", std::int64_t{0});
      c.lead_constant_close = j.value("lead_constant_close", std::int64_t{0});
      c.follower_close = j.value("follower_close", std::int64_t{0});
    }
    table.counts.push_back(c);
  }
  for (double p : table.p_i) {
    if (p < 0.0 || p > 1.0) throw ValidationError("situation table: p_i outside [0,1]");
  }
  for (double p : table.p_s) {
    if (p < 0.0 || p > 1.0) throw ValidationError("situation table: p_s outside [0,1]");
  }
  if (doc.contains("options")) {
    const auto& o = doc.at("options");
    table.options.ttc_limit_s = o.value("ttc_limit_s", 5.0);
    table.options.assumed_rear_accel_ms2 = o.value("assumed_rear_accel_ms2", 2.0);
    table.options.mode_threshold_ms2 = o.value("mode_threshold_ms2", 0.1);
  }
  table.retained_frames = doc.value("retained_frames", std::int64_t{0});
  table.discarded_frames = doc.value("discarded_frames", std::int64_t{0});
  table.dangling_lead_refs = doc.value("dangling_lead_refs", std::int64_t{0});
  table.raw_gap_frames = doc.value("raw_gap_frames", std::int64_t{0});
  return table;
}

}  // namespace avmtbf::situations
