// avmtbf: estimates vehicle-level failure rates (MTBF) from perception error
// rates and naturalistic driving statistics, and derives perception quality
// requirements from target MTBF values. All outputs are reproducible: same
// inputs and configuration give byte-identical files.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "avmtbf/config.hpp"
#include "avmtbf/errors.hpp"
#include "avmtbf/kinematics.hpp"
#include "avmtbf/model.hpp"
#include "avmtbf/montecarlo.hpp"
#include "avmtbf/perception.hpp"
#include "avmtbf/situations.hpp"
#include "avmtbf/units.hpp"

namespace {

using avmtbf::DataError;
using avmtbf::SpeedRangePartition;
using avmtbf::UnsatisfiableError;
using avmtbf::ValidationError;
using avmtbf::config::RunConfig;
namespace units = avmtbf::units;
namespace kin = avmtbf::kinematics;
namespace perc = avmtbf::perception;
namespace sit = avmtbf::situations;
namespace model = avmtbf::model;
namespace mc = avmtbf::montecarlo;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitData = 3;

struct CommonOptions {
  std::string config_path;
  std::string output_path;  // empty = stdout
  std::string format = "json";
};

void add_common(CLI::App* cmd, CommonOptions& common, bool with_format = false) {
  cmd->add_option("--config", common.config_path, "JSON run configuration file");
  cmd->add_option("-o,--out", common.output_path, "Output file (default: stdout)");
  if (with_format) {
    cmd->add_option("--format", common.format, "Output format: json or text")
        ->check(CLI::IsMember({"json", "text"}));
  }
}

RunConfig effective_config(const CommonOptions& common) {
  if (common.config_path.empty()) {
    RunConfig cfg;
    cfg.validate();
    return cfg;
  }
  return avmtbf::config::load_config(common.config_path);
}

void write_output(const CommonOptions& common, const std::string& payload) {
  if (common.output_path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(common.output_path, std::ios::binary);
  if (!out) {
    throw DataError(common.output_path + ": cannot open output file");
  }
  out << payload;
}

void write_file(const std::string& path, const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError(path + ": cannot open output file");
  }
  out << payload;
}

std::string dump_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

std::string config_comment(const RunConfig& cfg) {
  return "# config: " + avmtbf::config::config_to_json(cfg).dump() + "\n";
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError(path + ": cannot open file");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  return doc;
}

std::string format_number(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

// ---------------------------------------------------------------------------
// extract-situations / speed-dist

std::string convergence_csv(const std::vector<sit::ConvergenceRow>& rows, const RunConfig& cfg) {
  std::ostringstream os;
  os << config_comment(cfg);
  os << "k,added_recording,cumulative_samples,ks_cumulative,ks_increment\n";
  for (const auto& row : rows) {
    os << row.recordings_so_far << "," << row.added_recording << "," << row.cumulative_samples
       << "," << format_number(row.ks_cumulative, 9) << ","
       << format_number(row.ks_increment, 9) << "\n";
  }
  return os.str();
}

int cmd_extract_situations(const CommonOptions& common, const std::string& input,
                           const std::string& convergence_path) {
  RunConfig cfg = effective_config(common);
  auto recordings = sit::ingest_tracks(input);
  sit::SituationTable table =
      sit::extract_situation_table(recordings, cfg.partition(), cfg.extraction_options());
  if (common.format == "text") {
    write_output(common, sit::render_table_text(table));
  } else {
    nlohmann::json doc = sit::situation_table_to_json(table);
    doc["config"] = avmtbf::config::config_to_json(cfg);
    write_output(common, dump_json(doc));
  }
  if (!convergence_path.empty()) {
    auto rows = sit::convergence_report(recordings, cfg.partition());
    write_file(convergence_path, convergence_csv(rows, cfg));
  }
  return kExitOk;
}

int cmd_speed_dist(const CommonOptions& common, const std::string& input) {
  RunConfig cfg = effective_config(common);
  auto recordings = sit::ingest_tracks(input);
  SpeedRangePartition partition = cfg.partition();
  auto p = sit::speed_distribution(recordings, partition);
  nlohmann::json ranges = nlohmann::json::array();
  for (std::size_t i = 0; i < partition.size(); ++i) {
    ranges.push_back({{"range_kmh",
                       {units::ms_to_kmh(partition.lower_ms(i)),
                        units::ms_to_kmh(partition.upper_ms(i))}},
                      {"p_i", p[i]}});
  }
  nlohmann::json doc{{"schema", "avmtbf-speed-dist/1"},
                     {"units", {{"speed", "km_h"}}},
                     {"ranges", std::move(ranges)},
                     {"config", avmtbf::config::config_to_json(cfg)}};
  write_output(common, dump_json(doc));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// error-rates

int cmd_error_rates(const CommonOptions& common, const std::string& log_path,
                    std::string meta_path) {
  RunConfig cfg = effective_config(common);
  if (meta_path.empty()) {
    std::filesystem::path p(log_path);
    p.replace_extension(".json");
    meta_path = p.string();
  }
  perc::LoadedPerceptionLog loaded = perc::load_perception_log(log_path, meta_path);
  perc::ErrorRateOptions opts;
  opts.context.rss = cfg.rss;
  opts.context.braking = cfg.braking;
  opts.context.severity = cfg.severity;
  opts.context.tolerance = cfg.tolerance;
  opts.context.road_max_speed_ms = loaded.road_max_speed_ms;
  opts.counting = cfg.counting;
  opts.speed_independent = cfg.speed_independent_rates;
  perc::ErrorRateTable table = perc::error_rate_table(loaded.log, cfg.partition(), opts);
  nlohmann::json doc = perc::rate_table_to_json(table);
  doc["road_max_speed_kmh"] = units::ms_to_kmh(loaded.road_max_speed_ms);
  doc["config"] = avmtbf::config::config_to_json(cfg);
  write_output(common, dump_json(doc));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate / require / baseline

model::FailureModelTree tree_from_files(const std::string& situations_path,
                                        const std::string& rates_path,
                                        const std::string& tree_path) {
  if (!tree_path.empty()) {
    return model::deserialize_tree(load_json_file(tree_path));
  }
  sit::SituationTable table = sit::situation_table_from_json(load_json_file(situations_path));
  perc::ErrorRateTable rates = perc::rate_table_from_json(load_json_file(rates_path));
  return model::tree_from_tables("mission", table, rates);
}

int cmd_estimate(const CommonOptions& common, const std::string& situations_path,
                 const std::string& rates_path, const std::string& tree_path,
                 const std::string& emit_tree_path) {
  RunConfig cfg = effective_config(common);
  model::FailureModelTree tree = tree_from_files(situations_path, rates_path, tree_path);
  model::ModelResult result = model::failure_rate_extended(tree);
  if (!emit_tree_path.empty()) {
    write_file(emit_tree_path, dump_json(model::serialize_tree(tree)));
  }
  if (common.format == "text") {
    write_output(common, model::render_tree_text(tree, result));
  } else {
    nlohmann::json doc = model::result_to_json(result);
    doc["tree"] = model::serialize_tree(tree);
    doc["config"] = avmtbf::config::config_to_json(cfg);
    write_output(common, dump_json(doc));
  }
  return kExitOk;
}

int cmd_require(const CommonOptions& common, const std::vector<double>& targets,
                const std::string& situations_path, std::optional<double> kappa_flag) {
  RunConfig cfg = effective_config(common);
  double kappa_value = 0.0;
  nlohmann::json source;
  if (kappa_flag) {
    kappa_value = *kappa_flag;
    source = "flag";
  } else if (!situations_path.empty()) {
    sit::SituationTable table = sit::situation_table_from_json(load_json_file(situations_path));
    kappa_value = model::kappa(table.p_i, table.p_s);
    source = situations_path;
  } else {
    throw ValidationError("require: provide --situations or --kappa");
  }
  nlohmann::json rows = nlohmann::json::array();
  for (double target : targets) {
    rows.push_back({{"target_mtbf_hours", target},
                    {"required_error_rate_per_hour",
                     model::required_error_rate(target, kappa_value)}});
  }
  nlohmann::json doc{{"schema", "avmtbf-require/1"},
                     {"units", {{"rate", "errors_per_hour"}, {"mtbf", "hours"}}},
                     {"kappa", kappa_value},
                     {"kappa_source", source},
                     {"requirements", std::move(rows)},
                     {"config", avmtbf::config::config_to_json(cfg)}};
  write_output(common, dump_json(doc));
  return kExitOk;
}

int cmd_baseline(const CommonOptions& common, double accidents, double vehicle_km,
                 double avg_speed_kmh) {
  RunConfig cfg = effective_config(common);
  const double mtbf = model::human_baseline_mtbf_hours(accidents, vehicle_km, avg_speed_kmh);
  nlohmann::json doc{{"schema", "avmtbf-baseline/1"},
                     {"units", {{"mtbf", "hours"}, {"speed", "km_h"}}},
                     {"accidents", accidents},
                     {"vehicle_km", vehicle_km},
                     {"average_speed_kmh", avg_speed_kmh},
                     {"config", avmtbf::config::config_to_json(cfg)}};
  if (std::isinf(mtbf)) {
    doc["mtbf_hours"] = "inf";
    doc["note"] = "zero accidents: baseline is unbounded";
  } else {
    doc["mtbf_hours"] = mtbf;
  }
  write_output(common, dump_json(doc));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const CommonOptions& common, std::optional<double> lambda_p,
                 std::optional<double> p_s, const std::string& tree_path, double horizon,
                 std::int64_t trials, std::uint64_t seed) {
  RunConfig cfg = effective_config(common);
  mc::SimulationConfig sim{horizon, trials, seed};
  mc::SimulationResult result;
  if (!tree_path.empty()) {
    if (lambda_p || p_s) {
      throw ValidationError("simulate: --tree excludes --lambda-p/--p-s");
    }
    result = mc::simulate_tree(model::deserialize_tree(load_json_file(tree_path)), sim);
  } else {
    if (!lambda_p || !p_s) {
      throw ValidationError("simulate: provide either --tree or both --lambda-p and --p-s");
    }
    result = mc::simulate_leaf({*lambda_p, *p_s}, sim);
  }
  nlohmann::json doc = mc::simulation_result_to_json(result);
  doc["config"] = avmtbf::config::config_to_json(cfg);
  write_output(common, dump_json(doc));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// severity-chart / false-alarm-chart

struct GridRange {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  void validate(const char* what) const {
    if (!(step > 0.0) || !(max >= min)) {
      throw ValidationError(std::string(what) + ": invalid grid (need max >= min, step > 0)");
    }
  }
};

int cmd_severity_chart(const CommonOptions& common, const GridRange& speed_kmh,
                       const GridRange& gap_m) {
  RunConfig cfg = effective_config(common);
  speed_kmh.validate("speed grid");
  gap_m.validate("gap grid");
  std::ostringstream os;
  os << config_comment(cfg);
  if (cfg.rss.front_brakes_harder()) {
    os << "# note: rss min_brake <= max_brake_front, raw safety distance can clamp to zero\n";
  }
  os << "speed_kmh,gap_m,delta_v_kmh,severity\n";
  for (double v = speed_kmh.min; v <= speed_kmh.max + 1e-9; v += speed_kmh.step) {
    for (double g = gap_m.min; g <= gap_m.max + 1e-9; g += gap_m.step) {
      const double dv =
          kin::impact_delta_v_standing(units::kmh_to_ms(v), g, cfg.braking);
      const auto cls = kin::severity_from_delta_v(dv, cfg.severity);
      os << format_number(v) << "," << format_number(g) << ","
         << format_number(units::ms_to_kmh(dv)) << "," << kin::severity_name(cls) << "\n";
    }
  }
  write_output(common, os.str());
  return kExitOk;
}

int cmd_false_alarm_chart(const CommonOptions& common, double speed_kmh, const GridRange& gap_m,
                          const GridRange& duration_s) {
  RunConfig cfg = effective_config(common);
  gap_m.validate("gap grid");
  duration_s.validate("duration grid");
  std::ostringstream os;
  os << config_comment(cfg);
  os << "# model: lead brakes for the alarm duration, then holds the reduced speed;"
        " follower reacts after its reaction time and brakes to a stop\n";
  os << "gap_m,duration_s,delta_v_kmh,severity,collision\n";
  for (double g = gap_m.min; g <= gap_m.max + 1e-9; g += gap_m.step) {
    for (double d = duration_s.min; d <= duration_s.max + 1e-9; d += duration_s.step) {
      const auto dv = kin::false_alarm_delta_v(units::kmh_to_ms(speed_kmh), g, d, cfg.braking,
                                               cfg.follower_braking);
      os << format_number(g) << "," << format_number(d) << ",";
      if (dv) {
        const auto cls = kin::severity_from_delta_v(*dv, cfg.severity);
        os << format_number(units::ms_to_kmh(*dv)) << "," << kin::severity_name(cls) << ",1\n";
      } else {
        os << ",none,0\n";
      }
    }
  }
  write_output(common, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle-level MTBF estimation from perception error rates and naturalistic "
               "driving statistics"};
  app.require_subcommand(1);

  CommonOptions common;

  // extract-situations
  auto* extract = app.add_subcommand(
      "extract-situations", "Mine situation probabilities from trajectory recordings");
  std::string tracks_input;
  std::string convergence_path;
  extract->add_option("input", tracks_input, "Tracks CSV file or directory of recordings")
      ->required();
  extract->add_option("--convergence", convergence_path,
                      "Also write a per-recording distribution-shift CSV");
  add_common(extract, common, true);

  // speed-dist
  auto* speed = app.add_subcommand("speed-dist", "Speed range distribution of recordings");
  std::string speed_input;
  speed->add_option("input", speed_input, "Tracks CSV file or directory")->required();
  add_common(speed, common);

  // error-rates
  auto* rates = app.add_subcommand("error-rates", "Estimate perception error rates from a log");
  std::string log_path, meta_path;
  rates->add_option("log", log_path, "Perception log CSV")->required();
  rates->add_option("--meta", meta_path,
                    "JSON sidecar (default: log path with .json extension)");
  add_common(rates, common);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Vehicle-level failure rate and MTBF");
  std::string situations_path, rates_path, tree_path, emit_tree_path;
  estimate->add_option("--situations", situations_path, "Situation table JSON");
  estimate->add_option("--rates", rates_path, "Error rate table JSON");
  estimate->add_option("--tree", tree_path, "Failure model tree JSON (instead of tables)");
  estimate->add_option("--emit-tree", emit_tree_path, "Write the evaluated tree JSON here");
  add_common(estimate, common, true);

  // require
  auto* require = app.add_subcommand(
      "require", "Perception error rate budget for target MTBF values");
  std::vector<double> targets;
  std::string require_situations;
  double kappa_flag_value = -1.0;
  auto* kappa_opt =
      require->add_option("--kappa", kappa_flag_value, "Masking factor kappa (skips --situations)");
  require->add_option("--target-mtbf", targets, "Target MTBF in hours (repeatable)")
      ->required();
  require->add_option("--situations", require_situations, "Situation table JSON");
  add_common(require, common);

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Human driver MTBF from accident statistics");
  double accidents = 0.0, vehicle_km = 0.0, avg_speed = 0.0;
  baseline->add_option("--accidents", accidents, "Severe accidents in the period")->required();
  baseline->add_option("--vehicle-km", vehicle_km, "Total driven kilometers")->required();
  baseline->add_option("--avg-speed", avg_speed, "Average speed in km/h")->required();
  add_common(baseline, common);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of the analytical rate");
  double lambda_p_value = -1.0, p_s_value = -1.0;
  std::string sim_tree_path;
  double horizon = 1.0;
  std::int64_t trials = 100000;
  std::uint64_t seed = 0;
  auto* lambda_opt = simulate->add_option("--lambda-p", lambda_p_value, "Error rate per hour");
  auto* ps_opt = simulate->add_option("--p-s", p_s_value, "Situation probability");
  simulate->add_option("--tree", sim_tree_path, "Failure model tree JSON");
  simulate->add_option("--horizon", horizon, "Exposure window per trial, hours");
  simulate->add_option("--trials", trials, "Number of trials");
  simulate->add_option("--seed", seed, "Random seed");
  add_common(simulate, common);

  // severity-chart
  auto* sev_chart = app.add_subcommand(
      "severity-chart", "CSV grid: impact delta-v and severity vs speed and gap");
  GridRange speed_grid{0.0, 160.0, 10.0};
  GridRange gap_grid{0.0, 150.0, 5.0};
  sev_chart->add_option("--speed-min", speed_grid.min, "km/h");
  sev_chart->add_option("--speed-max", speed_grid.max, "km/h");
  sev_chart->add_option("--speed-step", speed_grid.step, "km/h");
  sev_chart->add_option("--gap-min", gap_grid.min, "m");
  sev_chart->add_option("--gap-max", gap_grid.max, "m");
  sev_chart->add_option("--gap-step", gap_grid.step, "m");
  add_common(sev_chart, common);

  // false-alarm-chart
  auto* fa_chart = app.add_subcommand(
      "false-alarm-chart", "CSV grid: severity of a false-alarm braking transient vs gap and duration");
  double fa_speed = 130.0;
  GridRange fa_gap{1.0, 100.0, 1.0};
  GridRange fa_duration{0.0, 6.0, 0.25};
  fa_chart->add_option("--speed", fa_speed, "Common initial speed, km/h");
  fa_chart->add_option("--gap-min", fa_gap.min, "m");
  fa_chart->add_option("--gap-max", fa_gap.max, "m");
  fa_chart->add_option("--gap-step", fa_gap.step, "m");
  fa_chart->add_option("--duration-min", fa_duration.min, "s");
  fa_chart->add_option("--duration-max", fa_duration.max, "s");
  fa_chart->add_option("--duration-step", fa_duration.step, "s");
  add_common(fa_chart, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (extract->parsed()) {
      return cmd_extract_situations(common, tracks_input, convergence_path);
    }
    if (speed->parsed()) return cmd_speed_dist(common, speed_input);
    if (rates->parsed()) return cmd_error_rates(common, log_path, meta_path);
    if (estimate->parsed()) {
      if (tree_path.empty() && (situations_path.empty() || rates_path.empty())) {
        throw ValidationError("estimate: provide --tree or both --situations and --rates");
      }
      return cmd_estimate(common, situations_path, rates_path, tree_path, emit_tree_path);
    }
    if (require->parsed()) {
      std::optional<double> kappa_flag;
      if (kappa_opt->count() > 0) kappa_flag = kappa_flag_value;
      return cmd_require(common, targets, require_situations, kappa_flag);
    }
    if (baseline->parsed()) return cmd_baseline(common, accidents, vehicle_km, avg_speed);
    if (simulate->parsed()) {
      std::optional<double> lp, ps;
      if (lambda_opt->count() > 0) lp = lambda_p_value;
      if (ps_opt->count() > 0) ps = p_s_value;
      return cmd_simulate(common, lp, ps, sim_tree_path, horizon, trials, seed);
    }
    if (sev_chart->parsed()) return cmd_severity_chart(common, speed_grid, gap_grid);
    if (fa_chart->parsed()) return cmd_false_alarm_chart(common, fa_speed, fa_gap, fa_duration);
  } catch (const UnsatisfiableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
