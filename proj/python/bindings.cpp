#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "avmtbf/errors.hpp"
#include "avmtbf/kinematics.hpp"
#include "avmtbf/model.hpp"
#include "avmtbf/montecarlo.hpp"
#include "avmtbf/perception.hpp"
#include "avmtbf/situations.hpp"
#include "avmtbf/units.hpp"

namespace py = pybind11;

using namespace avmtbf;

namespace {

// Tree documents cross the boundary as JSON strings; the python package
// turns them into dicts.
model::FailureModelTree tree_from_string(const std::string& tree_json) {
  return model::deserialize_tree(nlohmann::json::parse(tree_json));
}

py::dict simulation_to_dict(const montecarlo::SimulationResult& r) {
  py::dict d;
  d["empirical_lambda_per_hour"] = r.empirical_lambda_per_hour;
  d["std_error_per_hour"] = r.std_error_per_hour;
  d["analytical_lambda_per_hour"] = r.analytical_lambda_per_hour;
  d["trials"] = r.trials;
  d["horizon_hours"] = r.horizon_hours;
  d["seed"] = r.seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vehicle-level MTBF estimation from perception error rates";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  m.def("kmh_to_ms", &units::kmh_to_ms, py::arg("kmh"));
  m.def("ms_to_kmh", &units::ms_to_kmh, py::arg("ms"));

  py::class_<kinematics::BrakingProfile>(m, "BrakingProfile")
      .def(py::init([](double reaction_time_s, double deceleration_ms2) {
             kinematics::BrakingProfile p{reaction_time_s, deceleration_ms2};
             p.validate();
             return p;
           }),
           py::arg("reaction_time_s") = 0.5, py::arg("deceleration_ms2") = 8.0)
      .def_readwrite("reaction_time_s", &kinematics::BrakingProfile::reaction_time_s)
      .def_readwrite("deceleration_ms2", &kinematics::BrakingProfile::deceleration_ms2);

  py::class_<kinematics::RssParams>(m, "RssParams")
      .def(py::init([](double response_time_s, double max_accel_ms2, double min_brake_ms2,
                       double max_brake_front_ms2) {
             kinematics::RssParams p{response_time_s, max_accel_ms2, min_brake_ms2,
                                     max_brake_front_ms2};
             p.validate();
             return p;
           }),
           py::arg("response_time_s") = 0.5, py::arg("max_accel_ms2") = 2.0,
           py::arg("min_brake_ms2") = 4.0, py::arg("max_brake_front_ms2") = 8.0)
      .def_readwrite("response_time_s", &kinematics::RssParams::response_time_s)
      .def_readwrite("max_accel_ms2", &kinematics::RssParams::max_accel_ms2)
      .def_readwrite("min_brake_ms2", &kinematics::RssParams::min_brake_ms2)
      .def_readwrite("max_brake_front_ms2", &kinematics::RssParams::max_brake_front_ms2);

  m.def(
      "rss_longitudinal_distance",
      [](double v_rear_ms, double v_front_ms, const kinematics::RssParams& params) {
        return kinematics::rss_longitudinal_distance(v_rear_ms, v_front_ms, params);
      },
      py::arg("v_rear_ms"), py::arg("v_front_ms"), py::arg("params") = kinematics::RssParams{});

  m.def(
      "impact_delta_v_standing",
      [](double v_rear_ms, double gap_m, const kinematics::BrakingProfile& profile) {
        return kinematics::impact_delta_v_standing(v_rear_ms, gap_m, profile);
      },
      py::arg("v_rear_ms"), py::arg("gap_m"),
      py::arg("profile") = kinematics::BrakingProfile{});

  m.def(
      "false_alarm_delta_v",
      [](double v_common_ms, double gap_m, double brake_duration_s,
         const kinematics::BrakingProfile& lead,
         const kinematics::BrakingProfile& rear) -> std::optional<double> {
        return kinematics::false_alarm_delta_v(v_common_ms, gap_m, brake_duration_s, lead, rear);
      },
      py::arg("v_common_ms"), py::arg("gap_m"), py::arg("brake_duration_s"),
      py::arg("lead") = kinematics::BrakingProfile{},
      py::arg("rear") = kinematics::BrakingProfile{},
      "Relative impact speed of the false-alarm scenario, None when no collision occurs");

  m.def(
      "ttc",
      [](double v_rear_ms, double v_front_ms, double gap_m, double assumed_rear_accel_ms2) {
        return kinematics::ttc_seconds({v_rear_ms, v_front_ms, gap_m}, assumed_rear_accel_ms2);
      },
      py::arg("v_rear_ms"), py::arg("v_front_ms"), py::arg("gap_m"),
      py::arg("assumed_rear_accel_ms2") = 2.0,
      "Time to collision in seconds; inf when the gap never closes");

  m.def(
      "severity_from_delta_v",
      [](double delta_v_ms) {
        return std::string(
            kinematics::severity_name(kinematics::severity_from_delta_v(delta_v_ms)));
      },
      py::arg("delta_v_ms"), "Severity class name (S0..S3) for an impact delta-v");

  m.def(
      "is_severe_delta_v",
      [](double delta_v_ms) {
        return kinematics::severe(kinematics::severity_from_delta_v(delta_v_ms));
      },
      py::arg("delta_v_ms"));

  m.def("is_safety_relevant_type2", &perception::is_safety_relevant_type2, py::arg("d_per_m"),
        py::arg("d_real_m"), py::arg("d_rss_m"),
        "Indicator d_per > d_rss > d_real; pass math.inf as d_per for a miss");
  m.def("is_safety_relevant_type1", &perception::is_safety_relevant_type1, py::arg("d_per_m"),
        py::arg("d_real_m"), py::arg("d_rss_m"));

  m.def(
      "kappa",
      [](const std::vector<double>& p_i, const std::vector<double>& p_s) {
        return model::kappa(p_i, p_s);
      },
      py::arg("p_i"), py::arg("p_s"),
      "Exposure-weighted probability that a perception error can manifest as a failure");

  m.def("required_error_rate", &model::required_error_rate, py::arg("target_mtbf_hours"),
        py::arg("kappa"));

  m.def("human_baseline_mtbf_hours", &model::human_baseline_mtbf_hours,
        py::arg("accident_count"), py::arg("total_vehicle_km"), py::arg("average_speed_kmh"));

  m.def(
      "failure_rate_simple",
      [](const std::vector<std::pair<double, double>>& rate_and_probability) {
        return model::failure_rate_simple(rate_and_probability);
      },
      py::arg("rate_and_probability"),
      "Sum of (error rate, situation probability) products");

  m.def(
      "evaluate_tree_json",
      [](const std::string& tree_json) {
        const auto result = model::failure_rate_extended(tree_from_string(tree_json));
        return model::result_to_json(result).dump();
      },
      py::arg("tree_json"), "Evaluate a failure model tree document; returns result JSON");

  m.def(
      "simulate_leaf",
      [](double lambda_p_per_hour, double p_s, double horizon_hours, std::int64_t trials,
         std::uint64_t seed) {
        return simulation_to_dict(
            montecarlo::simulate_leaf({lambda_p_per_hour, p_s}, {horizon_hours, trials, seed}));
      },
      py::arg("lambda_p_per_hour"), py::arg("p_s"), py::arg("horizon_hours") = 1.0,
      py::arg("trials") = 10000, py::arg("seed") = 0);

  m.def(
      "simulate_tree_json",
      [](const std::string& tree_json, double horizon_hours, std::int64_t trials,
         std::uint64_t seed) {
        return simulation_to_dict(
            montecarlo::simulate_tree(tree_from_string(tree_json), {horizon_hours, trials, seed}));
      },
      py::arg("tree_json"), py::arg("horizon_hours") = 1.0, py::arg("trials") = 10000,
      py::arg("seed") = 0);

  m.def(
      "extract_situations",
      [](const std::filesystem::path& input, const std::vector<double>& boundaries_kmh,
         double ttc_limit_s, double assumed_rear_accel_ms2, double mode_threshold_ms2) {
        const auto recordings = situations::ingest_tracks(input);
        const auto table = situations::extract_situation_table(
            recordings, SpeedRangePartition::from_kmh(boundaries_kmh),
            {ttc_limit_s, assumed_rear_accel_ms2, mode_threshold_ms2});
        return situations::situation_table_to_json(table).dump();
      },
      py::arg("input"), py::arg("boundaries_kmh"), py::arg("ttc_limit_s") = 5.0,
      py::arg("assumed_rear_accel_ms2") = 2.0, py::arg("mode_threshold_ms2") = 0.1,
      "Mine situation probabilities from recordings; returns situation table JSON");

  m.attr("__version__") = "0.1.0";
}
