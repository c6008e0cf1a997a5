#pragma once

#include <optional>

#include "avmtbf/units.hpp"

// Closed-form car-following collision kinematics: safety distances, time to
// collision, rear-end impact speeds and their severity classification.
// All operations are pure functions; speeds m/s, distances m, times s.

namespace avmtbf::kinematics {

/// Reaction time followed by constant deceleration (magnitude, positive).
struct BrakingProfile {
  double reaction_time_s = 0.5;
  double deceleration_ms2 = 8.0;

  void validate() const;  // throws ValidationError
};

/// Parameters of the longitudinal minimum-safety-distance bound.
struct RssParams {
  double response_time_s = 0.5;       // rho
  double max_accel_ms2 = 2.0;         // rear acceleration during response
  double min_brake_ms2 = 4.0;         // rear guaranteed braking
  double max_brake_front_ms2 = 8.0;   // front assumed braking

  void validate() const;
  /// True when the front vehicle is assumed to brake harder than the rear's
  /// guaranteed minimum; the raw distance can then clamp to zero for fast
  /// leads. Reports carry this as an informational note.
  bool front_brakes_harder() const { return min_brake_ms2 <= max_brake_front_ms2; }
};

enum class SeverityClass { S0, S1, S2, S3 };

constexpr bool severe(SeverityClass c) {
  return c == SeverityClass::S2 || c == SeverityClass::S3;
}

const char* severity_name(SeverityClass c);

/// Band boundaries on impact delta-v. Only the severe threshold (30 km/h,
/// strict greater-than) is normative; the sub-severe and S3 splits are
/// reporting configuration.
struct SeverityThresholds {
  double s1_min_ms = units::kmh_to_ms(10.0);
  double severe_min_ms = units::kmh_to_ms(30.0);
  double s3_min_ms = units::kmh_to_ms(65.0);

  void validate() const;
};

/// Rear vehicle approaching a front vehicle; gap is bumper to bumper.
struct FollowState {
  double v_rear_ms = 0.0;
  double v_front_ms = 0.0;
  double gap_m = 0.0;

  void validate() const;
};

/// Longitudinal minimum safe distance:
///   max(0, v_r*rho + a_max*rho^2/2 + (v_r + rho*a_max)^2/(2*b_min)
///          - v_f^2/(2*b_max))
double rss_longitudinal_distance(double v_rear_ms, double v_front_ms, const RssParams& params);

/// Impact delta-v against a standing front vehicle for a rear vehicle that
/// reacts, then brakes at constant deceleration. 0 when it stops in time.
double impact_delta_v_standing(double v_rear_ms, double gap_m, const BrakingProfile& profile);

/// Both vehicles start at v_common with the given gap. The lead brakes at
/// t=0 for brake_duration, then holds the reached speed. The rear reacts
/// after rear.reaction_time_s and brakes until standstill. Returns the
/// relative speed at impact, or nullopt when no collision occurs
/// (distinct from a grazing impact with delta-v 0). lead.reaction_time_s
/// is not used; the lead initiates the maneuver itself.
std::optional<double> false_alarm_delta_v(double v_common_ms, double gap_m,
                                          double brake_duration_s,
                                          const BrakingProfile& lead,
                                          const BrakingProfile& rear);

/// Smallest nonnegative time at which the gap closes, assuming the rear
/// vehicle keeps accelerating at assumed_rear_accel and the front holds its
/// speed. +infinity when the gap never closes.
double ttc_seconds(const FollowState& state, double assumed_rear_accel_ms2);

SeverityClass severity_from_delta_v(double delta_v_ms, const SeverityThresholds& thresholds = {});

}  // namespace avmtbf::kinematics
