#include "avmtbf/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "avmtbf/errors.hpp"

namespace avmtbf::kinematics {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double square(double x) { return x * x; }
}  // namespace

void BrakingProfile::validate() const {
  if (!(reaction_time_s >= 0.0) || !std::isfinite(reaction_time_s)) {
    throw ValidationError("braking profile: reaction time must be >= 0");
  }
  if (!(deceleration_ms2 > 0.0) || !std::isfinite(deceleration_ms2)) {
    throw ValidationError("braking profile: deceleration must be > 0");
  }
}

void RssParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("rss params: ") + name + " must be > 0");
    }
  };
  positive(response_time_s, "response_time_s");
  positive(max_accel_ms2, "max_accel_ms2");
  positive(min_brake_ms2, "min_brake_ms2");
  positive(max_brake_front_ms2, "max_brake_front_ms2");
}

void SeverityThresholds::validate() const {
  if (!(0.0 <= s1_min_ms && s1_min_ms <= severe_min_ms && severe_min_ms <= s3_min_ms)) {
    throw ValidationError("severity thresholds must satisfy 0 <= s1 <= severe <= s3");
  }
}

void FollowState::validate() const {
  if (!(v_rear_ms >= 0.0) || !(v_front_ms >= 0.0)) {
    throw ValidationError("follow state: speeds must be >= 0");
  }
  if (!(gap_m >= 0.0)) {
    throw ValidationError("follow state: gap must be >= 0");
  }
}

const char* severity_name(SeverityClass c) {
  switch (c) {
    case SeverityClass::S0: return "S0";
    case SeverityClass::S1: return "S1";
    case SeverityClass::S2: return "S2";
    case SeverityClass::S3: return "S3";
  }
  return "S0";
}

double rss_longitudinal_distance(double v_rear_ms, double v_front_ms, const RssParams& params) {
  const double rho = params.response_time_s;
  const double raw = v_rear_ms * rho + 0.5 * params.max_accel_ms2 * rho * rho +
                     square(v_rear_ms + rho * params.max_accel_ms2) / (2.0 * params.min_brake_ms2) -
                     square(v_front_ms) / (2.0 * params.max_brake_front_ms2);
  return std::max(0.0, raw);
}

double impact_delta_v_standing(double v_rear_ms, double gap_m, const BrakingProfile& profile) {
  const double v = v_rear_ms;
  if (v <= 0.0) return 0.0;
  const double reaction_distance = v * profile.reaction_time_s;
  if (gap_m <= reaction_distance) return v;  // impact before the brakes bite
  const double a = profile.deceleration_ms2;
  const double stopping_distance = reaction_distance + v * v / (2.0 * a);
  if (gap_m >= stopping_distance) return 0.0;
  return std::sqrt(v * v - 2.0 * a * (gap_m - reaction_distance));
}

namespace {

// One vehicle on a piecewise-constant-acceleration schedule. Braking phases
// never take the speed below zero.
struct Phase {
  double until_s;   // phase is active for t < until_s
  double accel;     // signed
};

struct Trajectory {
  double v0 = 0.0;
  std::vector<Phase> phases;  // last phase extends to infinity

  // Speed and covered distance at time t (t >= 0).
  void sample(double t, double& v, double& x) const {
    double now = 0.0;
    v = v0;
    x = 0.0;
    for (const Phase& p : phases) {
      const double dt = std::min(t, p.until_s) - now;
      if (dt > 0.0) {
        x += v * dt + 0.5 * p.accel * dt * dt;
        v += p.accel * dt;
        now += dt;
      }
      if (t <= p.until_s) return;
    }
  }
};

}  // namespace

std::optional<double> false_alarm_delta_v(double v_common_ms, double gap_m,
                                          double brake_duration_s,
                                          const BrakingProfile& lead,
                                          const BrakingProfile& rear) {
  lead.validate();
  rear.validate();
  if (!(v_common_ms >= 0.0) || !(gap_m >= 0.0) || !(brake_duration_s >= 0.0)) {
    throw ValidationError("false alarm scenario: inputs must be >= 0");
  }
  if (gap_m == 0.0) return 0.0;  // already touching
  if (v_common_ms == 0.0 || brake_duration_s == 0.0) return std::nullopt;

  const double v = v_common_ms;
  // Lead brakes until the alarm ends or it stops, then holds speed.
  const double lead_brake_end = std::min(brake_duration_s, v / lead.deceleration_ms2);
  // Rear reacts, then brakes to standstill.
  const double rear_brake_start = rear.reaction_time_s;
  const double rear_stop = rear_brake_start + v / rear.deceleration_ms2;

  Trajectory lead_tr{v, {{lead_brake_end, -lead.deceleration_ms2}, {kInf, 0.0}}};
  Trajectory rear_tr{v,
                     {{rear_brake_start, 0.0},
                      {rear_stop, -rear.deceleration_ms2},
                      {kInf, 0.0}}};

  std::vector<double> events{0.0, lead_brake_end, rear_brake_start, rear_stop};
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());

  // After the last event both vehicles hold constant speed and the rear is
  // stopped, so the gap can no longer shrink; segments up to there suffice.
  for (std::size_t k = 0; k < events.size(); ++k) {
    const double t0 = events[k];
    const double t1 = (k + 1 < events.size()) ? events[k + 1] : kInf;
    double vl, xl, vr, xr;
    lead_tr.sample(t0, vl, xl);
    rear_tr.sample(t0, vr, xr);
    const double g0 = gap_m + xl - xr;
    if (g0 <= 0.0) return std::max(0.0, vr - vl);  // should be caught earlier
    const double dv0 = vl - vr;  // gap growth rate
    double al = 0.0, ar = 0.0;
    for (const Phase& p : lead_tr.phases) {
      if (t0 < p.until_s) { al = p.accel; break; }
    }
    for (const Phase& p : rear_tr.phases) {
      if (t0 < p.until_s) { ar = p.accel; break; }
    }
    const double da = al - ar;
    // g(s) = g0 + dv0*s + da*s^2/2, find smallest root in (0, t1-t0]
    const double span = t1 - t0;
    double root = kInf;
    if (da == 0.0) {
      if (dv0 < 0.0) root = -g0 / dv0;
    } else {
      const double disc = dv0 * dv0 - 2.0 * da * g0;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double r1 = (-dv0 - sq) / da;
        const double r2 = (-dv0 + sq) / da;
        for (double r : {std::min(r1, r2), std::max(r1, r2)}) {
          if (r > 0.0) { root = r; break; }
        }
      }
    }
    if (root <= span) {
      const double t_hit = t0 + root;
      double vl_hit, x_unused, vr_hit;
      lead_tr.sample(t_hit, vl_hit, x_unused);
      rear_tr.sample(t_hit, vr_hit, x_unused);
      return std::max(0.0, vr_hit - vl_hit);
    }
    if (t1 == kInf) break;
  }
  return std::nullopt;
}

double ttc_seconds(const FollowState& state, double assumed_rear_accel_ms2) {
  state.validate();
  if (!(assumed_rear_accel_ms2 >= 0.0)) {
    throw ValidationError("ttc: assumed rear acceleration must be >= 0");
  }
  const double a = assumed_rear_accel_ms2;
  const double dv = state.v_rear_ms - state.v_front_ms;  // closing speed
  const double gap = state.gap_m;
  if (gap == 0.0 && (dv > 0.0 || (dv == 0.0 && a > 0.0))) return 0.0;
  if (a == 0.0) {
    return dv > 0.0 ? gap / dv : kInf;
  }
  // smallest nonnegative root of a*t^2/2 + dv*t - gap = 0
  const double disc = dv * dv + 2.0 * a * gap;
  return (-dv + std::sqrt(disc)) / a;
}

SeverityClass severity_from_delta_v(double delta_v_ms, const SeverityThresholds& thresholds) {
  thresholds.validate();
  if (!(delta_v_ms >= 0.0)) {
    throw ValidationError("severity: delta-v must be >= 0");
  }
  if (delta_v_ms > thresholds.s3_min_ms) return SeverityClass::S3;
  if (delta_v_ms > thresholds.severe_min_ms) return SeverityClass::S2;
  if (delta_v_ms > thresholds.s1_min_ms) return SeverityClass::S1;
  return SeverityClass::S0;
}

}  // namespace avmtbf::kinematics
