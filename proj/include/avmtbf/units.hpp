#pragma once

// Speeds are meters/second everywhere inside the library. km/h and hours
// appear only at I/O boundaries (CLI flags, config files, reports).

namespace avmtbf::units {

inline constexpr double kmh_per_ms = 3.6;

constexpr double kmh_to_ms(double kmh) { return kmh / kmh_per_ms; }
constexpr double ms_to_kmh(double ms) { return ms * kmh_per_ms; }

constexpr double hours_to_seconds(double h) { return h * 3600.0; }
constexpr double seconds_to_hours(double s) { return s / 3600.0; }

}  // namespace avmtbf::units
