#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace avmtbf {

/// Ordered, disjoint half-open speed buckets [lo, hi) in m/s. Every
/// per-range probability and rate in the library is indexed by this.
class SpeedRangePartition {
 public:
  SpeedRangePartition() = default;
  explicit SpeedRangePartition(std::vector<double> boundaries_ms);

  static SpeedRangePartition from_kmh(const std::vector<double>& boundaries_kmh);

  std::size_t size() const { return boundaries_.empty() ? 0 : boundaries_.size() - 1; }
  const std::vector<double>& boundaries_ms() const { return boundaries_; }
  double lower_ms(std::size_t i) const { return boundaries_.at(i); }
  double upper_ms(std::size_t i) const { return boundaries_.at(i + 1); }

  /// Index of the range containing the speed, or nullopt when out of range.
  std::optional<std::size_t> range_of(double speed_ms) const;

  /// "80-100" style label in km/h, for reports.
  std::string label_kmh(std::size_t i) const;

  bool operator==(const SpeedRangePartition& other) const;

  void validate() const;  // throws ValidationError

 private:
  std::vector<double> boundaries_;  // strictly increasing, size >= 2
};

}  // namespace avmtbf
