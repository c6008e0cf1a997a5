#include "avmtbf/speed_partition.hpp"

#include <cmath>
#include <sstream>

#include "avmtbf/errors.hpp"
#include "avmtbf/units.hpp"

namespace avmtbf {

SpeedRangePartition::SpeedRangePartition(std::vector<double> boundaries_ms)
    : boundaries_(std::move(boundaries_ms)) {
  validate();
}

SpeedRangePartition SpeedRangePartition::from_kmh(const std::vector<double>& boundaries_kmh) {
  std::vector<double> ms;
  ms.reserve(boundaries_kmh.size());
  for (double b : boundaries_kmh) ms.push_back(units::kmh_to_ms(b));
  return SpeedRangePartition(std::move(ms));
}

void SpeedRangePartition::validate() const {
  if (boundaries_.size() < 2) {
    throw ValidationError("speed partition needs at least two boundaries (one range)");
  }
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    if (!std::isfinite(boundaries_[i])) {
      throw ValidationError("speed partition boundary is not finite");
    }
    if (i > 0 && boundaries_[i] <= boundaries_[i - 1]) {
      throw ValidationError("speed partition boundaries must be strictly increasing");
    }
  }
}

std::optional<std::size_t> SpeedRangePartition::range_of(double speed_ms) const {
  if (boundaries_.empty() || speed_ms < boundaries_.front() || speed_ms >= boundaries_.back()) {
    return std::nullopt;
  }
  // linear scan: partitions are tiny (a handful of ranges)
  for (std::size_t i = 0; i + 1 < boundaries_.size(); ++i) {
    if (speed_ms < boundaries_[i + 1]) return i;
  }
  return std::nullopt;
}

std::string SpeedRangePartition::label_kmh(std::size_t i) const {
  std::ostringstream os;
  auto fmt = [](double v) {
    double kmh = units::ms_to_kmh(v);
    double rounded = std::round(kmh);
    std::ostringstream s;
    if (std::abs(kmh - rounded) < 1e-9) {
      s << static_cast<long long>(rounded);
    } else {
      s << kmh;
    }
    return s.str();
  };
  os << fmt(lower_ms(i)) << "-" << fmt(upper_ms(i));
  return os.str();
}

bool SpeedRangePartition::operator==(const SpeedRangePartition& other) const {
  return boundaries_ == other.boundaries_;
}

}  // namespace avmtbf
