#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Minimal CSV reader for the numeric track and perception log formats:
// comma separated, one header row, decimal point, no quoting, UTF-8.

namespace avmtbf::csv {

struct Table {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by header name; throws DataError naming the column.
  std::size_t column(const std::string& name) const;
  std::optional<std::size_t> find_column(const std::string& name) const;
};

/// Reads the whole file. Throws DataError for unreadable or empty files and
/// for rows whose cell count does not match the header.
Table read_file(const std::filesystem::path& path);

/// Numeric cell parsers; report file, row (1-based, header excluded) and
/// column name on failure. Empty cells yield nullopt from the *_opt forms
/// and an error otherwise.
double parse_double(const Table& t, std::size_t row, std::size_t col);
std::int64_t parse_int(const Table& t, std::size_t row, std::size_t col);
std::optional<double> parse_double_opt(const Table& t, std::size_t row, std::size_t col);

}  // namespace avmtbf::csv
