#include "avmtbf/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "avmtbf/errors.hpp"

namespace avmtbf::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void cell_error(const Table& t, std::size_t row, std::size_t col,
                             const std::string& what) {
  throw DataError(t.source.string() + ": row " + std::to_string(row + 1) + ", column '" +
                  t.header.at(col) + "': " + what);
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  auto idx = find_column(name);
  if (!idx) {
    throw DataError(source.string() + ": missing required column '" + name + "'");
  }
  return *idx;
}

std::optional<std::size_t> Table::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError(path.string() + ": cannot open file");
  }
  Table table;
  table.source = path;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      for (auto& c : cells) c = trim(c);
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(table.rows.size() + 1) +
                      ": expected " + std::to_string(table.header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (!have_header || table.rows.empty()) {
    throw DataError(path.string() + ": file is empty");
  }
  return table;
}

double parse_double(const Table& t, std::size_t row, std::size_t col) {
  const std::string cell = trim(t.rows.at(row).at(col));
  if (cell.empty()) cell_error(t, row, col, "empty cell where a number is required");
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    cell_error(t, row, col, "not a number: '" + cell + "'");
  }
  return value;
}

std::int64_t parse_int(const Table& t, std::size_t row, std::size_t col) {
  const std::string cell = trim(t.rows.at(row).at(col));
  if (cell.empty()) cell_error(t, row, col, "empty cell where an integer is required");
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec == std::errc{} && ptr == cell.data() + cell.size()) return value;
  // tolerate integral values written with a decimal point (e.g. "12.0")
  double as_double = parse_double(t, row, col);
  auto rounded = static_cast<std::int64_t>(as_double);
  if (static_cast<double>(rounded) != as_double) {
    cell_error(t, row, col, "not an integer: '" + cell + "'");
  }
  return rounded;
}

std::optional<double> parse_double_opt(const Table& t, std::size_t row, std::size_t col) {
  if (trim(t.rows.at(row).at(col)).empty()) return std::nullopt;
  return parse_double(t, row, col);
}

}  // namespace avmtbf::csv
