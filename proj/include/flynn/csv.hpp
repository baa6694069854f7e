#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flynn/dataset.hpp"
#include "flynn/error.hpp"

namespace flynn {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Strict decimal-to-double parsing; from_chars gives the round-to-nearest
// value of the decimal text, so write-then-read is value-exact.
inline double parse_double(const std::string& cell, std::size_t line_no) {
  const std::string t = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw DataError("csv: non-numeric feature cell '" + cell + "' on line " +
                    std::to_string(line_no));
  return value;
}

}  // namespace detail

// Numeric CSV with one label column (by index). Labels may be arbitrary
// strings; they are mapped through a lexicographically sorted label table.
inline Dataset load_csv(const std::string& path, std::uint32_t label_column,
                        bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && has_header) continue;
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_csv_line(line));
  }
  if (rows.empty()) throw DataError("csv: no data rows in '" + path + "'");

  const std::size_t width = rows.front().size();
  if (label_column >= width)
    throw DataError("csv: label column " + std::to_string(label_column) +
                    " out of range for width " + std::to_string(width));

  std::map<std::string, std::uint32_t> label_ids;
  for (const auto& cells : rows)
    if (cells.size() == width)
      label_ids.emplace(detail::trim(cells[label_column]), 0);
  std::vector<std::string> table;
  table.reserve(label_ids.size());
  for (auto& [name, id] : label_ids) {
    id = static_cast<std::uint32_t>(table.size());
    table.push_back(name);
  }

  Dataset out(static_cast<std::uint32_t>(width - 1), table, "csv:" + path);
  std::vector<double> features(width - 1);
  std::size_t row_no = has_header ? 1 : 0;
  for (const auto& cells : rows) {
    ++row_no;
    if (cells.size() != width)
      throw DataError("csv: ragged row on line " + std::to_string(row_no) +
                      " (got " + std::to_string(cells.size()) + " cells, want " +
                      std::to_string(width) + ")");
    std::size_t k = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_column) continue;
      features[k++] = detail::parse_double(cells[c], row_no);
    }
    out.append(features, label_ids.at(detail::trim(cells[label_column])));
  }
  return out;
}

// Shortest round-trip decimal text for a double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot write '" + path + "'");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (double v : x) out << format_double(v) << ',';
    out << data.label_table()[data.label(i)] << '\n';
  }
  if (!out) throw DataError("csv: write failed for '" + path + "'");
}

}  // namespace flynn
