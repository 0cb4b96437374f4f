#ifndef SHRINKM_CSV_HPP
#define SHRINKM_CSV_HPP

// Numeric CSV input: one observation per row, comma separated.

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "shrinkm/errors.hpp"
#include "shrinkm/scatter.hpp"

namespace shrinkm::csv {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_field(std::string_view field, int line, int column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw DataError("csv: non-numeric value '" + std::string(field) + "' at line " + std::to_string(line) +
                    ", column " + std::to_string(column));
  return value;
}

}  // namespace detail

/// Reads a dense numeric matrix. Blank lines are ignored; every other row
/// must have the same number of fields.
inline Matrix read_matrix(std::istream& in, bool skip_header = false) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    int column = 1;
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(detail::parse_field(rest.substr(0, comma), line_no, column++));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError("csv: ragged row at line " + std::to_string(line_no) + " (" + std::to_string(row.size()) +
                      " fields, expected " + std::to_string(rows.front().size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("csv: no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace shrinkm::csv

#endif  // SHRINKM_CSV_HPP
