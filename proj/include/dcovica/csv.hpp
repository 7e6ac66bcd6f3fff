#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dcovica/core.hpp"

namespace dcovica {

struct CsvTable {
  MatrixX<double> data;
  std::vector<std::string> columns;  // empty when the file has no header
  Index n_dropped = 0;               // rows removed because of empty cells
};

class csv_error : public std::runtime_error {
 public:
  explicit csv_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

// Comma-separated numeric table. The first row is treated as a header when
// any of its cells fails to parse as a number. Rows containing empty cells
// are dropped (counted in n_dropped); rows with non-empty, non-numeric
// cells are an error naming the row and column.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw csv_error("cannot open CSV file: " + path);

  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  Index line_no = 0;
  Index ncols = -1;
  bool first_data_row = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() == 1 && detail::trim(cells[0]).empty()) continue;  // blank line

    if (first_data_row) {
      // header detection: any non-numeric, non-empty cell in row 1
      bool header = false;
      for (const auto& c : cells) {
        double v;
        if (!detail::trim(c).empty() && !detail::parse_double(c, v)) {
          header = true;
          break;
        }
      }
      first_data_row = false;
      if (header) {
        for (const auto& c : cells) table.columns.push_back(detail::trim(c));
        ncols = static_cast<Index>(cells.size());
        continue;
      }
    }
    if (ncols < 0) ncols = static_cast<Index>(cells.size());
    if (static_cast<Index>(cells.size()) != ncols)
      throw csv_error(path + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(ncols));

    std::vector<double> row(cells.size());
    bool missing = false;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string t = detail::trim(cells[j]);
      if (t.empty()) {
        missing = true;
        break;
      }
      if (!detail::parse_double(t, row[j]))
        throw csv_error(path + ": non-numeric cell at row " + std::to_string(line_no) +
                        ", column " + std::to_string(j + 1) + " ('" + t + "')");
    }
    if (missing) {
      ++table.n_dropped;
      continue;
    }
    rows.push_back(std::move(row));
  }

  if (rows.empty()) throw csv_error(path + ": no data rows");
  table.data.resize(static_cast<Index>(rows.size()), ncols);
  for (Index i = 0; i < table.data.rows(); ++i)
    for (Index j = 0; j < ncols; ++j)
      table.data(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return table;
}

// Shortest round-trip formatting for doubles (17 significant digits max).
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline void write_csv(const std::string& path, const MatrixX<double>& m,
                      const std::vector<std::string>& columns = {}) {
  std::ofstream out(path);
  if (!out) throw csv_error("cannot write CSV file: " + path);
  if (!columns.empty()) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) out << ',';
      out << columns[j];
    }
    out << '\n';
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace dcovica
