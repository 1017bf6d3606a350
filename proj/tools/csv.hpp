// SPDX-License-Identifier: Apache-2.0
//
// Plain comma-separated tables with a header row.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "spiketrack/error.hpp"

namespace spiketrack::cli {

/// Fixed-precision number text, independent of stream state and locale.
inline std::string num(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& file) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    fail(ErrorKind::validation, file + ": missing column '" + name + "'");
  }

  double number(std::size_t row, std::size_t col, const std::string& file) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(rows[row][col], &used);
      if (used != rows[row][col].size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::validation,
           file + ": row " + std::to_string(row + 1) + " column " + columns[col] +
               " is not a number",
           row + 1);
    }
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::validation, path.string() + ": empty file");
  t.columns = split_csv_line(line);
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.columns.size()) {
      fail(ErrorKind::validation,
           path.string() + ": row " + std::to_string(n) + " has " + std::to_string(cells.size()) +
               " fields, expected " + std::to_string(t.columns.size()),
           n);
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace spiketrack::cli
