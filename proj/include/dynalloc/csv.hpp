#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "dynalloc/error.hpp"

namespace dynalloc::csv {

/// Shortest representation that round-trips exactly; locale independent.
inline std::string format(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

/// Parses a plain decimal. Empty cells and NaN spellings are missing values.
inline double parse_number(std::string_view cell, const std::string& where) {
  if (cell.empty() || cell == "NaN" || cell == "nan" || cell == "NA" || cell == "null") {
    throw Error(ErrorKind::MissingValue, "missing value at " + where);
  }
  std::string_view s = cell;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ParseError, "not a number '" + std::string(cell) + "' at " + where);
  }
  if (!std::isfinite(v)) throw Error(ErrorKind::MissingValue, "non-finite value at " + where);
  return v;
}

}  // namespace dynalloc::csv
