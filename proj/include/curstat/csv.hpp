#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "curstat/errors.hpp"
#include "curstat/types.hpp"

namespace curstat {

// All numeric output goes through this: shortest representation with at
// least 10 significant digits, stable across runs.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return fields;
}

inline double parse_double(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidDatum("line " + std::to_string(line_no) + ": cannot parse " + what + " '" + s +
                       "'");
  }
}

inline int parse_int(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidDatum("line " + std::to_string(line_no) + ": cannot parse " + what + " '" + s +
                       "'");
  }
}

}  // namespace detail

// Reads `time,status` rows (optional third `count` column for pre-grouped
// data) with a header line. Comment lines starting with '#' are skipped.
inline std::vector<std::tuple<double, int, int>> read_current_status_csv(std::istream& in) {
  std::vector<std::tuple<double, int, int>> rows;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // first non-comment line is the header
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 2 && fields.size() != 3)
      throw InvalidDatum("line " + std::to_string(line_no) + ": expected 2 or 3 columns, got " +
                         std::to_string(fields.size()));
    const double t = detail::parse_double(fields[0], line_no, "time");
    const int d = detail::parse_int(fields[1], line_no, "status");
    const int c = fields.size() == 3 ? detail::parse_int(fields[2], line_no, "count") : 1;
    if (d != 0 && d != 1)
      throw InvalidDatum("line " + std::to_string(line_no) + ": status must be 0 or 1");
    if (c < 1) throw InvalidDatum("line " + std::to_string(line_no) + ": count must be >= 1");
    rows.emplace_back(t, d, c);
  }
  if (rows.empty()) throw EmptySample("CSV contains no data rows");
  return rows;
}

// Reads `time,covariate,status` rows with a header line.
struct RegressionRows {
  std::vector<double> times;
  std::vector<double> covariates;
  std::vector<int> statuses;
};

inline RegressionRows read_regression_csv(std::istream& in) {
  RegressionRows rows;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 3)
      throw InvalidDatum("line " + std::to_string(line_no) + ": expected 3 columns, got " +
                         std::to_string(fields.size()));
    rows.times.push_back(detail::parse_double(fields[0], line_no, "time"));
    rows.covariates.push_back(detail::parse_double(fields[1], line_no, "covariate"));
    const int d = detail::parse_int(fields[2], line_no, "status");
    if (d != 0 && d != 1)
      throw InvalidDatum("line " + std::to_string(line_no) + ": status must be 0 or 1");
    rows.statuses.push_back(d);
  }
  if (rows.times.empty()) throw EmptySample("CSV contains no data rows");
  return rows;
}

// Reproducibility contract: every output file starts with comment lines
// echoing the resolved configuration (worker count excluded; it must not
// change the bytes).
inline std::string config_header(const std::string& command,
                                 const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out = "# curstat " + command + "\n";
  for (const auto& [k, v] : kv) out += "# " + k + "=" + v + "\n";
  return out;
}

}  // namespace curstat
