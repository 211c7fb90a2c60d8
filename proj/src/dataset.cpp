// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "qoicheck/error.hpp"

namespace qoicheck {

const char* to_string(DatasetTag tag) noexcept {
  switch (tag) {
    case DatasetTag::kOriginal: return "ORIGINAL";
    case DatasetTag::kReplicateA: return "REPLICATE_A";
    case DatasetTag::kRefGridB: return "REFGRID_B";
    case DatasetTag::kXzGrid: return "XZ_GRID";
  }
  return "?";
}

bool Dataset::has_groups() const noexcept {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.group.has_value(); });
}

bool Dataset::has_z() const noexcept {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.z.has_value(); });
}

bool Dataset::has_response() const noexcept {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.y.has_value(); });
}

std::vector<double> Dataset::xs() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.x);
  return out;
}

std::vector<double> Dataset::zs() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.z) fail(ErrorCode::kPrecondition, "dataset row has no z value");
    out.push_back(*r.z);
  }
  return out;
}

std::vector<double> Dataset::ys() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.y) fail(ErrorCode::kPrecondition, "dataset row has no response value");
    out.push_back(*r.y);
  }
  return out;
}

void Dataset::validate() const {
  const std::set<int> known(level_registry.begin(), level_registry.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].group && !known.count(*rows[i].group)) {
      fail(ErrorCode::kPrecondition,
           "row " + std::to_string(i) + " references unregistered level " + std::to_string(*rows[i].group));
    }
  }
}

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.write(buf, n);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_optional_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kIo, "malformed number in dataset CSV: '" + s + "'");
  }
}

}  // namespace

void write_csv(const Dataset& data, std::ostream& out) {
  out << "row_id,x,z,group,y\n";
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const Row& r = data.rows[i];
    out << i << ',';
    put_double(out, r.x);
    out << ',';
    if (r.z) put_double(out, *r.z);
    out << ',';
    if (r.group) out << *r.group;
    out << ',';
    if (r.y) put_double(out, *r.y);
    out << '\n';
  }
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_csv(data, out);
}

Dataset read_csv(std::istream& in, DatasetTag tag) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kIo, "dataset CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "row_id,x,z,group,y") fail(ErrorCode::kIo, "dataset CSV header must be 'row_id,x,z,group,y'");
  Dataset data;
  data.tag = tag;
  std::set<int> levels;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != 5) fail(ErrorCode::kIo, "dataset CSV row must have 5 columns: " + line);
    Row row;
    const auto x = parse_optional_double(cells[1]);
    if (!x) fail(ErrorCode::kIo, "dataset CSV row has no x value: " + line);
    row.x = *x;
    row.z = parse_optional_double(cells[2]);
    if (!cells[3].empty()) {
      int g = 0;
      const auto [ptr, ec] = std::from_chars(cells[3].data(), cells[3].data() + cells[3].size(), g);
      if (ec != std::errc() || ptr != cells[3].data() + cells[3].size()) {
        fail(ErrorCode::kIo, "malformed group id in dataset CSV: '" + cells[3] + "'");
      }
      row.group = g;
      levels.insert(g);
    }
    row.y = parse_optional_double(cells[4]);
    data.rows.push_back(row);
  }
  data.level_registry.assign(levels.begin(), levels.end());
  return data;
}

}  // namespace qoicheck
