// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qoicheck {

enum class DatasetTag { kOriginal, kReplicateA, kRefGridB, kXzGrid };

const char* to_string(DatasetTag tag) noexcept;

struct Row {
  double x = 0.0;
  std::optional<double> z;
  std::optional<int> group;
  std::optional<double> y;
};

/// Covariate/group rows plus an optional response column. Group ids are
/// positive integers registered in `level_registry`.
struct Dataset {
  std::vector<Row> rows;
  DatasetTag tag = DatasetTag::kOriginal;
  std::vector<int> level_registry;

  std::size_t size() const noexcept { return rows.size(); }
  bool has_groups() const noexcept;
  bool has_z() const noexcept;
  bool has_response() const noexcept;

  std::vector<double> xs() const;
  std::vector<double> zs() const;
  std::vector<double> ys() const;

  /// Throws kPrecondition if any row references an unregistered level.
  void validate() const;
};

/// CSV with mandatory header `row_id,x,z,group,y`; absent values are empty.
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::string& path);
Dataset read_csv(std::istream& in, DatasetTag tag = DatasetTag::kOriginal);

}  // namespace qoicheck
