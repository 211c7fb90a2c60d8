// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/grid.hpp"

#include <set>
#include <string>

#include "qoicheck/error.hpp"

namespace qoicheck {

void GridSpec::validate() const {
  if (n_new_levels < 1) fail(ErrorCode::kPrecondition, "grid needs n_new_levels >= 1");
  if (grid_resolution < 2) fail(ErrorCode::kPrecondition, "grid needs grid_resolution >= 2");
}

Dataset build_replicate_structure(const Dataset& original, const GridSpec& spec) {
  if (!original.has_groups()) fail(ErrorCode::kPrecondition, "replicate structure needs a group column");
  const int offset = static_cast<int>(original.level_registry.size());
  Dataset out;
  out.tag = DatasetTag::kReplicateA;
  out.rows.reserve(original.size());
  for (const Row& r : original.rows) {
    Row row;
    row.x = spec.x_fixed.value_or(r.x);
    row.z = r.z;
    row.group = *r.group + offset;
    out.rows.push_back(row);
  }
  for (int level : original.level_registry) out.level_registry.push_back(level + offset);
  return out;
}

Dataset build_reference_grid(const GridSpec& spec, int base_level_count) {
  spec.validate();
  if (!spec.x_fixed) fail(ErrorCode::kPrecondition, "reference grid needs x_fixed");
  Dataset out;
  out.tag = DatasetTag::kRefGridB;
  for (int i = 1; i <= spec.n_new_levels; ++i) {
    Row row;
    row.x = *spec.x_fixed;
    row.group = base_level_count + i;
    out.rows.push_back(row);
    out.level_registry.push_back(base_level_count + i);
  }
  return out;
}

std::vector<double> midpoint_axis(int m) {
  std::vector<double> out(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = (i + 0.5) / m;
  return out;
}

Dataset build_xz_grid(const GridSpec& spec) {
  spec.validate();
  const auto axis = midpoint_axis(spec.grid_resolution);
  Dataset out;
  out.tag = DatasetTag::kXzGrid;
  out.rows.reserve(axis.size() * axis.size());
  for (double x : axis) {
    for (double z : axis) {
      Row row;
      row.x = x;
      row.z = z;
      out.rows.push_back(row);
    }
  }
  return out;
}

ParameterDraw extend_parameters_gaussian(const ParameterDraw& params, const std::vector<int>& new_levels,
                                         SeedStream& stream) {
  if (!params.values.count("sigma_gamma")) fail(ErrorCode::kMissingCoefficient, "gaussian extension needs sigma_gamma");
  const double sg = params.values.at("sigma_gamma");
  ParameterDraw out = params;
  for (int level : new_levels) {
    // sigma_gamma = 0 is the degenerate limit; sample_normal rejects sd <= 0.
    const double v = sg > 0.0 ? sample_normal(0.0, sg, stream) : 0.0;
    out.set_extension(group_key(level), v);
  }
  return out;
}

ParameterDraw extend_parameters_uncertainty(const ParameterDraw& params, const std::vector<int>& existing_levels,
                                            const std::vector<int>& new_levels, SeedStream& stream) {
  if (new_levels.empty()) return params;
  if (existing_levels.empty()) fail(ErrorCode::kPrecondition, "uncertainty extension needs at least one existing level");
  std::vector<double> pool;
  pool.reserve(existing_levels.size());
  for (int level : existing_levels) pool.push_back(params.at(group_key(level)));
  ParameterDraw out = params;
  for (int level : new_levels) {
    out.set_extension(group_key(level), pool[stream.uniform_index(pool.size())]);
  }
  return out;
}

}  // namespace qoicheck
