// SPDX-License-Identifier: Apache-2.0
//
// Post-estimation data structures: replicate structure, singleton reference
// grid, equidistant (x, z) grid, and the two ways of supplying coefficients
// for group levels that only exist in a prediction grid.
#pragma once

#include <optional>
#include <vector>

#include "qoicheck/dataset.hpp"
#include "qoicheck/model.hpp"
#include "qoicheck/rng.hpp"

namespace qoicheck {

struct GridSpec {
  DatasetTag kind = DatasetTag::kRefGridB;
  std::optional<double> x_fixed = 1.0;
  int n_new_levels = 200;
  int grid_resolution = 50;

  void validate() const;
};

/// Same rows and group balance as `original`, levels shifted to fresh ids
/// (g -> g + G where G is the original registry size), x overwritten by
/// x_fixed when set, response cleared.
Dataset build_replicate_structure(const Dataset& original, const GridSpec& spec);

/// n_new_levels singleton rows at x_fixed with levels base+1 .. base+n.
Dataset build_reference_grid(const GridSpec& spec, int base_level_count);

/// Midpoint grid over (0,1)^2, x-major: row i*m + j has x_i, z_j.
Dataset build_xz_grid(const GridSpec& spec);

/// Midpoints (i + 0.5) / m, i = 0..m-1.
std::vector<double> midpoint_axis(int m);

/// gamma_new ~ Normal(0, sigma_gamma^2) for each new level.
ParameterDraw extend_parameters_gaussian(const ParameterDraw& params, const std::vector<int>& new_levels,
                                         SeedStream& stream);

/// Each new level copies the coefficient of an existing level chosen
/// uniformly at random, independently per new level.
ParameterDraw extend_parameters_uncertainty(const ParameterDraw& params, const std::vector<int>& existing_levels,
                                            const std::vector<int>& new_levels, SeedStream& stream);

}  // namespace qoicheck
