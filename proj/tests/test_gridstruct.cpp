// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <vector>

#include "qoicheck/error.hpp"
#include "qoicheck/grid.hpp"
#include "support.hpp"

using namespace qoicheck;

namespace {

Dataset original_with_groups(const std::vector<int>& groups, int g) {
  Dataset d;
  for (std::size_t i = 0; i < groups.size(); ++i) d.rows.push_back(Row{0.1 * static_cast<double>(i), std::nullopt, groups[i], 3.0});
  for (int l = 1; l <= g; ++l) d.level_registry.push_back(l);
  return d;
}

ParameterDraw cs1_params(int g, double sigma_gamma) {
  ParameterDraw p;
  p.values = {{"beta0", 0.0}, {"beta1", 1.0}, {"sigma_gamma", sigma_gamma}, {"sigma", 1.0}};
  for (int l = 1; l <= g; ++l) p.values[group_key(l)] = 0.1 * l;
  return p;
}

}  // namespace

TEST_CASE("replicate structure relabels levels and keeps balance") {
  GridSpec spec;
  spec.kind = DatasetTag::kReplicateA;
  spec.x_fixed = 1.0;
  const Dataset out = build_replicate_structure(original_with_groups({1, 1, 2}, 20), spec);
  REQUIRE(out.size() == 3);
  CHECK(*out.rows[0].group == 21);
  CHECK(*out.rows[1].group == 21);
  CHECK(*out.rows[2].group == 22);
  CHECK(out.tag == DatasetTag::kReplicateA);
  for (const auto& r : out.rows) {
    CHECK(r.x == 1.0);
    CHECK(!r.y.has_value());
  }
  CHECK_NOTHROW(out.validate());

  // per-level counts survive the g -> g + G bijection
  const std::vector<int> groups = {3, 1, 3, 3, 2, 5, 5};
  const Dataset orig = original_with_groups(groups, 5);
  const Dataset rep = build_replicate_structure(orig, spec);
  std::map<int, int> before, after;
  for (const auto& r : orig.rows) ++before[*r.group];
  for (const auto& r : rep.rows) ++after[*r.group - 5];
  CHECK(before == after);

  Dataset no_groups;
  no_groups.rows.push_back(Row{0.5, std::nullopt, std::nullopt, std::nullopt});
  CHECK_THROWS_AS(build_replicate_structure(no_groups, spec), Error);
}

TEST_CASE("reference grid of fresh singleton levels") {
  GridSpec spec;
  spec.n_new_levels = 200;
  spec.x_fixed = 1.0;
  const Dataset grid = build_reference_grid(spec, 20);
  CHECK(grid.size() == 200);
  CHECK(grid.tag == DatasetTag::kRefGridB);
  std::map<int, int> counts;
  for (const auto& r : grid.rows) {
    CHECK(r.x == 1.0);
    CHECK(*r.group > 20);
    ++counts[*r.group];
  }
  CHECK(counts.size() == 200);

  spec.n_new_levels = 1;
  CHECK(build_reference_grid(spec, 20).size() == 1);
  spec.n_new_levels = 0;
  CHECK_THROWS_AS(build_reference_grid(spec, 20), Error);
}

TEST_CASE("xz grid on cell midpoints") {
  GridSpec spec;
  spec.kind = DatasetTag::kXzGrid;
  spec.grid_resolution = 2;
  const Dataset g2 = build_xz_grid(spec);
  REQUIRE(g2.size() == 4);
  CHECK(g2.rows[0].x == 0.25);
  CHECK(*g2.rows[0].z == 0.25);
  CHECK(g2.rows[1].x == 0.25);
  CHECK(*g2.rows[1].z == 0.75);
  CHECK(g2.rows[3].x == 0.75);

  spec.grid_resolution = 50;
  const Dataset g50 = build_xz_grid(spec);
  CHECK(g50.size() == 2500);
  bool inside = true;
  for (const auto& r : g50.rows) inside &= r.x > 0.0 && r.x < 1.0 && *r.z > 0.0 && *r.z < 1.0;
  CHECK(inside);

  spec.grid_resolution = 1;
  CHECK_THROWS_AS(build_xz_grid(spec), Error);
}

TEST_CASE("gaussian extension") {
  const std::vector<int> levels = {21, 22, 23};
  SeedStream s(8, 0);
  const ParameterDraw zero = extend_parameters_gaussian(cs1_params(3, 0.0), levels, s);
  CHECK(zero.extension.size() == 3);
  for (const auto& [k, v] : zero.extension) CHECK(v == 0.0);

  std::vector<double> vals;
  const ParameterDraw base = cs1_params(3, 0.5);
  for (int i = 0; i < 100000; ++i) vals.push_back(extend_parameters_gaussian(base, {21}, s).at("gamma[21]"));
  CHECK(std::abs(testsupport::sd(vals) - 0.5) < 0.005);

  // core coefficients untouched
  const ParameterDraw ext = extend_parameters_gaussian(base, levels, s);
  CHECK(ext.values == base.values);
  for (const auto& [k, v] : ext.extension) CHECK(ext.values.count(k) == 0);

  ParameterDraw missing;
  missing.values = {{"beta0", 0.0}};
  CHECK_THROWS_AS(extend_parameters_gaussian(missing, levels, s), Error);
}

TEST_CASE("uncertainty extension resamples existing coefficients") {
  SeedStream s(8, 1);
  const ParameterDraw one = cs1_params(1, 0.5);
  const ParameterDraw copied = extend_parameters_uncertainty(one, {1}, {2, 3, 4}, s);
  for (const auto& [k, v] : copied.extension) CHECK(v == one.at("gamma[1]"));

  const ParameterDraw base = cs1_params(5, 0.5);
  CHECK(extend_parameters_uncertainty(base, {1, 2, 3, 4, 5}, {}, s).extension.empty());
  CHECK_THROWS_AS(extend_parameters_uncertainty(base, {}, {6}, s), Error);

  // Chi-square over which level was copied.
  std::vector<double> counts(5, 0.0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double v = extend_parameters_uncertainty(base, {1, 2, 3, 4, 5}, {6}, s).at("gamma[6]");
    const int idx = static_cast<int>(std::lround(v / 0.1)) - 1;
    REQUIRE(idx >= 0);
    REQUIRE(idx < 5);
    counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  double stat = 0.0;
  for (double c : counts) stat += (c - n / 5.0) * (c - n / 5.0) / (n / 5.0);
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(4.0), stat));
  CHECK(p > 0.01);
}
