// SPDX-License-Identifier: Apache-2.0
//
// Study configuration: a single JSON document, unknown keys rejected.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qoicheck/inference.hpp"
#include "qoicheck/model.hpp"

namespace qoicheck {

enum class StudyCase { kCs1, kCs2, kSbcOnly, kToy };
const char* to_string(StudyCase c) noexcept;

enum class SamplerChoice { kAuto, kConjugate, kMcmc };

struct StudyConfig {
  StudyCase study_case = StudyCase::kCs1;
  /// Model for SBC_ONLY: "cs1", "cs2" or "toy_normal".
  std::string model = "cs1";
  int replications = 100;
  int n = 500;
  int g = 20;
  int k = 10;
  int n_new_levels = 200;
  double x_fixed = 1.0;
  std::vector<double> x_fixed_values;
  int grid_resolution = 50;
  /// CS2 prior side: fresh rows per predicted mean.
  int prediction_n = 500;
  std::map<std::string, PriorSpec> prior_overrides;
  McmcConfig mcmc;
  SamplerChoice sampler = SamplerChoice::kAuto;
  std::vector<std::string> prior_labels;
  std::vector<std::string> posterior_labels;
  std::vector<std::string> weight_schemes;
  double alpha = 0.05;
  int band_draws = 5000;
  int band_points = 100;
  std::uint64_t master_seed = 1;
  int workers = 1;
  std::string output_dir = "qoi_check_out";

  /// Model implied by the case (and `model` for SBC_ONLY), overrides applied.
  ModelSpec model_spec() const;
  void validate() const;
};

/// Parses and validates; kConfig on schema violations or unknown keys.
StudyConfig parse_study_config(const std::string& json_text);
StudyConfig load_study_config(const std::string& path);

}  // namespace qoicheck
