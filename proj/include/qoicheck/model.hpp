// SPDX-License-Identifier: Apache-2.0
//
// Generative model families: priors, covariate simulation, linear predictors
// and response simulation.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "qoicheck/dataset.hpp"
#include "qoicheck/rng.hpp"

namespace qoicheck {

struct SmoothReparam;

enum class ModelFamily {
  kCs1MultilevelLogLink,
  kCs2SmoothJoint,
  kToyNormalConjugate,
  kToyBernoulli,
};

const char* to_string(ModelFamily family) noexcept;

struct PriorSpec {
  enum class Kind { kNormal, kTruncatedNormalPositive, kUniform, kPointMass };
  Kind kind = Kind::kNormal;
  double a = 0.0;  // mean / location / lower bound / point
  double b = 1.0;  // sd / sd / upper bound / unused

  static PriorSpec normal(double mean, double sd) { return {Kind::kNormal, mean, sd}; }
  static PriorSpec normal_pos(double loc, double sd) { return {Kind::kTruncatedNormalPositive, loc, sd}; }
  static PriorSpec uniform(double lo, double hi) { return {Kind::kUniform, lo, hi}; }
  static PriorSpec point(double v) { return {Kind::kPointMass, v, 0.0}; }

  double sample(SeedStream& stream) const;
  /// Log density up to an additive constant; -inf outside the support.
  double log_density(double v) const;
  void validate(const std::string& name) const;
};

PriorSpec::Kind prior_kind_from_string(const std::string& name);
const char* to_string(PriorSpec::Kind kind) noexcept;

struct ModelSpec {
  ModelFamily family = ModelFamily::kToyNormalConjugate;
  std::map<std::string, PriorSpec> priors;
  int n = 0;  // observation count
  int g = 1;  // group count (CS1)
  int k = 10; // smooth basis size (CS2)

  static ModelSpec cs1(int n = 500, int g = 20);
  static ModelSpec cs2(int n = 10000, int k = 10);
  static ModelSpec toy_normal(int n = 10, double m0 = 0.0, double s0 = 1.0);
  static ModelSpec toy_bernoulli(int n = 3);

  /// Names of the hyper-level priors this family requires.
  std::vector<std::string> prior_names() const;
  const PriorSpec& prior(const std::string& name) const;
  /// Number of penalized smooth coefficients drawn from the prior (k - 3).
  int smooth_rank() const noexcept { return k - 3; }
  void validate() const;
};

std::string group_key(int level);
std::string smooth_key(int l);

/// One named parameter vector plus optional coefficients for levels that
/// exist only in a prediction grid.
struct ParameterDraw {
  std::map<std::string, double> values;
  std::map<std::string, double> extension;

  bool has(const std::string& name) const;
  /// Looks in core values, then extension; kMissingCoefficient if absent.
  double at(const std::string& name) const;
  void set_extension(const std::string& name, double v);
};

/// Ordered parameter ids for the family (CS2 uses `penalized` b coefficients).
std::vector<std::string> parameter_schema(const ModelSpec& spec, int penalized = -1);

/// Parameters that must be strictly positive.
bool is_scale_parameter(const std::string& name);

ParameterDraw draw_prior(const ModelSpec& spec, SeedStream& stream);

Dataset simulate_covariates_cs1(const ModelSpec& spec, SeedStream& stream);
Dataset simulate_covariates_cs2(const ModelSpec& spec, const ParameterDraw& params, SeedStream& stream);
/// Toy families have no covariates: `n` rows with x = 0.
Dataset simulate_covariates_toy(const ModelSpec& spec);

/// CS1: beta0 + beta1*x + gamma[g]; CS2: beta0_y + f(x,z); toys: theta.
std::vector<double> linear_predictor(const ModelSpec& spec, const ParameterDraw& params, const Dataset& data,
                                     const SmoothReparam* smooth = nullptr);

Dataset simulate_response(const ModelSpec& spec, const ParameterDraw& params, const Dataset& data,
                          SeedStream& stream, const SmoothReparam* smooth = nullptr);

}  // namespace qoicheck
