// SPDX-License-Identifier: Apache-2.0
//
// Quantities of interest: the three expectation versions for the multilevel
// log-link model, predictive simulation, and the weighted functional ANOVA
// decomposition of the bivariate smooth.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qoicheck/dataset.hpp"
#include "qoicheck/model.hpp"
#include "qoicheck/rng.hpp"

namespace qoicheck {

struct SmoothReparam;

enum class QoiVersion { kACond, kBMarg, kCMean };
enum class NewLevelSampling { kGaussian, kUncertainty };

struct QoiLabel {
  QoiVersion version = QoiVersion::kACond;
  std::optional<DatasetTag> structure;  // kReplicateA or kRefGridB
  std::optional<NewLevelSampling> sampling;

  static QoiLabel a() { return {QoiVersion::kACond, std::nullopt, std::nullopt}; }
  static QoiLabel b() { return {QoiVersion::kBMarg, std::nullopt, std::nullopt}; }
  static QoiLabel c(DatasetTag structure, NewLevelSampling sampling) { return {QoiVersion::kCMean, structure, sampling}; }

  /// "a", "b", "cAG", "cAu", "cBG", "cBu"; A is the replicate structure, B
  /// the singleton reference grid.
  std::string str() const;
  static QoiLabel parse(const std::string& text);
  void validate() const;
  bool operator==(const QoiLabel&) const = default;
};

/// The six labels in matrix order.
std::vector<QoiLabel> cs1_labels();

/// exp(beta0 + beta1 x).
double qoi_version_a(const ParameterDraw& params, double x);
/// exp(beta0 + beta1 x + sigma_gamma^2 / 2).
double qoi_version_b(const ParameterDraw& params, double x);

/// One response draw per row, observation noise included.
std::vector<double> predict(const ModelSpec& spec, const ParameterDraw& params, const Dataset& data, SeedStream& stream,
                            const SmoothReparam* smooth = nullptr);

/// Extends `params` onto the grid's levels, predicts once per row and
/// returns the sample mean. `existing_levels` feeds uncertainty sampling.
double qoi_version_c(const ModelSpec& spec, const ParameterDraw& params, const Dataset& grid,
                     NewLevelSampling sampling, const std::vector<int>& existing_levels, SeedStream& stream);

enum class WeightScheme { kWeightedA, kUnweightedB };
const char* to_string(WeightScheme scheme) noexcept;
WeightScheme weight_scheme_from_string(const std::string& name);

struct AnovaComponents {
  double f_empty = 0.0;
  Eigen::VectorXd f_x;
  Eigen::VectorXd f_z;
  Eigen::MatrixXd f_xz;
  WeightScheme scheme = WeightScheme::kUnweightedB;
  Eigen::VectorXd x_weights;  // normalized
  Eigen::VectorXd z_weights;  // normalized

  /// max |f_empty + f_x + f_z + f_xz - f| over the grid.
  double identity_error(const Eigen::MatrixXd& f) const;
  /// max(|sum w_x f_x|, |sum w_z f_z|).
  double centering_error() const;
};

/// `f` is tabulated as f(i, j) = f(x_i, z_j). Under kUnweightedB the
/// supplied weights are only checked for length and replaced by uniform ones.
AnovaComponents anova_decompose(const Eigen::MatrixXd& f, std::span<const double> x_weights,
                                std::span<const double> z_weights, WeightScheme scheme);

/// Probability mass of Beta(mu*phi, (1-mu)*phi) in the cell around each grid
/// point. Cell edges are midpoints between neighbours, closed by 0 and 1.
std::vector<double> beta_cell_weights(double mu, double phi, std::span<const double> grid);

/// beta0_y + sum_z w(z) f(x_fixed, z); weights from the same draw's
/// Beta(logistic(beta0_z), phi_z) under kWeightedA, uniform under kUnweightedB.
double qoi_cs2_conditional_expectation(const ParameterDraw& params, const SmoothReparam& reparam, double x_fixed,
                                       std::span<const double> z_grid, WeightScheme scheme);

/// Sample mean of predictions on n fresh rows: z drawn from the draw's own
/// Beta model, x held at x_fixed.
double qoi_cs2_predicted_mean(const ModelSpec& spec, const ParameterDraw& params, const SmoothReparam& reparam,
                              double x_fixed, int n, SeedStream& stream);

/// Decomposes the draw's smooth on the (x_axis x z_axis) grid.
AnovaComponents decompose_cs2_draw(const ParameterDraw& params, const SmoothReparam& reparam,
                                   std::span<const double> x_axis, std::span<const double> z_axis,
                                   WeightScheme scheme, Eigen::MatrixXd* surface = nullptr);

/// Long format: component,x,z,value (empty coordinate when not applicable).
void write_anova_csv(const AnovaComponents& c, std::span<const double> x_axis, std::span<const double> z_axis,
                     std::ostream& out);

}  // namespace qoicheck
