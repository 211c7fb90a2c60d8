// SPDX-License-Identifier: Apache-2.0
//
// Low-rank bivariate thin-plate radial basis with its mixed-model
// reparameterization: the penalized block is rotated by the penalty
// eigenvectors U and scaled by 1/D so that its coefficients are i.i.d.
// Normal(0, sigma_s^2). Everything needed to evaluate the basis on new data
// (knots, constraint null space, U, D, centering means) is stored so that
// predictions never depend on the prediction data's own balance.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "qoicheck/dataset.hpp"
#include "qoicheck/model.hpp"

namespace qoicheck {

/// r^2 log r with the continuous extension 0 at r = 0.
double tps_radial(double r) noexcept;

struct SmoothReparam {
  std::vector<std::array<double, 2>> knots;  // k knots in (x, z)
  Eigen::MatrixXd constraint_null;           // k x kappa, spans {delta : T'delta = 0}
  Eigen::MatrixXd penalty;                   // kappa x kappa, PSD
  Eigen::MatrixXd u;                         // kappa x kappa orthogonal eigenvectors (descending)
  Eigen::VectorXd d;                         // kappa sqrt-eigenvalues (descending)
  int null_dim = 2;                          // unpenalized columns: x, z
  int penalized = 0;                         // L
  Eigen::VectorXd centering_means;           // null_dim + L column means on the estimation data

  int kappa() const noexcept { return static_cast<int>(penalty.rows()); }
};

struct SmoothDesign {
  Eigen::MatrixXd x1;  // N x null_dim
  Eigen::MatrixXd x2;  // N x L
  bool extrapolated = false;
  std::vector<std::string> warnings;
};

inline constexpr double kZeroEigenTolerance = 1e-9;

SmoothReparam build_smooth(const Dataset& data, int k);

/// Design on arbitrary rows using the stored knots, U, D and centering.
SmoothDesign design_matrix(const SmoothReparam& reparam, const Dataset& data);
SmoothDesign design_matrix(const SmoothReparam& reparam, std::span<const double> x, std::span<const double> z);

/// Raw radial block R*Z (uncentered, untransformed) on the given points.
Eigen::MatrixXd raw_penalized_basis(const SmoothReparam& reparam, std::span<const double> x, std::span<const double> z);

/// Smooth coefficients in design-column order: (beta_s1, beta_s2, b[1..L]).
Eigen::VectorXd smooth_coefficients(const SmoothReparam& reparam, const ParameterDraw& params);

/// f(x,z) = X1 (beta_s1, beta_s2) + X2 b, intercept excluded.
std::vector<double> evaluate_smooth(const SmoothReparam& reparam, const ParameterDraw& params, const Dataset& data);

/// Audit dump: knots, U, D, centering means.
std::string smooth_to_json(const SmoothReparam& reparam);

}  // namespace qoicheck
