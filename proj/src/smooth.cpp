// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "qoicheck/error.hpp"

namespace qoicheck {

namespace {

double radical_inverse(int index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * (index % base);
    index /= base;
    f /= base;
  }
  return result;
}

double empirical_quantile(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Eigen::MatrixXd uncentered_design(const SmoothReparam& s, std::span<const double> x, std::span<const double> z) {
  const Eigen::MatrixXd rotated = raw_penalized_basis(s, x, z) * s.u;
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd out(n, s.null_dim + s.penalized);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, 0) = x[static_cast<std::size_t>(i)];
    out(i, 1) = z[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j < s.penalized; ++j) out.col(s.null_dim + j) = rotated.col(j) / s.d(j);
  return out;
}

}  // namespace

double tps_radial(double r) noexcept { return r > 0.0 ? r * r * std::log(r) : 0.0; }

SmoothReparam build_smooth(const Dataset& data, int k) {
  if (k - 3 < 1) fail(ErrorCode::kPrecondition, "smooth basis size k must be >= 4");
  if (data.size() < 2 || !data.has_z()) fail(ErrorCode::kPrecondition, "smooth construction needs rows with x and z");
  std::vector<double> xs = data.xs();
  std::vector<double> zs = data.zs();
  std::sort(xs.begin(), xs.end());
  std::sort(zs.begin(), zs.end());

  SmoothReparam s;
  for (int j = 1; j <= k; ++j) {
    s.knots.push_back({empirical_quantile(xs, radical_inverse(j, 2)), empirical_quantile(zs, radical_inverse(j, 3))});
  }
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      if (std::hypot(s.knots[a][0] - s.knots[b][0], s.knots[a][1] - s.knots[b][1]) < 1e-12) {
        fail(ErrorCode::kNumericalConditioning, "duplicate smooth knots; estimation data has too few distinct values");
      }
    }
  }

  Eigen::MatrixXd t(k, 3);
  Eigen::MatrixXd e(k, k);
  for (int a = 0; a < k; ++a) {
    t.row(a) << 1.0, s.knots[a][0], s.knots[a][1];
    for (int b = 0; b < k; ++b) {
      e(a, b) = tps_radial(std::hypot(s.knots[a][0] - s.knots[b][0], s.knots[a][1] - s.knots[b][1]));
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(t);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(r(i, i)) < 1e-10) fail(ErrorCode::kNumericalConditioning, "smooth knots are collinear");
  }
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
  s.constraint_null = q.rightCols(k - 3);

  Eigen::MatrixXd pen = s.constraint_null.transpose() * e * s.constraint_null;
  s.penalty = 0.5 * (pen + pen.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.penalty);
  if (eig.info() != Eigen::Success) fail(ErrorCode::kNumericalConditioning, "penalty eigendecomposition failed");
  const int kappa = k - 3;
  s.u.resize(kappa, kappa);
  s.d.resize(kappa);
  for (int j = 0; j < kappa; ++j) {
    s.u.col(j) = eig.eigenvectors().col(kappa - 1 - j);
    s.d(j) = std::sqrt(std::max(eig.eigenvalues()(kappa - 1 - j), 0.0));
  }
  const double top = eig.eigenvalues()(kappa - 1);
  if (!(top > 0.0)) fail(ErrorCode::kNumericalConditioning, "penalty matrix has no positive eigenvalue");
  s.penalized = 0;
  for (int j = 0; j < kappa; ++j) {
    if (eig.eigenvalues()(kappa - 1 - j) > kZeroEigenTolerance * top) ++s.penalized;
  }

  const auto xv = data.xs();
  const auto zv = data.zs();
  s.centering_means = uncentered_design(s, xv, zv).colwise().mean().transpose();
  return s;
}

Eigen::MatrixXd raw_penalized_basis(const SmoothReparam& s, std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size()) fail(ErrorCode::kPrecondition, "x and z must have equal length");
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto k = static_cast<Eigen::Index>(s.knots.size());
  Eigen::MatrixXd radial(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& kn = s.knots[static_cast<std::size_t>(j)];
      radial(i, j) = tps_radial(std::hypot(x[static_cast<std::size_t>(i)] - kn[0], z[static_cast<std::size_t>(i)] - kn[1]));
    }
  }
  return radial * s.constraint_null;
}

SmoothDesign design_matrix(const SmoothReparam& s, std::span<const double> x, std::span<const double> z) {
  Eigen::MatrixXd full = uncentered_design(s, x, z);
  full.rowwise() -= s.centering_means.transpose();
  SmoothDesign out;
  out.x1 = full.leftCols(s.null_dim);
  out.x2 = full.rightCols(s.penalized);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0 || x[i] > 1.0 || z[i] < 0.0 || z[i] > 1.0) {
      out.extrapolated = true;
      out.warnings.push_back("row " + std::to_string(i) + " lies outside the unit square; smooth is extrapolated");
    }
  }
  return out;
}

SmoothDesign design_matrix(const SmoothReparam& s, const Dataset& data) {
  const auto x = data.xs();
  const auto z = data.zs();
  return design_matrix(s, x, z);
}

Eigen::VectorXd smooth_coefficients(const SmoothReparam& s, const ParameterDraw& params) {
  int present = 0;
  for (const auto& [name, v] : params.values) {
    if (name.rfind("b[", 0) == 0) ++present;
  }
  if (present != s.penalized) {
    fail(ErrorCode::kPrecondition, "draw has " + std::to_string(present) + " penalized coefficients, basis has " +
                                       std::to_string(s.penalized));
  }
  Eigen::VectorXd c(s.null_dim + s.penalized);
  c(0) = params.at("beta_s1");
  c(1) = params.at("beta_s2");
  for (int l = 0; l < s.penalized; ++l) c(s.null_dim + l) = params.at(smooth_key(l + 1));
  return c;
}

std::vector<double> evaluate_smooth(const SmoothReparam& s, const ParameterDraw& params, const Dataset& data) {
  const Eigen::VectorXd c = smooth_coefficients(s, params);
  const SmoothDesign dm = design_matrix(s, data);
  const Eigen::VectorXd f = dm.x1 * c.head(s.null_dim) + dm.x2 * c.tail(s.penalized);
  return {f.data(), f.data() + f.size()};
}

std::string smooth_to_json(const SmoothReparam& s) {
  nlohmann::json j;
  j["knots"] = s.knots;
  std::vector<std::vector<double>> u(static_cast<std::size_t>(s.u.rows()));
  for (Eigen::Index i = 0; i < s.u.rows(); ++i) {
    for (Eigen::Index c = 0; c < s.u.cols(); ++c) u[static_cast<std::size_t>(i)].push_back(s.u(i, c));
  }
  j["U"] = u;
  j["D"] = std::vector<double>(s.d.data(), s.d.data() + s.d.size());
  j["centering_means"] = std::vector<double>(s.centering_means.data(), s.centering_means.data() + s.centering_means.size());
  j["null_dim"] = s.null_dim;
  j["L"] = s.penalized;
  return j.dump(2);
}

}  // namespace qoicheck
