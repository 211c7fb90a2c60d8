// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/qoi.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "qoicheck/error.hpp"
#include "qoicheck/grid.hpp"
#include "qoicheck/smooth.hpp"

namespace qoicheck {

std::string QoiLabel::str() const {
  switch (version) {
    case QoiVersion::kACond: return "a";
    case QoiVersion::kBMarg: return "b";
    case QoiVersion::kCMean: break;
  }
  std::string s = "c";
  s += structure == DatasetTag::kReplicateA ? 'A' : 'B';
  s += sampling == NewLevelSampling::kGaussian ? 'G' : 'u';
  return s;
}

QoiLabel QoiLabel::parse(const std::string& text) {
  if (text == "a") return a();
  if (text == "b") return b();
  if (text.size() == 3 && text[0] == 'c') {
    DatasetTag st;
    NewLevelSampling sm;
    if (text[1] == 'A') st = DatasetTag::kReplicateA;
    else if (text[1] == 'B') st = DatasetTag::kRefGridB;
    else fail(ErrorCode::kConfig, "unknown QOI label '" + text + "'");
    if (text[2] == 'G') sm = NewLevelSampling::kGaussian;
    else if (text[2] == 'u') sm = NewLevelSampling::kUncertainty;
    else fail(ErrorCode::kConfig, "unknown QOI label '" + text + "'");
    return c(st, sm);
  }
  fail(ErrorCode::kConfig, "unknown QOI label '" + text + "'");
}

void QoiLabel::validate() const {
  const bool is_c = version == QoiVersion::kCMean;
  if (is_c != structure.has_value() || is_c != sampling.has_value()) {
    fail(ErrorCode::kPrecondition, "structure and new-level sampling must be set exactly for version (c)");
  }
  if (structure && *structure != DatasetTag::kReplicateA && *structure != DatasetTag::kRefGridB) {
    fail(ErrorCode::kPrecondition, "version (c) structure must be the replicate structure or the reference grid");
  }
}

std::vector<QoiLabel> cs1_labels() {
  return {QoiLabel::a(),
          QoiLabel::b(),
          QoiLabel::c(DatasetTag::kReplicateA, NewLevelSampling::kGaussian),
          QoiLabel::c(DatasetTag::kReplicateA, NewLevelSampling::kUncertainty),
          QoiLabel::c(DatasetTag::kRefGridB, NewLevelSampling::kGaussian),
          QoiLabel::c(DatasetTag::kRefGridB, NewLevelSampling::kUncertainty)};
}

double qoi_version_a(const ParameterDraw& params, double x) {
  return std::exp(params.at("beta0") + params.at("beta1") * x);
}

double qoi_version_b(const ParameterDraw& params, double x) {
  const double sg = params.at("sigma_gamma");
  return std::exp(params.at("beta0") + params.at("beta1") * x + 0.5 * sg * sg);
}

std::vector<double> predict(const ModelSpec& spec, const ParameterDraw& params, const Dataset& data, SeedStream& stream,
                            const SmoothReparam* smooth) {
  return simulate_response(spec, params, data, stream, smooth).ys();
}

double qoi_version_c(const ModelSpec& spec, const ParameterDraw& params, const Dataset& grid,
                     NewLevelSampling sampling, const std::vector<int>& existing_levels, SeedStream& stream) {
  if (grid.tag != DatasetTag::kReplicateA && grid.tag != DatasetTag::kRefGridB) {
    fail(ErrorCode::kPrecondition, "version (c) needs a replicate structure or reference grid");
  }
  if (grid.size() == 0) fail(ErrorCode::kPrecondition, "version (c) needs a non-empty grid");
  const ParameterDraw extended = sampling == NewLevelSampling::kGaussian
                                     ? extend_parameters_gaussian(params, grid.level_registry, stream)
                                     : extend_parameters_uncertainty(params, existing_levels, grid.level_registry, stream);
  const auto y = predict(spec, extended, grid, stream);
  double sum = 0.0;
  for (double v : y) sum += v;
  return sum / static_cast<double>(y.size());
}

const char* to_string(WeightScheme scheme) noexcept {
  return scheme == WeightScheme::kWeightedA ? "WEIGHTED_A" : "UNWEIGHTED_B";
}

WeightScheme weight_scheme_from_string(const std::string& name) {
  if (name == "WEIGHTED_A") return WeightScheme::kWeightedA;
  if (name == "UNWEIGHTED_B") return WeightScheme::kUnweightedB;
  fail(ErrorCode::kConfig, "unknown weight scheme '" + name + "'");
}

double AnovaComponents::identity_error(const Eigen::MatrixXd& f) const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      worst = std::max(worst, std::abs(f_empty + f_x(i) + f_z(j) + f_xz(i, j) - f(i, j)));
    }
  }
  return worst;
}

double AnovaComponents::centering_error() const {
  return std::max(std::abs(x_weights.dot(f_x)), std::abs(z_weights.dot(f_z)));
}

namespace {

Eigen::VectorXd normalized_weights(std::span<const double> w, Eigen::Index expected, WeightScheme scheme,
                                   const char* axis) {
  if (static_cast<Eigen::Index>(w.size()) != expected) {
    fail(ErrorCode::kPrecondition, std::string(axis) + " weights do not match the surface's axis length");
  }
  if (scheme == WeightScheme::kUnweightedB) return Eigen::VectorXd::Constant(expected, 1.0 / static_cast<double>(expected));
  Eigen::VectorXd out(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const double v = w[static_cast<std::size_t>(i)];
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::kPrecondition, std::string(axis) + " weights must be finite and nonnegative");
    out(i) = v;
  }
  const double total = out.sum();
  if (!(total > 0.0)) fail(ErrorCode::kPrecondition, std::string(axis) + " weights sum to zero");
  return out / total;
}

}  // namespace

AnovaComponents anova_decompose(const Eigen::MatrixXd& f, std::span<const double> x_weights,
                                std::span<const double> z_weights, WeightScheme scheme) {
  if (f.rows() < 1 || f.cols() < 1) fail(ErrorCode::kPrecondition, "ANOVA needs a non-empty surface");
  AnovaComponents c;
  c.scheme = scheme;
  c.x_weights = normalized_weights(x_weights, f.rows(), scheme, "x");
  c.z_weights = normalized_weights(z_weights, f.cols(), scheme, "z");
  const Eigen::VectorXd row_avg = f * c.z_weights;                // over z, per x
  const Eigen::VectorXd col_avg = f.transpose() * c.x_weights;    // over x, per z
  c.f_empty = c.x_weights.dot(row_avg);
  c.f_x = row_avg.array() - c.f_empty;
  c.f_z = col_avg.array() - c.f_empty;
  c.f_xz = f;
  c.f_xz.colwise() -= c.f_x;
  c.f_xz.rowwise() -= c.f_z.transpose();
  c.f_xz.array() -= c.f_empty;
  return c;
}

std::vector<double> beta_cell_weights(double mu, double phi, std::span<const double> grid) {
  if (!(mu > 0.0 && mu < 1.0 && phi > 0.0)) fail(ErrorCode::kParameterDomain, "Beta weights need 0 < mu < 1 and phi > 0");
  const std::size_t m = grid.size();
  if (m == 0) fail(ErrorCode::kPrecondition, "Beta weights need a non-empty grid");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 1.0)) fail(ErrorCode::kPrecondition, "grid points must lie inside (0,1)");
    if (i > 0 && !(grid[i] > grid[i - 1])) fail(ErrorCode::kPrecondition, "grid points must be increasing");
  }
  const double a = mu * phi;
  const double b = (1.0 - mu) * phi;
  std::vector<double> out(m);
  double lower = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double edge = i + 1 < m ? 0.5 * (grid[i] + grid[i + 1]) : 1.0;
    const double upper = edge < 1.0 ? boost::math::ibeta(a, b, edge) : 1.0;
    out[i] = upper - lower;
    lower = upper;
  }
  return out;
}

double qoi_cs2_conditional_expectation(const ParameterDraw& params, const SmoothReparam& reparam, double x_fixed,
                                       std::span<const double> z_grid, WeightScheme scheme) {
  std::vector<double> xs(z_grid.size(), x_fixed);
  const auto f = [&] {
    const Eigen::VectorXd c = smooth_coefficients(reparam, params);
    const SmoothDesign dm = design_matrix(reparam, xs, z_grid);
    return Eigen::VectorXd(dm.x1 * c.head(reparam.null_dim) + dm.x2 * c.tail(reparam.penalized));
  }();
  std::vector<double> w;
  if (scheme == WeightScheme::kWeightedA) {
    w = beta_cell_weights(logistic(params.at("beta0_z")), params.at("phi_z"), z_grid);
  } else {
    w.assign(z_grid.size(), 1.0);
  }
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    total += w[j];
    acc += w[j] * f(static_cast<Eigen::Index>(j));
  }
  return params.at("beta0_y") + acc / total;
}

double qoi_cs2_predicted_mean(const ModelSpec& spec, const ParameterDraw& params, const SmoothReparam& reparam,
                              double x_fixed, int n, SeedStream& stream) {
  if (n < 1) fail(ErrorCode::kPrecondition, "predicted mean needs n >= 1");
  ModelSpec sized = spec;
  sized.n = n;
  Dataset rows = simulate_covariates_cs2(sized, params, stream);
  for (auto& r : rows.rows) r.x = x_fixed;
  const auto y = predict(spec, params, rows, stream, &reparam);
  double sum = 0.0;
  for (double v : y) sum += v;
  return sum / static_cast<double>(y.size());
}

AnovaComponents decompose_cs2_draw(const ParameterDraw& params, const SmoothReparam& reparam,
                                   std::span<const double> x_axis, std::span<const double> z_axis,
                                   WeightScheme scheme, Eigen::MatrixXd* surface) {
  const auto nx = static_cast<Eigen::Index>(x_axis.size());
  const auto nz = static_cast<Eigen::Index>(z_axis.size());
  std::vector<double> xs;
  std::vector<double> zs;
  xs.reserve(x_axis.size() * z_axis.size());
  zs.reserve(x_axis.size() * z_axis.size());
  for (double x : x_axis) {
    for (double z : z_axis) {
      xs.push_back(x);
      zs.push_back(z);
    }
  }
  const Eigen::VectorXd c = smooth_coefficients(reparam, params);
  const SmoothDesign dm = design_matrix(reparam, xs, zs);
  const Eigen::VectorXd flat = dm.x1 * c.head(reparam.null_dim) + dm.x2 * c.tail(reparam.penalized);
  Eigen::MatrixXd f(nx, nz);
  for (Eigen::Index i = 0; i < nx; ++i) {
    for (Eigen::Index j = 0; j < nz; ++j) f(i, j) = flat(i * nz + j);
  }
  std::vector<double> wx(x_axis.size(), 1.0);
  std::vector<double> wz(z_axis.size(), 1.0);
  if (scheme == WeightScheme::kWeightedA) {
    wx = beta_cell_weights(logistic(params.at("beta0_x")), params.at("phi_x"), x_axis);
    wz = beta_cell_weights(logistic(params.at("beta0_z")), params.at("phi_z"), z_axis);
  }
  AnovaComponents out = anova_decompose(f, wx, wz, scheme);
  if (surface != nullptr) *surface = std::move(f);
  return out;
}

void write_anova_csv(const AnovaComponents& c, std::span<const double> x_axis, std::span<const double> z_axis,
                     std::ostream& out) {
  if (static_cast<Eigen::Index>(x_axis.size()) != c.f_x.size() || static_cast<Eigen::Index>(z_axis.size()) != c.f_z.size()) {
    fail(ErrorCode::kPrecondition, "axis lengths do not match the decomposition");
  }
  char buf[128];
  out << "component,x,z,value\n";
  std::snprintf(buf, sizeof buf, "f_empty,,,%.17g\n", c.f_empty);
  out << buf;
  for (std::size_t i = 0; i < x_axis.size(); ++i) {
    std::snprintf(buf, sizeof buf, "f_x,%.17g,,%.17g\n", x_axis[i], c.f_x(static_cast<Eigen::Index>(i)));
    out << buf;
  }
  for (std::size_t j = 0; j < z_axis.size(); ++j) {
    std::snprintf(buf, sizeof buf, "f_z,,%.17g,%.17g\n", z_axis[j], c.f_z(static_cast<Eigen::Index>(j)));
    out << buf;
  }
  for (std::size_t i = 0; i < x_axis.size(); ++i) {
    for (std::size_t j = 0; j < z_axis.size(); ++j) {
      std::snprintf(buf, sizeof buf, "f_xz,%.17g,%.17g,%.17g\n", x_axis[i], z_axis[j],
                    c.f_xz(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out << buf;
    }
  }
}

}  // namespace qoicheck
