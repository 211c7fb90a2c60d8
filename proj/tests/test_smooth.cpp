// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <vector>

#include "qoicheck/error.hpp"
#include "qoicheck/model.hpp"
#include "qoicheck/smooth.hpp"

using namespace qoicheck;

namespace {

Dataset cs2_data(int n, std::uint64_t seed, double beta0_z = -1.1) {
  ParameterDraw p;
  p.values = {{"beta0_x", 0.0}, {"phi_x", 3.0}, {"beta0_z", beta0_z}, {"phi_z", 3.0}};
  SeedStream s(seed, 0);
  return simulate_covariates_cs2(ModelSpec::cs2(n, 10), p, s);
}

ParameterDraw coefficients(const SmoothReparam& r, double s1, double s2, double b) {
  ParameterDraw p;
  p.values = {{"beta_s1", s1}, {"beta_s2", s2}};
  for (int l = 1; l <= r.penalized; ++l) p.values[smooth_key(l)] = b * l;
  return p;
}

}  // namespace

TEST_CASE("radial function values") {
  CHECK(tps_radial(0.0) == 0.0);
  CHECK(tps_radial(1.0) == 0.0);
  CHECK(tps_radial(std::exp(1.0)) == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
  CHECK(std::abs(tps_radial(1e-8)) < 1e-14);
}

TEST_CASE("reparameterization invariants, k = 10") {
  const Dataset data = cs2_data(2000, 1);
  const SmoothReparam r = build_smooth(data, 10);
  CHECK(r.knots.size() == 10);
  CHECK(r.kappa() == 7);
  CHECK(r.null_dim == 2);
  CHECK(r.penalized == 7);

  const Eigen::MatrixXd utu = r.u.transpose() * r.u;
  CHECK((utu - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.penalty);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  const Eigen::MatrixXd lambda = (r.d.array() * r.d.array()).matrix().asDiagonal();
  CHECK((r.u * lambda * r.u.transpose() - r.penalty).cwiseAbs().maxCoeff() < 1e-8);

  // Original-basis coefficients alpha map to b = D U' alpha.
  Eigen::VectorXd alpha(7);
  alpha << 0.3, -1.2, 0.7, 2.0, -0.4, 0.05, 1.1;
  const Eigen::VectorXd b = r.d.asDiagonal() * (r.u.transpose() * alpha);
  const auto xs = data.xs();
  const auto zs = data.zs();
  Eigen::VectorXd raw = raw_penalized_basis(r, xs, zs) * alpha;
  raw.array() -= raw.mean();
  const SmoothDesign dm = design_matrix(r, data);
  CHECK((dm.x2 * b - raw).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(alpha.dot(r.penalty * alpha) - b.squaredNorm()) < 1e-8);
}

TEST_CASE("four knots give a one-column penalty") {
  const SmoothReparam r = build_smooth(cs2_data(500, 2), 4);
  CHECK(r.kappa() == 1);
  CHECK(std::isfinite(r.d(0)));
  const Eigen::MatrixXd lambda = (r.d.array() * r.d.array()).matrix().asDiagonal();
  CHECK((r.u * lambda * r.u.transpose() - r.penalty).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("build errors") {
  CHECK_THROWS_AS(build_smooth(cs2_data(100, 3), 3), Error);
  Dataset flat;
  for (int i = 0; i < 50; ++i) flat.rows.push_back(Row{0.5, 0.5, std::nullopt, std::nullopt});
  try {
    build_smooth(flat, 10);
    FAIL("expected a conditioning error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumericalConditioning);
  }
}

TEST_CASE("design matrix reuses stored transformation") {
  const Dataset data = cs2_data(2000, 4);
  const SmoothReparam r = build_smooth(data, 10);
  const SmoothDesign a = design_matrix(r, data);
  const SmoothDesign b = design_matrix(r, data);
  CHECK(a.x1 == b.x1);
  CHECK(a.x2 == b.x2);
  CHECK(a.x1.cols() == 2);
  CHECK(a.x2.cols() == 7);
  // centered on the estimation data
  CHECK(a.x1.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.x2.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);

  // A skewed grid keeps the stored centering; recentring on the grid moves
  // the column means away from zero by a visible amount.
  const Dataset skewed = cs2_data(500, 5, -3.0);
  const SmoothDesign g = design_matrix(r, skewed);
  CHECK(g.x1.colwise().mean().cwiseAbs().maxCoeff() > 1e-3);
  CHECK(!g.extrapolated);

  std::vector<double> x = {0.3}, z = {0.6};
  const SmoothDesign one = design_matrix(r, x, z);
  CHECK(one.x1.rows() == 1);
  CHECK(one.x2.rows() == 1);
  CHECK(one.x2.cols() == r.penalized);

  std::vector<double> xo = {1.4}, zo = {0.2};
  const SmoothDesign out = design_matrix(r, xo, zo);
  CHECK(out.extrapolated);
  CHECK(out.warnings.size() == 1);
}

TEST_CASE("evaluate_smooth") {
  const Dataset data = cs2_data(1000, 6);
  const SmoothReparam r = build_smooth(data, 10);
  for (double v : evaluate_smooth(r, coefficients(r, 0.0, 0.0, 0.0), data)) CHECK(v == 0.0);

  const auto lin = evaluate_smooth(r, coefficients(r, 1.0, -1.0, 0.0), data);
  const double mx = r.centering_means(0), mz = r.centering_means(1);
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    worst = std::max(worst, std::abs(lin[i] - ((data.rows[i].x - mx) - (*data.rows[i].z - mz))));
  }
  CHECK(worst < 1e-12);

  const ParameterDraw p = coefficients(r, 0.4, 0.9, 0.2);
  CHECK(evaluate_smooth(r, p, data) == evaluate_smooth(r, p, data));

  ParameterDraw short_p = p;
  short_p.values.erase(smooth_key(r.penalized));
  CHECK_THROWS_AS(evaluate_smooth(r, short_p, data), Error);
}

TEST_CASE("JSON audit dump") {
  const SmoothReparam r = build_smooth(cs2_data(300, 7), 10);
  const auto j = nlohmann::json::parse(smooth_to_json(r));
  CHECK(j["knots"].size() == 10);
  CHECK(j["U"].size() == 7);
  CHECK(j["D"].size() == 7);
  CHECK(j["centering_means"].size() == 9);
  CHECK(j["L"] == 7);
}
