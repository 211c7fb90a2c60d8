// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "qoicheck/calibration.hpp"
#include "qoicheck/error.hpp"
#include "support.hpp"

using namespace qoicheck;

namespace {

std::vector<int> uniform_ranks(int r, int s, std::uint64_t seed) {
  SeedStream st(seed, 0);
  std::vector<int> out(static_cast<std::size_t>(r));
  for (auto& k : out) k = static_cast<int>(st.uniform_index(static_cast<std::uint64_t>(s + 1)));
  return out;
}

const SeedStream kBandStream(2024, 77);

StudyConfig small_cs1() {
  StudyConfig c;
  c.study_case = StudyCase::kCs1;
  c.replications = 2;
  c.n = 60;
  c.g = 4;
  c.n_new_levels = 10;
  c.mcmc.chains = 2;
  c.mcmc.warmup = 500;
  c.mcmc.post_warmup = 1000;
  c.mcmc.max_attempts = 1;
  c.mcmc.ess_floor_fraction = 0.0;
  c.prior_labels = {"a", "b"};
  c.posterior_labels = {"a", "b"};
  c.master_seed = 5;
  return c;
}

}  // namespace

TEST_CASE("rank statistic") {
  const std::vector<double> post = {0.1, 0.2, 0.4};
  CHECK(rank_statistic(0.32, post) == 1);
  CHECK(display_position(1, 3) == 3);
  CHECK(rank_statistic(-5.0, post) == 3);
  CHECK(rank_statistic(5.0, post) == 0);

  int ties = 0;
  CHECK(rank_statistic(0.2, post, &ties) == 1);
  CHECK(ties == 1);

  const std::vector<double> bad = {0.1, NAN};
  CHECK_THROWS_AS(rank_statistic(0.0, bad), Error);
  CHECK_THROWS_AS(rank_statistic(INFINITY, post), Error);
}

TEST_CASE("rank statistic is invariant to shifts and positive scaling") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> post(99);
    for (auto& v : post) v = n01(gen);
    const double prior = n01(gen);
    const int k = rank_statistic(prior, post);
    std::vector<double> moved = post;
    for (auto& v : moved) v = 3.5 * v + 7.0;
    CHECK(rank_statistic(3.5 * prior + 7.0, moved) == k);
  }
}

TEST_CASE("ranks of exchangeable values are uniform") {
  std::mt19937_64 gen(4);
  std::exponential_distribution<double> e(1.0);
  std::vector<int> ranks;
  std::vector<double> post(99);
  for (int t = 0; t < 100000; ++t) {
    for (auto& v : post) v = e(gen);
    ranks.push_back(rank_statistic(e(gen), post));
  }
  const auto chi = chi_square_uniformity(ranks, 99, 20);
  CHECK(chi.df == 19);
  CHECK(chi.p > 0.001);
}

TEST_CASE("chi-square on exact counts") {
  std::vector<int> flat;
  for (int rep = 0; rep < 3; ++rep) {
    for (int k = 0; k <= 99; ++k) flat.push_back(k);
  }
  const auto chi = chi_square_uniformity(flat, 99, 20);
  CHECK(chi.stat == doctest::Approx(0.0));
  CHECK(chi.p == doctest::Approx(1.0));

  const std::vector<int> zeros(300, 0);
  CHECK(chi_square_uniformity(zeros, 99, 20).p < 1e-10);
  // fewer values than bins
  CHECK(chi_square_uniformity(std::vector<int>{0, 1, 2, 3}, 3, 20).df == 3);
}

TEST_CASE("simultaneous band") {
  const BandOptions opt;
  const auto good = ecdf_uniformity_band(uniform_ranks(100, 99, 1), 99, opt, kBandStream);
  CHECK(good.eval_points.size() == 100);
  CHECK(good.gamma < opt.alpha);
  CHECK(good.gamma > 0.0);
  bool ordered = true, inside = true;
  for (std::size_t i = 0; i < good.ecdf.size(); ++i) {
    ordered &= good.band_lo[i] <= good.band_hi[i];
    inside &= good.band_lo[i] <= good.ecdf[i] && good.ecdf[i] <= good.band_hi[i];
  }
  CHECK(ordered);
  CHECK(good.pass == inside);

  const std::vector<int> zeros(100, 0);
  const auto bad = ecdf_uniformity_band(zeros, 99, opt, kBandStream);
  CHECK(!bad.pass);

  // Same ranks and stream: identical report.
  const auto again = ecdf_uniformity_band(uniform_ranks(100, 99, 1), 99, opt, kBandStream);
  CHECK(report_to_json(again) == report_to_json(good));

  // K = min(R, max_points)
  CHECK(ecdf_uniformity_band(uniform_ranks(40, 99, 2), 99, opt, kBandStream).eval_points.size() == 40);

  try {
    ecdf_uniformity_band(uniform_ranks(19, 99, 3), 99, opt, kBandStream);
    FAIL("expected insufficient replications");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientReplications);
  }
}

TEST_CASE("band from records needs a single comparison") {
  std::vector<RankRecord> recs;
  for (int r = 1; r <= 30; ++r) recs.push_back({r, "theta", "theta", r % 10, 9});
  CHECK_NOTHROW(ecdf_uniformity_band(recs, BandOptions{}, kBandStream));
  recs.push_back({31, "theta", "other", 0, 9});
  CHECK_THROWS_AS(ecdf_uniformity_band(recs, BandOptions{}, kBandStream), Error);
}

TEST_CASE("posterior predictive p-value") {
  PosteriorMatrix post;
  post.schema = {"theta"};
  post.draws = Eigen::MatrixXd::Zero(4, 1);
  const std::vector<double> y = {1.0, 2.0};
  const std::vector<std::vector<double>> reps(4, std::vector<double>{0.0, 0.0});
  const PpcStatistic constant = [](std::span<const double>, const ParameterDraw&) { return 1.0; };
  CHECK(ppp_value(constant, y, post, reps) == 1.0);
  CHECK_THROWS_AS(ppp_value(constant, y, post, std::vector<std::vector<double>>(3, y)), Error);

  PosteriorMatrix one = post;
  one.draws = Eigen::MatrixXd::Zero(1, 1);
  const PpcStatistic mean_t = [](std::span<const double> v, const ParameterDraw&) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double p1 = ppp_value(mean_t, y, one, {{5.0, 5.0}});
  CHECK((p1 == 0.0 || p1 == 1.0));

  // Data from the model itself: p-values cluster around one half.
  const ModelSpec spec = ModelSpec::toy_normal(20, 0.0, 1.0);
  std::vector<double> ps;
  for (int rep = 0; rep < 300; ++rep) {
    SeedStream s(40, static_cast<std::uint64_t>(rep));
    const ParameterDraw truth = draw_prior(spec, s);
    const Dataset data = simulate_response(spec, truth, simulate_covariates_toy(spec), s);
    const PosteriorMatrix pm = sample_posterior_conjugate(spec, data, 200, s);
    std::vector<std::vector<double>> yrep;
    for (int d = 0; d < pm.size(); ++d) yrep.push_back(simulate_response(spec, pm.draw(d), data, s).ys());
    ps.push_back(ppp_value(mean_t, data.ys(), pm, yrep));
  }
  CHECK(std::abs(testsupport::mean(ps) - 0.5) < 0.05);
  // A uniform p-value would have sd 0.289.
  CHECK(testsupport::sd(ps) < 0.2);
}

TEST_CASE("toy SBC") {
  McmcConfig cfg;
  const auto one = run_sbc(ModelSpec::toy_normal(10), 1, cfg, 9, SamplerChoice::kConjugate);
  CHECK(one.size() == 1);

  const auto recs = run_sbc(ModelSpec::toy_normal(10), 1000, cfg, 9, SamplerChoice::kConjugate);
  std::vector<int> ks;
  for (const auto& r : recs) {
    CHECK(r.k >= 0);
    CHECK(r.k <= r.s);
    ks.push_back(r.k);
  }
  CHECK(chi_square_uniformity(ks, 99).p > 0.001);
  CHECK(ecdf_uniformity_band(recs, BandOptions{}, kBandStream).pass);

  cfg.fault = FaultInjection::kHalvedPosteriorSd;
  const auto broken = run_sbc(ModelSpec::toy_normal(10), 1000, cfg, 9, SamplerChoice::kConjugate);
  CHECK(!ecdf_uniformity_band(broken, BandOptions{}, kBandStream).pass);
}

TEST_CASE("both QOI-check variants agree when every label is direct") {
  const StudyConfig study = small_cs1();
  const auto derived = run_qoi_check_prior_derived(study);
  const auto predicted = run_qoi_check_prior_predicted(study);
  REQUIRE(derived.size() == 2 * 4);
  REQUIRE(derived.size() == predicted.size());
  for (std::size_t i = 0; i < derived.size(); ++i) {
    CHECK(derived[i].k == predicted[i].k);
    CHECK(derived[i].prior_label == predicted[i].prior_label);
    CHECK(derived[i].k <= derived[i].s);
  }

  StudyConfig wrong = study;
  wrong.prior_labels = {"cAG"};
  CHECK_THROWS_AS(run_qoi_check_prior_derived(wrong), Error);
  wrong = study;
  wrong.posterior_labels = {"cBu"};
  CHECK_THROWS_AS(run_qoi_check_prior_predicted(wrong), Error);
}

TEST_CASE("ranks CSV and report JSON") {
  std::vector<RankRecord> recs = {{1, "a", "b", 3, 99}, {2, "a", "b", 97, 99}};
  std::ostringstream csv;
  write_ranks_csv(recs, csv);
  CHECK(csv.str() == "replication,prior_label,posterior_label,k,S\n1,a,b,3,99\n2,a,b,97,99\n");

  const auto rep = ecdf_uniformity_band(uniform_ranks(50, 99, 6), 99, BandOptions{}, kBandStream);
  const auto back = report_from_json(report_to_json(rep));
  CHECK(report_to_json(back) == report_to_json(rep));
  const auto many = reports_from_json(reports_to_json({rep, rep}));
  CHECK(many.size() == 2);
  CHECK_THROWS_AS(report_from_json("{\"R\": 3}"), Error);

  const auto groups = group_comparisons({{1, "a", "a", 0, 9}, {1, "a", "b", 0, 9}, {2, "a", "a", 1, 9}});
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].records.size() == 2);
  CHECK(groups[1].posterior_label == "b");
}
