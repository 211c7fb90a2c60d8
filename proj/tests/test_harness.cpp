// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "qoicheck/error.hpp"
#include "qoicheck/harness.hpp"
#include "support.hpp"

using namespace qoicheck;
namespace fs = std::filesystem;

namespace {

StudyConfig tiny_cs1(int r) {
  StudyConfig c = parse_study_config(R"({
    "case": "CS1", "N": 60, "G": 4, "n_new_levels": 10, "master_seed": 31,
    "mcmc": {"chains": 2, "warmup": 400, "post_warmup": 800, "max_attempts": 1, "ess_floor_fraction": 0.0}
  })");
  c.replications = r;
  return c;
}

UniformityReport fixture_report(bool pass) {
  UniformityReport r;
  r.prior_label = "a";
  r.posterior_label = "cAG";
  r.r = 20;
  r.s = 99;
  r.alpha = 0.05;
  r.gamma = 0.0123;
  r.eval_points = {0.25, 0.5, 0.75};
  r.ecdf = {0.2, 0.55, 0.8};
  r.band_lo = {0.05, 0.3, 0.55};
  r.band_hi = {0.45, 0.7, 0.95};
  r.pass = pass;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qoicheck_harness_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  const StudyConfig c = parse_study_config(R"({"case": "CS2", "R": 3, "N": 100, "workers": 2})");
  CHECK(c.study_case == StudyCase::kCs2);
  CHECK(c.replications == 3);
  CHECK(c.prediction_n == 100);
  CHECK(c.k == 10);
  CHECK(c.x_fixed_values.size() == 5);
  CHECK(c.weight_schemes.size() == 2);

  const StudyConfig cs1 = parse_study_config(R"({"case": "CS1"})");
  CHECK(cs1.prior_labels.size() == 6);
  CHECK(cs1.posterior_labels.size() == 6);
  CHECK(cs1.replications == 100);

  const StudyConfig pri = parse_study_config(R"({"case": "CS1", "priors": {"sigma": {"kind": "normal_pos", "a": 0, "b": 2}}})");
  CHECK(pri.model_spec().priors.at("sigma").b == 2.0);

  for (const char* bad : {R"({"case": "CS1", "replications": 5})", R"({"case": "CS9"})", "{not json",
                          R"({"case": "CS1", "R": 0})", R"({"case": "CS1", "mcmc": {"chains": 4, "thin": 2}})",
                          R"({"case": "CS1", "posterior_labels": ["cXG"]})",
                          R"({"case": "CS1", "priors": {"sigma": {"kind": "normal_pos", "a": 0, "b": -1}}})"}) {
    try {
      const StudyConfig cfg = parse_study_config(bad);
      cfg.validate();
      cfg.model_spec();
      FAIL("accepted " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
  }

  try {
    load_study_config("/nonexistent/config.json");
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}

TEST_CASE("worker override from the environment") {
  StudyConfig c = tiny_cs1(1);
  c.workers = 3;
  ::unsetenv("QOI_CHECK_WORKERS");
  CHECK(effective_workers(c) == 3);
  ::setenv("QOI_CHECK_WORKERS", "5", 1);
  CHECK(effective_workers(c) == 5);
  ::setenv("QOI_CHECK_WORKERS", "five", 1);
  CHECK_THROWS_AS(effective_workers(c), Error);
  ::unsetenv("QOI_CHECK_WORKERS");
}

TEST_CASE("single replication writes ranks and skips the band") {
  StudyConfig c = tiny_cs1(1);
  c.prior_labels = {"a"};
  c.posterior_labels = {"a", "b"};
  c.output_dir = scratch("r1").string();
  const StudyResult res = execute_study(c);
  CHECK(res.records.size() == 2);
  CHECK(res.reports.empty());
  CHECK(!res.band_skipped_reason.empty());
  CHECK(res.exit_code == kExitOk);

  write_artifacts(c, res);
  const std::string ranks = testsupport::slurp((fs::path(c.output_dir) / "ranks.csv").string());
  CHECK(ranks.rfind("replication,prior_label,posterior_label,k,S\n", 0) == 0);
  const auto summary = nlohmann::json::parse(testsupport::slurp((fs::path(c.output_dir) / "summary.json").string()));
  CHECK(summary.contains("band_skipped"));
  CHECK(summary["completed_replications"] == 1);
  fs::remove_all(c.output_dir);
}

TEST_CASE("CS1 study covers every label pair and is independent of the worker count") {
  StudyConfig c = tiny_cs1(20);
  c.workers = 1;
  const StudyResult one = execute_study(c);
  CHECK(one.records.size() == 20 * 36);
  CHECK(one.reports.size() == 36);
  CHECK(one.jensen_violations == 0);
  CHECK(one.jensen_checked > 0);

  c.workers = 4;
  const StudyResult four = execute_study(c);
  std::ostringstream a, b;
  write_ranks_csv(one.records, a);
  write_ranks_csv(four.records, b);
  CHECK(a.str() == b.str());
  CHECK(reports_to_json(one.reports) == reports_to_json(four.reports));

  c.output_dir = scratch("cs1").string();
  write_artifacts(c, one);
  int plots = 0;
  for (const auto& e : fs::directory_iterator(fs::path(c.output_dir) / "plots")) plots += e.path().extension() == ".svg";
  CHECK(plots == 36);
  CHECK(reports_from_json(testsupport::slurp((fs::path(c.output_dir) / "report.json").string())).size() == 36);
  fs::remove_all(c.output_dir);
}

TEST_CASE("self-SBC on the toy case") {
  StudyConfig c = parse_study_config(R"({"case": "TOY", "R": 200, "master_seed": 8})");
  const StudyResult res = execute_self_sbc(c);
  REQUIRE(res.reports.size() == 1);
  CHECK(res.reports[0].prior_label == "theta");
}

TEST_CASE("sampler-quality failure maps to its exit status") {
  StudyConfig c = tiny_cs1(3);
  c.prior_labels = {"a"};
  c.posterior_labels = {"a"};
  c.mcmc.ess_floor_fraction = 50.0;
  const StudyResult res = execute_study(c);
  REQUIRE(res.batch.failure.has_value());
  CHECK(res.batch.failure->replication == 1);
  CHECK(res.exit_code == kExitSamplerQuality);
}

TEST_CASE("ECDF plot") {
  const std::string svg = render_ecdf_svg(fixture_report(true));
  const std::string golden = testsupport::slurp(QOICHECK_GOLDEN_DIR "/ecdf_fixture.svg");
  if (svg != golden) {
    std::ofstream(fs::temp_directory_path() / "ecdf_fixture.actual.svg", std::ios::binary) << svg;
  }
  CHECK(svg == golden);

  const std::string failing = render_ecdf_svg(fixture_report(false));
  CHECK(failing.find(">FAIL<") != std::string::npos);
  CHECK(failing.find(">PASS<") == std::string::npos);

  std::vector<int> zeros(50, 0);
  const auto bad = ecdf_uniformity_band(zeros, 99, BandOptions{}, SeedStream(1, 1));
  CHECK(render_ecdf_svg(bad).find(">FAIL<") != std::string::npos);

  UniformityReport empty;
  CHECK_THROWS_AS(render_ecdf_svg(empty), Error);
}

TEST_CASE("plot file names") {
  UniformityReport r;
  r.prior_label = "pred@0.25";
  r.posterior_label = "WEIGHTED_A@0.25";
  CHECK(plot_file_stem(r) == "pred@0.25__WEIGHTED_A@0.25");
  r.prior_label = "gamma[3]";
  r.posterior_label = "gamma[3]";
  CHECK(plot_file_stem(r) == "gamma_3___gamma_3_");
}
