// SPDX-License-Identifier: Apache-2.0
//
// qoi-check: command-line front end over the C API.
#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "qoicheck/qoicheck.h"

namespace {

int report_failure(const char* what, int status) {
  std::fprintf(stderr, "%s failed (%s): %s\n", what, qc_status_name(status), qc_last_error());
  return status == QC_ERR_CONFIG ? 2 : 1;
}

int execute(const std::string& config_path, const std::string& output_dir, int workers, bool sbc) {
  qc_study* study = nullptr;
  int status = qc_study_load(config_path.c_str(), &study);
  if (status != QC_OK) return report_failure("loading config", status);
  if (!output_dir.empty()) qc_study_set_output_dir(study, output_dir.c_str());
  if (workers > 0) qc_study_set_workers(study, workers);

  qc_result* result = nullptr;
  status = sbc ? qc_study_run_sbc(study, &result) : qc_study_run(study, &result);
  qc_study_free(study);
  if (status != QC_OK) return report_failure("study", status);

  status = qc_result_write(result);
  if (status != QC_OK) {
    qc_result_free(result);
    return report_failure("writing artifacts", status);
  }
  const size_t cells = qc_result_report_count(result);
  size_t passed = 0;
  for (size_t i = 0; i < cells; ++i) {
    int pass = 0;
    qc_result_cell_pass(result, i, &pass);
    passed += static_cast<size_t>(pass);
  }
  std::printf("replications completed: %ld\nranks: %zu\ncells inside band: %zu/%zu\n", qc_result_completed(result),
              qc_result_record_count(result), passed, cells);
  const int code = qc_result_exit_code(result);
  qc_result_free(result);
  return code;
}

int plot(const std::string& report_path, const std::string& out_path, std::size_t index) {
  qc_report* report = nullptr;
  int status = qc_report_load(report_path.c_str(), index, &report);
  if (status != QC_OK) return report_failure("loading report", status);
  status = qc_report_write_svg(report, out_path.c_str());
  qc_report_free(report);
  if (status != QC_OK) return report_failure("writing plot", status);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-based calibration checks for post-estimation quantities of interest"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qc_version());

  std::string config_path;
  std::string output_dir;
  int workers = 0;
  auto* run = app.add_subcommand("run", "Run the study described by a JSON config");
  run->add_option("config", config_path, "Study config (JSON)")->required();
  run->add_option("-o,--output-dir", output_dir, "Override output_dir");
  run->add_option("-w,--workers", workers, "Override workers (QOI_CHECK_WORKERS takes precedence)");

  auto* sbc = app.add_subcommand("sbc", "Parameter-wise SBC for the configured model");
  sbc->add_option("config", config_path, "Study config (JSON)")->required();
  sbc->add_option("-o,--output-dir", output_dir, "Override output_dir");
  sbc->add_option("-w,--workers", workers, "Override workers (QOI_CHECK_WORKERS takes precedence)");

  std::string report_path;
  std::string svg_path;
  std::size_t index = 0;
  auto* plt = app.add_subcommand("plot", "Render one report cell as an SVG ECDF-difference plot");
  plt->add_option("report", report_path, "report.json")->required();
  plt->add_option("out", svg_path, "Output SVG path")->required();
  plt->add_option("-i,--index", index, "Cell index within report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*run) return execute(config_path, output_dir, workers, false);
  if (*sbc) return execute(config_path, output_dir, workers, true);
  return plot(report_path, svg_path, index);
}
