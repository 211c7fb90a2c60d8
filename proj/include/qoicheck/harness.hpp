// SPDX-License-Identifier: Apache-2.0
//
// Study driver: runs a configured study, aggregates the ranks into uniformity
// reports and writes ranks.csv, report.json, summary.json and one SVG plot
// per comparison cell.
#pragma once

#include <string>
#include <vector>

#include "qoicheck/calibration.hpp"
#include "qoicheck/study.hpp"

namespace qoicheck {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSamplerQuality = 3;
inline constexpr int kExitOther = 1;

struct StudyResult {
  ReplicationBatch batch;
  std::vector<RankRecord> records;
  std::vector<UniformityReport> reports;
  /// Set when R is too small for the band; ranks are still written.
  std::string band_skipped_reason;
  long jensen_checked = 0;
  long jensen_violations = 0;
  long anova_count = 0;
  double anova_identity_max = 0.0;
  double anova_centering_max = 0.0;
  int ties = 0;
  int exit_code = kExitOk;
};

/// Effective worker count: QOI_CHECK_WORKERS when set, else the config's.
int effective_workers(const StudyConfig& config);

/// QOI checks for CS1/CS2; parameter-wise SBC for SBC_ONLY/TOY.
StudyResult execute_study(const StudyConfig& config);
/// Parameter-wise SBC for the configured model whatever the case.
StudyResult execute_self_sbc(const StudyConfig& config);

/// Writes all artifacts under config.output_dir.
void write_artifacts(const StudyConfig& config, const StudyResult& result);

/// Load, execute, write; returns the process exit status.
int run_study(const std::string& config_path);
int run_self_sbc(const std::string& config_path);

/// ECDF-difference plot with the band and a PASS/FAIL annotation.
std::string render_ecdf_svg(const UniformityReport& report);
void emit_ecdf_plot(const UniformityReport& report, const std::string& path);

/// File-system-safe "<prior>__<posterior>".
std::string plot_file_stem(const UniformityReport& report);

}  // namespace qoicheck
