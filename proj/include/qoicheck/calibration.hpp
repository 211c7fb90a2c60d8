// SPDX-License-Identifier: Apache-2.0
//
// Rank statistics, simulation-based calibration, the two QOI-check variants
// and the uniformity tests applied to their ranks.
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qoicheck/error.hpp"
#include "qoicheck/inference.hpp"
#include "qoicheck/model.hpp"
#include "qoicheck/rng.hpp"
#include "qoicheck/study.hpp"

namespace qoicheck {

struct RankRecord {
  long replication = 0;
  std::string prior_label;
  std::string posterior_label;
  int k = 0;
  int s = 0;
};

/// k = #{s : prior_value < posterior_values[s]}. Ties count as not-less;
/// their number is added to `*ties` when given.
int rank_statistic(double prior_value, std::span<const double> posterior_values, int* ties = nullptr);

/// Ascending position of the prior value among the S + 1 values.
inline int display_position(int k, int s) noexcept { return s + 1 - k; }

struct ChiSquareResult {
  double stat = 0.0;
  int df = 0;
  double p = 1.0;
};

/// Pearson chi-square of ranks in {0..S} against the discrete uniform,
/// min(bins, S+1) contiguous bins.
ChiSquareResult chi_square_uniformity(std::span<const int> ranks, int s, int bins = 20);

struct BandOptions {
  double alpha = 0.05;
  int draws = 5000;      // Monte Carlo rank sets for the gamma calibration
  int max_points = 100;  // K = min(R, max_points)
};

struct UniformityReport {
  std::string prior_label;
  std::string posterior_label;
  int r = 0;
  int s = 0;
  double alpha = 0.05;
  double gamma = 0.0;
  std::vector<double> eval_points;
  std::vector<double> ecdf;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
  bool pass = false;
  ChiSquareResult chi2;
  std::string note;
};

/// Largest pointwise level whose Binomial envelopes contain all K ECDF
/// values of uniform ranks with Monte Carlo frequency >= 1 - alpha.
/// Results are cached per (R, S, K, alpha, draws, stream ids).
double calibrate_band_gamma(int r, int s, int k_points, double alpha, int draws, const SeedStream& stream);

UniformityReport ecdf_uniformity_band(std::span<const int> ranks, int s, const BandOptions& opt,
                                      const SeedStream& stream);
/// All records must belong to one comparison and share S.
UniformityReport ecdf_uniformity_band(std::span<const RankRecord> records, const BandOptions& opt,
                                      const SeedStream& stream);

using PpcStatistic = std::function<double(std::span<const double> y, const ParameterDraw& params)>;

/// (1/S) #{s : T(rep_s, theta_s) >= T(y, theta_s)}.
double ppp_value(const PpcStatistic& t, std::span<const double> y, const PosteriorMatrix& posterior,
                 const std::vector<std::vector<double>>& replicates);

// ---------------------------------------------------------------------------
// Replication studies

struct ReplicationOutput {
  long replication = 0;
  std::vector<RankRecord> records;
  std::vector<std::string> schema;
  std::vector<ParameterDiagnostics> diagnostics;
  int ties = 0;
  long jensen_checked = 0;
  long jensen_violations = 0;
  long anova_count = 0;
  double anova_identity_max = 0.0;
  double anova_centering_max = 0.0;
};

struct ReplicationFailure {
  long replication = 0;
  ErrorCode code = ErrorCode::kInternal;
  std::string message;
};

struct ReplicationBatch {
  /// Indexed by r - 1; empty for replications that failed or never ran.
  std::vector<std::optional<ReplicationOutput>> outputs;
  std::optional<ReplicationFailure> failure;

  /// Records of completed replications in (replication, comparison) order.
  std::vector<RankRecord> records() const;
  long completed() const;
};

/// Parameter-wise SBC for the study's model. Never throws for per-replication
/// failures; the first failing index is reported in `failure`.
ReplicationBatch run_sbc_batch(const StudyConfig& study);

/// Throwing convenience wrapper: SamplerQualityError carries the replication.
std::vector<RankRecord> run_sbc(const ModelSpec& spec, int replications, const McmcConfig& cfg,
                                std::uint64_t master_seed, SamplerChoice sampler = SamplerChoice::kAuto,
                                int workers = 1);

/// Full label matrix for CS1, or the (x_fixed x weight scheme) cells for CS2.
ReplicationBatch run_qoi_check_batch(const StudyConfig& study);

/// Prior-side labels must be direct functions of the prior draw ("a", "b").
std::vector<RankRecord> run_qoi_check_prior_derived(const StudyConfig& study);
/// Posterior-side labels must be direct functions of each posterior draw.
std::vector<RankRecord> run_qoi_check_prior_predicted(const StudyConfig& study);

struct Comparison {
  std::string prior_label;
  std::string posterior_label;
  std::vector<RankRecord> records;
};

/// Groups records by (prior, posterior) label in first-seen order.
std::vector<Comparison> group_comparisons(const std::vector<RankRecord>& records);

void write_ranks_csv(const std::vector<RankRecord>& records, std::ostream& out);
std::string report_to_json(const UniformityReport& report);
std::string reports_to_json(const std::vector<UniformityReport>& reports);
UniformityReport report_from_json(const std::string& text);
std::vector<UniformityReport> reports_from_json(const std::string& text);

}  // namespace qoicheck
