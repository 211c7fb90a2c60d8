// SPDX-License-Identifier: Apache-2.0
//
// Posterior samplers and their diagnostics.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qoicheck/dataset.hpp"
#include "qoicheck/model.hpp"
#include "qoicheck/rng.hpp"

namespace qoicheck {

struct SmoothReparam;

/// Deliberate sampler faults for negative-control tests.
enum class FaultInjection {
  kNone,
  /// After warmup an accepted random-walk move only travels half way to the
  /// proposal while the acceptance test still uses the full proposal, so
  /// detailed balance no longer holds.
  kHalvedStep,
  /// Conjugate path only: posterior sd halved.
  kHalvedPosteriorSd,
};

const char* to_string(FaultInjection f) noexcept;
FaultInjection fault_from_string(const std::string& name);

struct McmcConfig {
  int chains = 4;
  int warmup = 5000;
  int post_warmup = 5000;
  int target_s = 99;
  double rw_target_acceptance = 0.44;
  double ess_floor_fraction = 0.8;
  int max_attempts = 3;
  /// Post-warmup draws kept per chain (evenly spaced) for diagnostics.
  int max_stored_per_chain = 1000;
  FaultInjection fault = FaultInjection::kNone;

  void validate() const;
};

struct ParameterDiagnostics {
  double ess = 0.0;
  double rhat = 1.0;
  double acceptance = 1.0;
  bool degenerate = false;
};

struct PosteriorMatrix {
  Eigen::MatrixXd draws;  // S x p
  std::vector<std::string> schema;
  std::vector<ParameterDiagnostics> diagnostics;
  std::vector<int> chain_of_row;
  std::vector<long> iteration_of_row;
  int thinning = 1;

  int size() const noexcept { return static_cast<int>(draws.rows()); }
  int index_of(const std::string& name) const;
  ParameterDraw draw(int s) const;
  std::vector<double> column(const std::string& name) const;
  void validate() const;
};

/// Writes `chain,iteration,<schema...>`.
void write_draws_csv(const PosteriorMatrix& post, std::ostream& out);

/// Exact posterior for the Normal toy: prior Normal(m0, s0^2), unit noise.
PosteriorMatrix sample_posterior_conjugate(const ModelSpec& spec, const Dataset& data, int s, SeedStream& stream,
                                           FaultInjection fault = FaultInjection::kNone);

struct NaiveRejectionResult {
  std::vector<double> accepted;
  long attempts = 0;
  bool empty() const noexcept { return accepted.empty(); }
};

/// Prior draws whose simulated binary vector matches `y` exactly.
NaiveRejectionResult naive_rejection_posterior(const ModelSpec& spec, std::span<const double> y, long attempts,
                                               SeedStream& stream);

PosteriorMatrix sample_posterior_cs1(const Dataset& data, const ModelSpec& spec, const McmcConfig& cfg,
                                     SeedStream& stream);

PosteriorMatrix sample_posterior_cs2(const Dataset& data, const ModelSpec& spec, const SmoothReparam& basis,
                                     const McmcConfig& cfg, SeedStream& stream);

/// Random-walk path for the Normal toy (cross-check against the conjugate path).
PosteriorMatrix sample_posterior_toy_mcmc(const Dataset& data, const ModelSpec& spec, const McmcConfig& cfg,
                                          SeedStream& stream);

/// Gaussian conditional for the linear coefficients of a Gaussian
/// identity-link model with independent Normal priors.
struct GaussianBlock {
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> precision_llt;
};
GaussianBlock linear_block_posterior(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty, double sigma,
                                     const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_precision);

/// Rank-normalized split R-hat and bulk ESS per column; `chains` holds one
/// (iterations x p) matrix per chain, all the same shape.
std::vector<ParameterDiagnostics> diagnostics(const std::vector<Eigen::MatrixXd>& chains);
std::vector<ParameterDiagnostics> diagnostics(const PosteriorMatrix& post);

}  // namespace qoicheck
