// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qoicheck/error.hpp"
#include "qoicheck/smooth.hpp"

namespace qoicheck {

const char* to_string(FaultInjection f) noexcept {
  switch (f) {
    case FaultInjection::kNone: return "none";
    case FaultInjection::kHalvedStep: return "halved_step";
    case FaultInjection::kHalvedPosteriorSd: return "halved_posterior_sd";
  }
  return "?";
}

FaultInjection fault_from_string(const std::string& name) {
  if (name == "none") return FaultInjection::kNone;
  if (name == "halved_step") return FaultInjection::kHalvedStep;
  if (name == "halved_posterior_sd") return FaultInjection::kHalvedPosteriorSd;
  fail(ErrorCode::kConfig, "unknown fault injection '" + name + "'");
}

void McmcConfig::validate() const {
  if (chains < 1) fail(ErrorCode::kPrecondition, "mcmc chains must be >= 1");
  if (warmup < 0 || post_warmup < 1) fail(ErrorCode::kPrecondition, "mcmc needs warmup >= 0 and post_warmup >= 1");
  if (target_s < 10) fail(ErrorCode::kPrecondition, "target_S must be >= 10");
  if (!(rw_target_acceptance > 0.0 && rw_target_acceptance < 1.0)) {
    fail(ErrorCode::kPrecondition, "rw_target_acceptance must lie in (0,1)");
  }
  if (ess_floor_fraction < 0.0) fail(ErrorCode::kPrecondition, "ess_floor_fraction must be >= 0");
  if (max_attempts < 0) fail(ErrorCode::kPrecondition, "max_attempts must be >= 0");
  if (max_stored_per_chain < 8) fail(ErrorCode::kPrecondition, "max_stored_per_chain must be >= 8");
}

int PosteriorMatrix::index_of(const std::string& name) const {
  const auto it = std::find(schema.begin(), schema.end(), name);
  if (it == schema.end()) fail(ErrorCode::kMissingCoefficient, "posterior has no column '" + name + "'");
  return static_cast<int>(it - schema.begin());
}

ParameterDraw PosteriorMatrix::draw(int s) const {
  ParameterDraw p;
  for (std::size_t j = 0; j < schema.size(); ++j) p.values[schema[j]] = draws(s, static_cast<Eigen::Index>(j));
  return p;
}

std::vector<double> PosteriorMatrix::column(const std::string& name) const {
  const auto j = index_of(name);
  std::vector<double> out(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index s = 0; s < draws.rows(); ++s) out[static_cast<std::size_t>(s)] = draws(s, j);
  return out;
}

void PosteriorMatrix::validate() const {
  if (draws.rows() < 1) fail(ErrorCode::kPrecondition, "posterior has no draws");
  if (static_cast<std::size_t>(draws.cols()) != schema.size()) fail(ErrorCode::kPrecondition, "posterior schema width mismatch");
  if (!draws.allFinite()) fail(ErrorCode::kNonFinite, "posterior contains non-finite draws");
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (is_scale_parameter(schema[j]) && (draws.col(static_cast<Eigen::Index>(j)).array() <= 0.0).any()) {
      fail(ErrorCode::kParameterDomain, "posterior scale column '" + schema[j] + "' is not strictly positive");
    }
  }
}

void write_draws_csv(const PosteriorMatrix& post, std::ostream& out) {
  out << "chain,iteration";
  for (const auto& name : post.schema) out << ',' << name;
  out << '\n';
  char buf[32];
  for (Eigen::Index s = 0; s < post.draws.rows(); ++s) {
    const auto i = static_cast<std::size_t>(s);
    out << (i < post.chain_of_row.size() ? post.chain_of_row[i] : 1) << ','
        << (i < post.iteration_of_row.size() ? post.iteration_of_row[i] : static_cast<long>(s) + 1);
    for (Eigen::Index j = 0; j < post.draws.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", post.draws(s, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Diagnostics

namespace {

std::vector<double> rank_normalize(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> stdnorm;
  for (auto& r : ranks) r = boost::math::quantile(stdnorm, (r - 0.375) / (static_cast<double>(n) + 0.25));
  return ranks;
}

using Sequences = std::vector<std::vector<double>>;

Sequences reshape(const std::vector<double>& pooled, std::size_t m, std::size_t n) {
  Sequences out(m, std::vector<double>(n));
  for (std::size_t c = 0; c < m; ++c) std::copy_n(pooled.begin() + static_cast<long>(c * n), n, out[c].begin());
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double rhat_of(const Sequences& seqs) {
  const auto m = static_cast<double>(seqs.size());
  const auto n = static_cast<double>(seqs.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& s : seqs) {
    const double mu = mean_of(s);
    means.push_back(mu);
    double v = 0.0;
    for (double x : s) v += (x - mu) * (x - mu);
    w += v / (n - 1.0);
  }
  w /= m;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b = n * b / (m - 1.0);
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double ess_of(const Sequences& seqs) {
  const std::size_t m = seqs.size();
  const std::size_t n = seqs.front().size();
  std::vector<double> means(m);
  std::vector<std::vector<double>> centered(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(seqs[c]);
    centered[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) centered[c][i] = seqs[c][i] - means[c];
  }
  auto mean_acov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += centered[c][i] * centered[c][i + lag];
      total += s / static_cast<double>(n);
    }
    return total / static_cast<double>(m);
  };
  const auto dn = static_cast<double>(n);
  const double acov0 = mean_acov(0);
  const double mean_var = acov0 * dn / (dn - 1.0);
  double var_plus = mean_var * (dn - 1.0) / dn;
  if (m > 1) {
    const double grand = mean_of(means);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    var_plus += b / static_cast<double>(m - 1);
  }
  auto rho = [&](std::size_t lag) { return lag == 0 ? 1.0 : 1.0 - (mean_var - mean_acov(lag)) / var_plus; };

  // Geyer's initial monotone sequence on pairs of autocorrelations.
  double tau_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    tau_sum += pair;
    prev_pair = pair;
  }
  const double tau = std::max(-1.0 + 2.0 * tau_sum, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

}  // namespace

std::vector<ParameterDiagnostics> diagnostics(const std::vector<Eigen::MatrixXd>& chains) {
  if (chains.empty()) fail(ErrorCode::kPrecondition, "diagnostics need at least one chain");
  const auto iters = static_cast<std::size_t>(chains.front().rows());
  const auto p = chains.front().cols();
  for (const auto& c : chains) {
    if (static_cast<std::size_t>(c.rows()) != iters || c.cols() != p) {
      fail(ErrorCode::kPrecondition, "diagnostics need equally shaped chains");
    }
  }
  const std::size_t half = iters / 2;
  if (half < 4) fail(ErrorCode::kPrecondition, "diagnostics need at least 4 draws per split chain");
  const std::size_t m = 2 * chains.size();

  std::vector<ParameterDiagnostics> out(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    // Split each chain into halves, dropping the middle draw when odd.
    std::vector<double> pooled;
    pooled.reserve(m * half);
    for (const auto& c : chains) {
      for (std::size_t i = 0; i < half; ++i) pooled.push_back(c(static_cast<Eigen::Index>(i), j));
      for (std::size_t i = iters - half; i < iters; ++i) pooled.push_back(c(static_cast<Eigen::Index>(i), j));
    }
    auto& d = out[static_cast<std::size_t>(j)];
    const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
    if (*lo == *hi) {
      d.degenerate = true;
      d.ess = std::numeric_limits<double>::quiet_NaN();
      d.rhat = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const auto z = rank_normalize(pooled);
    const auto seqs = reshape(z, m, half);
    std::vector<double> sorted = pooled;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    std::vector<double> folded(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) folded[i] = std::abs(pooled[i] - median);
    const auto zf = rank_normalize(folded);
    d.rhat = std::max(rhat_of(seqs), rhat_of(reshape(zf, m, half)));
    d.ess = ess_of(seqs);
  }
  return out;
}

std::vector<ParameterDiagnostics> diagnostics(const PosteriorMatrix& post) {
  std::map<int, std::vector<Eigen::Index>> rows_by_chain;
  for (Eigen::Index s = 0; s < post.draws.rows(); ++s) {
    const auto i = static_cast<std::size_t>(s);
    rows_by_chain[i < post.chain_of_row.size() ? post.chain_of_row[i] : 1].push_back(s);
  }
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& [c, rows] : rows_by_chain) len = std::min(len, rows.size());
  std::vector<Eigen::MatrixXd> chains;
  for (const auto& [c, rows] : rows_by_chain) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(len), post.draws.cols());
    for (std::size_t i = 0; i < len; ++i) m.row(static_cast<Eigen::Index>(i)) = post.draws.row(rows[i]);
    chains.push_back(std::move(m));
  }
  return diagnostics(chains);
}

// ---------------------------------------------------------------------------
// Exact and naive samplers

PosteriorMatrix sample_posterior_conjugate(const ModelSpec& spec, const Dataset& data, int s, SeedStream& stream,
                                           FaultInjection fault) {
  if (spec.family != ModelFamily::kToyNormalConjugate) fail(ErrorCode::kPrecondition, "conjugate sampler needs the Normal toy");
  if (s < 1) fail(ErrorCode::kPrecondition, "conjugate sampler needs S >= 1");
  const auto& prior = spec.prior("theta");
  double sum_y = 0.0;
  for (const auto& r : data.rows) {
    if (!r.y) fail(ErrorCode::kPrecondition, "conjugate sampler needs responses");
    sum_y += *r.y;
  }
  const double n = static_cast<double>(data.size());
  const double prior_prec = 1.0 / (prior.b * prior.b);
  const double var = 1.0 / (prior_prec + n);
  const double mean = var * (prior.a * prior_prec + sum_y);
  double sd = std::sqrt(var);
  if (fault == FaultInjection::kHalvedPosteriorSd) sd *= 0.5;

  PosteriorMatrix post;
  post.schema = {"theta"};
  post.draws.resize(s, 1);
  for (int i = 0; i < s; ++i) {
    post.draws(i, 0) = sample_normal(mean, sd, stream);
    post.chain_of_row.push_back(1);
    post.iteration_of_row.push_back(i + 1);
  }
  ParameterDiagnostics d;
  d.ess = s;
  post.diagnostics = {d};
  return post;
}

NaiveRejectionResult naive_rejection_posterior(const ModelSpec& spec, std::span<const double> y, long attempts,
                                               SeedStream& stream) {
  if (spec.family != ModelFamily::kToyBernoulli) fail(ErrorCode::kPrecondition, "naive rejection sampler needs the Bernoulli toy");
  if (y.size() > 12) fail(ErrorCode::kPrecondition, "naive rejection sampler is limited to n <= 12 observations");
  for (double v : y) {
    if (v != 0.0 && v != 1.0) fail(ErrorCode::kPrecondition, "naive rejection sampler needs binary observations");
  }
  const auto& prior = spec.prior("theta");
  NaiveRejectionResult out;
  out.attempts = attempts;
  for (long a = 0; a < attempts; ++a) {
    const double theta = prior.sample(stream);
    bool match = true;
    // All n values are simulated even after a mismatch so that the stream
    // advances by a fixed amount per attempt.
    for (double obs : y) {
      const double sim = stream.uniform01() < theta ? 1.0 : 0.0;
      match = match && sim == obs;
    }
    if (match) out.accepted.push_back(theta);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive random-walk machinery

namespace {

class RwAdapter {
 public:
  RwAdapter(std::vector<double> log_scales, double target, FaultInjection fault)
      : log_scale_(std::move(log_scales)),
        proposals_(log_scale_.size(), 0),
        accepts_(log_scale_.size(), 0),
        target_(target),
        fault_(fault) {}

  void set_iteration(long t) { iteration_ = t; }
  void freeze() { adapting_ = false; }

  double propose(int i, double current, SeedStream& rng) const {
    return current + sample_normal(0.0, std::exp(log_scale_[static_cast<std::size_t>(i)]), rng);
  }

  /// True once the halved-step fault is active.
  bool faulty() const noexcept { return !adapting_ && fault_ == FaultInjection::kHalvedStep; }

  /// Where an accepted move lands: the proposal, or half way to it under the fault.
  double land(double current, double proposal) const noexcept {
    return faulty() ? current + 0.5 * (proposal - current) : proposal;
  }

  bool decide(int i, double log_ratio, SeedStream& rng) {
    const bool accept = std::log(rng.uniform01()) < log_ratio;
    const auto k = static_cast<std::size_t>(i);
    if (adapting_) {
      // Robbins-Monro on the log proposal scale, diminishing step size.
      const double rate = 1.0 / std::pow(static_cast<double>(iteration_) + 10.0, 0.6);
      log_scale_[k] = std::clamp(log_scale_[k] + rate * ((accept ? 1.0 : 0.0) - target_), -30.0, 5.0);
    } else {
      ++proposals_[k];
      if (accept) ++accepts_[k];
    }
    return accept;
  }

  double acceptance(int i) const {
    const auto k = static_cast<std::size_t>(i);
    return proposals_[k] > 0 ? static_cast<double>(accepts_[k]) / static_cast<double>(proposals_[k]) : 0.0;
  }

 private:
  std::vector<double> log_scale_;
  std::vector<long> proposals_;
  std::vector<long> accepts_;
  double target_;
  FaultInjection fault_;
  bool adapting_ = true;
  long iteration_ = 0;
};

// Kernel requirements:
//   std::vector<double> initial_log_scales() const;
//   void init(SeedStream&);
//   void sweep(RwAdapter&, SeedStream&);
//   void output(double* out) const;          // schema order, natural scale
//   std::vector<int> coord_of_param() const; // -1 for Gibbs-updated params
template <class Kernel>
PosteriorMatrix run_chains(std::vector<Kernel>& kernels, const std::vector<std::string>& schema, const McmcConfig& cfg,
                           SeedStream& stream) {
  cfg.validate();
  const auto p = static_cast<Eigen::Index>(schema.size());
  const std::size_t nchains = kernels.size();
  std::vector<SeedStream> rngs;
  std::vector<RwAdapter> adapters;
  for (std::size_t c = 0; c < nchains; ++c) {
    rngs.push_back(stream.derive(static_cast<std::uint64_t>(c + 1)));
    adapters.emplace_back(kernels[c].initial_log_scales(), cfg.rw_target_acceptance, cfg.fault);
  }
  for (std::size_t c = 0; c < nchains; ++c) {
    kernels[c].init(rngs[c]);
    for (int t = 0; t < cfg.warmup; ++t) {
      adapters[c].set_iteration(t);
      kernels[c].sweep(adapters[c], rngs[c]);
    }
    adapters[c].freeze();
  }

  const long store_every =
      std::max<long>(1, (static_cast<long>(cfg.post_warmup) + cfg.max_stored_per_chain - 1) / cfg.max_stored_per_chain);
  std::vector<std::vector<std::vector<double>>> stored(nchains);
  std::vector<long> done(nchains, 0);
  std::vector<ParameterDiagnostics> diag;
  const double floor = cfg.ess_floor_fraction * cfg.target_s;
  std::vector<double> row(static_cast<std::size_t>(p));

  for (int round = 0;; ++round) {
    const long target_iters = static_cast<long>(cfg.post_warmup) << round;
    for (std::size_t c = 0; c < nchains; ++c) {
      while (done[c] < target_iters) {
        kernels[c].sweep(adapters[c], rngs[c]);
        ++done[c];
        if (done[c] % store_every == 0) {
          kernels[c].output(row.data());
          stored[c].push_back(row);
        }
      }
    }
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& rows : stored) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), p);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index j = 0; j < p; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
      }
      mats.push_back(std::move(m));
    }
    diag = diagnostics(mats);
    double min_ess = std::numeric_limits<double>::infinity();
    std::string worst;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& d = diag[static_cast<std::size_t>(j)];
      if (!d.degenerate && d.ess < min_ess) {
        min_ess = d.ess;
        worst = schema[static_cast<std::size_t>(j)];
      }
    }
    if (min_ess >= floor) break;
    if (round >= cfg.max_attempts) {
      std::ostringstream msg;
      msg << "effective sample size " << min_ess << " for '" << worst << "' is below the floor " << floor
          << " after " << round << " doubling rounds";
      throw SamplerQualityError(msg.str());
    }
  }

  // Acceptance rates are per adaptive coordinate, averaged over chains.
  const auto coord = kernels.front().coord_of_param();
  for (Eigen::Index j = 0; j < p; ++j) {
    const int k = coord[static_cast<std::size_t>(j)];
    double acc = 1.0;
    if (k >= 0) {
      acc = 0.0;
      for (const auto& a : adapters) acc += a.acceptance(k);
      acc /= static_cast<double>(nchains);
    }
    diag[static_cast<std::size_t>(j)].acceptance = acc;
  }

  // Evenly thin the pooled (chain-major) stored draws to exactly target_S rows.
  const std::size_t per_chain = stored.front().size();
  const std::size_t total = per_chain * nchains;
  PosteriorMatrix post;
  post.schema = schema;
  post.diagnostics = diag;
  post.thinning = static_cast<int>(store_every * static_cast<long>(total) / cfg.target_s);
  post.draws.resize(cfg.target_s, p);
  for (int s = 0; s < cfg.target_s; ++s) {
    const auto idx = static_cast<std::size_t>((static_cast<double>(s) + 0.5) * static_cast<double>(total) / cfg.target_s);
    const std::size_t c = idx / per_chain;
    const std::size_t i = idx % per_chain;
    for (Eigen::Index j = 0; j < p; ++j) post.draws(s, j) = stored[c][i][static_cast<std::size_t>(j)];
    post.chain_of_row.push_back(static_cast<int>(c) + 1);
    post.iteration_of_row.push_back(static_cast<long>(i + 1) * store_every);
  }
  post.validate();
  return post;
}

// ---------------------------------------------------------------------------
// Case Study I: log-link multilevel Normal model.

struct Cs1Data {
  std::vector<double> x;
  std::vector<double> y;
  double x_mean = 0.0;
  std::vector<int> group;  // index into levels
  std::vector<std::vector<int>> rows_of_group;
  std::vector<int> levels;
};

class Cs1Kernel {
 public:
  Cs1Kernel(const Cs1Data* data, const ModelSpec* spec)
      : d_(data),
        pb0_(spec->prior("beta0")),
        pb1_(spec->prior("beta1")),
        psg_(spec->prior("sigma_gamma")),
        ps_(spec->prior("sigma")) {}

  // Coordinates: 0 beta0, 1 beta1, 2 log sigma_gamma, 3 log sigma,
  // 4 joint shift (beta0 + d, gamma - d), 5 pivot (beta1 + d, beta0 - d*mean(x)),
  // 6.. gamma.
  std::vector<double> initial_log_scales() const {
    std::vector<double> s = {std::log(0.05), std::log(0.05), std::log(0.1), std::log(0.05), std::log(0.05),
                             std::log(0.05)};
    s.resize(6 + d_->levels.size(), std::log(0.1));
    return s;
  }

  void init(SeedStream& rng) {
    b0_ = pb0_.sample(rng);
    b1_ = pb1_.sample(rng);
    lsg_ = std::log(psg_.sample(rng));
    ls_ = std::log(ps_.sample(rng));
    gamma_.resize(d_->levels.size());
    for (auto& g : gamma_) g = sample_normal(0.0, std::exp(lsg_), rng);
    mu_.resize(d_->x.size());
    scratch_.resize(d_->x.size());
    refresh();
  }

  // Recomputes the cached means from the state; returns the residual sum of squares.
  double refresh() {
    double rss = 0.0;
    for (std::size_t i = 0; i < mu_.size(); ++i) {
      mu_[i] = std::exp(b0_ + b1_ * d_->x[i] + gamma_[static_cast<std::size_t>(d_->group[i])]);
      rss += (d_->y[i] - mu_[i]) * (d_->y[i] - mu_[i]);
    }
    return rss;
  }

  void sweep(RwAdapter& ad, SeedStream& rng) {
    const auto& y = d_->y;
    const auto& x = d_->x;
    const std::size_t n = y.size();
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) rss += (y[i] - mu_[i]) * (y[i] - mu_[i]);
    double inv2s2 = 0.5 * std::exp(-2.0 * ls_);

    {  // beta0
      const double prop = ad.propose(0, b0_, rng);
      const double f = std::exp(prop - b0_);
      double new_rss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - mu_[i] * f;
        new_rss += r * r;
      }
      const double lr = -(new_rss - rss) * inv2s2 + pb0_.log_density(prop) - pb0_.log_density(b0_);
      if (ad.decide(0, lr, rng)) {
        if (ad.faulty()) {
          b0_ = ad.land(b0_, prop);
          rss = refresh();
        } else {
          b0_ = prop;
          for (auto& m : mu_) m *= f;
          rss = new_rss;
        }
      }
    }
    {  // beta1
      const double prop = ad.propose(1, b1_, rng);
      const double delta = prop - b1_;
      double new_rss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        scratch_[i] = mu_[i] * std::exp(delta * x[i]);
        const double r = y[i] - scratch_[i];
        new_rss += r * r;
      }
      const double lr = -(new_rss - rss) * inv2s2 + pb1_.log_density(prop) - pb1_.log_density(b1_);
      if (ad.decide(1, lr, rng)) {
        if (ad.faulty()) {
          b1_ = ad.land(b1_, prop);
          rss = refresh();
        } else {
          b1_ = prop;
          mu_.swap(scratch_);
          rss = new_rss;
        }
      }
    }
    {  // pivot about the mean covariate
      const double delta = ad.propose(5, 0.0, rng);
      const double xbar = d_->x_mean;
      double new_rss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        scratch_[i] = mu_[i] * std::exp(delta * (x[i] - xbar));
        const double r = y[i] - scratch_[i];
        new_rss += r * r;
      }
      const double b0 = b0_ - delta * xbar;
      const double b1 = b1_ + delta;
      const double lr = -(new_rss - rss) * inv2s2 + pb0_.log_density(b0) - pb0_.log_density(b0_) +
                        pb1_.log_density(b1) - pb1_.log_density(b1_);
      if (ad.decide(5, lr, rng)) {
        if (ad.faulty()) {
          const double half = ad.land(0.0, delta);
          b0_ -= half * xbar;
          b1_ += half;
          rss = refresh();
        } else {
          b0_ = b0;
          b1_ = b1;
          mu_.swap(scratch_);
          rss = new_rss;
        }
      }
    }
    double inv2sg2 = 0.5 * std::exp(-2.0 * lsg_);
    for (std::size_t g = 0; g < gamma_.size(); ++g) {
      const int coord = 6 + static_cast<int>(g);
      const double prop = ad.propose(coord, gamma_[g], rng);
      const double f = std::exp(prop - gamma_[g]);
      double delta_rss = 0.0;
      for (int i : d_->rows_of_group[g]) {
        const auto k = static_cast<std::size_t>(i);
        const double r_old = y[k] - mu_[k];
        const double r_new = y[k] - mu_[k] * f;
        delta_rss += r_new * r_new - r_old * r_old;
      }
      const double lr = -delta_rss * inv2s2 - (prop * prop - gamma_[g] * gamma_[g]) * inv2sg2;
      if (ad.decide(coord, lr, rng)) {
        if (ad.faulty()) {
          gamma_[g] = ad.land(gamma_[g], prop);
          rss = refresh();
        } else {
          gamma_[g] = prop;
          for (int i : d_->rows_of_group[g]) mu_[static_cast<std::size_t>(i)] *= f;
          rss += delta_rss;
        }
      }
    }
    {  // joint shift: leaves every linear predictor unchanged
      const double delta = ad.propose(4, 0.0, rng);
      double old_sq = 0.0;
      double new_sq = 0.0;
      for (double g : gamma_) {
        old_sq += g * g;
        new_sq += (g - delta) * (g - delta);
      }
      const double lr = pb0_.log_density(b0_ + delta) - pb0_.log_density(b0_) - (new_sq - old_sq) * inv2sg2;
      if (ad.decide(4, lr, rng)) {
        const double step = ad.land(0.0, delta);
        b0_ += step;
        for (auto& g : gamma_) g -= step;
      }
    }
    {  // log sigma_gamma
      double sum_sq = 0.0;
      for (double g : gamma_) sum_sq += g * g;
      const double prop = ad.propose(2, lsg_, rng);
      const auto groups = static_cast<double>(gamma_.size());
      const double lr = -0.5 * sum_sq * (std::exp(-2.0 * prop) - std::exp(-2.0 * lsg_)) - groups * (prop - lsg_) +
                        psg_.log_density(std::exp(prop)) - psg_.log_density(std::exp(lsg_)) + (prop - lsg_);
      if (ad.decide(2, lr, rng)) lsg_ = ad.land(lsg_, prop);
    }
    {  // log sigma
      const double prop = ad.propose(3, ls_, rng);
      const auto nn = static_cast<double>(n);
      const double lr = -0.5 * rss * (std::exp(-2.0 * prop) - std::exp(-2.0 * ls_)) - nn * (prop - ls_) +
                        ps_.log_density(std::exp(prop)) - ps_.log_density(std::exp(ls_)) + (prop - ls_);
      if (ad.decide(3, lr, rng)) ls_ = ad.land(ls_, prop);
    }
  }

  void output(double* out) const {
    out[0] = b0_;
    out[1] = b1_;
    out[2] = std::exp(lsg_);
    out[3] = std::exp(ls_);
    for (std::size_t g = 0; g < gamma_.size(); ++g) out[4 + g] = gamma_[g];
  }

  std::vector<int> coord_of_param() const {
    std::vector<int> c = {0, 1, 2, 3};
    for (std::size_t g = 0; g < gamma_.size(); ++g) c.push_back(6 + static_cast<int>(g));
    return c;
  }

 private:
  const Cs1Data* d_;
  PriorSpec pb0_, pb1_, psg_, ps_;
  double b0_ = 0.0, b1_ = 0.0, lsg_ = 0.0, ls_ = 0.0;
  std::vector<double> gamma_;
  std::vector<double> mu_;
  std::vector<double> scratch_;
};

// ---------------------------------------------------------------------------
// Case Study II: Beta covariate models + Gaussian smooth regression.

struct BetaStats {
  double n = 0.0;
  double sum_log = 0.0;
  double sum_log1m = 0.0;

  double loglik(double logit_mean, double phi) const {
    const double mu = logistic(logit_mean);
    const double a = mu * phi;
    const double b = (1.0 - mu) * phi;
    return n * (std::lgamma(phi) - std::lgamma(a) - std::lgamma(b)) + (a - 1.0) * sum_log + (b - 1.0) * sum_log1m;
  }
};

struct Cs2Data {
  BetaStats x_stats;
  BetaStats z_stats;
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yty = 0.0;
  double n = 0.0;
  int penalized = 0;
};

class Cs2Kernel {
 public:
  Cs2Kernel(const Cs2Data* data, const ModelSpec* spec)
      : d_(data),
        pb0x_(spec->prior("beta0_x")),
        pphx_(spec->prior("phi_x")),
        pb0z_(spec->prior("beta0_z")),
        pphz_(spec->prior("phi_z")),
        pb0y_(spec->prior("beta0_y")),
        psy_(spec->prior("sigma_y")),
        pbs1_(spec->prior("beta_s1")),
        pbs2_(spec->prior("beta_s2")),
        pss_(spec->prior("sigma_s")) {
    for (const PriorSpec* p : {&pb0y_, &pbs1_, &pbs2_}) {
      if (p->kind != PriorSpec::Kind::kNormal) fail(ErrorCode::kPrecondition, "CS2 linear coefficients need Normal priors");
    }
  }

  // Coordinates: 0 log sigma_y, 1 log sigma_s, 2 beta0_x, 3 log phi_x,
  // 4 beta0_z, 5 log phi_z.
  std::vector<double> initial_log_scales() const {
    return {std::log(0.01), std::log(0.1), std::log(0.001), std::log(0.001), std::log(0.001), std::log(0.001)};
  }

  void init(SeedStream& rng) {
    b0x_ = pb0x_.sample(rng);
    lphx_ = std::log(pphx_.sample(rng));
    b0z_ = pb0z_.sample(rng);
    lphz_ = std::log(pphz_.sample(rng));
    lsy_ = std::log(psy_.sample(rng));
    lss_ = std::log(pss_.sample(rng));
    coef_.resize(3 + d_->penalized);
    coef_(0) = pb0y_.sample(rng);
    coef_(1) = pbs1_.sample(rng);
    coef_(2) = pbs2_.sample(rng);
    for (int l = 0; l < d_->penalized; ++l) coef_(3 + l) = sample_normal(0.0, std::exp(lss_), rng);
  }

  void sweep(RwAdapter& ad, SeedStream& rng) {
    gibbs_linear(rng);
    const double rss = d_->yty - 2.0 * coef_.dot(d_->xty) + coef_.dot(d_->xtx * coef_);
    {  // log sigma_y
      const double prop = ad.propose(0, lsy_, rng);
      const double lr = -0.5 * rss * (std::exp(-2.0 * prop) - std::exp(-2.0 * lsy_)) - d_->n * (prop - lsy_) +
                        psy_.log_density(std::exp(prop)) - psy_.log_density(std::exp(lsy_)) + (prop - lsy_);
      if (ad.decide(0, lr, rng)) lsy_ = ad.land(lsy_, prop);
    }
    {  // log sigma_s
      const double sum_sq = coef_.tail(d_->penalized).squaredNorm();
      const double prop = ad.propose(1, lss_, rng);
      const double lr = -0.5 * sum_sq * (std::exp(-2.0 * prop) - std::exp(-2.0 * lss_)) -
                        static_cast<double>(d_->penalized) * (prop - lss_) + pss_.log_density(std::exp(prop)) -
                        pss_.log_density(std::exp(lss_)) + (prop - lss_);
      if (ad.decide(1, lr, rng)) lss_ = ad.land(lss_, prop);
    }
    beta_pair(ad, rng, 2, d_->x_stats, pb0x_, pphx_, b0x_, lphx_);
    beta_pair(ad, rng, 4, d_->z_stats, pb0z_, pphz_, b0z_, lphz_);
  }

  void output(double* out) const {
    out[0] = b0x_;
    out[1] = std::exp(lphx_);
    out[2] = b0z_;
    out[3] = std::exp(lphz_);
    out[4] = coef_(0);
    out[5] = std::exp(lsy_);
    out[6] = coef_(1);
    out[7] = coef_(2);
    out[8] = std::exp(lss_);
    for (int l = 0; l < d_->penalized; ++l) out[9 + l] = coef_(3 + l);
  }

  std::vector<int> coord_of_param() const {
    std::vector<int> c = {2, 3, 4, 5, -1, 0, -1, -1, 1};
    c.resize(9 + static_cast<std::size_t>(d_->penalized), -1);
    return c;
  }

 private:
  void gibbs_linear(SeedStream& rng) {
    const int p = 3 + d_->penalized;
    Eigen::VectorXd mean0 = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd prec0(p);
    mean0(0) = pb0y_.a;
    mean0(1) = pbs1_.a;
    mean0(2) = pbs2_.a;
    prec0(0) = 1.0 / (pb0y_.b * pb0y_.b);
    prec0(1) = 1.0 / (pbs1_.b * pbs1_.b);
    prec0(2) = 1.0 / (pbs2_.b * pbs2_.b);
    prec0.tail(d_->penalized).setConstant(std::exp(-2.0 * lss_));
    const GaussianBlock block = linear_block_posterior(d_->xtx, d_->xty, std::exp(lsy_), mean0, prec0);
    Eigen::VectorXd z(p);
    for (int i = 0; i < p; ++i) z(i) = sample_normal(0.0, 1.0, rng);
    coef_ = block.mean + block.precision_llt.matrixU().solve(z);
  }

  static void beta_pair(RwAdapter& ad, SeedStream& rng, int coord, const BetaStats& stats, const PriorSpec& pmean,
                        const PriorSpec& pphi, double& logit_mean, double& log_phi) {
    const double phi = std::exp(log_phi);
    {
      const double prop = ad.propose(coord, logit_mean, rng);
      const double lr = stats.loglik(prop, phi) - stats.loglik(logit_mean, phi) + pmean.log_density(prop) -
                        pmean.log_density(logit_mean);
      if (ad.decide(coord, lr, rng)) logit_mean = ad.land(logit_mean, prop);
    }
    {
      const double prop = ad.propose(coord + 1, log_phi, rng);
      const double lr = stats.loglik(logit_mean, std::exp(prop)) - stats.loglik(logit_mean, phi) +
                        pphi.log_density(std::exp(prop)) - pphi.log_density(phi) + (prop - log_phi);
      if (ad.decide(coord + 1, lr, rng)) log_phi = ad.land(log_phi, prop);
    }
  }

  const Cs2Data* d_;
  PriorSpec pb0x_, pphx_, pb0z_, pphz_, pb0y_, psy_, pbs1_, pbs2_, pss_;
  double b0x_ = 0.0, lphx_ = 0.0, b0z_ = 0.0, lphz_ = 0.0, lsy_ = 0.0, lss_ = 0.0;
  Eigen::VectorXd coef_;
};

// ---------------------------------------------------------------------------
// Normal toy through the random-walk path.

class ToyNormalKernel {
 public:
  ToyNormalKernel(double n, double sum_y, const PriorSpec& prior) : n_(n), sum_y_(sum_y), prior_(prior) {}

  std::vector<double> initial_log_scales() const { return {0.0}; }
  void init(SeedStream& rng) { theta_ = prior_.sample(rng); }
  void sweep(RwAdapter& ad, SeedStream& rng) {
    const double prop = ad.propose(0, theta_, rng);
    auto loglik = [&](double t) { return -0.5 * n_ * t * t + t * sum_y_; };
    const double lr = loglik(prop) - loglik(theta_) + prior_.log_density(prop) - prior_.log_density(theta_);
    if (ad.decide(0, lr, rng)) theta_ = ad.land(theta_, prop);
  }
  void output(double* out) const { out[0] = theta_; }
  std::vector<int> coord_of_param() const { return {0}; }

 private:
  double n_;
  double sum_y_;
  PriorSpec prior_;
  double theta_ = 0.0;
};

}  // namespace

GaussianBlock linear_block_posterior(const Eigen::MatrixXd& xtx, const Eigen::VectorXd& xty, double sigma,
                                     const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_precision) {
  const double inv_var = 1.0 / (sigma * sigma);
  Eigen::MatrixXd prec = xtx * inv_var;
  prec.diagonal() += prior_precision;
  GaussianBlock out;
  out.precision_llt.compute(prec);
  if (out.precision_llt.info() != Eigen::Success) {
    fail(ErrorCode::kNumericalConditioning, "normal-equations system is not positive definite (rank-deficient basis?)");
  }
  const Eigen::VectorXd rhs = xty * inv_var + prior_precision.cwiseProduct(prior_mean);
  out.mean = out.precision_llt.solve(rhs);
  if (!out.mean.allFinite()) fail(ErrorCode::kNumericalConditioning, "normal-equations solve produced non-finite values");
  return out;
}

PosteriorMatrix sample_posterior_cs1(const Dataset& data, const ModelSpec& spec, const McmcConfig& cfg,
                                     SeedStream& stream) {
  if (spec.family != ModelFamily::kCs1MultilevelLogLink) fail(ErrorCode::kPrecondition, "CS1 sampler needs a CS1 spec");
  if (data.size() == 0) fail(ErrorCode::kPrecondition, "CS1 sampler needs at least one observation");
  if (data.tag != DatasetTag::kOriginal || !data.has_response() || !data.has_groups()) {
    fail(ErrorCode::kPrecondition, "CS1 sampler needs ORIGINAL data with groups and responses");
  }
  spec.validate();
  data.validate();
  Cs1Data d;
  d.levels = data.level_registry;
  std::map<int, int> index;
  for (std::size_t g = 0; g < d.levels.size(); ++g) index[d.levels[g]] = static_cast<int>(g);
  d.rows_of_group.resize(d.levels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.rows[i];
    d.x.push_back(r.x);
    d.y.push_back(*r.y);
    const int g = index.at(*r.group);
    d.group.push_back(g);
    d.rows_of_group[static_cast<std::size_t>(g)].push_back(static_cast<int>(i));
  }
  for (double v : d.x) d.x_mean += v;
  d.x_mean /= static_cast<double>(d.x.size());
  std::vector<std::string> schema = {"beta0", "beta1", "sigma_gamma", "sigma"};
  for (int level : d.levels) schema.push_back(group_key(level));

  std::vector<Cs1Kernel> kernels(static_cast<std::size_t>(cfg.chains), Cs1Kernel(&d, &spec));
  return run_chains(kernels, schema, cfg, stream);
}

PosteriorMatrix sample_posterior_cs2(const Dataset& data, const ModelSpec& spec, const SmoothReparam& basis,
                                     const McmcConfig& cfg, SeedStream& stream) {
  if (spec.family != ModelFamily::kCs2SmoothJoint) fail(ErrorCode::kPrecondition, "CS2 sampler needs a CS2 spec");
  if (data.size() == 0 || !data.has_z() || !data.has_response()) {
    fail(ErrorCode::kPrecondition, "CS2 sampler needs rows with x, z and y");
  }
  spec.validate();
  Cs2Data d;
  d.n = static_cast<double>(data.size());
  d.penalized = basis.penalized;
  for (const auto& r : data.rows) {
    if (!(r.x > 0.0 && r.x < 1.0 && *r.z > 0.0 && *r.z < 1.0)) {
      fail(ErrorCode::kPrecondition, "CS2 covariates must lie strictly inside (0,1)");
    }
    d.x_stats.sum_log += std::log(r.x);
    d.x_stats.sum_log1m += std::log1p(-r.x);
    d.z_stats.sum_log += std::log(*r.z);
    d.z_stats.sum_log1m += std::log1p(-*r.z);
  }
  d.x_stats.n = d.z_stats.n = d.n;
  const SmoothDesign dm = design_matrix(basis, data);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), 3 + basis.penalized);
  x.col(0).setOnes();
  x.middleCols(1, 2) = dm.x1;
  x.rightCols(basis.penalized) = dm.x2;
  const auto ys = data.ys();
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  d.xtx = x.transpose() * x;
  d.xty = x.transpose() * y;
  d.yty = y.squaredNorm();

  const auto schema = parameter_schema(spec, basis.penalized);
  std::vector<Cs2Kernel> kernels(static_cast<std::size_t>(cfg.chains), Cs2Kernel(&d, &spec));
  return run_chains(kernels, schema, cfg, stream);
}

PosteriorMatrix sample_posterior_toy_mcmc(const Dataset& data, const ModelSpec& spec, const McmcConfig& cfg,
                                          SeedStream& stream) {
  if (spec.family != ModelFamily::kToyNormalConjugate) fail(ErrorCode::kPrecondition, "toy MCMC needs the Normal toy");
  double sum_y = 0.0;
  for (const auto& r : data.rows) {
    if (!r.y) fail(ErrorCode::kPrecondition, "toy MCMC needs responses");
    sum_y += *r.y;
  }
  std::vector<ToyNormalKernel> kernels(static_cast<std::size_t>(cfg.chains),
                                       ToyNormalKernel(static_cast<double>(data.size()), sum_y, spec.prior("theta")));
  return run_chains(kernels, {"theta"}, cfg, stream);
}

}  // namespace qoicheck
