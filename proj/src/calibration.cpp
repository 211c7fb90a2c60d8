// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/calibration.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>
#include <tuple>

#include "qoicheck/grid.hpp"
#include "qoicheck/parallel.hpp"
#include "qoicheck/qoi.hpp"
#include "qoicheck/smooth.hpp"

namespace qoicheck {

int rank_statistic(double prior_value, std::span<const double> posterior_values, int* ties) {
  if (!std::isfinite(prior_value)) fail(ErrorCode::kNonFinite, "prior-side value is not finite");
  int k = 0;
  int equal = 0;
  for (double v : posterior_values) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "posterior-side value is not finite");
    if (prior_value < v) ++k;
    else if (prior_value == v) ++equal;
  }
  if (ties != nullptr) *ties += equal;
  return k;
}

ChiSquareResult chi_square_uniformity(std::span<const int> ranks, int s, int bins) {
  if (ranks.empty()) fail(ErrorCode::kPrecondition, "chi-square needs at least one rank");
  const int values = s + 1;
  const int nb = std::max(1, std::min(bins, values));
  std::vector<double> observed(static_cast<std::size_t>(nb), 0.0);
  std::vector<double> width(static_cast<std::size_t>(nb), 0.0);
  auto bin_of = [&](int k) { return static_cast<int>(static_cast<long>(k) * nb / values); };
  for (int k = 0; k <= s; ++k) width[static_cast<std::size_t>(bin_of(k))] += 1.0;
  for (int k : ranks) {
    if (k < 0 || k > s) fail(ErrorCode::kPrecondition, "rank outside {0..S}");
    observed[static_cast<std::size_t>(bin_of(k))] += 1.0;
  }
  ChiSquareResult out;
  const auto total = static_cast<double>(ranks.size());
  for (int b = 0; b < nb; ++b) {
    const double expected = total * width[static_cast<std::size_t>(b)] / values;
    const double d = observed[static_cast<std::size_t>(b)] - expected;
    out.stat += d * d / expected;
  }
  out.df = nb - 1;
  if (out.df >= 1) {
    const boost::math::chi_squared_distribution<double> dist(out.df);
    out.p = boost::math::cdf(boost::math::complement(dist, out.stat));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simultaneous ECDF band

namespace {

struct BandGrid {
  int r, s, k;
  std::vector<double> points;
  std::vector<std::vector<double>> cdf;  // per point, Binomial(R, F(t)) CDF on 0..R
};

// F(t_i) for the discrete uniform on {1/(S+1), ..., 1}, t_i = i/(K+1).
double null_cdf_at(int i, int s, int k) {
  const long hits = static_cast<long>(i) * (s + 1) / (k + 1);
  return static_cast<double>(hits) / (s + 1);
}

// Number of ranks with (k+1)/(S+1) <= i/(K+1), for every i.
std::vector<int> ecdf_counts(std::span<const int> ranks, int s, int k) {
  std::vector<int> per_rank(static_cast<std::size_t>(s + 1), 0);
  for (int v : ranks) ++per_rank[static_cast<std::size_t>(v)];
  std::vector<int> out(static_cast<std::size_t>(k), 0);
  int acc = 0;
  int next_rank = 0;
  for (int i = 1; i <= k; ++i) {
    while (next_rank <= s && static_cast<long>(next_rank + 1) * (k + 1) <= static_cast<long>(i) * (s + 1)) {
      acc += per_rank[static_cast<std::size_t>(next_rank)];
      ++next_rank;
    }
    out[static_cast<std::size_t>(i - 1)] = acc;
  }
  return out;
}

BandGrid make_grid(int r, int s, int k) {
  BandGrid g{r, s, k, {}, {}};
  for (int i = 1; i <= k; ++i) {
    g.points.push_back(static_cast<double>(i) / (k + 1));
    const double p = null_cdf_at(i, s, k);
    std::vector<double> cdf(static_cast<std::size_t>(r + 1));
    if (p <= 0.0) {
      std::fill(cdf.begin(), cdf.end(), 1.0);
    } else if (p >= 1.0) {
      std::fill(cdf.begin(), cdf.end(), 0.0);
      cdf.back() = 1.0;
    } else {
      const boost::math::binomial_distribution<double> dist(r, p);
      for (int c = 0; c <= r; ++c) cdf[static_cast<std::size_t>(c)] = boost::math::cdf(dist, c);
    }
    g.cdf.push_back(std::move(cdf));
  }
  return g;
}

int binomial_quantile(const std::vector<double>& cdf, double q) {
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), q);
  return it == cdf.end() ? static_cast<int>(cdf.size()) - 1 : static_cast<int>(it - cdf.begin());
}

void envelopes(const BandGrid& g, double gamma, std::vector<int>& lo, std::vector<int>& hi) {
  lo.resize(static_cast<std::size_t>(g.k));
  hi.resize(static_cast<std::size_t>(g.k));
  for (int i = 0; i < g.k; ++i) {
    lo[static_cast<std::size_t>(i)] = binomial_quantile(g.cdf[static_cast<std::size_t>(i)], 0.5 * gamma);
    hi[static_cast<std::size_t>(i)] = binomial_quantile(g.cdf[static_cast<std::size_t>(i)], 1.0 - 0.5 * gamma);
  }
}

using GammaKey = std::tuple<int, int, int, double, int, std::uint64_t, std::uint64_t>;
std::mutex gamma_mutex;
std::map<GammaKey, double> gamma_cache;

}  // namespace

double calibrate_band_gamma(int r, int s, int k_points, double alpha, int draws, const SeedStream& stream) {
  if (r < 1 || s < 1 || k_points < 1 || draws < 1) fail(ErrorCode::kPrecondition, "bad band calibration arguments");
  const GammaKey key{r, s, k_points, alpha, draws, stream.master_seed(), stream.stream_id()};
  {
    std::lock_guard<std::mutex> lock(gamma_mutex);
    if (const auto it = gamma_cache.find(key); it != gamma_cache.end()) return it->second;
  }
  const BandGrid g = make_grid(r, s, k_points);
  SeedStream rng = stream;
  std::vector<std::vector<int>> sims(static_cast<std::size_t>(draws));
  std::vector<int> ranks(static_cast<std::size_t>(r));
  for (auto& sim : sims) {
    for (auto& v : ranks) v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(s) + 1));
    sim = ecdf_counts(ranks, s, k_points);
  }
  std::vector<int> lo;
  std::vector<int> hi;
  auto coverage = [&](double gamma) {
    envelopes(g, gamma, lo, hi);
    int inside = 0;
    for (const auto& sim : sims) {
      bool ok = true;
      for (int i = 0; i < k_points && ok; ++i) {
        const int c = sim[static_cast<std::size_t>(i)];
        ok = c >= lo[static_cast<std::size_t>(i)] && c <= hi[static_cast<std::size_t>(i)];
      }
      inside += ok ? 1 : 0;
    }
    return static_cast<double>(inside) / draws;
  };
  double gamma = alpha;
  if (coverage(alpha) < 1.0 - alpha) {
    double good = 0.0;
    double bad = alpha;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (good + bad);
      (coverage(mid) >= 1.0 - alpha ? good : bad) = mid;
    }
    gamma = good;
  }
  std::lock_guard<std::mutex> lock(gamma_mutex);
  gamma_cache[key] = gamma;
  return gamma;
}

UniformityReport ecdf_uniformity_band(std::span<const int> ranks, int s, const BandOptions& opt,
                                      const SeedStream& stream) {
  const int r = static_cast<int>(ranks.size());
  if (r < 20) {
    throw Error(ErrorCode::kInsufficientReplications,
                "uniformity band needs R >= 20 replications, got " + std::to_string(r));
  }
  if (s < 1) fail(ErrorCode::kPrecondition, "uniformity band needs S >= 1");
  for (int k : ranks) {
    if (k < 0 || k > s) fail(ErrorCode::kPrecondition, "rank outside {0..S}");
  }
  const int kp = std::min(r, opt.max_points);
  UniformityReport rep;
  rep.r = r;
  rep.s = s;
  rep.alpha = opt.alpha;
  rep.gamma = calibrate_band_gamma(r, s, kp, opt.alpha, opt.draws, stream);
  const BandGrid g = make_grid(r, s, kp);
  std::vector<int> lo;
  std::vector<int> hi;
  envelopes(g, rep.gamma, lo, hi);
  const auto counts = ecdf_counts(ranks, s, kp);
  rep.pass = true;
  for (int i = 0; i < kp; ++i) {
    const auto u = static_cast<std::size_t>(i);
    rep.eval_points.push_back(g.points[u]);
    rep.ecdf.push_back(static_cast<double>(counts[u]) / r);
    rep.band_lo.push_back(static_cast<double>(lo[u]) / r);
    rep.band_hi.push_back(static_cast<double>(hi[u]) / r);
    if (counts[u] < lo[u] || counts[u] > hi[u]) rep.pass = false;
  }
  rep.chi2 = chi_square_uniformity(ranks, s);
  return rep;
}

UniformityReport ecdf_uniformity_band(std::span<const RankRecord> records, const BandOptions& opt,
                                      const SeedStream& stream) {
  if (records.empty()) {
    throw Error(ErrorCode::kInsufficientReplications, "uniformity band needs R >= 20 replications, got 0");
  }
  std::vector<int> ranks;
  const int s = records.front().s;
  for (const auto& rec : records) {
    if (rec.s != s) fail(ErrorCode::kPrecondition, "records of one comparison must share S");
    if (rec.prior_label != records.front().prior_label || rec.posterior_label != records.front().posterior_label) {
      fail(ErrorCode::kPrecondition, "records belong to more than one comparison");
    }
    ranks.push_back(rec.k);
  }
  UniformityReport rep = ecdf_uniformity_band(ranks, s, opt, stream);
  rep.prior_label = records.front().prior_label;
  rep.posterior_label = records.front().posterior_label;
  return rep;
}

double ppp_value(const PpcStatistic& t, std::span<const double> y, const PosteriorMatrix& posterior,
                 const std::vector<std::vector<double>>& replicates) {
  const int s = posterior.size();
  if (s < 1) fail(ErrorCode::kPrecondition, "ppp needs at least one posterior draw");
  if (static_cast<int>(replicates.size()) != s) fail(ErrorCode::kPrecondition, "ppp needs one replicate per posterior draw");
  int extreme = 0;
  for (int i = 0; i < s; ++i) {
    const ParameterDraw theta = posterior.draw(i);
    if (t(replicates[static_cast<std::size_t>(i)], theta) >= t(y, theta)) ++extreme;
  }
  return static_cast<double>(extreme) / s;
}

// ---------------------------------------------------------------------------
// Replication studies

std::vector<RankRecord> ReplicationBatch::records() const {
  std::vector<RankRecord> out;
  for (const auto& o : outputs) {
    if (o) out.insert(out.end(), o->records.begin(), o->records.end());
  }
  return out;
}

long ReplicationBatch::completed() const {
  return static_cast<long>(std::count_if(outputs.begin(), outputs.end(), [](const auto& o) { return o.has_value(); }));
}

namespace {

using ReplicationFn = std::function<ReplicationOutput(long)>;

ReplicationBatch run_batch(const StudyConfig& study, const ReplicationFn& fn) {
  ReplicationBatch batch;
  batch.outputs.resize(static_cast<std::size_t>(study.replications));
  std::atomic<bool> stop{false};
  std::mutex mu;
  for_each_replication(study.replications, study.workers, stop, [&](long r) {
    try {
      ReplicationOutput out = fn(r);
      out.replication = r;
      std::lock_guard<std::mutex> lock(mu);
      batch.outputs[static_cast<std::size_t>(r - 1)] = std::move(out);
    } catch (const std::exception& e) {
      const auto* err = dynamic_cast<const Error*>(&e);
      std::lock_guard<std::mutex> lock(mu);
      stop = true;
      if (!batch.failure || r < batch.failure->replication) {
        batch.failure = ReplicationFailure{r, err ? err->code() : ErrorCode::kInternal, e.what()};
      }
    }
  });
  return batch;
}

SeedStream replication_root(const StudyConfig& study, long r) {
  return SeedStream(study.master_seed, static_cast<std::uint64_t>(r));
}

void add_diagnostics(ReplicationOutput& out, const PosteriorMatrix& post) {
  out.schema = post.schema;
  out.diagnostics = post.diagnostics;
}

bool uses_conjugate(const ModelSpec& spec, SamplerChoice choice) {
  if (spec.family != ModelFamily::kToyNormalConjugate) {
    if (choice == SamplerChoice::kConjugate) fail(ErrorCode::kConfig, "the conjugate sampler only exists for the Normal toy");
    return false;
  }
  return choice != SamplerChoice::kMcmc;
}

std::string x_tag(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

ReplicationOutput sbc_replication(const StudyConfig& study, const ModelSpec& spec, long r) {
  const SeedStream root = replication_root(study, r);
  SeedStream s_prior = root.derive("prior");
  SeedStream s_cov = root.derive("covariates");
  SeedStream s_resp = root.derive("response");
  SeedStream s_post = root.derive("posterior");
  const ParameterDraw theta = draw_prior(spec, s_prior);

  PosteriorMatrix post;
  switch (spec.family) {
    case ModelFamily::kCs1MultilevelLogLink: {
      Dataset data = simulate_covariates_cs1(spec, s_cov);
      data = simulate_response(spec, theta, data, s_resp);
      post = sample_posterior_cs1(data, spec, study.mcmc, s_post);
      break;
    }
    case ModelFamily::kCs2SmoothJoint: {
      Dataset data = simulate_covariates_cs2(spec, theta, s_cov);
      const SmoothReparam basis = build_smooth(data, spec.k);
      if (basis.penalized != spec.smooth_rank()) {
        fail(ErrorCode::kNumericalConditioning, "smooth penalty lost rank on the simulated covariates");
      }
      data = simulate_response(spec, theta, data, s_resp, &basis);
      post = sample_posterior_cs2(data, spec, basis, study.mcmc, s_post);
      break;
    }
    case ModelFamily::kToyNormalConjugate: {
      Dataset data = simulate_covariates_toy(spec);
      data = simulate_response(spec, theta, data, s_resp);
      post = uses_conjugate(spec, study.sampler)
                 ? sample_posterior_conjugate(spec, data, study.mcmc.target_s, s_post, study.mcmc.fault)
                 : sample_posterior_toy_mcmc(data, spec, study.mcmc, s_post);
      break;
    }
    case ModelFamily::kToyBernoulli:
      fail(ErrorCode::kConfig, "SBC is not available for the Bernoulli toy");
  }

  ReplicationOutput out;
  add_diagnostics(out, post);
  for (const auto& name : post.schema) {
    if (!theta.values.count(name)) continue;
    const auto column = post.column(name);
    RankRecord rec{r, name, name, rank_statistic(theta.values.at(name), column, &out.ties), post.size()};
    out.records.push_back(std::move(rec));
  }
  return out;
}

// One QOI evaluated on a parameter draw with its own random stream.
struct Evaluator {
  std::string label;
  std::function<double(const ParameterDraw&, SeedStream&)> eval;
};

void rank_all(ReplicationOutput& out, long r, const std::vector<Evaluator>& prior_side,
              const std::vector<Evaluator>& posterior_side, const std::vector<std::pair<int, int>>& pairs,
              const ParameterDraw& theta, const PosteriorMatrix& post, const SeedStream& root) {
  std::vector<double> prior_values;
  for (const auto& e : prior_side) {
    SeedStream st = root.derive("prior_qoi").derive(e.label);
    prior_values.push_back(e.eval(theta, st));
  }
  std::vector<std::vector<double>> posterior_values;
  for (const auto& e : posterior_side) {
    const SeedStream base = root.derive("posterior_qoi").derive(e.label);
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(post.size()));
    for (int s = 0; s < post.size(); ++s) {
      SeedStream st = base.derive(static_cast<std::uint64_t>(s));
      vals.push_back(e.eval(post.draw(s), st));
    }
    posterior_values.push_back(std::move(vals));
  }
  for (const auto& [i, j] : pairs) {
    const auto a = static_cast<std::size_t>(i);
    const auto b = static_cast<std::size_t>(j);
    RankRecord rec{r, prior_side[a].label, posterior_side[b].label,
                   rank_statistic(prior_values[a], posterior_values[b], &out.ties), post.size()};
    out.records.push_back(std::move(rec));
  }
}

void check_jensen(ReplicationOutput& out, const ParameterDraw& p, double x) {
  if (!(p.at("sigma_gamma") > 0.0)) return;
  ++out.jensen_checked;
  if (!(qoi_version_b(p, x) > qoi_version_a(p, x))) ++out.jensen_violations;
}

ReplicationOutput cs1_replication(const StudyConfig& study, const ModelSpec& spec, long r) {
  const SeedStream root = replication_root(study, r);
  SeedStream s_prior = root.derive("prior");
  SeedStream s_cov = root.derive("covariates");
  SeedStream s_resp = root.derive("response");
  SeedStream s_post = root.derive("posterior");
  const ParameterDraw theta = draw_prior(spec, s_prior);
  Dataset data = simulate_covariates_cs1(spec, s_cov);
  data = simulate_response(spec, theta, data, s_resp);
  const PosteriorMatrix post = sample_posterior_cs1(data, spec, study.mcmc, s_post);

  GridSpec ga;
  ga.kind = DatasetTag::kReplicateA;
  ga.x_fixed = study.x_fixed;
  const Dataset grid_a = build_replicate_structure(data, ga);
  GridSpec gb;
  gb.kind = DatasetTag::kRefGridB;
  gb.x_fixed = study.x_fixed;
  gb.n_new_levels = study.n_new_levels;
  const Dataset grid_b = build_reference_grid(gb, static_cast<int>(data.level_registry.size()));
  const std::vector<int> existing = data.level_registry;
  const double x = study.x_fixed;

  auto make = [&](const std::string& text) {
    const QoiLabel label = QoiLabel::parse(text);
    Evaluator e;
    e.label = text;
    switch (label.version) {
      case QoiVersion::kACond:
        e.eval = [x](const ParameterDraw& p, SeedStream&) { return qoi_version_a(p, x); };
        break;
      case QoiVersion::kBMarg:
        e.eval = [x](const ParameterDraw& p, SeedStream&) { return qoi_version_b(p, x); };
        break;
      case QoiVersion::kCMean: {
        const Dataset* grid = *label.structure == DatasetTag::kReplicateA ? &grid_a : &grid_b;
        const NewLevelSampling sampling = *label.sampling;
        e.eval = [&spec, grid, sampling, &existing](const ParameterDraw& p, SeedStream& st) {
          return qoi_version_c(spec, p, *grid, sampling, existing, st);
        };
        break;
      }
    }
    return e;
  };
  std::vector<Evaluator> prior_side;
  std::vector<Evaluator> posterior_side;
  for (const auto& l : study.prior_labels) prior_side.push_back(make(l));
  for (const auto& l : study.posterior_labels) posterior_side.push_back(make(l));
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < prior_side.size(); ++i) {
    for (std::size_t j = 0; j < posterior_side.size(); ++j) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  }

  ReplicationOutput out;
  add_diagnostics(out, post);
  rank_all(out, r, prior_side, posterior_side, pairs, theta, post, root);
  check_jensen(out, theta, x);
  for (int s = 0; s < post.size(); ++s) check_jensen(out, post.draw(s), x);
  return out;
}

ReplicationOutput cs2_replication(const StudyConfig& study, const ModelSpec& spec, long r) {
  const SeedStream root = replication_root(study, r);
  SeedStream s_prior = root.derive("prior");
  SeedStream s_cov = root.derive("covariates");
  SeedStream s_resp = root.derive("response");
  SeedStream s_post = root.derive("posterior");
  const ParameterDraw theta = draw_prior(spec, s_prior);
  Dataset data = simulate_covariates_cs2(spec, theta, s_cov);
  const SmoothReparam basis = build_smooth(data, spec.k);
  if (basis.penalized != spec.smooth_rank()) {
    fail(ErrorCode::kNumericalConditioning, "smooth penalty lost rank on the simulated covariates");
  }
  data = simulate_response(spec, theta, data, s_resp, &basis);
  const PosteriorMatrix post = sample_posterior_cs2(data, spec, basis, study.mcmc, s_post);
  const auto axis = midpoint_axis(study.grid_resolution);

  std::vector<Evaluator> prior_side;
  std::vector<Evaluator> posterior_side;
  std::vector<std::pair<int, int>> pairs;
  for (double x : study.x_fixed_values) {
    Evaluator pe;
    pe.label = "pred@" + x_tag(x);
    pe.eval = [&spec, &basis, x, n = study.prediction_n](const ParameterDraw& p, SeedStream& st) {
      return qoi_cs2_predicted_mean(spec, p, basis, x, n, st);
    };
    prior_side.push_back(std::move(pe));
    for (const auto& name : study.weight_schemes) {
      const WeightScheme scheme = weight_scheme_from_string(name);
      Evaluator e;
      e.label = name + "@" + x_tag(x);
      e.eval = [&basis, x, &axis, scheme](const ParameterDraw& p, SeedStream&) {
        return qoi_cs2_conditional_expectation(p, basis, x, axis, scheme);
      };
      pairs.emplace_back(static_cast<int>(prior_side.size()) - 1, static_cast<int>(posterior_side.size()));
      posterior_side.push_back(std::move(e));
    }
  }

  ReplicationOutput out;
  add_diagnostics(out, post);
  rank_all(out, r, prior_side, posterior_side, pairs, theta, post, root);

  auto audit = [&](const ParameterDraw& p) {
    for (const WeightScheme scheme : {WeightScheme::kWeightedA, WeightScheme::kUnweightedB}) {
      Eigen::MatrixXd f;
      const AnovaComponents c = decompose_cs2_draw(p, basis, axis, axis, scheme, &f);
      ++out.anova_count;
      out.anova_identity_max = std::max(out.anova_identity_max, c.identity_error(f));
      out.anova_centering_max = std::max(out.anova_centering_max, c.centering_error());
    }
  };
  audit(theta);
  for (int s = 0; s < post.size(); ++s) audit(post.draw(s));
  return out;
}

bool is_direct(const std::string& label) {
  if (label.rfind("pred@", 0) == 0) return false;
  if (label.find('@') != std::string::npos) return true;  // CS2 weighted expectations
  return QoiLabel::parse(label).version != QoiVersion::kCMean;
}

}  // namespace

ReplicationBatch run_sbc_batch(const StudyConfig& study) {
  study.validate();
  const ModelSpec spec = study.model_spec();
  return run_batch(study, [&](long r) { return sbc_replication(study, spec, r); });
}

std::vector<RankRecord> run_sbc(const ModelSpec& spec, int replications, const McmcConfig& cfg,
                                std::uint64_t master_seed, SamplerChoice sampler, int workers) {
  spec.validate();
  StudyConfig study;
  study.study_case = StudyCase::kSbcOnly;
  study.replications = replications;
  study.mcmc = cfg;
  study.master_seed = master_seed;
  study.sampler = sampler;
  study.workers = workers;
  if (replications < 1) fail(ErrorCode::kPrecondition, "SBC needs R >= 1");
  const ReplicationBatch batch = run_batch(study, [&](long r) { return sbc_replication(study, spec, r); });
  if (batch.failure) {
    if (batch.failure->code == ErrorCode::kSamplerQuality) {
      throw SamplerQualityError("replication " + std::to_string(batch.failure->replication) + ": " +
                                    batch.failure->message,
                                batch.failure->replication);
    }
    throw Error(batch.failure->code,
                "replication " + std::to_string(batch.failure->replication) + ": " + batch.failure->message);
  }
  return batch.records();
}

ReplicationBatch run_qoi_check_batch(const StudyConfig& study) {
  study.validate();
  const ModelSpec spec = study.model_spec();
  switch (study.study_case) {
    case StudyCase::kCs1:
      if (study.prior_labels.empty() || study.posterior_labels.empty()) {
        fail(ErrorCode::kConfig, "QOI check needs prior and posterior labels");
      }
      return run_batch(study, [&](long r) { return cs1_replication(study, spec, r); });
    case StudyCase::kCs2:
      if (study.x_fixed_values.empty() || study.weight_schemes.empty()) {
        fail(ErrorCode::kConfig, "CS2 QOI check needs x_fixed_values and weight_schemes");
      }
      return run_batch(study, [&](long r) { return cs2_replication(study, spec, r); });
    default:
      fail(ErrorCode::kConfig, "QOI checks need case CS1 or CS2");
  }
}

namespace {

std::vector<RankRecord> unwrap(const ReplicationBatch& batch) {
  if (batch.failure) {
    const std::string msg =
        "replication " + std::to_string(batch.failure->replication) + ": " + batch.failure->message;
    if (batch.failure->code == ErrorCode::kSamplerQuality) throw SamplerQualityError(msg, batch.failure->replication);
    throw Error(batch.failure->code, msg);
  }
  return batch.records();
}

}  // namespace

std::vector<RankRecord> run_qoi_check_prior_derived(const StudyConfig& study) {
  if (study.study_case != StudyCase::kCs1) {
    fail(ErrorCode::kPrecondition, "the prior-derived variant needs direct prior-side QOIs (CS1)");
  }
  for (const auto& l : study.prior_labels) {
    if (!is_direct(l)) fail(ErrorCode::kPrecondition, "prior-side label '" + l + "' is not a direct function of the draw");
  }
  return unwrap(run_qoi_check_batch(study));
}

std::vector<RankRecord> run_qoi_check_prior_predicted(const StudyConfig& study) {
  // CS2 posterior-side QOIs are always weighted expectations of the draw.
  if (study.study_case == StudyCase::kCs1) {
    for (const auto& l : study.posterior_labels) {
      if (!is_direct(l)) fail(ErrorCode::kPrecondition, "posterior-side label '" + l + "' is not a direct function of the draw");
    }
  }
  return unwrap(run_qoi_check_batch(study));
}

std::vector<Comparison> group_comparisons(const std::vector<RankRecord>& records) {
  std::vector<Comparison> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& rec : records) {
    const auto key = std::make_pair(rec.prior_label, rec.posterior_label);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({rec.prior_label, rec.posterior_label, {}});
    }
    out[it->second].records.push_back(rec);
  }
  return out;
}

void write_ranks_csv(const std::vector<RankRecord>& records, std::ostream& out) {
  out << "replication,prior_label,posterior_label,k,S\n";
  for (const auto& r : records) {
    out << r.replication << ',' << r.prior_label << ',' << r.posterior_label << ',' << r.k << ',' << r.s << '\n';
  }
}

namespace {

nlohmann::json to_json_obj(const UniformityReport& r) {
  nlohmann::json j;
  j["prior_label"] = r.prior_label;
  j["posterior_label"] = r.posterior_label;
  j["R"] = r.r;
  j["S"] = r.s;
  j["alpha"] = r.alpha;
  j["gamma"] = r.gamma;
  j["eval_points"] = r.eval_points;
  j["ecdf"] = r.ecdf;
  j["band_lo"] = r.band_lo;
  j["band_hi"] = r.band_hi;
  j["pass"] = r.pass;
  j["chi2_stat"] = r.chi2.stat;
  j["chi2_df"] = r.chi2.df;
  j["chi2_p"] = r.chi2.p;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

UniformityReport from_json_obj(const nlohmann::json& j) {
  try {
    UniformityReport r;
    r.prior_label = j.at("prior_label").get<std::string>();
    r.posterior_label = j.at("posterior_label").get<std::string>();
    r.r = j.at("R").get<int>();
    r.s = j.at("S").get<int>();
    r.alpha = j.at("alpha").get<double>();
    r.gamma = j.at("gamma").get<double>();
    r.eval_points = j.at("eval_points").get<std::vector<double>>();
    r.ecdf = j.at("ecdf").get<std::vector<double>>();
    r.band_lo = j.at("band_lo").get<std::vector<double>>();
    r.band_hi = j.at("band_hi").get<std::vector<double>>();
    r.pass = j.at("pass").get<bool>();
    r.chi2.stat = j.at("chi2_stat").get<double>();
    r.chi2.df = j.at("chi2_df").get<int>();
    r.chi2.p = j.at("chi2_p").get<double>();
    if (j.contains("note")) r.note = j.at("note").get<std::string>();
    const auto k = r.eval_points.size();
    if (r.ecdf.size() != k || r.band_lo.size() != k || r.band_hi.size() != k) {
      fail(ErrorCode::kPrecondition, "report arrays have mismatched lengths");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed report: ") + e.what());
  }
}

}  // namespace

std::string report_to_json(const UniformityReport& report) { return to_json_obj(report).dump(2); }

std::string reports_to_json(const std::vector<UniformityReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json_obj(r));
  return arr.dump(2);
}

UniformityReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("report is not valid JSON: ") + e.what());
  }
  if (j.is_array()) {
    if (j.empty()) fail(ErrorCode::kConfig, "report array is empty");
    return from_json_obj(j.front());
  }
  return from_json_obj(j);
}

std::vector<UniformityReport> reports_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("report is not valid JSON: ") + e.what());
  }
  std::vector<UniformityReport> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(from_json_obj(e));
  } else {
    out.push_back(from_json_obj(j));
  }
  return out;
}

}  // namespace qoicheck
