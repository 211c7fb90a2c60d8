// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/model.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "qoicheck/error.hpp"
#include "qoicheck/smooth.hpp"

namespace qoicheck {

const char* to_string(ModelFamily family) noexcept {
  switch (family) {
    case ModelFamily::kCs1MultilevelLogLink: return "CS1_MULTILEVEL_LOGLINK";
    case ModelFamily::kCs2SmoothJoint: return "CS2_SMOOTH_JOINT";
    case ModelFamily::kToyNormalConjugate: return "TOY_NORMAL_CONJUGATE";
    case ModelFamily::kToyBernoulli: return "TOY_BERNOULLI";
  }
  return "?";
}

const char* to_string(PriorSpec::Kind kind) noexcept {
  switch (kind) {
    case PriorSpec::Kind::kNormal: return "normal";
    case PriorSpec::Kind::kTruncatedNormalPositive: return "normal_pos";
    case PriorSpec::Kind::kUniform: return "uniform";
    case PriorSpec::Kind::kPointMass: return "point";
  }
  return "?";
}

PriorSpec::Kind prior_kind_from_string(const std::string& name) {
  if (name == "normal") return PriorSpec::Kind::kNormal;
  if (name == "normal_pos") return PriorSpec::Kind::kTruncatedNormalPositive;
  if (name == "uniform") return PriorSpec::Kind::kUniform;
  if (name == "point") return PriorSpec::Kind::kPointMass;
  fail(ErrorCode::kConfig, "unknown prior distribution '" + name + "'");
}

double PriorSpec::sample(SeedStream& stream) const {
  switch (kind) {
    case Kind::kNormal: return sample_normal(a, b, stream);
    case Kind::kTruncatedNormalPositive: return sample_truncated_normal_positive(a, b, stream);
    case Kind::kUniform: return sample_uniform(a, b, stream);
    case Kind::kPointMass: return a;
  }
  return a;
}

double PriorSpec::log_density(double v) const {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  switch (kind) {
    case Kind::kNormal: {
      const double z = (v - a) / b;
      return -0.5 * z * z;
    }
    case Kind::kTruncatedNormalPositive: {
      if (!(v > 0.0)) return kNegInf;
      const double z = (v - a) / b;
      return -0.5 * z * z;
    }
    case Kind::kUniform: return (v >= a && v <= b) ? 0.0 : kNegInf;
    case Kind::kPointMass: return v == a ? 0.0 : kNegInf;
  }
  return kNegInf;
}

void PriorSpec::validate(const std::string& name) const {
  if (!std::isfinite(a) || !std::isfinite(b)) fail(ErrorCode::kParameterDomain, "prior '" + name + "' has non-finite hyperparameters");
  if ((kind == Kind::kNormal || kind == Kind::kTruncatedNormalPositive) && !(b > 0.0)) {
    fail(ErrorCode::kParameterDomain, "prior '" + name + "' needs sd > 0");
  }
  if (kind == Kind::kUniform && !(a < b)) fail(ErrorCode::kParameterDomain, "prior '" + name + "' needs lower < upper");
}

ModelSpec ModelSpec::cs1(int n, int g) {
  ModelSpec s;
  s.family = ModelFamily::kCs1MultilevelLogLink;
  s.n = n;
  s.g = g;
  s.priors = {
      {"beta0", PriorSpec::normal(0.0, 0.1)},
      {"beta1", PriorSpec::normal(1.0, 0.1)},
      {"sigma_gamma", PriorSpec::normal_pos(0.5, 0.1)},
      {"sigma", PriorSpec::normal_pos(1.0, 0.1)},
  };
  return s;
}

ModelSpec ModelSpec::cs2(int n, int k) {
  ModelSpec s;
  s.family = ModelFamily::kCs2SmoothJoint;
  s.n = n;
  s.k = k;
  s.priors = {
      {"beta0_x", PriorSpec::normal(0.0, 0.001)},
      {"beta0_z", PriorSpec::normal(-1.1, 0.001)},
      {"beta0_y", PriorSpec::normal(0.5, 0.1)},
      {"beta_s1", PriorSpec::normal(1.0, 0.1)},
      {"beta_s2", PriorSpec::normal(-1.0, 0.1)},
      {"sigma_s", PriorSpec::normal_pos(1.0, 0.1)},
      {"phi_x", PriorSpec::normal_pos(3.0, 0.001)},
      {"phi_z", PriorSpec::normal_pos(3.0, 0.001)},
      {"sigma_y", PriorSpec::normal_pos(0.1, 0.01)},
  };
  return s;
}

ModelSpec ModelSpec::toy_normal(int n, double m0, double s0) {
  ModelSpec s;
  s.family = ModelFamily::kToyNormalConjugate;
  s.n = n;
  s.priors = {{"theta", PriorSpec::normal(m0, s0)}};
  return s;
}

ModelSpec ModelSpec::toy_bernoulli(int n) {
  ModelSpec s;
  s.family = ModelFamily::kToyBernoulli;
  s.n = n;
  s.priors = {{"theta", PriorSpec::uniform(0.0, 1.0)}};
  return s;
}

std::vector<std::string> ModelSpec::prior_names() const {
  switch (family) {
    case ModelFamily::kCs1MultilevelLogLink: return {"beta0", "beta1", "sigma_gamma", "sigma"};
    case ModelFamily::kCs2SmoothJoint:
      return {"beta0_x", "phi_x", "beta0_z", "phi_z", "beta0_y", "sigma_y", "beta_s1", "beta_s2", "sigma_s"};
    case ModelFamily::kToyNormalConjugate:
    case ModelFamily::kToyBernoulli: return {"theta"};
  }
  return {};
}

const PriorSpec& ModelSpec::prior(const std::string& name) const {
  const auto it = priors.find(name);
  if (it == priors.end()) fail(ErrorCode::kPrecondition, "model has no prior for '" + name + "'");
  return it->second;
}

void ModelSpec::validate() const {
  const auto names = prior_names();
  if (priors.size() != names.size()) fail(ErrorCode::kPrecondition, "prior configuration does not match the parameter schema");
  for (const auto& name : names) prior(name).validate(name);
  switch (family) {
    case ModelFamily::kCs1MultilevelLogLink:
      if (g < 1 || n < g) fail(ErrorCode::kPrecondition, "CS1 requires N >= G >= 1");
      for (const char* scale : {"sigma_gamma", "sigma"}) {
        if (prior(scale).kind != PriorSpec::Kind::kTruncatedNormalPositive) {
          fail(ErrorCode::kPrecondition, std::string("CS1 prior for ") + scale + " must be normal_pos");
        }
      }
      break;
    case ModelFamily::kCs2SmoothJoint:
      if (k < 4) fail(ErrorCode::kPrecondition, "CS2 requires k >= 4");
      if (n < 1) fail(ErrorCode::kPrecondition, "CS2 requires N >= 1");
      for (const char* scale : {"phi_x", "phi_z", "sigma_y", "sigma_s"}) {
        if (prior(scale).kind != PriorSpec::Kind::kTruncatedNormalPositive) {
          fail(ErrorCode::kPrecondition, std::string("CS2 prior for ") + scale + " must be normal_pos");
        }
      }
      break;
    case ModelFamily::kToyNormalConjugate:
      if (prior("theta").kind != PriorSpec::Kind::kNormal) fail(ErrorCode::kPrecondition, "toy normal prior must be normal");
      if (n < 0) fail(ErrorCode::kPrecondition, "toy N must be >= 0");
      break;
    case ModelFamily::kToyBernoulli: {
      const auto& p = prior("theta");
      if (p.kind == PriorSpec::Kind::kUniform && (p.a < 0.0 || p.b > 1.0)) {
        fail(ErrorCode::kPrecondition, "toy Bernoulli prior must live in [0,1]");
      }
      if (p.kind == PriorSpec::Kind::kPointMass && (p.a < 0.0 || p.a > 1.0)) {
        fail(ErrorCode::kPrecondition, "toy Bernoulli prior must live in [0,1]");
      }
      if (p.kind == PriorSpec::Kind::kNormal || p.kind == PriorSpec::Kind::kTruncatedNormalPositive) {
        fail(ErrorCode::kPrecondition, "toy Bernoulli prior must be uniform or point");
      }
      break;
    }
  }
}

std::string group_key(int level) { return "gamma[" + std::to_string(level) + "]"; }
std::string smooth_key(int l) { return "b[" + std::to_string(l) + "]"; }

bool ParameterDraw::has(const std::string& name) const { return values.count(name) || extension.count(name); }

double ParameterDraw::at(const std::string& name) const {
  if (auto it = values.find(name); it != values.end()) return it->second;
  if (auto it = extension.find(name); it != extension.end()) return it->second;
  fail(ErrorCode::kMissingCoefficient, "parameter '" + name + "' is not present in the draw");
}

void ParameterDraw::set_extension(const std::string& name, double v) {
  if (values.count(name)) fail(ErrorCode::kPrecondition, "extension key '" + name + "' collides with a core parameter");
  extension[name] = v;
}

std::vector<std::string> parameter_schema(const ModelSpec& spec, int penalized) {
  std::vector<std::string> out;
  switch (spec.family) {
    case ModelFamily::kCs1MultilevelLogLink:
      out = {"beta0", "beta1", "sigma_gamma", "sigma"};
      for (int g = 1; g <= spec.g; ++g) out.push_back(group_key(g));
      break;
    case ModelFamily::kCs2SmoothJoint: {
      out = {"beta0_x", "phi_x", "beta0_z", "phi_z", "beta0_y", "sigma_y", "beta_s1", "beta_s2", "sigma_s"};
      const int count = penalized < 0 ? spec.smooth_rank() : penalized;
      for (int l = 1; l <= count; ++l) out.push_back(smooth_key(l));
      break;
    }
    case ModelFamily::kToyNormalConjugate:
    case ModelFamily::kToyBernoulli: out = {"theta"}; break;
  }
  return out;
}

bool is_scale_parameter(const std::string& name) {
  return name == "sigma" || name == "sigma_gamma" || name == "sigma_y" || name == "sigma_s" || name == "phi_x" ||
         name == "phi_z";
}

ParameterDraw draw_prior(const ModelSpec& spec, SeedStream& stream) {
  spec.validate();
  ParameterDraw p;
  for (const auto& name : spec.prior_names()) p.values[name] = spec.prior(name).sample(stream);
  if (spec.family == ModelFamily::kCs1MultilevelLogLink) {
    const double sg = p.values.at("sigma_gamma");
    for (int g = 1; g <= spec.g; ++g) p.values[group_key(g)] = sample_normal(0.0, sg, stream);
  } else if (spec.family == ModelFamily::kCs2SmoothJoint) {
    const double ss = p.values.at("sigma_s");
    for (int l = 1; l <= spec.smooth_rank(); ++l) p.values[smooth_key(l)] = sample_normal(0.0, ss, stream);
  }
  return p;
}

Dataset simulate_covariates_cs1(const ModelSpec& spec, SeedStream& stream) {
  if (spec.family != ModelFamily::kCs1MultilevelLogLink) fail(ErrorCode::kPrecondition, "CS1 covariates need a CS1 spec");
  if (spec.n < 1 || spec.g < 1) fail(ErrorCode::kPrecondition, "CS1 covariates need N >= 1 and G >= 1");
  Dataset d;
  d.tag = DatasetTag::kOriginal;
  d.rows.resize(static_cast<std::size_t>(spec.n));
  for (auto& r : d.rows) r.x = sample_uniform(0.0, 2.0, stream);
  const auto groups = sample_group_assignment(spec.n, spec.g, stream);
  for (std::size_t i = 0; i < groups.size(); ++i) d.rows[i].group = groups[i];
  for (int g = 1; g <= spec.g; ++g) d.level_registry.push_back(g);
  return d;
}

Dataset simulate_covariates_cs2(const ModelSpec& spec, const ParameterDraw& params, SeedStream& stream) {
  if (spec.family != ModelFamily::kCs2SmoothJoint) fail(ErrorCode::kPrecondition, "CS2 covariates need a CS2 spec");
  const double mu_x = logistic(params.at("beta0_x"));
  const double mu_z = logistic(params.at("beta0_z"));
  const double phi_x = params.at("phi_x");
  const double phi_z = params.at("phi_z");
  Dataset d;
  d.tag = DatasetTag::kOriginal;
  d.rows.resize(static_cast<std::size_t>(spec.n));
  for (auto& r : d.rows) r.x = sample_beta_mean_precision(mu_x, phi_x, stream);
  for (auto& r : d.rows) r.z = sample_beta_mean_precision(mu_z, phi_z, stream);
  return d;
}

Dataset simulate_covariates_toy(const ModelSpec& spec) {
  Dataset d;
  d.rows.resize(static_cast<std::size_t>(std::max(spec.n, 0)));
  return d;
}

std::vector<double> linear_predictor(const ModelSpec& spec, const ParameterDraw& params, const Dataset& data,
                                     const SmoothReparam* smooth) {
  std::vector<double> eta(data.size());
  switch (spec.family) {
    case ModelFamily::kCs1MultilevelLogLink: {
      const double b0 = params.at("beta0");
      const double b1 = params.at("beta1");
      std::unordered_map<int, double> coef;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const Row& r = data.rows[i];
        if (!r.group) fail(ErrorCode::kPrecondition, "CS1 rows need a group level");
        auto it = coef.find(*r.group);
        if (it == coef.end()) it = coef.emplace(*r.group, params.at(group_key(*r.group))).first;
        eta[i] = b0 + b1 * r.x + it->second;
      }
      break;
    }
    case ModelFamily::kCs2SmoothJoint: {
      if (smooth == nullptr) fail(ErrorCode::kPrecondition, "CS2 linear predictor needs the smooth reparameterization");
      const auto f = evaluate_smooth(*smooth, params, data);
      const double b0 = params.at("beta0_y");
      for (std::size_t i = 0; i < data.size(); ++i) eta[i] = b0 + f[i];
      break;
    }
    case ModelFamily::kToyNormalConjugate:
    case ModelFamily::kToyBernoulli: {
      const double theta = params.at("theta");
      for (auto& e : eta) e = theta;
      break;
    }
  }
  return eta;
}

Dataset simulate_response(const ModelSpec& spec, const ParameterDraw& params, const Dataset& data, SeedStream& stream,
                          const SmoothReparam* smooth) {
  const auto eta = linear_predictor(spec, params, data, smooth);
  Dataset out = data;
  switch (spec.family) {
    case ModelFamily::kCs1MultilevelLogLink: {
      const double sigma = params.at("sigma");
      for (std::size_t i = 0; i < eta.size(); ++i) out.rows[i].y = sample_normal(std::exp(eta[i]), sigma, stream);
      break;
    }
    case ModelFamily::kCs2SmoothJoint: {
      const double sigma = params.at("sigma_y");
      for (std::size_t i = 0; i < eta.size(); ++i) out.rows[i].y = sample_normal(eta[i], sigma, stream);
      break;
    }
    case ModelFamily::kToyNormalConjugate:
      for (std::size_t i = 0; i < eta.size(); ++i) out.rows[i].y = sample_normal(eta[i], 1.0, stream);
      break;
    case ModelFamily::kToyBernoulli:
      for (std::size_t i = 0; i < eta.size(); ++i) {
        if (eta[i] < 0.0 || eta[i] > 1.0) fail(ErrorCode::kParameterDomain, "Bernoulli probability outside [0,1]");
        out.rows[i].y = stream.uniform01() < eta[i] ? 1.0 : 0.0;
      }
      break;
  }
  return out;
}

}  // namespace qoicheck
