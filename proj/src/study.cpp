// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/study.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "qoicheck/error.hpp"
#include "qoicheck/qoi.hpp"

namespace qoicheck {

using nlohmann::json;

const char* to_string(StudyCase c) noexcept {
  switch (c) {
    case StudyCase::kCs1: return "CS1";
    case StudyCase::kCs2: return "CS2";
    case StudyCase::kSbcOnly: return "SBC_ONLY";
    case StudyCase::kToy: return "TOY";
  }
  return "?";
}

ModelSpec StudyConfig::model_spec() const {
  ModelSpec spec;
  std::string m = model;
  if (study_case == StudyCase::kCs1) m = "cs1";
  if (study_case == StudyCase::kCs2) m = "cs2";
  if (study_case == StudyCase::kToy) m = "toy_normal";
  if (m == "cs1") {
    spec = ModelSpec::cs1(n, g);
  } else if (m == "cs2") {
    spec = ModelSpec::cs2(n, k);
  } else if (m == "toy_normal") {
    spec = ModelSpec::toy_normal(n);
  } else {
    fail(ErrorCode::kConfig, "unknown model '" + m + "'");
  }
  for (const auto& [name, prior] : prior_overrides) {
    if (!spec.priors.count(name)) fail(ErrorCode::kConfig, "prior override for unknown parameter '" + name + "'");
    spec.priors[name] = prior;
  }
  spec.validate();
  return spec;
}

void StudyConfig::validate() const {
  if (replications < 1) fail(ErrorCode::kConfig, "R must be >= 1");
  if (n < 1) fail(ErrorCode::kConfig, "N must be >= 1");
  if (g < 1) fail(ErrorCode::kConfig, "G must be >= 1");
  if (k < 4) fail(ErrorCode::kConfig, "k must be >= 4");
  if (n_new_levels < 1) fail(ErrorCode::kConfig, "n_new_levels must be >= 1");
  if (grid_resolution < 2) fail(ErrorCode::kConfig, "grid_resolution must be >= 2");
  if (prediction_n < 1) fail(ErrorCode::kConfig, "prediction_n must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::kConfig, "alpha must lie in (0,1)");
  if (band_draws < 100) fail(ErrorCode::kConfig, "band_draws must be >= 100");
  if (band_points < 1) fail(ErrorCode::kConfig, "band_points must be >= 1");
  if (workers < 1) fail(ErrorCode::kConfig, "workers must be >= 1");
  for (double x : x_fixed_values) {
    if (!(x > 0.0 && x < 1.0)) fail(ErrorCode::kConfig, "x_fixed_values must lie inside (0,1)");
  }
  for (const auto& l : prior_labels) QoiLabel::parse(l);
  for (const auto& l : posterior_labels) QoiLabel::parse(l);
  for (const auto& w : weight_schemes) weight_scheme_from_string(w);
  try {
    mcmc.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  model_spec();
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(ErrorCode::kConfig, where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) fail(ErrorCode::kConfig, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

StudyConfig parse_study_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc,
                 {"case", "model", "R", "N", "G", "k", "n_new_levels", "x_fixed", "x_fixed_values", "grid_resolution",
                  "prediction_n", "priors", "mcmc", "sampler", "prior_labels", "posterior_labels", "weight_schemes",
                  "alpha", "band_draws", "band_points", "master_seed", "workers", "output_dir"},
                 "config");
  StudyConfig c;
  std::string kind = "CS1";
  read(doc, "case", kind);
  if (kind == "CS1") c.study_case = StudyCase::kCs1;
  else if (kind == "CS2") c.study_case = StudyCase::kCs2;
  else if (kind == "SBC_ONLY") c.study_case = StudyCase::kSbcOnly;
  else if (kind == "TOY") c.study_case = StudyCase::kToy;
  else fail(ErrorCode::kConfig, "unknown case '" + kind + "'");

  // Case defaults first, then explicit values.
  switch (c.study_case) {
    case StudyCase::kCs1:
      c.replications = 100, c.n = 500, c.g = 20;
      break;
    case StudyCase::kCs2:
      c.replications = 20, c.n = 10000, c.k = 10;
      c.x_fixed_values = {0.1, 0.25, 0.5, 0.75, 0.9};
      break;
    case StudyCase::kSbcOnly:
      c.replications = 100;
      break;
    case StudyCase::kToy:
      c.replications = 1000, c.n = 10;
      break;
  }
  read(doc, "model", c.model);
  if (c.study_case == StudyCase::kSbcOnly && !doc.contains("N")) {
    if (c.model == "cs2") c.n = 10000;
    if (c.model == "toy_normal") c.n = 10;
  }
  read(doc, "R", c.replications);
  read(doc, "N", c.n);
  read(doc, "G", c.g);
  read(doc, "k", c.k);
  read(doc, "n_new_levels", c.n_new_levels);
  read(doc, "x_fixed", c.x_fixed);
  read(doc, "x_fixed_values", c.x_fixed_values);
  read(doc, "grid_resolution", c.grid_resolution);
  c.prediction_n = c.n;
  read(doc, "prediction_n", c.prediction_n);
  read(doc, "prior_labels", c.prior_labels);
  read(doc, "posterior_labels", c.posterior_labels);
  read(doc, "weight_schemes", c.weight_schemes);
  read(doc, "alpha", c.alpha);
  read(doc, "band_draws", c.band_draws);
  read(doc, "band_points", c.band_points);
  read(doc, "master_seed", c.master_seed);
  read(doc, "workers", c.workers);
  read(doc, "output_dir", c.output_dir);

  if (c.study_case == StudyCase::kCs1) {
    std::vector<std::string> all;
    for (const auto& l : cs1_labels()) all.push_back(l.str());
    if (c.prior_labels.empty()) c.prior_labels = all;
    if (c.posterior_labels.empty()) c.posterior_labels = all;
  }
  if (c.study_case == StudyCase::kCs2 && c.weight_schemes.empty()) c.weight_schemes = {"WEIGHTED_A", "UNWEIGHTED_B"};

  std::string sampler = "auto";
  read(doc, "sampler", sampler);
  if (sampler == "auto") c.sampler = SamplerChoice::kAuto;
  else if (sampler == "conjugate") c.sampler = SamplerChoice::kConjugate;
  else if (sampler == "mcmc") c.sampler = SamplerChoice::kMcmc;
  else fail(ErrorCode::kConfig, "unknown sampler '" + sampler + "'");

  if (doc.contains("priors")) {
    const auto& priors = doc.at("priors");
    if (!priors.is_object()) fail(ErrorCode::kConfig, "priors must be an object");
    for (const auto& [name, p] : priors.items()) {
      reject_unknown(p, {"kind", "a", "b"}, "priors." + name);
      std::string k = "normal";
      PriorSpec spec;
      read(p, "kind", k);
      try {
        spec.kind = prior_kind_from_string(k);
      } catch (const Error& e) {
        fail(ErrorCode::kConfig, e.what());
      }
      read(p, "a", spec.a);
      read(p, "b", spec.b);
      try {
        spec.validate(name);
      } catch (const Error& e) {
        fail(ErrorCode::kConfig, e.what());
      }
      c.prior_overrides[name] = spec;
    }
  }

  if (doc.contains("mcmc")) {
    const auto& m = doc.at("mcmc");
    reject_unknown(m,
                   {"chains", "warmup", "post_warmup", "S", "target_acceptance", "ess_floor_fraction", "max_attempts",
                    "max_stored_per_chain", "fault"},
                   "mcmc");
    read(m, "chains", c.mcmc.chains);
    read(m, "warmup", c.mcmc.warmup);
    read(m, "post_warmup", c.mcmc.post_warmup);
    read(m, "S", c.mcmc.target_s);
    read(m, "target_acceptance", c.mcmc.rw_target_acceptance);
    read(m, "ess_floor_fraction", c.mcmc.ess_floor_fraction);
    read(m, "max_attempts", c.mcmc.max_attempts);
    read(m, "max_stored_per_chain", c.mcmc.max_stored_per_chain);
    std::string fault = "none";
    read(m, "fault", fault);
    c.mcmc.fault = fault_from_string(fault);
  }
  c.validate();
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_study_config(buf.str());
}

}  // namespace qoicheck
