// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "qoicheck/error.hpp"

namespace qoicheck {

namespace fs = std::filesystem;

int effective_workers(const StudyConfig& config) {
  const char* env = std::getenv("QOI_CHECK_WORKERS");
  if (env == nullptr || *env == '\0') return config.workers;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096) fail(ErrorCode::kConfig, "QOI_CHECK_WORKERS must be a positive integer");
  return static_cast<int>(v);
}

namespace {

constexpr const char* kUnweightedNote =
    "UNWEIGHTED_B: expected to fail under a skewed z distribution because uniform averaging ignores p(z); "
    "this expectation is derived from the weighting mismatch, not taken from a published figure";

StudyResult finalize(const StudyConfig& config, ReplicationBatch batch) {
  StudyResult res;
  res.records = batch.records();
  for (const auto& o : batch.outputs) {
    if (!o) continue;
    res.jensen_checked += o->jensen_checked;
    res.jensen_violations += o->jensen_violations;
    res.anova_count += o->anova_count;
    res.anova_identity_max = std::max(res.anova_identity_max, o->anova_identity_max);
    res.anova_centering_max = std::max(res.anova_centering_max, o->anova_centering_max);
    res.ties += o->ties;
  }
  if (batch.failure) {
    res.exit_code = batch.failure->code == ErrorCode::kSamplerQuality ? kExitSamplerQuality
                    : batch.failure->code == ErrorCode::kConfig       ? kExitConfig
                                                                      : kExitOther;
    res.band_skipped_reason = "study aborted at replication " + std::to_string(batch.failure->replication);
  } else {
    const BandOptions opt{config.alpha, config.band_draws, config.band_points};
    const SeedStream band_stream(config.master_seed, hash_label("uniformity_band"));
    for (const auto& cmp : group_comparisons(res.records)) {
      try {
        UniformityReport rep = ecdf_uniformity_band(cmp.records, opt, band_stream);
        if (cmp.posterior_label.rfind("UNWEIGHTED_B", 0) == 0) rep.note = kUnweightedNote;
        res.reports.push_back(std::move(rep));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInsufficientReplications) throw;
        res.band_skipped_reason = e.what();
        res.reports.clear();
        break;
      }
    }
  }
  res.batch = std::move(batch);
  return res;
}

StudyConfig with_workers(const StudyConfig& config) {
  StudyConfig c = config;
  c.workers = effective_workers(config);
  return c;
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

nlohmann::json summary_json(const StudyConfig& config, const StudyResult& res) {
  nlohmann::json j;
  j["case"] = to_string(config.study_case);
  j["R"] = config.replications;
  j["S"] = config.mcmc.target_s;
  j["master_seed"] = config.master_seed;
  j["completed_replications"] = res.batch.completed();
  if (res.batch.failure) {
    j["failure"] = {{"replication", res.batch.failure->replication},
                    {"code", error_code_name(res.batch.failure->code)},
                    {"message", res.batch.failure->message}};
  }
  if (!res.band_skipped_reason.empty()) j["band_skipped"] = res.band_skipped_reason;
  j["ties"] = res.ties;
  j["jensen"] = {{"checked", res.jensen_checked}, {"violations", res.jensen_violations}};
  j["anova"] = {{"decompositions", res.anova_count},
                {"max_identity_error", res.anova_identity_max},
                {"max_centering_error", res.anova_centering_max}};
  long passed = 0;
  for (const auto& r : res.reports) passed += r.pass ? 1 : 0;
  j["cells"] = {{"total", res.reports.size()}, {"pass", passed}};

  // Per-parameter sampler diagnostics across replications.
  std::map<std::string, nlohmann::json> per_param;
  std::vector<std::string> order;
  for (const auto& o : res.batch.outputs) {
    if (!o) continue;
    for (std::size_t i = 0; i < o->schema.size() && i < o->diagnostics.size(); ++i) {
      const auto& name = o->schema[i];
      const auto& d = o->diagnostics[i];
      auto it = per_param.find(name);
      if (it == per_param.end()) {
        order.push_back(name);
        it = per_param.emplace(name, nlohmann::json{{"min_ess", std::numeric_limits<double>::infinity()},
                                                     {"max_rhat", 0.0},
                                                     {"mean_acceptance", 0.0},
                                                     {"replications", 0}})
                 .first;
      }
      auto& p = it->second;
      if (!d.degenerate) {
        p["min_ess"] = std::min(p["min_ess"].get<double>(), d.ess);
        p["max_rhat"] = std::max(p["max_rhat"].get<double>(), d.rhat);
      }
      const int n = p["replications"].get<int>();
      p["mean_acceptance"] = (p["mean_acceptance"].get<double>() * n + d.acceptance) / (n + 1);
      p["replications"] = n + 1;
    }
  }
  nlohmann::json diag = nlohmann::json::object();
  for (const auto& name : order) {
    auto p = per_param[name];
    if (std::isinf(p["min_ess"].get<double>())) p["min_ess"] = nullptr;
    diag[name] = p;
  }
  j["diagnostics"] = diag;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace

StudyResult execute_study(const StudyConfig& config) {
  const StudyConfig c = with_workers(config);
  c.validate();
  if (c.study_case == StudyCase::kSbcOnly || c.study_case == StudyCase::kToy) return finalize(c, run_sbc_batch(c));
  return finalize(c, run_qoi_check_batch(c));
}

StudyResult execute_self_sbc(const StudyConfig& config) {
  StudyConfig c = with_workers(config);
  if (c.study_case == StudyCase::kCs1) c.model = "cs1";
  if (c.study_case == StudyCase::kCs2) c.model = "cs2";
  if (c.study_case == StudyCase::kToy) c.model = "toy_normal";
  c.study_case = StudyCase::kSbcOnly;
  c.validate();
  return finalize(c, run_sbc_batch(c));
}

void write_artifacts(const StudyConfig& config, const StudyResult& result) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir / "plots", ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory '" + dir.string() + "': " + ec.message());
  {
    std::ostringstream ranks;
    write_ranks_csv(result.records, ranks);
    write_text(dir / "ranks.csv", ranks.str());
  }
  write_text(dir / "report.json", reports_to_json(result.reports) + "\n");
  write_text(dir / "summary.json", summary_json(config, result).dump(2) + "\n");
  for (const auto& rep : result.reports) emit_ecdf_plot(rep, (dir / "plots" / (plot_file_stem(rep) + ".svg")).string());
}

namespace {

int run_with(const std::string& config_path, bool self_sbc) {
  StudyConfig config;
  try {
    config = load_study_config(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return e.code() == ErrorCode::kIo ? kExitOther : kExitConfig;
  }
  try {
    const StudyResult res = self_sbc ? execute_self_sbc(config) : execute_study(config);
    write_artifacts(config, res);
    if (res.batch.failure) {
      std::cerr << "replication " << res.batch.failure->replication << " failed: " << res.batch.failure->message
                << '\n';
    }
    long passed = 0;
    for (const auto& r : res.reports) passed += r.pass ? 1 : 0;
    std::cerr << res.batch.completed() << " replications, " << passed << "/" << res.reports.size()
              << " cells inside the band; artifacts in " << config.output_dir << '\n';
    return res.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? kExitConfig : kExitOther;
  }
}

}  // namespace

int run_study(const std::string& config_path) { return run_with(config_path, false); }
int run_self_sbc(const std::string& config_path) { return run_with(config_path, true); }

std::string plot_file_stem(const UniformityReport& report) {
  std::string stem = report.prior_label + "__" + report.posterior_label;
  for (char& c : stem) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.' || c == '@';
    if (!ok) c = '_';
  }
  return stem;
}

std::string render_ecdf_svg(const UniformityReport& report) {
  const std::size_t k = report.eval_points.size();
  if (k == 0 || report.ecdf.size() != k || report.band_lo.size() != k || report.band_hi.size() != k) {
    fail(ErrorCode::kPrecondition, "report has no plottable points");
  }
  constexpr double width = 480.0;
  constexpr double height = 320.0;
  constexpr double left = 56.0;
  constexpr double right = 16.0;
  constexpr double top = 40.0;
  constexpr double bottom = 36.0;
  double span = 0.05;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = report.eval_points[i];
    span = std::max({span, std::abs(report.band_lo[i] - t), std::abs(report.band_hi[i] - t),
                     std::abs(report.ecdf[i] - t)});
  }
  span *= 1.1;
  auto px = [&](double t) { return left + t * (width - left - right); };
  auto py = [&](double d) { return top + (span - d) / (2.0 * span) * (height - top - bottom); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\" viewBox=\"0 0 480 320\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"480\" height=\"320\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(left, "%.1f") << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">"
      << xml_escape(report.prior_label) << " vs " << xml_escape(report.posterior_label) << " (R=" << report.r
      << ", S=" << report.s << ")</text>\n";

  svg << "<polygon fill=\"#c6dbef\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < k; ++i) {
    svg << fmt(px(report.eval_points[i]), "%.2f") << ',' << fmt(py(report.band_hi[i] - report.eval_points[i]), "%.2f")
        << ' ';
  }
  for (std::size_t i = k; i-- > 0;) {
    svg << fmt(px(report.eval_points[i]), "%.2f") << ',' << fmt(py(report.band_lo[i] - report.eval_points[i]), "%.2f");
    if (i > 0) svg << ' ';
  }
  svg << "\"/>\n";

  svg << "<line x1=\"" << fmt(px(0.0), "%.2f") << "\" y1=\"" << fmt(py(0.0), "%.2f") << "\" x2=\""
      << fmt(px(1.0), "%.2f") << "\" y2=\"" << fmt(py(0.0), "%.2f") << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";

  svg << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < k; ++i) {
    svg << fmt(px(report.eval_points[i]), "%.2f") << ',' << fmt(py(report.ecdf[i] - report.eval_points[i]), "%.2f");
    if (i + 1 < k) svg << ' ';
  }
  svg << "\"/>\n";

  svg << "<rect x=\"" << fmt(left, "%.1f") << "\" y=\"" << fmt(top, "%.1f") << "\" width=\""
      << fmt(width - left - right, "%.1f") << "\" height=\"" << fmt(height - top - bottom, "%.1f")
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : {0.0, 0.5, 1.0}) {
    svg << "<text x=\"" << fmt(px(t), "%.2f") << "\" y=\"" << fmt(height - 18.0, "%.1f")
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fmt(t, "%.1f") << "</text>\n";
  }
  for (double d : {-span / 1.1, 0.0, span / 1.1}) {
    svg << "<text x=\"" << fmt(left - 4.0, "%.1f") << "\" y=\"" << fmt(py(d) + 4.0, "%.2f")
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(d, "%.3f") << "</text>\n";
  }
  svg << "<text x=\"" << fmt(width / 2.0, "%.1f") << "\" y=\"" << fmt(height - 4.0, "%.1f")
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">fractional rank; ECDF minus uniform</text>\n";
  svg << "<text x=\"" << fmt(width - right - 4.0, "%.1f") << "\" y=\"" << fmt(top + 16.0, "%.1f")
      << "\" font-family=\"sans-serif\" font-size=\"14\" font-weight=\"bold\" text-anchor=\"end\" fill=\""
      << (report.pass ? "#1a7f37" : "#b42318") << "\">" << (report.pass ? "PASS" : "FAIL") << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void emit_ecdf_plot(const UniformityReport& report, const std::string& path) {
  const std::string svg = render_ecdf_svg(report);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write plot '" + path + "'");
  out << svg;
  if (!out) fail(ErrorCode::kIo, "write failed for plot '" + path + "'");
}

}  // namespace qoicheck
