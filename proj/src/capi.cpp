// SPDX-License-Identifier: Apache-2.0
#include "qoicheck/qoicheck.h"

#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "qoicheck/calibration.hpp"
#include "qoicheck/error.hpp"
#include "qoicheck/harness.hpp"
#include "qoicheck/study.hpp"

struct qc_study {
  qoicheck::StudyConfig config;
};

struct qc_result {
  qoicheck::StudyConfig config;
  qoicheck::StudyResult result;
};

struct qc_report {
  qoicheck::UniformityReport report;
};

namespace {

thread_local std::string last_error;

int set_error(int status, const std::string& msg) {
  last_error = msg;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return QC_OK;
  } catch (const qoicheck::Error& e) {
    return set_error(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(QC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(QC_ERR_INTERNAL, e.what());
  }
}

std::string read_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) qoicheck::fail(qoicheck::ErrorCode::kIo, std::string("cannot open '") + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

extern "C" {

const char* qc_version(void) { return "0.1.0"; }

const char* qc_last_error(void) { return last_error.c_str(); }

const char* qc_status_name(int status) {
  if (status == QC_ERR_INVALID_ARGUMENT) return "invalid_argument";
  return qoicheck::error_code_name(static_cast<qoicheck::ErrorCode>(status));
}

int qc_study_load(const char* path, qc_study** out) {
  if (path == nullptr || out == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new qc_study{qoicheck::load_study_config(path)}; });
}

int qc_study_parse(const char* json_text, qc_study** out) {
  if (json_text == nullptr || out == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new qc_study{qoicheck::parse_study_config(json_text)}; });
}

int qc_study_set_output_dir(qc_study* study, const char* dir) {
  if (study == nullptr || dir == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  study->config.output_dir = dir;
  return QC_OK;
}

int qc_study_set_workers(qc_study* study, int workers) {
  if (study == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null study");
  if (workers < 1) return set_error(QC_ERR_CONFIG, "workers must be >= 1");
  study->config.workers = workers;
  return QC_OK;
}

int qc_study_set_replications(qc_study* study, int replications) {
  if (study == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null study");
  if (replications < 1) return set_error(QC_ERR_CONFIG, "R must be >= 1");
  study->config.replications = replications;
  return QC_OK;
}

void qc_study_free(qc_study* study) { delete study; }

int qc_study_run(const qc_study* study, qc_result** out) {
  if (study == nullptr || out == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<qc_result>();
    r->config = study->config;
    r->result = qoicheck::execute_study(study->config);
    *out = r.release();
  });
}

int qc_study_run_sbc(const qc_study* study, qc_result** out) {
  if (study == nullptr || out == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<qc_result>();
    r->config = study->config;
    r->result = qoicheck::execute_self_sbc(study->config);
    *out = r.release();
  });
}

int qc_result_write(const qc_result* result) {
  if (result == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null result");
  return guarded([&] { qoicheck::write_artifacts(result->config, result->result); });
}

int qc_result_exit_code(const qc_result* result) { return result == nullptr ? -1 : result->result.exit_code; }

size_t qc_result_record_count(const qc_result* result) { return result == nullptr ? 0 : result->result.records.size(); }

size_t qc_result_report_count(const qc_result* result) { return result == nullptr ? 0 : result->result.reports.size(); }

long qc_result_completed(const qc_result* result) { return result == nullptr ? 0 : result->result.batch.completed(); }

int qc_result_cell_pass(const qc_result* result, size_t index, int* pass) {
  if (result == nullptr || pass == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  if (index >= result->result.reports.size()) return set_error(QC_ERR_INVALID_ARGUMENT, "report index out of range");
  *pass = result->result.reports[index].pass ? 1 : 0;
  return QC_OK;
}

int qc_result_get_report(const qc_result* result, size_t index, qc_report** out) {
  if (result == nullptr || out == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  if (index >= result->result.reports.size()) return set_error(QC_ERR_INVALID_ARGUMENT, "report index out of range");
  return guarded([&] { *out = new qc_report{result->result.reports[index]}; });
}

void qc_result_free(qc_result* result) { delete result; }

int qc_report_load(const char* path, size_t index, qc_report** out) {
  if (path == nullptr || out == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto reports = qoicheck::reports_from_json(read_file(path));
    if (index >= reports.size()) qoicheck::fail(qoicheck::ErrorCode::kPrecondition, "report index out of range");
    *out = new qc_report{reports[index]};
  });
}

int qc_report_count_in_file(const char* path, size_t* count) {
  if (path == nullptr || count == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *count = qoicheck::reports_from_json(read_file(path)).size(); });
}

int qc_report_pass(const qc_report* report, int* pass) {
  if (report == nullptr || pass == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  *pass = report->report.pass ? 1 : 0;
  return QC_OK;
}

int qc_report_write_svg(const qc_report* report, const char* path) {
  if (report == nullptr || path == nullptr) return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { qoicheck::emit_ecdf_plot(report->report, path); });
}

void qc_report_free(qc_report* report) { delete report; }

int qc_rank_statistic(double prior_value, const double* posterior_values, size_t s, int* k_out) {
  if (k_out == nullptr || (posterior_values == nullptr && s > 0)) {
    return set_error(QC_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    *k_out = qoicheck::rank_statistic(prior_value, std::span<const double>(posterior_values, s));
  });
}

}  // extern "C"
