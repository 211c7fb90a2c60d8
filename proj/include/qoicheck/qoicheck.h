/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the qoicheck library. All objects are opaque handles;
 * every fallible call returns a qc_status (0 on success) and leaves a
 * thread-local message retrievable with qc_last_error().
 */
#ifndef QOICHECK_QOICHECK_H
#define QOICHECK_QOICHECK_H

#include <stddef.h>

#if defined(_WIN32)
#define QC_API __declspec(dllexport)
#else
#define QC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qc_status {
  QC_OK = 0,
  QC_ERR_PARAMETER_DOMAIN = 1,
  QC_ERR_TRUNCATION_INFEASIBLE = 2,
  QC_ERR_PRECONDITION = 3,
  QC_ERR_MISSING_COEFFICIENT = 4,
  QC_ERR_SAMPLER_QUALITY = 5,
  QC_ERR_NUMERICAL_CONDITIONING = 6,
  QC_ERR_INSUFFICIENT_REPLICATIONS = 7,
  QC_ERR_CONFIG = 8,
  QC_ERR_IO = 9,
  QC_ERR_NON_FINITE = 10,
  QC_ERR_INVALID_ARGUMENT = 11,
  QC_ERR_INTERNAL = 99
} qc_status;

typedef struct qc_study qc_study;
typedef struct qc_result qc_result;
typedef struct qc_report qc_report;

QC_API const char* qc_version(void);
QC_API const char* qc_last_error(void);
QC_API const char* qc_status_name(int status);

/* Study configuration. */
QC_API int qc_study_load(const char* path, qc_study** out);
QC_API int qc_study_parse(const char* json_text, qc_study** out);
QC_API int qc_study_set_output_dir(qc_study* study, const char* dir);
QC_API int qc_study_set_workers(qc_study* study, int workers);
QC_API int qc_study_set_replications(qc_study* study, int replications);
QC_API void qc_study_free(qc_study* study);

/* Execution. A result exists even when a replication failed; check
 * qc_result_exit_code(). */
QC_API int qc_study_run(const qc_study* study, qc_result** out);
QC_API int qc_study_run_sbc(const qc_study* study, qc_result** out);

QC_API int qc_result_write(const qc_result* result);
QC_API int qc_result_exit_code(const qc_result* result);
QC_API size_t qc_result_record_count(const qc_result* result);
QC_API size_t qc_result_report_count(const qc_result* result);
QC_API long qc_result_completed(const qc_result* result);
QC_API int qc_result_cell_pass(const qc_result* result, size_t index, int* pass);
QC_API int qc_result_get_report(const qc_result* result, size_t index, qc_report** out);
QC_API void qc_result_free(qc_result* result);

/* Uniformity reports and plots. */
QC_API int qc_report_load(const char* path, size_t index, qc_report** out);
QC_API int qc_report_count_in_file(const char* path, size_t* count);
QC_API int qc_report_pass(const qc_report* report, int* pass);
QC_API int qc_report_write_svg(const qc_report* report, const char* path);
QC_API void qc_report_free(qc_report* report);

/* Rank statistic on raw values. */
QC_API int qc_rank_statistic(double prior_value, const double* posterior_values, size_t s, int* k_out);

#ifdef __cplusplus
}
#endif

#endif /* QOICHECK_QOICHECK_H */
