/* SPDX-License-Identifier: Apache-2.0 */
/* Exercises the C interface end to end on a small toy study. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "qoicheck/qoicheck.h"

static int failures = 0;

#define EXPECT(cond)                                               \
  do {                                                             \
    if (!(cond)) {                                                 \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                  \
    }                                                              \
  } while (0)

int main(int argc, char** argv) {
  const char* out_dir = argc > 1 ? argv[1] : "capi_out";
  char path[4096];

  EXPECT(strlen(qc_version()) > 0);
  EXPECT(strcmp(qc_status_name(QC_ERR_CONFIG), "") != 0);

  /* rank statistic */
  const double post[3] = {0.1, 0.2, 0.4};
  int k = -1;
  EXPECT(qc_rank_statistic(0.32, post, 3, &k) == QC_OK);
  EXPECT(k == 1);
  EXPECT(qc_rank_statistic(0.32, NULL, 3, &k) == QC_ERR_INVALID_ARGUMENT);

  /* bad configs */
  qc_study* study = NULL;
  EXPECT(qc_study_parse("{\"case\": \"TOY\", \"bogus\": 1}", &study) == QC_ERR_CONFIG);
  EXPECT(study == NULL);
  EXPECT(strlen(qc_last_error()) > 0);
  EXPECT(qc_study_load("/nonexistent/qoicheck.json", &study) == QC_ERR_IO);
  EXPECT(qc_study_run(NULL, NULL) == QC_ERR_INVALID_ARGUMENT);

  /* toy study */
  EXPECT(qc_study_parse("{\"case\": \"TOY\", \"R\": 200, \"master_seed\": 3}", &study) == QC_OK);
  if (study == NULL) return 1;
  EXPECT(qc_study_set_output_dir(study, out_dir) == QC_OK);
  EXPECT(qc_study_set_workers(study, 2) == QC_OK);
  EXPECT(qc_study_set_workers(study, 0) == QC_ERR_CONFIG);

  qc_result* result = NULL;
  EXPECT(qc_study_run(study, &result) == QC_OK);
  if (result == NULL) return 1;
  EXPECT(qc_result_exit_code(result) == 0);
  EXPECT(qc_result_record_count(result) == 200);
  EXPECT(qc_result_report_count(result) == 1);
  EXPECT(qc_result_completed(result) == 200);
  int pass = -1;
  EXPECT(qc_result_cell_pass(result, 0, &pass) == QC_OK);
  EXPECT(pass == 0 || pass == 1);
  EXPECT(qc_result_cell_pass(result, 7, &pass) == QC_ERR_INVALID_ARGUMENT);
  EXPECT(qc_result_write(result) == QC_OK);

  qc_report* report = NULL;
  EXPECT(qc_result_get_report(result, 0, &report) == QC_OK);
  snprintf(path, sizeof path, "%s/plot_from_result.svg", out_dir);
  EXPECT(qc_report_write_svg(report, path) == QC_OK);
  qc_report_free(report);
  report = NULL;

  /* reload from disk */
  size_t count = 0;
  snprintf(path, sizeof path, "%s/report.json", out_dir);
  EXPECT(qc_report_count_in_file(path, &count) == QC_OK);
  EXPECT(count == 1);
  EXPECT(qc_report_load(path, 0, &report) == QC_OK);
  int reloaded = -1;
  EXPECT(qc_report_pass(report, &reloaded) == QC_OK);
  EXPECT(reloaded == pass);
  EXPECT(qc_report_load(path, 5, NULL) == QC_ERR_INVALID_ARGUMENT);
  qc_report_free(report);

  snprintf(path, sizeof path, "%s/ranks.csv", out_dir);
  FILE* f = fopen(path, "r");
  EXPECT(f != NULL);
  if (f != NULL) {
    char line[256] = {0};
    EXPECT(fgets(line, sizeof line, f) != NULL);
    EXPECT(strcmp(line, "replication,prior_label,posterior_label,k,S\n") == 0);
    fclose(f);
  }

  /* R below the band minimum still runs */
  EXPECT(qc_study_set_replications(study, 5) == QC_OK);
  qc_result* small = NULL;
  EXPECT(qc_study_run_sbc(study, &small) == QC_OK);
  EXPECT(qc_result_record_count(small) == 5);
  EXPECT(qc_result_report_count(small) == 0);
  qc_result_free(small);

  qc_result_free(result);
  qc_study_free(study);
  qc_result_free(NULL);
  qc_study_free(NULL);

  if (failures > 0) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
