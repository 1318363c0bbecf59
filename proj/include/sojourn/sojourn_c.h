/* C API of the sojourn engine: opaque handles, integer status codes, and
 * caller-owned buffers. The CLI links against this surface only. */
#ifndef SOJOURN_C_H
#define SOJOURN_C_H

#include <stddef.h>

#if defined(_WIN32)
#define SJ_API __declspec(dllexport)
#else
#define SJ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sj_model sj_model;
typedef struct sj_branches sj_branches;
typedef struct sj_scenario sj_scenario;
typedef struct sj_report sj_report;

typedef enum sj_status {
  SJ_OK = 0,
  SJ_ERR_INVALID_ARGUMENT = 1,
  SJ_ERR_PARSE = 2,
  SJ_ERR_VALIDATION = 3,
  SJ_ERR_NUMERIC = 4,
  SJ_ERR_TRAPPED = 5,
  SJ_ERR_IO = 6,
  SJ_ERR_INTERNAL = 7
} sj_status;

SJ_API const char* sj_version(void);

/* Message describing the most recent failure on this thread. */
SJ_API const char* sj_last_error(void);

/* --- models --------------------------------------------------------- */

/* id: "FlatEuclidean" | "HyperbolicHn" | "PerturbedScattering" | "PerturbedAH".
 * Perturbation parameters are passed as parallel name/value arrays
 * ("a", "w", "shell_lo", "shell_hi"). collar_x0 <= 0 selects the default. */
SJ_API sj_status sj_model_create(const char* id, int dim, const char* const* param_names,
                                 const double* param_values, size_t nparams, double collar_x0,
                                 sj_model** out);
SJ_API void sj_model_free(sj_model* m);
SJ_API int sj_model_dim(const sj_model* m);

/* --- sojourn relation ------------------------------------------------ */

/* Forward geodesic from interior z[n] with covector dir[n] (normalized
 * internally): sojourn time s, sigma, boundary chart point y[n-1], limiting
 * eta[n-1], and the extrapolation consistency estimate. */
SJ_API sj_status sj_sojourn(const sj_model* m, const double* z, const double* dir, double* s,
                            double* sigma, double* y, double* eta, double* err);

/* --- branch search ---------------------------------------------------- */

SJ_API sj_status sj_branches_find(const sj_model* m, const double* z, const double* y_target,
                                  int multistart, sj_branches** out);
SJ_API void sj_branches_free(sj_branches* b);
SJ_API int sj_branches_count(const sj_branches* b);
SJ_API sj_status sj_branches_get(const sj_branches* b, int index, double* dir, double* s,
                                 double* sigma, double* eta, double* jacobian, int* conj_count,
                                 int* nondegenerate, double* residual);

/* --- closed-form oracles ---------------------------------------------- */

SJ_API sj_status sj_euclidean_oracle(const double* z, const double* theta, int n, double lam,
                                     double* re, double* im);
SJ_API sj_status sj_h3_oracle_phase(double x, const double* y, const double* y_ref, int bdim,
                                    double* s_out);

/* --- scenarios --------------------------------------------------------- */

SJ_API sj_status sj_scenario_parse_file(const char* path, sj_scenario** out);
SJ_API sj_status sj_scenario_parse_text(const char* text, sj_scenario** out);
SJ_API void sj_scenario_free(sj_scenario* s);

SJ_API sj_status sj_scenario_run(const sj_scenario* s, const char* out_dir, int threads,
                                 int verbose, sj_report** out);
SJ_API void sj_report_free(sj_report* r);
SJ_API int sj_report_exit_code(const sj_report* r);
SJ_API int sj_report_pass(const sj_report* r);
SJ_API size_t sj_report_file_count(const sj_report* r);
SJ_API const char* sj_report_file(const sj_report* r, size_t i);
SJ_API size_t sj_report_metric_count(const sj_report* r);
SJ_API const char* sj_report_metric_name(const sj_report* r, size_t i);
SJ_API double sj_report_metric_value(const sj_report* r, size_t i);

#ifdef __cplusplus
}
#endif

#endif /* SOJOURN_C_H */
