/* C interface to the spin-covariance simulation engine.
 *
 * All entry points return a spincov_status; on any failure the thread-local
 * message from spincov_last_error() describes what went wrong. Objects
 * returned through out-parameters are owned by the caller and released with
 * the matching _free function.
 */
#ifndef SPINCOV_H
#define SPINCOV_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spincov_status {
  SPINCOV_OK = 0,
  SPINCOV_ERR_INVALID_ARGUMENT = 1,
  SPINCOV_ERR_PARSE = 2,
  SPINCOV_ERR_UNPHYSICAL = 3,
  SPINCOV_ERR_STEP_TOO_LARGE = 4,
  SPINCOV_ERR_DIVERGED = 5,
  SPINCOV_ERR_IO = 6,
  SPINCOV_ERR_INTERNAL = 7
} spincov_status;

typedef struct spincov_config spincov_config;
typedef struct spincov_result spincov_result;

/* One readout: detection time, rotation-angle mean/variance, the raw
 * detected polarization component, and per-record flags. */
typedef struct spincov_record {
  double t_s;
  double phi_mean_rad;
  double phi_var_rad2;
  double s_det_mean;
  double s_det_var;
  int v_polarized;
  int conditioning_skipped;
} spincov_record;

const char* spincov_version(void);

/* Message for the most recent failure on this thread; empty if none. */
const char* spincov_last_error(void);

/* Configs hold the JSON document; full validation happens at run time so
 * fields can still be adjusted through the setters. */
spincov_status spincov_config_parse(const char* json_text, spincov_config** out);
spincov_status spincov_config_load(const char* path, spincov_config** out);

/* Dotted paths address into the document, with integer segments indexing
 * arrays: "field.mean_mG.1", "couplings.g1_rad". Setters create missing
 * object keys; getters fail on absent or non-numeric values. */
spincov_status spincov_config_set_number(spincov_config* cfg, const char* dotted_path,
                                         double value);
spincov_status spincov_config_get_number(const spincov_config* cfg, const char* dotted_path,
                                         double* out);
void spincov_config_free(spincov_config* cfg);

spincov_status spincov_run(const spincov_config* cfg, spincov_result** out);

size_t spincov_result_num_records(const spincov_result* res);
spincov_status spincov_result_record(const spincov_result* res, size_t index,
                                     spincov_record* out);
double spincov_result_tau_gauss_s(const spincov_result* res);
spincov_status spincov_result_write_csv(const spincov_result* res, const char* path);

/* JSON summary of the run (substep counts, dephasing-spread time, config
 * hash, warnings). Always sets *needed to the required size including the
 * terminator; copies when buf is large enough. Pass buf = NULL to query. */
spincov_status spincov_result_metadata_json(const spincov_result* res, char* buf, size_t buf_len,
                                            size_t* needed);
void spincov_result_free(spincov_result* res);

/* Closed-form damped-precession rotation angle at time t_s for a spin of
 * length f0 initially along axis[3] in field b_mG[3], with an exponential
 * transverse envelope of time constant decay_time_s. */
spincov_status spincov_analytic_fid(const double b_mG[3], double decay_time_s, double g1_rad,
                                    double f0, const double axis[3], double g_factor, double t_s,
                                    double* phi_out);

/* Dephasing time of the mean rotation signal from the shot-to-shot field
 * covariance b_cov_mG2 (row-major 3x3). */
spincov_status spincov_tau_gauss(const double b_mG[3], const double b_cov_mG2[9], double g_factor,
                                 double* tau_out);

/* Cross-checks the engine against independent reference integrators on the
 * configured experiment: the single-atom mean evolution over one dark period
 * against the exact density-matrix propagator, and the first pulse against a
 * fine classical integration of the bilinear dynamics. Writes the worst
 * relative error to *max_rel_err and, when report_buf is given, a short
 * plain-text report. */
spincov_status spincov_oracle_check(const spincov_config* cfg, double* max_rel_err,
                                    char* report_buf, size_t buf_len);

#ifdef __cplusplus
}
#endif

#endif /* SPINCOV_H */
