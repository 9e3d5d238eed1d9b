/* C interface for the conductlab market-simulation library. */

#ifndef CONDUCTLAB_H
#define CONDUCTLAB_H

/* Generated by cbindgen. Do not edit by hand; regenerate via cargo build. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible entry point.
typedef enum ConductlabStatus {
  CONDUCTLAB_STATUS_OK = 0,
  // A required pointer argument was null.
  CONDUCTLAB_STATUS_NULL_POINTER = 1,
  // A parameter or configuration value violates its documented domain.
  CONDUCTLAB_STATUS_INVALID_ARGUMENT = 2,
  // The structural system is singular (equal demand and cost elasticities).
  CONDUCTLAB_STATUS_SINGULAR_MODEL = 3,
  // A computation produced non-finite values.
  CONDUCTLAB_STATUS_NUMERICAL_ERROR = 4,
  // Instruments or regressors are rank deficient.
  CONDUCTLAB_STATUS_RANK_DEFICIENT = 5,
  // Too few observations for the requested fit.
  CONDUCTLAB_STATUS_INSUFFICIENT_DATA = 6,
  // Malformed CSV or JSON input.
  CONDUCTLAB_STATUS_PARSE_ERROR = 7,
  // A returned string was not valid UTF-8 or contained a NUL byte.
  CONDUCTLAB_STATUS_ENCODING_ERROR = 8,
} ConductlabStatus;

// Opaque dataset handle.
typedef struct ConductlabDataset ConductlabDataset;

// Structural parameters, mirroring the core library's layout field by field.
typedef struct ConductlabParams {
  double alpha0;
  double alpha1;
  double alpha2;
  double beta0;
  double beta1;
  double beta2;
  double theta;
  double sigma;
} ConductlabParams;

// One market's exogenous state: shifters in levels, instruments on the log
// scale, structural errors on the log scale.
typedef struct ConductlabDraw {
  double x1d;
  double x2d;
  double x1s;
  double x2s;
  double z1s;
  double z2s;
  double eps_d;
  double eps_s;
} ConductlabDraw;

// Log-scale equilibrium outcome.
typedef struct ConductlabEquilibrium {
  double log_q;
  double log_p;
} ConductlabEquilibrium;

// Both fitted equations plus the recovered conduct parameter.
// `theta_hat` is NaN when `theta_valid` is false.
typedef struct ConductlabEstimates {
  double alpha0;
  double alpha1;
  double alpha2;
  double gamma;
  double beta0;
  double beta1;
  double beta2;
  double theta_hat;
  bool theta_valid;
} ConductlabEstimates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on the calling thread.
//
// # Safety
// The returned pointer stays valid until the next failing call on the same
// thread; do not free it.
const char *conductlab_last_error_message(void);

// Fills `out` with the standard calibration (unit exponents, demand slope
// -1, conduct 0.5, sigma 0.5).
//
// # Safety
// `out` must point to writable memory for one `ConductlabParams`.
enum ConductlabStatus conductlab_params_default(struct ConductlabParams *out);

// Supply-relation intercept `-log(1 + theta*alpha0)`.
//
// # Safety
// `params` and `out` must be valid non-null pointers.
enum ConductlabStatus conductlab_supply_intercept(const struct ConductlabParams *params,
                                                  double *out);

// Solves the market equilibrium for one exogenous configuration.
//
// # Safety
// `params`, `draw`, and `out` must be valid non-null pointers.
enum ConductlabStatus conductlab_solve_equilibrium(const struct ConductlabParams *params,
                                                   const struct ConductlabDraw *draw,
                                                   struct ConductlabEquilibrium *out);

// Generates a synthetic dataset of `sample_size` markets.
//
// # Safety
// `params` and `out` must be valid non-null pointers. On `Ok` the caller
// owns the handle written to `out` and must release it with
// `conductlab_dataset_free`.
enum ConductlabStatus conductlab_dataset_generate(const struct ConductlabParams *params,
                                                  size_t sample_size,
                                                  uint64_t seed,
                                                  double shifter_low,
                                                  double shifter_high,
                                                  double instrument_noise_sd,
                                                  struct ConductlabDataset **out);

// Parses a dataset from CSV text in the schema written by
// `conductlab_dataset_to_csv`.
//
// # Safety
// `text` must be a valid NUL-terminated string and `out` a valid non-null
// pointer. On `Ok` the caller owns the returned handle.
enum ConductlabStatus conductlab_dataset_from_csv(const char *text, struct ConductlabDataset **out);

// Serializes a dataset to CSV at full precision.
//
// # Safety
// `dataset` must be a live handle and `out` a valid non-null pointer. On
// `Ok` the caller owns the returned string and must release it with
// `conductlab_string_free`.
enum ConductlabStatus conductlab_dataset_to_csv(const struct ConductlabDataset *dataset,
                                                char **out);

// Number of markets in the dataset; zero for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t conductlab_dataset_len(const struct ConductlabDataset *dataset);

// Copies one dataset column into `out`. Columns are indexed in CSV order:
// 0 log_p, 1 log_q, 2 log_x1d, 3 log_x2d, 4 log_x1s, 5 log_x2s, 6 z1s,
// 7 z2s.
//
// # Safety
// `dataset` must be a live handle and `out` must point to at least
// `capacity` writable doubles.
enum ConductlabStatus conductlab_dataset_copy_column(const struct ConductlabDataset *dataset,
                                                     size_t column,
                                                     double *out,
                                                     size_t capacity);

// Estimates both equations by two-stage least squares and recovers the
// conduct parameter.
//
// # Safety
// `dataset` must be a live handle and `out` a valid non-null pointer.
enum ConductlabStatus conductlab_estimate(const struct ConductlabDataset *dataset,
                                          struct ConductlabEstimates *out);

// Inverts a supply intercept and demand elasticity into a conduct
// parameter. `theta_valid` is false (and `theta_hat` NaN) when the
// elasticity is too close to zero.
//
// # Safety
// `out_theta` and `out_valid` must be valid non-null pointers.
enum ConductlabStatus conductlab_recover_theta(double gamma_hat,
                                               double alpha0_hat,
                                               double *out_theta,
                                               bool *out_valid);

// Releases a dataset handle. Null is a no-op.
//
// # Safety
// `dataset` must be null or a handle obtained from this library that has
// not already been freed.
void conductlab_dataset_free(struct ConductlabDataset *dataset);

// Releases a string returned by this library. Null is a no-op.
//
// # Safety
// `text` must be null or a string obtained from this library that has not
// already been freed.
void conductlab_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONDUCTLAB_H */
