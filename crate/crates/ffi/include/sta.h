#ifndef STA_H
#define STA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StaStatus {
  STA_STATUS_OK = 0,
  STA_STATUS_INVALID_ARGUMENT = 1,
  STA_STATUS_SYNTHESIS_FAILURE = 2,
  STA_STATUS_NUMERIC_FAILURE = 3,
  STA_STATUS_OPTIMIZATION_FAILURE = 4,
  STA_STATUS_CONFIG_ERROR = 5,
  STA_STATUS_IO_ERROR = 6,
  STA_STATUS_NULL_POINTER = 7,
  STA_STATUS_PANIC = 8,
} StaStatus;

typedef enum StaSchemeKind {
  STA_SCHEME_KIND_FLAT_PI = 0,
  STA_SCHEME_KIND_ARCSIN_EPS = 1,
  STA_SCHEME_KIND_QUARTIC_LARGE_DELTA = 2,
  STA_SCHEME_KIND_OPTIMIZED2L = 3,
  STA_SCHEME_KIND_REF3L = 4,
  STA_SCHEME_KIND_NUM1_4L = 5,
  STA_SCHEME_KIND_NUM2_4L = 6,
} StaSchemeKind;

// Opaque scheme handle.
typedef struct StaScheme StaScheme;

typedef struct StaSensitivityReport {
  double value;
  double quadrature_error;
  double lower_bound;
  double asymptotic_estimate;
  double delta_t;
  double forms_difference;
  // Non-zero when the scheme's boundary conditions hold only approximately.
  int32_t approximate_boundary;
} StaSensitivityReport;

typedef struct StaMetrics {
  double area_pi;
  double energy_pi2;
} StaMetrics;

typedef struct StaEvolution {
  double p_target;
  double infidelity;
  double norm_drift;
} StaEvolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread (empty after success).
// The pointer stays valid until the next call on the same thread.
const char *sta_last_error(void);

// Library version as a static NUL-terminated string.
const char *sta_version(void);

// Builds a catalog scheme of duration `duration` from `n_params` values in
// the family's parameter order.
//
// # Safety
// `params` must point to `n_params` doubles (or be null when zero) and
// `out` must be a valid pointer.
enum StaStatus sta_scheme_new(enum StaSchemeKind kind,
                              double duration,
                              const double *params,
                              size_t n_params,
                              struct StaScheme **out);

// Builds a scheme from a JSON descriptor.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum StaStatus sta_scheme_from_json(const char *json, struct StaScheme **out);

// Serializes a scheme to its JSON descriptor; free with `sta_string_free`.
//
// # Safety
// `scheme` must be a live handle and `out` a valid pointer.
enum StaStatus sta_scheme_to_json(const struct StaScheme *scheme, char **out);

// Releases a scheme handle. Null is ignored.
//
// # Safety
// `scheme` must come from a constructor and not be used afterwards.
void sta_scheme_free(struct StaScheme *scheme);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void sta_string_free(char *s);

// q for two-level schemes or Q for three-level ones, at detuning `delta`.
//
// # Safety
// `scheme` must be a live handle and `out` a valid pointer.
enum StaStatus sta_sensitivity(const struct StaScheme *scheme,
                               double delta,
                               struct StaSensitivityReport *out);

// Closed-form q of the flat π pulse at ΔT = `delta_t`.
double sta_q_flat_pi_closed_form(double delta_t);

// Pulse area (units of π) and energy (units of π²ħ/T) of the scheme's
// physical controls.
//
// # Safety
// `scheme` must be a live handle and `out` a valid pointer.
enum StaStatus sta_pulse_metrics(const struct StaScheme *scheme, struct StaMetrics *out);

// Simulates the perturbed system from |1⟩ and reports the target
// probability at t = T.
//
// # Safety
// `scheme` must be a live handle and `out` a valid pointer.
enum StaStatus sta_evolve(const struct StaScheme *scheme,
                          double delta,
                          double beta,
                          struct StaEvolution *out);

// Runs an optimization. `problem_json` needs `family` and `DeltaT`; any
// other problem field overrides its default. The JSON report is written to
// `out` and must be released with `sta_string_free`.
//
// # Safety
// `problem_json` must be NUL-terminated and `out` a valid pointer.
enum StaStatus sta_optimize_json(const char *problem_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STA_H */
