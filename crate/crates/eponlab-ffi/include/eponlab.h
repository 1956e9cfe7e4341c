/* C API for the eponlab EPON performance laboratory. */

#ifndef EPONLAB_H
#define EPONLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every API call.
typedef enum EponStatus {
  // Success.
  EPON_STATUS_OK = 0,
  // A required pointer argument was null.
  EPON_STATUS_NULL_ARGUMENT = 1,
  // A text argument was not valid UTF-8.
  EPON_STATUS_INVALID_TEXT = 2,
  // Scenario text was rejected; the error message names the line.
  EPON_STATUS_PARSE_ERROR = 3,
  // Parameters violate a model precondition.
  EPON_STATUS_CONFIG_ERROR = 4,
  // The requested quantity needs a stationary regime that does not
  // exist at these parameters.
  EPON_STATUS_UNSTABLE = 5,
  // One or more built-in validation checks failed.
  EPON_STATUS_CHECK_FAILED = 6,
  // Unexpected internal failure.
  EPON_STATUS_INTERNAL = 7,
} EponStatus;

// Opaque experiment description created by `eponlab_scenario_parse` or
// `eponlab_scenario_default` and released by `eponlab_scenario_free`.
typedef struct EponScenario EponScenario;

// Closed-form steady-state figures for one ONU at one offered load.
typedef struct EponAnalyticResult {
  double load;
  // Total per-ONU arrival rate in packets/second.
  double lambda_pps;
  double rho_ef;
  double rho_af;
  double rho_be;
  double rho_stage2;
  // True when every station is stable.
  bool stable;
  // Geometric parameter of the grant stage; NaN when it is unstable.
  double r0;
  double en_ef_pkts;
  double en_af_pkts;
  double en_be_pkts;
  double en_stage2_pkts;
  double en_total_bytes;
  double et_ef_s;
  double et_af_s;
  double et_be_s;
  double et_total_s;
} EponAnalyticResult;

// Measured figures from one simulation run.
typedef struct EponSimResult {
  double et_total_s;
  // 95% batch-means confidence half-width.
  double et_ci_s;
  double et_ef_s;
  double et_af_s;
  double et_be_s;
  double utilization;
  // Mean polling cycle; NaN under queueing fidelity.
  double cycle_mean_s;
  double cycle_max_s;
  uint64_t generated;
  uint64_t delivered;
  // Relative gap between time-average occupancy over arrival rate and
  // the measured mean delay; NaN when undefined.
  double little_gap;
} EponSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. Never null; the
// pointer stays valid until the next failing call on the same thread.
const char *eponlab_last_error_message(void);

// Parses scenario text (UTF-8, `key = value` lines) into a new handle.
//
// # Safety
//
// `text` must point to a NUL-terminated string and `out` to writable
// storage for one pointer; both must be non-null.
enum EponStatus eponlab_scenario_parse(const char *text, struct EponScenario **out);

// Creates the reference deployment scenario.
//
// # Safety
//
// `out` must point to writable storage for one pointer.
enum EponStatus eponlab_scenario_default(struct EponScenario **out);

// Releases a scenario handle. Null is a no-op.
//
// # Safety
//
// `scenario` must be null or a handle from this library that has not
// already been freed.
void eponlab_scenario_free(struct EponScenario *scenario);

// Evaluates the closed-form model at one offered load. Instability is
// reported through the `stable` flag and infinite means, not a status.
//
// # Safety
//
// `scenario` must be a live handle from this library and `out` must point
// to writable storage for one `EponAnalyticResult`.
enum EponStatus eponlab_analytic_report(const struct EponScenario *scenario,
                                        double load,
                                        struct EponAnalyticResult *out);

// Runs one simulation at the scenario's fidelity, duration, and warmup.
//
// # Safety
//
// `scenario` must be a live handle from this library and `out` must point
// to writable storage for one `EponSimResult`.
enum EponStatus eponlab_simulate(const struct EponScenario *scenario,
                                 double load,
                                 uint64_t seed,
                                 struct EponSimResult *out);

// Runs the load sweep and returns the CSV as a malloc'd NUL-terminated
// string in `*out_csv`; release it with `eponlab_string_free`.
//
// # Safety
//
// `scenario` must be a live handle from this library and `out_csv` must
// point to writable storage for one pointer.
enum EponStatus eponlab_sweep_csv(const struct EponScenario *scenario,
                                  bool with_simulation,
                                  char **out_csv);

// Runs the built-in cross-validation suite. Returns `Ok` when every check
// passes, `CheckFailed` otherwise. When `out_report` is non-null it
// receives the per-check report as a malloc'd string; release it with
// `eponlab_string_free`.
//
// # Safety
//
// `out_report` must be null or point to writable storage for one pointer.
enum EponStatus eponlab_validate(char **out_report);

// Releases a string returned by this library. Null is a no-op.
//
// # Safety
//
// `text` must be null or a string returned by this library that has not
// already been freed.
void eponlab_string_free(char *text);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EPONLAB_H */
