#ifndef IOV_SFDL_H
#define IOV_SFDL_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum SfdlStatus {
  SFDL_STATUS_OK = 0,
  // A required pointer argument was null.
  SFDL_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  SFDL_STATUS_UTF8 = 2,
  SFDL_STATUS_INVALID_INPUT = 3,
  SFDL_STATUS_CONFIG = 4,
  SFDL_STATUS_SCHEMA = 5,
  SFDL_STATUS_IO = 6,
  SFDL_STATUS_NUMERIC = 7,
  SFDL_STATUS_PARSE = 8,
} SfdlStatus;

// Opaque per-group credibility state.
typedef struct SfdlCredibility SfdlCredibility;

// Opaque scenario handle.
typedef struct SfdlScenario SfdlScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the most recent error message into `buf` (NUL terminated, truncated
// to `len`). Returns the full message length in bytes, excluding the NUL.
//
// # Safety
// `buf` must point to `len` writable bytes, or be null (the call then only
// reports the length).
uintptr_t sfdl_last_error_message(char *buf, uintptr_t len);

// Library version as a static NUL-terminated string.
const char *sfdl_version(void);

// Release a string allocated by this library.
//
// # Safety
// `s` must have been returned through one of this library's out-pointers
// and not freed before. Null is ignored.
void sfdl_string_free(char *s);

// Parse and validate a scenario from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be a valid pointer.
enum SfdlStatus sfdl_scenario_from_json(const char *json, struct SfdlScenario **out);

// Build one of the named density presets: "high", "medium", or "low".
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be a valid pointer.
enum SfdlStatus sfdl_scenario_preset(const char *name, struct SfdlScenario **out);

// # Safety
// `scenario` must be a live handle from this library.
enum SfdlStatus sfdl_scenario_set_seed(struct SfdlScenario *scenario, uint64_t seed);

// # Safety
// `scenario` must be a live handle from this library.
enum SfdlStatus sfdl_scenario_set_rounds(struct SfdlScenario *scenario, uint32_t rounds);

// Serialize the scenario back to JSON. The caller frees the string.
//
// # Safety
// `scenario` must be a live handle; `out` must be a valid pointer.
enum SfdlStatus sfdl_scenario_to_json(const struct SfdlScenario *scenario, char **out);

// # Safety
// `scenario` must be a handle from this library, not yet freed. Null is
// ignored.
void sfdl_scenario_free(struct SfdlScenario *scenario);

// Run an experiment. `frameworks_csv` selects frameworks by tag, comma
// separated (null or empty runs all three). When `out_dir` is non-null, the
// per-framework checkpoint streams and summary are written there. When
// `summary_json_out` is non-null it receives the summary document.
//
// # Safety
// `scenario` must be a live handle; string arguments must be NUL-terminated
// when non-null; `summary_json_out`, when non-null, must be valid to write.
enum SfdlStatus sfdl_run_experiment(const struct SfdlScenario *scenario,
                                    const char *frameworks_csv,
                                    const char *out_dir,
                                    char **summary_json_out);

// Fresh credibility state at the uniform prior.
//
// # Safety
// `out` must be a valid pointer.
enum SfdlStatus sfdl_credibility_new(uint32_t group_size,
                                     uint32_t max_group_size,
                                     struct SfdlCredibility **out);

// Record one behavior classification: positive `delta` counts toward p,
// non-positive toward q.
//
// # Safety
// `state` must be a live handle from this library.
enum SfdlStatus sfdl_credibility_observe(struct SfdlCredibility *state, double delta);

// Posterior mean p / (p + q).
//
// # Safety
// `state` must be a live handle; `out` must be valid to write.
enum SfdlStatus sfdl_credibility_effectiveness(const struct SfdlCredibility *state, double *out);

// Credibility score under the product rule (robustness x effectiveness).
//
// # Safety
// `state` must be a live handle; `out` must be valid to write.
enum SfdlStatus sfdl_credibility_score(const struct SfdlCredibility *state, double *out);

// # Safety
// `state` must be a handle from this library, not yet freed. Null is
// ignored.
void sfdl_credibility_free(struct SfdlCredibility *state);

// Mean squared Euclidean deviation over `n_points` interleaved (x, y)
// pairs.
//
// # Safety
// Both buffers must hold `2 * n_points` doubles; `out` must be valid.
enum SfdlStatus sfdl_metric_loss(const double *predictions_xy,
                                 const double *observations_xy,
                                 uintptr_t n_points,
                                 double *out);

// Mean Euclidean distance in meters over `n_points` interleaved (x, y)
// pairs.
//
// # Safety
// Both buffers must hold `2 * n_points` doubles; `out` must be valid.
enum SfdlStatus sfdl_metric_prediction_error(const double *predictions_xy,
                                             const double *observations_xy,
                                             uintptr_t n_points,
                                             double *out);

// Fraction of waypoints within `threshold_m` of the observation.
//
// # Safety
// Both buffers must hold `2 * n_points` doubles; `out` must be valid.
enum SfdlStatus sfdl_metric_prediction_accuracy(const double *predictions_xy,
                                                const double *observations_xy,
                                                uintptr_t n_points,
                                                double threshold_m,
                                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IOV_SFDL_H */
