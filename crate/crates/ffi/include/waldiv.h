#ifndef WALDIV_H
#define WALDIV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every entry point.
typedef enum WaldivStatus {
  WALDIV_STATUS_OK = 0,
  // A required pointer argument was null.
  WALDIV_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  WALDIV_STATUS_INVALID_UTF8 = 2,
  // The spec or an argument failed to parse or validate.
  WALDIV_STATUS_INVALID_INPUT = 3,
  // A mathematical precondition failed (null violated, covariance not positive definite).
  WALDIV_STATUS_PRECONDITION = 4,
  // A numerical failure (singular metric, too many singular draws, failed checks).
  WALDIV_STATUS_NUMERICAL = 5,
  // An internal panic was caught at the boundary.
  WALDIV_STATUS_PANIC = 6,
} WaldivStatus;

// Opaque handle to a parsed restriction system.
typedef struct WaldivSystem WaldivSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the next call.
const char *waldiv_last_error(void);

// Library version as a static NUL-terminated string.
const char *waldiv_version(void);

// Parses spec text into a new handle stored in `*out`.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid pointer.
enum WaldivStatus waldiv_system_new(const char *spec, struct WaldivSystem **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `sys` must come from [`waldiv_system_new`] and not be used afterwards.
void waldiv_system_free(struct WaldivSystem *sys);

// Parameter dimension `p` and number of restrictions `q`.
//
// # Safety
// All pointers must be valid.
enum WaldivStatus waldiv_system_dims(const struct WaldivSystem *sys, size_t *p, size_t *q);

// `W_T` at `theta_hat` (length `p`) and row-major `vhat` (`p×p`).
//
// # Safety
// `theta_hat` must point to `p` doubles, `vhat` to `p*p` doubles, `out` to one double.
enum WaldivStatus waldiv_wald_statistic(const struct WaldivSystem *sys,
                                        const double *theta_hat,
                                        const double *vhat,
                                        uint64_t t,
                                        double *out);

// Echelon form and FRALD-T verdict as a JSON report.
//
// # Safety
// `sys` must be a live handle and `out` a valid pointer; free the result with [`waldiv_string_free`].
enum WaldivStatus waldiv_analyze_json(const struct WaldivSystem *sys,
                                      uint64_t seed,
                                      char **out);

// Degrees and divergence exponents as a JSON report; `samples > 0` adds generic degrees.
//
// # Safety
// As for [`waldiv_analyze_json`].
enum WaldivStatus waldiv_rates_json(const struct WaldivSystem *sys,
                                    uint64_t seed,
                                    size_t samples,
                                    char **out);

// Monte Carlo divergence experiment as a JSON report.
//
// `vhat` is `"exact"` or `"perturbed:<c>"`; null means exact. `threads == 0`
// uses the global pool. Results do not depend on the thread count.
//
// # Safety
// `grid` must point to `grid_len` integers; other pointers as for [`waldiv_analyze_json`].
enum WaldivStatus waldiv_simulate_json(const struct WaldivSystem *sys,
                                       uint64_t seed,
                                       const uint64_t *grid,
                                       size_t grid_len,
                                       size_t reps,
                                       const char *vhat,
                                       size_t threads,
                                       char **out);

// Invariant checks as a JSON report. Returns [`WaldivStatus::Numerical`]
// (with the report still written) when any check fails.
//
// # Safety
// As for [`waldiv_analyze_json`].
enum WaldivStatus waldiv_verify_json(const struct WaldivSystem *sys, uint64_t seed, char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from one of the `*_json` functions and not be used afterwards.
void waldiv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WALDIV_H */
