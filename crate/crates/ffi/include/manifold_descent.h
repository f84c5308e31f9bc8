#ifndef MANIFOLD_DESCENT_H
#define MANIFOLD_DESCENT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_ARGUMENT = 2,
  MD_STATUS_UNKNOWN_SCENARIO = 3,
  MD_STATUS_UNKNOWN_METHOD = 4,
  MD_STATUS_UNSUPPORTED_METHOD = 5,
  // The matrix passed in is not symmetric.
  MD_STATUS_ASYMMETRIC = 6,
  // A run hit a non-finite value or a singular system before starting.
  MD_STATUS_NUMERICAL = 7,
  MD_STATUS_BUFFER_TOO_SMALL = 8,
  // A Rust panic was caught at the boundary.
  MD_STATUS_PANIC = 9,
} MdStatus;

// Outcome of one scenario run, including its iterate trace.
typedef struct MdResult MdResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *md_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *md_version(void);

// Runs builtin scenario `scenario` with `method`. A negative `iters` uses
// the scenario's own budget. On success `*out` receives a new handle.
//
// # Safety
// `scenario` and `method` must be NUL-terminated strings and `out` a valid
// pointer.
enum MdStatus md_run_scenario(const char *scenario,
                              const char *method,
                              int64_t iters,
                              uint64_t seed,
                              struct MdResult **out);

// Releases a handle from [`md_run_scenario`]. Null is ignored.
//
// # Safety
// `result` must be null or a handle not yet freed.
void md_result_free(struct MdResult *result);

// Ambient dimension of the final point, or 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
size_t md_result_dim(const struct MdResult *result);

// Final objective value, NaN for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double md_result_value(const struct MdResult *result);

// Accepted steps, 0 for a null handle.
//
// # Safety
// `result` must be null or a live handle.
size_t md_result_steps(const struct MdResult *result);

// Termination reason (for example `"Diverged"`). Owned by the handle.
//
// # Safety
// `result` must be null or a live handle.
const char *md_result_termination(const struct MdResult *result);

// 1 if the run carries `flag` (`"clamped"`, `"left_domain_would"` or
// `"converged_to_maximum"`), 0 otherwise.
//
// # Safety
// `result` must be null or a live handle; `flag` a NUL-terminated string.
int32_t md_result_has_flag(const struct MdResult *result, const char *flag);

// Copies the final point into `buf`, which must hold `md_result_dim` values.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum MdStatus md_result_point(const struct MdResult *result, double *buf, size_t len);

// Result summary as a JSON object. Free with [`md_string_free`].
//
// # Safety
// `result` must be null or a live handle.
char *md_result_to_json(const struct MdResult *result);

// Per-iteration trace as CSV (`iter,f,grad_norm,step_size,x0,...`).
// Free with [`md_string_free`].
//
// # Safety
// `result` must be null or a live handle.
char *md_result_trace_csv(const struct MdResult *result);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void md_string_free(char *s);

// Estimates the smallest eigenvalue of the symmetric `dim`×`dim` row-major
// matrix `a` by minimizing `x^T A x / 2` on the unit sphere with `method`.
// Writes the eigenvalue to `*lambda` and, if `vector` is non-null, a unit
// eigenvector of `dim` entries.
//
// # Safety
// `a` must point to `dim*dim` doubles, `vector` to `dim` writable doubles
// or be null, and `lambda` must be valid.
enum MdStatus md_smallest_eigenvalue(const double *a,
                                     size_t dim,
                                     const char *method,
                                     uint64_t seed,
                                     double *lambda,
                                     double *vector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MANIFOLD_DESCENT_H */
