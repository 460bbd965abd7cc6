#ifndef POINTMATCH_H
#define POINTMATCH_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PM_MODE_REG_SIM2D 0

#define PM_MODE_REG_AFF2D 1

#define PM_MODE_REG_SCALE3D 2

#define PM_MODE_SIM2D 3

#define PM_MODE_SIM3D 4

#define PM_BOUND_LP 0

#define PM_BOUND_FAST 1

#define PM_CERT_EPS_OPTIMAL 0

#define PM_CERT_DEPTH_TERMINATED 1

#define PM_CERT_ITERATION_LIMIT 2

// Status codes returned by every function.
typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_POINTER = 1,
  // Invalid or degenerate input data.
  PM_STATUS_INPUT = 2,
  // A matrix that had to be positive definite was not.
  PM_STATUS_NUMERIC = 3,
  // Solver invariant violated.
  PM_STATUS_INTERNAL = 4,
  // A Rust panic was caught at the boundary.
  PM_STATUS_PANIC = 5,
} PmStatus;

// Opaque match result.
typedef struct PmResult PmResult;

// Search settings. Start from [`pm_options_default`].
typedef struct PmOptions {
  // One of the `PM_MODE_*` constants.
  uint32_t mode;
  // Number of pairs. Zero means use `np_fraction`.
  size_t n_p;
  // Fraction of `min(m, n)` used when `n_p` is zero.
  double np_fraction;
  // One of the `PM_BOUND_*` constants.
  uint32_t bound;
  double epsilon;
  size_t max_depth;
  // Zero means unlimited.
  size_t max_iterations;
  // Zero means all cores.
  size_t workers;
  double scale_lo;
  double scale_hi;
} PmOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default settings: similarity 2D, all pairs of the smaller set, fast bound.
struct PmOptions pm_options_default(void);

// Matches `m` model points against `n` scene points of dimension `dim`.
// On success `*out` receives a handle owned by the caller.
//
// # Safety
// `model` and `scene` must point to `m * dim` and `n * dim` doubles,
// `options` may be null for defaults, and `out` must be writable.
enum PmStatus pm_match(const double *model,
                       size_t m,
                       const double *scene,
                       size_t n,
                       size_t dim,
                       const struct PmOptions *options,
                       struct PmResult **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `result` must come from [`pm_match`] and not be freed twice.
void pm_result_free(struct PmResult *result);

// Energy of the best correspondence, NaN for a null handle.
//
// # Safety
// `result` must be a live handle or null.
double pm_result_energy(const struct PmResult *result);

// Number of matched pairs, zero for a null handle.
//
// # Safety
// `result` must be a live handle or null.
size_t pm_result_pair_count(const struct PmResult *result);

// Pairs as `(model index, scene index)`, `2 * pair_count` entries. The
// pointer stays valid until the handle is freed.
//
// # Safety
// `result` must be a live handle or null.
const size_t *pm_result_pairs(const struct PmResult *result);

// Search iterations performed.
//
// # Safety
// `result` must be a live handle or null.
size_t pm_result_iterations(const struct PmResult *result);

// One of the `PM_CERT_*` constants, `u32::MAX` for a null handle.
//
// # Safety
// `result` must be a live handle or null.
uint32_t pm_result_certificate(const struct PmResult *result);

// Dimension of the recovered transformation.
//
// # Safety
// `result` must be a live handle or null.
size_t pm_result_dim(const struct PmResult *result);

// Copies the `dim x dim` linear part, row-major, into `out`.
//
// # Safety
// `result` must be a live handle and `out` must hold `dim * dim` doubles.
enum PmStatus pm_result_linear(const struct PmResult *result, double *out);

// Copies the translation into `out`.
//
// # Safety
// `result` must be a live handle and `out` must hold `dim` doubles.
enum PmStatus pm_result_translation(const struct PmResult *result, double *out);

// Minimum-cost selection of `k` disjoint pairs from a row-major `rows x
// cols` cost matrix. Writes `2 * k` indices to `pairs` and the total to
// `value`.
//
// # Safety
// `cost` must hold `rows * cols` doubles, `pairs` must hold `2 * k`
// entries and `value` must be writable.
enum PmStatus pm_solve_k_lap(const double *cost,
                             size_t rows,
                             size_t cols,
                             size_t k,
                             size_t *pairs,
                             double *value);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call on the same thread.
const char *pm_last_error_message(void);

// Library version as a static nul-terminated string.
const char *pm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POINTMATCH_H */
