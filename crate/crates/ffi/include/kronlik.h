#ifndef KRONLIK_H
#define KRONLIK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define KL_MODEL_I 1

#define KL_MODEL_II 2

#define KL_MODEL_III 3

typedef enum KlStatus {
  KL_STATUS_OK = 0,
  KL_STATUS_NULL_POINTER = 1,
  KL_STATUS_DOMAIN = 2,
  KL_STATUS_DEGENERATE = 3,
  KL_STATUS_INVALID_ARGUMENT = 4,
  KL_STATUS_PANIC = 5,
} KlStatus;

/**
 * Opaque model handle.
 */
typedef struct KlModel KlModel;

typedef struct KlFitResult {
  double beta_hat;
  /**
   * Infinite when the information at the estimate is zero.
   */
  double se;
  double loglik;
  size_t evaluations;
  bool at_boundary;
} KlFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a model on the integer grid 1..n.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum KlStatus kl_model_new(size_t n, struct KlModel **out);

/**
 * Create a model on strictly increasing coordinates.
 *
 * # Safety
 * `points` must point to `n` readable doubles and `out` to writable storage.
 */
enum KlStatus kl_model_with_points(const double *points, size_t n, struct KlModel **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `kl_model_new`/`kl_model_with_points` and not be
 * used afterwards.
 */
void kl_model_free(struct KlModel *model);

/**
 * Set the n×p design matrix (row-major); `x = NULL` with `p = 0` clears it.
 *
 * # Safety
 * `model` must be a live handle and `x` must point to n·p readable doubles.
 */
enum KlStatus kl_model_set_design(struct KlModel *model, const double *x, size_t n, size_t p);

/**
 * Use a polynomial design with p columns (intercept first); p = 0 clears it.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum KlStatus kl_model_set_polynomial_design(struct KlModel *model, size_t p);

/**
 * Profile (residual, when a design is set) log likelihood at β.
 *
 * # Safety
 * `model` must be a live handle, `y` must point to n·k doubles and `out`
 * to a writable double.
 */
enum KlStatus kl_profile_loglik(const struct KlModel *model,
                                const double *y,
                                size_t n,
                                size_t k,
                                double beta,
                                uint32_t kind,
                                double *out);

/**
 * Derivative of `kl_profile_loglik` in β.
 *
 * # Safety
 * As for `kl_profile_loglik`.
 */
enum KlStatus kl_score(const struct KlModel *model,
                       const double *y,
                       size_t n,
                       size_t k,
                       double beta,
                       uint32_t kind,
                       double *out);

/**
 * Fisher information for β with k series.
 *
 * # Safety
 * `model` must be a live handle and `out` a writable double.
 */
enum KlStatus kl_expected_info(const struct KlModel *model,
                               double beta,
                               size_t k,
                               uint32_t kind,
                               double *out);

/**
 * Maximum likelihood estimate of β over (−1, 1).
 *
 * # Safety
 * `model` must be a live handle, `y` must point to n·k doubles and `out`
 * to a writable `KlFitResult`.
 */
enum KlStatus kl_fit_beta(const struct KlModel *model,
                          const double *y,
                          size_t n,
                          size_t k,
                          uint32_t kind,
                          struct KlFitResult *out);

/**
 * Efficiency of model II relative to model I, (nk+2)/(nk+2k).
 */
double kl_efficiency_ii_vs_i(uint64_t n, uint64_t k);

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when there is no message.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null with `len = 0`.
 */
size_t kl_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KRONLIK_H */
