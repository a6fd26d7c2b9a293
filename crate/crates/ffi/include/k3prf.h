#ifndef K3PRF_H
#define K3PRF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bumped on any incompatible change to this header.
 */
#define K3PRF_ABI_VERSION 1

typedef enum K3prfStatus {
  K3PRF_STATUS_OK = 0,
  K3PRF_STATUS_NULL_POINTER = 1,
  K3PRF_STATUS_INVALID_ARGUMENT = 2,
  K3PRF_STATUS_DATA_ERROR = 3,
  K3PRF_STATUS_NUMERICAL_ERROR = 4,
  K3PRF_STATUS_PANIC = 5,
} K3prfStatus;

typedef enum K3prfKernel {
  K3PRF_KERNEL_LINEAR = 0,
  /**
   * `(x'y + param)^2`
   */
  K3PRF_KERNEL_POLY2 = 1,
  /**
   * `exp(-|x - y|^2 / (2 param^2))`
   */
  K3PRF_KERNEL_GAUSSIAN = 2,
} K3prfKernel;

/**
 * Opaque fitted model.
 */
typedef struct K3prfModel K3prfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fits on `x` (t x n), target `y` (t) and proxies `z` (t x l).
 *
 * # Safety
 * Pointers must reference buffers of the stated sizes; `out` must be
 * writable. On success `*out` owns a model to release with
 * [`k3prf_model_free`].
 */
enum K3prfStatus k3prf_fit(const double *x,
                           size_t t,
                           size_t n,
                           const double *y,
                           const double *z,
                           size_t l,
                           enum K3prfKernel kernel,
                           double param,
                           struct K3prfModel **out);

/**
 * Fits with `l` automatically built proxies.
 *
 * # Safety
 * As for [`k3prf_fit`].
 */
enum K3prfStatus k3prf_fit_auto(const double *x,
                                size_t t,
                                size_t n,
                                const double *y,
                                size_t l,
                                enum K3prfKernel kernel,
                                double param,
                                struct K3prfModel **out);

/**
 * Number of training observations.
 *
 * # Safety
 * `model` must come from a fit call; `out` must be writable.
 */
enum K3prfStatus k3prf_num_obs(const struct K3prfModel *model, size_t *out);

/**
 * Copies the in-sample fitted values into `out` (length `len`, which
 * must equal the number of observations).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum K3prfStatus k3prf_fitted_values(const struct K3prfModel *model, double *out, size_t len);

/**
 * Forecasts for `rows` new observations `x_new` (rows x n) into `out`.
 *
 * # Safety
 * `x_new` must hold `rows * n` doubles and `out` `rows` writable doubles.
 */
enum K3prfStatus k3prf_predict(const struct K3prfModel *model,
                               const double *x_new,
                               size_t rows,
                               size_t n,
                               double *out);

/**
 * Out-of-sample R² of `forecast` against `actual` relative to
 * `train_mean`.
 *
 * # Safety
 * `actual` and `forecast` must hold `len` doubles; `out` must be writable.
 */
enum K3prfStatus k3prf_oos_r2(const double *actual,
                              const double *forecast,
                              size_t len,
                              double train_mean,
                              double *out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from a fit call and not be used afterwards.
 */
void k3prf_model_free(struct K3prfModel *model);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *k3prf_last_error(void);

uint32_t k3prf_abi_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* K3PRF_H */
