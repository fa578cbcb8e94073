#ifndef PRECSHRINK_H
#define PRECSHRINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Regime carried by a sample statistics handle.
 */
typedef enum PsRegime {
  /**
   * `p < n`, plain inverse.
   */
  PS_REGIME_INVERTIBLE = 0,
  /**
   * `p >= n`, Moore-Penrose pseudo-inverse.
   */
  PS_REGIME_PSEUDO = 1,
} PsRegime;

/**
 * Result codes shared by every entry point.
 */
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_INPUT = 2,
  PS_STATUS_DIMENSION_MISMATCH = 3,
  PS_STATUS_SINGULAR = 4,
  PS_STATUS_REGIME_MISMATCH = 5,
  PS_STATUS_DEGENERATE_TARGET = 6,
  PS_STATUS_NON_CONVERGENCE = 7,
  PS_STATUS_INCONSISTENT_INPUT = 8,
  PS_STATUS_UNDEFINED_PRIAL = 9,
  PS_STATUS_PANIC = 10,
  PS_STATUS_INTERNAL = 11,
} PsStatus;

/**
 * Population covariance model.
 */
typedef struct PsCovarianceModel PsCovarianceModel;

/**
 * Sample covariance with its cached decomposition and (pseudo-)inverse.
 */
typedef struct PsSampleStats PsSampleStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *ps_version(void);

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ps_last_error_message(void);

/**
 * Builds sample statistics from a `p × n` row-major data buffer
 * (rows are variables). With `center` nonzero, means are removed and the
 * divisor is `n − 1`.
 *
 * # Safety
 * `data` must point to `p * n` readable doubles; `out` must be writable.
 */
enum PsStatus ps_sample_stats_new(const double *data,
                                  size_t p,
                                  size_t n,
                                  int32_t center,
                                  struct PsSampleStats **out);

/**
 * Releases a handle from `ps_sample_stats_new`. Null is ignored.
 *
 * # Safety
 * `stats` must be null or a live handle, not used afterwards.
 */
void ps_sample_stats_free(struct PsSampleStats *stats);

/**
 * # Safety
 * `stats` must be a live handle; outputs must be writable.
 */
enum PsStatus ps_sample_stats_dims(const struct PsSampleStats *stats,
                                   size_t *out_p,
                                   size_t *out_n,
                                   enum PsRegime *out_regime);

/**
 * Builds a diagonal population model realising the spectrum at dimension `p`.
 *
 * # Safety
 * `weights` and `eigenvalues` must hold `atoms` doubles; `out` must be writable.
 */
enum PsStatus ps_model_new(const double *weights,
                           const double *eigenvalues,
                           size_t atoms,
                           size_t p,
                           struct PsCovarianceModel **out);

/**
 * # Safety
 * `model` must be null or a live handle, not used afterwards.
 */
void ps_model_free(struct PsCovarianceModel *model);

/**
 * Copies the model's precision matrix `Σ⁻¹` into `out_matrix` (`p * p`).
 *
 * # Safety
 * `model` must be live and `out_matrix` must hold `p * p` doubles.
 */
enum PsStatus ps_model_precision(const struct PsCovarianceModel *model, double *out_matrix);

/**
 * Feasible shrinkage estimate `α̂·S⁻¹ + β̂·Π₀` (requires `p < n`).
 * `target` is a row-major `p × p` matrix or null for `I/p`.
 * `out_alpha` and `out_beta` may be null.
 *
 * # Safety
 * `stats` must be live; buffers must have the stated sizes.
 */
enum PsStatus ps_bona_fide(const struct PsSampleStats *stats,
                           const double *target,
                           int32_t clamp,
                           double *out_matrix,
                           double *out_alpha,
                           double *out_beta);

/**
 * Oracle shrinkage estimate in either regime.
 *
 * # Safety
 * `stats` and `model` must be live; buffers must have the stated sizes.
 */
enum PsStatus ps_oracle(const struct PsSampleStats *stats,
                        const struct PsCovarianceModel *model,
                        const double *target,
                        double *out_matrix,
                        double *out_alpha,
                        double *out_beta);

/**
 * Limit of `‖S⁻¹‖²_F / p` for `0 < c < 1`.
 *
 * # Safety
 * `weights` and `eigenvalues` must hold `atoms` doubles; `out` must be writable.
 */
enum PsStatus ps_psi_limit(const double *weights,
                           const double *eigenvalues,
                           size_t atoms,
                           double c,
                           double *out_psi);

/**
 * `x(0)` and `x′(0)` for `c > 1`. `out_x0_prime` may be null.
 *
 * # Safety
 * `model` must be live; `out_x0` must be writable.
 */
enum PsStatus ps_x0(const struct PsCovarianceModel *model,
                    double c,
                    double *out_x0,
                    double *out_x0_prime);

/**
 * `‖estimate − truth‖²_F` for two row-major `p × p` matrices.
 *
 * # Safety
 * Both buffers must hold `p * p` doubles.
 */
enum PsStatus ps_frobenius_loss(const double *estimate,
                                const double *truth,
                                size_t p,
                                double *out_loss);

/**
 * `(1 − estimator/baseline)·100`.
 *
 * # Safety
 * `out_percent` must be writable.
 */
enum PsStatus ps_prial(double mean_loss_estimator, double mean_loss_baseline, double *out_percent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRECSHRINK_H */
