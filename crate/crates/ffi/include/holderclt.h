#ifndef HOLDERCLT_H
#define HOLDERCLT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum HcStatus {
  HC_STATUS_OK = 0,
  HC_STATUS_NULL_POINTER = 1,
  HC_STATUS_INVALID_INPUT = 2,
  HC_STATUS_NUMERICAL = 3,
  HC_STATUS_BUFFER_TOO_SMALL = 4,
  HC_STATUS_PANIC = 5,
} HcStatus;

/**
 * Covariance families for [`hc_model_gaussian`].
 */
typedef enum HcCovariance {
  HC_COVARIANCE_BROWNIAN = 0,
  /**
   * `param` is the Hurst index.
   */
  HC_COVARIANCE_FRACTIONAL_BROWNIAN = 1,
  HC_COVARIANCE_BROWNIAN_SHEET = 2,
  /**
   * `param` is the mean-reversion rate.
   */
  HC_COVARIANCE_ORNSTEIN_UHLENBECK = 3,
  HC_COVARIANCE_ZERO = 4,
} HcCovariance;

/**
 * Coefficient laws for [`hc_model_series`].
 */
typedef enum HcInnovation {
  HC_INNOVATION_RADEMACHER = 0,
  HC_INNOVATION_UNIFORM = 1,
  HC_INNOVATION_GAUSSIAN = 2,
  /**
   * Uses `tail_index`.
   */
  HC_INNOVATION_SYMMETRIC_PARETO = 3,
} HcInnovation;

/**
 * Opaque ensemble of simulated paths.
 */
typedef struct HcEnsemble HcEnsemble;

/**
 * Opaque field model.
 */
typedef struct HcModel HcModel;

/**
 * Opaque Young function.
 */
typedef struct HcYoung HcYoung;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hc_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t hc_last_error(char *buf, size_t len);

/**
 * `Φ(z) = |z|^p`, `p ≥ 1`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HcStatus hc_young_power(double p, struct HcYoung **out);

/**
 * `Φ(z) = exp(z²) − 1`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HcStatus hc_young_exp_quadratic(struct HcYoung **out);

/**
 * # Safety
 * `y` must be NULL or a handle from an `hc_young_*` constructor, freed once.
 */
void hc_young_free(struct HcYoung *y);

/**
 * `Φ(z)`.
 *
 * # Safety
 * `y` and `out` must be valid pointers.
 */
enum HcStatus hc_young_eval(const struct HcYoung *y, double z, double *out);

/**
 * Luxemburg norm of the uniform empirical law of `values`.
 *
 * # Safety
 * `values` must point to `len` doubles; `y` and `out` must be valid.
 */
enum HcStatus hc_orlicz_norm(const double *values,
                             size_t len,
                             const struct HcYoung *y,
                             double *out);

/**
 * Hölder norm of a grid field (row-major, last axis fastest) under the
 * distance `|x − y|^beta`.
 *
 * # Safety
 * `shape` must point to `dim` sizes and `values` to their product of doubles.
 */
enum HcStatus hc_holder_norm(const double *values,
                             const size_t *shape,
                             size_t dim,
                             double beta,
                             double *out);

/**
 * Fractional Sobolev norm `W(α, p)` of a grid field; `alpha` has `dim` entries.
 *
 * # Safety
 * As for [`hc_holder_norm`]; `alpha` must point to `dim` doubles.
 */
enum HcStatus hc_sobolev_norm(const double *values,
                              const size_t *shape,
                              size_t dim,
                              const double *alpha,
                              double p,
                              double *out);

/**
 * Garsia–Rodemich–Rumsey audit of one field; writes the violation count and
 * the worst ratio of the left side to the bound.
 *
 * # Safety
 * As for [`hc_sobolev_norm`]; both out-pointers must be valid.
 */
enum HcStatus hc_grr_audit(const double *values,
                           const size_t *shape,
                           size_t dim,
                           const double *alpha,
                           double p,
                           uint64_t seed,
                           size_t *violations,
                           double *worst_ratio);

/**
 * Ball exponent `θ` and constant `C(θ)` of the uniform measure on a grid of
 * `[0, 1]^dim` with the Euclidean distance.
 *
 * # Safety
 * `shape` must point to `dim` sizes; out-pointers must be valid.
 */
enum HcStatus hc_fit_ball_exponent(const size_t *shape, size_t dim, double *theta, double *c_theta);

/**
 * Gaussian model with the given covariance; `param` is read only by the
 * parametrised families.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HcStatus hc_model_gaussian(enum HcCovariance kind, double param, struct HcModel **out);

/**
 * Sine series `Σ k^{-decay} ζ_k √2 sin(kπx)` with `terms` terms.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HcStatus hc_model_series(double decay,
                              size_t terms,
                              enum HcInnovation law,
                              double tail_index,
                              struct HcModel **out);

/**
 * # Safety
 * `m` must be NULL or a handle from an `hc_model_*` constructor, freed once.
 */
void hc_model_free(struct HcModel *m);

/**
 * Simulates `replicas` paths of `model` on a grid of `[0, 1]^dim`. The result
 * depends only on the model, grid, replica count and seed.
 *
 * # Safety
 * `model` and `out` must be valid; `shape` must point to `dim` sizes.
 */
enum HcStatus hc_simulate(const struct HcModel *model,
                          const size_t *shape,
                          size_t dim,
                          size_t replicas,
                          uint64_t seed,
                          struct HcEnsemble **out);

/**
 * # Safety
 * `e` must be NULL or a handle from [`hc_simulate`], freed once.
 */
void hc_ensemble_free(struct HcEnsemble *e);

/**
 * Number of replicas and of grid points per path.
 *
 * # Safety
 * All pointers must be valid.
 */
enum HcStatus hc_ensemble_size(const struct HcEnsemble *e, size_t *replicas, size_t *points);

/**
 * Copies path `replica` into `buf`, which must hold at least the number of
 * grid points.
 *
 * # Safety
 * `e` must be valid and `buf` must point to `len` writable doubles.
 */
enum HcStatus hc_ensemble_path(const struct HcEnsemble *e, size_t replica, double *buf, size_t len);

/**
 * Returns 1 when `status` is [`HcStatus::Ok`]; convenience for C callers.
 */
int hc_ok(enum HcStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOLDERCLT_H */
