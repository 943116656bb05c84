#ifndef LOCALNET_H
#define LOCALNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum LnStatus {
  LN_STATUS_OK = 0,
  LN_STATUS_NULL_POINTER = 1,
  LN_STATUS_INVALID_UTF8 = 2,
  LN_STATUS_DOMAIN = 3,
  LN_STATUS_CONFIG = 4,
  LN_STATUS_NON_FINITE = 5,
  LN_STATUS_COVER = 6,
  LN_STATUS_NO_CHART = 7,
  LN_STATUS_FIT_RESIDUAL = 8,
  LN_STATUS_TRIAL = 9,
  LN_STATUS_IO = 10,
  LN_STATUS_JSON = 11,
  LN_STATUS_CSV = 12,
  LN_STATUS_PANIC = 99,
} LnStatus;

/**
 * Prediction modes.
 */
typedef enum LnMode {
  LN_MODE_LITERAL = 0,
  LN_MODE_INTERIOR = 1,
  LN_MODE_FEEDBACK = 2,
} LnMode;

/**
 * Opaque chart atlas.
 */
typedef struct LnAtlas LnAtlas;

/**
 * Opaque fitted estimator.
 */
typedef struct LnEstimator LnEstimator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *ln_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ln_version(void);

/**
 * Releases a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ln_string_free(char *s);

/**
 * `ceil(m^(1/(2s+d)))`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LnStatus ln_choose_n(size_t m, double s, size_t d, uint32_t *out);

/**
 * Builds an atlas with default options for a manifold given as JSON, e.g.
 * `{"kind":"circle","radius":1.0}`.
 *
 * # Safety
 * `manifold_json` must be NUL-terminated; `out` must be a valid pointer.
 */
enum LnStatus ln_atlas_build(const char *manifold_json, uint64_t seed, struct LnAtlas **out);

/**
 * # Safety
 * `atlas` must come from [`ln_atlas_build`] or be NULL.
 */
void ln_atlas_free(struct LnAtlas *atlas);

/**
 * # Safety
 * `atlas` must be a live handle; `out` a valid pointer.
 */
enum LnStatus ln_atlas_ambient_dim(const struct LnAtlas *atlas, size_t *out);

/**
 * # Safety
 * `atlas` must be a live handle; `out` a valid pointer.
 */
enum LnStatus ln_atlas_q_star(const struct LnAtlas *atlas, uint32_t *out);

/**
 * # Safety
 * `atlas` must be a live handle; `out` a valid pointer.
 */
enum LnStatus ln_atlas_chart_count(const struct LnAtlas *atlas, size_t *out);

/**
 * Builds an estimator from `m` samples. `x` is row-major with `dim`
 * columns; `y` has `m` entries. `n = 0` picks the resolution from `m`
 * with smoothness 1.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum LnStatus ln_estimator_build(const struct LnAtlas *atlas,
                                 const double *x,
                                 const double *y,
                                 size_t m,
                                 size_t dim,
                                 double bound,
                                 uint32_t n,
                                 struct LnEstimator **out);

/**
 * Loads an estimator from its JSON form.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be a valid pointer.
 */
enum LnStatus ln_estimator_from_json(const char *json, struct LnEstimator **out);

/**
 * Serializes an estimator. Release the string with [`ln_string_free`].
 *
 * # Safety
 * `est` must be a live handle; `out` a valid pointer.
 */
enum LnStatus ln_estimator_to_json(const struct LnEstimator *est, char **out);

/**
 * # Safety
 * `est` must come from this library or be NULL.
 */
void ln_estimator_free(struct LnEstimator *est);

/**
 * Predicts one query of length `dim`.
 *
 * # Safety
 * `x` must hold `dim` values; `out` must be a valid pointer.
 */
enum LnStatus ln_estimator_predict(const struct LnEstimator *est,
                                   const double *x,
                                   size_t dim,
                                   enum LnMode mode,
                                   double *out);

/**
 * Predicts `count` row-major queries into `out[0..count]`.
 *
 * # Safety
 * `xs` must hold `count * dim` values and `out` room for `count`.
 */
enum LnStatus ln_estimator_predict_batch(const struct LnEstimator *est,
                                         const double *xs,
                                         size_t count,
                                         size_t dim,
                                         enum LnMode mode,
                                         double *out);

/**
 * Runs a rate sweep for a JSON experiment config and returns the result
 * as JSON. Release the string with [`ln_string_free`].
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out` must be a valid pointer.
 */
enum LnStatus ln_rates_json(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCALNET_H */
