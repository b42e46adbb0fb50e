#ifndef HULLFORGE_H
#define HULLFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_ARGUMENT = 2,
  HF_STATUS_VERIFICATION_FAILED = 3,
  HF_STATUS_INTERNAL = 4,
  HF_STATUS_PANIC = 5,
} HfStatus;

typedef enum HfTarget {
  HF_TARGET_OUTER_CIRCLE = 0,
  HF_TARGET_ARC = 1,
} HfTarget;

/**
 * Opaque perforated disc.
 */
typedef struct HfDomain HfDomain;

/**
 * Opaque lacunary series Σ ε_j / (r_j^{2^j} − z^{2^j}).
 */
typedef struct HfLacunary HfLacunary;

typedef struct HfHole {
  double cx;
  double cy;
  double r;
} HfHole;

typedef struct HfEstimate {
  double value;
  double std_err;
  uint64_t hits;
  uint64_t n_walks;
  uint64_t timeouts;
  bool valid;
} HfEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *hf_last_error(void);

/**
 * Library version as a static string.
 */
const char *hf_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void hf_string_free(char *s);

/**
 * Builds a series from `n` ring weights given as exact rationals ("1/10", "3").
 *
 * # Safety
 * `eps` must point to `n` valid NUL-terminated strings; `out` must be writable.
 */
enum HfStatus hf_lacunary_new(const char *const *eps, size_t n, struct HfLacunary **out);

/**
 * # Safety
 * `h` must be NULL or a handle from [`hf_lacunary_new`] not yet freed.
 */
void hf_lacunary_free(struct HfLacunary *h);

/**
 * Taylor coefficient d_k, exactly as "p/q" (free with [`hf_string_free`]) and as a double.
 *
 * # Safety
 * `h` must be a live handle; `exact` may be NULL; `approx` may be NULL.
 */
enum HfStatus hf_lacunary_coefficient(const struct HfLacunary *h,
                                      uint64_t k,
                                      char **exact,
                                      double *approx);

/**
 * f(z) in double precision.
 *
 * # Safety
 * `h` must be a live handle; `re_out` and `im_out` must be writable.
 */
enum HfStatus hf_lacunary_eval(const struct HfLacunary *h,
                               double re,
                               double im,
                               double *re_out,
                               double *im_out);

/**
 * Smallest k <= k_max with d_{stage,k} > threshold^-k. `threshold` NULL selects the default.
 *
 * # Safety
 * `h` must be a live handle; `threshold` NULL or a valid string; `k_out` writable.
 */
enum HfStatus hf_lacunary_witness(const struct HfLacunary *h,
                                  size_t stage,
                                  const char *threshold,
                                  uint64_t k_max,
                                  uint64_t *k_out);

/**
 * Disc of radius `rho` with `n` disjoint holes and target arc k0/n0.
 *
 * # Safety
 * `holes` must point to `n` entries (may be NULL when n = 0); `out` writable.
 */
enum HfStatus hf_domain_new(double rho,
                            const struct HfHole *holes,
                            size_t n,
                            uint64_t k0,
                            uint64_t n0,
                            struct HfDomain **out);

/**
 * # Safety
 * `d` must be NULL or a handle from [`hf_domain_new`] not yet freed.
 */
void hf_domain_free(struct HfDomain *d);

/**
 * Walk-on-spheres harmonic measure of the target seen from (x, y).
 *
 * # Safety
 * `d` must be a live handle; `out` writable.
 */
enum HfStatus hf_estimate(const struct HfDomain *d,
                          double x,
                          double y,
                          enum HfTarget target,
                          uint64_t n_walks,
                          uint64_t seed,
                          double eps_boundary,
                          struct HfEstimate *out);

/**
 * log(r/r_in) / log(r_out/r_in).
 *
 * # Safety
 * `out` must be writable.
 */
enum HfStatus hf_exact_annulus(double r, double r_in, double r_out, double *out);

/**
 * Runs the pipeline for a JSON run configuration and writes the bundle to `out_dir`.
 * Returns [`HfStatus::VerificationFailed`] when the bundle is written but invalid.
 *
 * # Safety
 * `config_json` and `out_dir` must be valid strings; `valid` may be NULL.
 */
enum HfStatus hf_construct(const char *config_json, const char *out_dir, bool *valid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HULLFORGE_H */
