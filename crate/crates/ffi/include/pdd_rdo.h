/* C interface to pdd-rdo. Generated by cbindgen; do not edit. */

#ifndef PDD_RDO_H
#define PDD_RDO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum PddStatus {
  PDD_STATUS_OK = 0,
  PDD_STATUS_NULL_POINTER = 1,
  PDD_STATUS_INVALID_ARGUMENT = 2,
  PDD_STATUS_PARSE = 3,
  PDD_STATUS_NUMERICAL = 4,
  PDD_STATUS_IO = 5,
  PDD_STATUS_PANIC = 6,
} PddStatus;

/**
 * A fitted surrogate, optionally with the training samples needed for
 * retraining and optimization.
 */
typedef struct PddSurrogateHandle PddSurrogateHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *pdd_last_error(void);

/**
 * Releases a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pdd_string_free(char *s);

/**
 * Number of PDD basis functions `L(n, s, m)`.
 *
 * # Safety
 * `out_count` must be valid for writes.
 */
enum PddStatus pdd_count_basis(size_t n, size_t s, size_t m, size_t *out_count);

/**
 * Reads a surrogate file written by the library or the CLI.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_handle` valid for writes.
 */
enum PddStatus pdd_surrogate_load(const char *path, struct PddSurrogateHandle **out_handle);

/**
 * Parses a surrogate from its text form.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out_handle` valid for writes.
 */
enum PddStatus pdd_surrogate_from_string(const char *source,
                                         struct PddSurrogateHandle **out_handle);

/**
 * Text form of a surrogate, including its training samples when present.
 * Release with [`pdd_string_free`].
 *
 * # Safety
 * `handle` must be live; `out_text` valid for writes.
 */
enum PddStatus pdd_surrogate_to_string(const struct PddSurrogateHandle *handle, char **out_text);

/**
 * Releases a surrogate. NULL is ignored.
 *
 * # Safety
 * `handle` must come from this library and not have been freed.
 */
void pdd_surrogate_free(struct PddSurrogateHandle *handle);

/**
 * Number of inputs, basis functions and stored training samples.
 *
 * # Safety
 * `handle` must be live; outputs may be NULL when not wanted.
 */
enum PddStatus pdd_surrogate_dims(const struct PddSurrogateHandle *handle,
                                  size_t *out_inputs,
                                  size_t *out_terms,
                                  size_t *out_samples);

/**
 * Evaluates the surrogate at `n` physical inputs `x`.
 *
 * # Safety
 * `x` must hold `n` values; `out_value` valid for writes.
 */
enum PddStatus pdd_surrogate_predict(const struct PddSurrogateHandle *handle,
                                     const double *x,
                                     size_t n,
                                     double *out_value);

/**
 * Mean and standard deviation of the surrogate output.
 *
 * # Safety
 * `handle` must be live; outputs valid for writes.
 */
enum PddStatus pdd_surrogate_moments(const struct PddSurrogateHandle *handle,
                                     double *out_mean,
                                     double *out_sd);

/**
 * Copies the coefficients into `buf`, which must hold exactly the number of
 * basis functions.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum PddStatus pdd_surrogate_coefficients(const struct PddSurrogateHandle *handle,
                                          double *buf,
                                          size_t len);

/**
 * Single-pass retrain at transform vector `r_new` (length = inputs). The
 * handle must carry training samples. The new surrogate shares them.
 *
 * # Safety
 * `r_new` must hold `n` values; `out_handle` valid for writes.
 */
enum PddStatus pdd_surrogate_retrain(const struct PddSurrogateHandle *handle,
                                     const double *r_new,
                                     size_t n,
                                     const char *config_toml,
                                     struct PddSurrogateHandle **out_handle);

/**
 * Fits a surrogate to `m` samples of `n` inputs. `x` is row-major `m × n`,
 * `q` holds the outputs. The problem, truncation, method and initial design
 * come from `config_toml` (NULL or empty for defaults).
 *
 * # Safety
 * `x` must hold `m·n` values, `q` `m` values; `out_handle` valid for writes.
 */
enum PddStatus pdd_fit(const double *x,
                       const double *q,
                       size_t m,
                       size_t n,
                       const char *config_toml,
                       struct PddSurrogateHandle **out_handle);

/**
 * Optimizes one weight pair starting from the surrogate's design `rdo.d0`
 * in `config_toml`. Writes the optimum (`d_len` = design dimension) and
 * its surrogate mean and standard deviation.
 *
 * # Safety
 * `d_star` must be valid for `d_len` writes; other outputs valid for writes.
 */
enum PddStatus pdd_optimize(const struct PddSurrogateHandle *handle,
                            const char *config_toml,
                            double w1,
                            double w2,
                            double *d_star,
                            size_t d_len,
                            double *out_mean,
                            double *out_sd);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDD_RDO_H */
