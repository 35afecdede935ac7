#ifndef HEISENVT_H
#define HEISENVT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HvtStatus {
  HVT_STATUS_OK = 0,
  HVT_STATUS_NULL_POINTER = 1,
  HVT_STATUS_INVALID_ARGUMENT = 2,
  HVT_STATUS_INVALID_PRIME = 3,
  HVT_STATUS_BUDGET_EXCEEDED = 4,
  HVT_STATUS_PRECISION = 5,
  HVT_STATUS_FORMAT = 6,
  HVT_STATUS_OVERFLOW = 7,
  HVT_STATUS_PANIC = 8,
} HvtStatus;

typedef enum HvtSpectrumMode {
  HVT_SPECTRUM_MODE_DENSE = 0,
  HVT_SPECTRUM_MODE_BLOCK = 1,
  HVT_SPECTRUM_MODE_CLOSED = 2,
} HvtSpectrumMode;

/**
 * A quotient `H_d(Z/p^n)`.
 */
typedef struct HvtContext HvtContext;

/**
 * A function on a quotient.
 */
typedef struct HvtLevelFunction HvtLevelFunction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after success).
 * The pointer stays valid until the next call on the same thread.
 */
const char *hvt_last_error(void);

/**
 * Library version as a static string.
 */
const char *hvt_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum HvtStatus hvt_context_new(uint64_t p, uint32_t d, uint32_t n, struct HvtContext **out);

/**
 * # Safety
 * `ctx` must come from `hvt_context_new` and not be used afterwards.
 */
void hvt_context_free(struct HvtContext *ctx);

/**
 * Number of points `p^{n(2d+1)}` of the quotient.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HvtStatus hvt_context_points(const struct HvtContext *ctx, size_t *out);

/**
 * Number of labels in the dual ball `B(n)`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HvtStatus hvt_dual_count(const struct HvtContext *ctx, size_t *out);

/**
 * `Σ d_π²` over `B(n)` and `|G/G_n|`; `HVT_STATUS_OVERFLOW` if either
 * exceeds 64 bits.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HvtStatus hvt_peter_weyl(const struct HvtContext *ctx, uint64_t *sum, uint64_t *order);

/**
 * Copies `len` interleaved `(re, im)` pairs into a new function; `len` must
 * equal the number of points.
 *
 * # Safety
 * `data` must point to `2 * len` doubles.
 */
enum HvtStatus hvt_function_new(const struct HvtContext *ctx,
                                const double *data,
                                size_t len,
                                struct HvtLevelFunction **out);

/**
 * Number of points of `f`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum HvtStatus hvt_function_len(const struct HvtLevelFunction *f, size_t *out);

/**
 * Copies the values of `f` into `out` as interleaved pairs; `len` is the
 * capacity in points and must be at least `hvt_function_len`.
 *
 * # Safety
 * `out` must point to `2 * len` writable doubles.
 */
enum HvtStatus hvt_function_data(const struct HvtLevelFunction *f, double *out, size_t len);

/**
 * # Safety
 * `f` must come from this library and not be used afterwards.
 */
void hvt_function_free(struct HvtLevelFunction *f);

/**
 * Applies the operator described by `spec` (compact form such as
 * `sublaplacian:alpha=1`, or JSON) to `f` by exact quadrature.
 *
 * # Safety
 * Pointers must be valid; `spec` must be NUL-terminated.
 */
enum HvtStatus hvt_apply_operator(const char *spec,
                                  const struct HvtLevelFunction *f,
                                  struct HvtLevelFunction **out);

/**
 * Spectrum report as JSON (release with `hvt_string_free`).
 *
 * # Safety
 * Pointers must be valid; `spec` must be NUL-terminated.
 */
enum HvtStatus hvt_spectrum_json(const struct HvtContext *ctx,
                                 const char *spec,
                                 enum HvtSpectrumMode mode,
                                 char **out);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void hvt_string_free(char *s);

/**
 * Full version string, e.g. for report provenance.
 */
char *hvt_version_string(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEISENVT_H */
