#ifndef DENIAKIT_H
#define DENIAKIT_H

/* Generated by cbindgen from the deniakit-ffi sources; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum DkStatus {
  DK_STATUS_OK = 0,
  DK_STATUS_NULL_POINTER = 1,
  /**
   * Malformed JSON or text that is not UTF-8.
   */
  DK_STATUS_PARSE = 2,
  /**
   * Well-formed input describing an invalid object or parameter.
   */
  DK_STATUS_INVALID = 3,
  /**
   * The computation does not apply, e.g. a non-degraded channel.
   */
  DK_STATUS_DOMAIN = 4,
  DK_STATUS_BUFFER_TOO_SMALL = 5,
  DK_STATUS_PANIC = 6,
} DkStatus;

typedef enum DkSide {
  /**
   * Inputs, classified by the eavesdropper's channel.
   */
  DK_SIDE_TRANSMITTER = 0,
  /**
   * Bob's outputs, classified by the degradation map.
   */
  DK_SIDE_RECEIVER = 1,
} DkSide;

typedef enum DkRegionKind {
  DK_REGION_KIND_MESSAGE = 0,
  DK_REGION_KIND_TRANSMITTER = 1,
  DK_REGION_KIND_RECEIVER = 2,
  DK_REGION_KIND_EQUIVOCATION = 3,
  DK_REGION_KIND_BCC = 4,
} DkRegionKind;

/**
 * Opaque broadcast channel.
 */
typedef struct DkChannel DkChannel;

/**
 * Opaque region frontier.
 */
typedef struct DkRegion DkRegion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full length including the
 * terminator; `buf` may be null to query it.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dk_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dk_version(void);

/**
 * Parses a channel from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum DkStatus dk_channel_from_json(const char *json, struct DkChannel **out);

/**
 * The erasure example: `Y = X` binary, `Z` an erasure of `X` with
 * probability `p`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DkStatus dk_channel_erasure(double p, struct DkChannel **out);

/**
 * # Safety
 * `ch` must be null or a handle from this library, not yet freed.
 */
void dk_channel_free(struct DkChannel *ch);

/**
 * Alphabet sizes of `X`, `Y` and `Z`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DkStatus dk_channel_sizes(const struct DkChannel *ch, size_t *x, size_t *y, size_t *z);

/**
 * Degradedness test; `residual` is the composition error of the best map.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DkStatus dk_channel_is_degraded(const struct DkChannel *ch,
                                     double tol,
                                     bool *degraded,
                                     double *residual);

/**
 * Zero-information class label of every symbol on `side`, written to
 * `labels[0..len]`; `len` must equal the alphabet size. Labels follow
 * first appearance.
 *
 * # Safety
 * `labels` must hold `len` entries; the other pointers must be valid.
 */
enum DkStatus dk_zero_info_classes(const struct DkChannel *ch,
                                   enum DkSide side,
                                   double row_tol,
                                   size_t *labels,
                                   size_t len,
                                   size_t *num_classes);

/**
 * Frontier of `kind` on the `D` values in `grid` (null or `len` 0: the
 * default 101-point grid), computed by the optimizer with `seed`.
 * Equivocation and BCC regions exist only as closed forms.
 *
 * # Safety
 * `grid` must be null or hold `len` values; `ch` and `out` must be valid.
 */
enum DkStatus dk_region_compute(const struct DkChannel *ch,
                                enum DkRegionKind kind,
                                const double *grid,
                                size_t len,
                                uint64_t seed,
                                struct DkRegion **out);

/**
 * Closed-form frontier of the erasure example with parameter `p`.
 *
 * # Safety
 * `grid` must be null or hold `len` values; `out` must be writable.
 */
enum DkStatus dk_region_closed_form(enum DkRegionKind kind,
                                    double p,
                                    const double *grid,
                                    size_t len,
                                    struct DkRegion **out);

/**
 * Largest rate of the closed form at deniability `d`; `feasible` is false
 * when `d` exceeds the largest deniability.
 *
 * # Safety
 * `rate` and `feasible` must be writable.
 */
enum DkStatus dk_closed_form_rate(enum DkRegionKind kind,
                                  double p,
                                  double d,
                                  double *rate,
                                  bool *feasible);

/**
 * Number of frontier points (grid values above the largest deniability
 * are omitted).
 *
 * # Safety
 * `r` must be a valid region handle.
 */
size_t dk_region_len(const struct DkRegion *r);

/**
 * Point `i` of the frontier.
 *
 * # Safety
 * `r`, `d` and `rate` must be valid.
 */
enum DkStatus dk_region_point(const struct DkRegion *r, size_t i, double *d, double *rate);

/**
 * # Safety
 * `r` must be null or a handle from this library, not yet freed.
 */
void dk_region_free(struct DkRegion *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DENIAKIT_H */
