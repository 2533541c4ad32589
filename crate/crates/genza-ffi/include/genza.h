#ifndef GENZA_H
#define GENZA_H

/* Generated by the genza-ffi build script; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum GenzaStatus {
  /**
   * Success.
   */
  GENZA_STATUS_OK = 0,
  /**
   * Rejected input: malformed JSON, unknown name, or invalid field value.
   */
  GENZA_STATUS_VALIDATION_ERROR = 1,
  /**
   * Valid input that the model cannot satisfy (placement, out of memory).
   */
  GENZA_STATUS_MODEL_ERROR = 2,
  /**
   * A required pointer argument was null.
   */
  GENZA_STATUS_NULL_ARGUMENT = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  GENZA_STATUS_INVALID_UTF8 = 4,
  /**
   * Internal failure; the library state is still consistent.
   */
  GENZA_STATUS_INTERNAL_ERROR = 5,
} GenzaStatus;

/**
 * Opaque accelerator-platform handle.
 */
typedef struct GenzaPlatform GenzaPlatform;

/**
 * Opaque workload handle (model + use case + precision + mapping).
 */
typedef struct GenzaWorkload GenzaWorkload;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *genza_version(void);

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *genza_last_error(void);

/**
 * Build a platform from a preset name or a platform JSON document.
 *
 * # Safety
 * `spec` must be a valid NUL-terminated string; `out` must be a valid,
 * writable pointer.
 */
enum GenzaStatus genza_platform_from_json(const char *spec, struct GenzaPlatform **out);

/**
 * Release a platform handle. Null is a no-op.
 *
 * # Safety
 * `p` must be null or a pointer returned by `genza_platform_from_json`
 * that has not been freed yet.
 */
void genza_platform_free(struct GenzaPlatform *p);

/**
 * Build a workload from a workload JSON document (model and use case may be
 * catalog names or inline objects).
 *
 * # Safety
 * `spec` must be a valid NUL-terminated string; `out` must be a valid,
 * writable pointer.
 */
enum GenzaStatus genza_workload_from_json(const char *spec, struct GenzaWorkload **out);

/**
 * Release a workload handle. Null is a no-op.
 *
 * # Safety
 * `w` must be null or a pointer returned by `genza_workload_from_json`
 * that has not been freed yet.
 */
void genza_workload_free(struct GenzaWorkload *w);

/**
 * Run the full analysis and return the versioned JSON report.
 *
 * # Safety
 * `w` and `p` must be live handles from this library; `out_json` must be a
 * valid, writable pointer.
 */
enum GenzaStatus genza_analyze(const struct GenzaWorkload *w,
                               const struct GenzaPlatform *p,
                               char **out_json);

/**
 * Compute SLO-derived platform requirements and return the versioned JSON
 * report. `compute_eff` in (0, 1] derates peak compute; pass 0 for the
 * default.
 *
 * # Safety
 * `w` must be a live handle from this library; `out_json` must be a valid,
 * writable pointer.
 */
enum GenzaStatus genza_requirements(const struct GenzaWorkload *w,
                                    double compute_eff,
                                    char **out_json);

/**
 * Release a string returned through a `char **` out-param. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a pointer returned by this library that has not been
 * freed yet.
 */
void genza_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENZA_H */
