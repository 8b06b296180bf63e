#ifndef MOTIONGATE_H
#define MOTIONGATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MgStatus {
  MG_STATUS_OK = 0,
  MG_STATUS_NULL_POINTER = 1,
  MG_STATUS_INVALID_UTF8 = 2,
  MG_STATUS_PARSE = 3,
  MG_STATUS_IO = 4,
  MG_STATUS_VERSION = 5,
  MG_STATUS_WINDOW_OUT_OF_RANGE = 6,
  MG_STATUS_UNKNOWN_CLAIM = 7,
  MG_STATUS_INTERNAL = 8,
  MG_STATUS_PANIC = 9,
} MgStatus;

typedef enum MgDecision {
  MG_DECISION_ACCEPT = 0,
  MG_DECISION_REJECT = 1,
} MgDecision;

typedef enum MgDirection {
  /*
   Anomaly scores: reject when score > threshold.
   */
  MG_DIRECTION_REJECT_ABOVE = 0,
  /*
   Verification scores: reject when score < threshold.
   */
  MG_DIRECTION_REJECT_BELOW = 1,
} MgDirection;

/*
 A loaded model artifact.
 */
typedef struct MgModel MgModel;

/*
 A parsed, validated trace.
 */
typedef struct MgTrace MgTrace;

typedef struct MgScore {
  double score;
  double threshold;
  enum MgDecision decision;
  enum MgDirection direction;
} MgScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Loads a model artifact from a JSON file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MgStatus mg_model_load(const char *path, struct MgModel **out);

/*
 Loads a model artifact from JSON bytes.

 # Safety
 `json` must point to `len` readable bytes; `out` must be writable.
 */
enum MgStatus mg_model_from_json(const uint8_t *json, uintptr_t len, struct MgModel **out);

/*
 # Safety
 `model` must be null or a handle from `mg_model_load`/`mg_model_from_json`
 that has not been freed.
 */
void mg_model_free(struct MgModel *model);

/*
 Parses a trace from its canonical CSV and sidecar JSON.

 # Safety
 `csv` and `meta` must point to `csv_len` and `meta_len` readable bytes;
 `out` must be writable.
 */
enum MgStatus mg_trace_parse(const uint8_t *csv,
                             uintptr_t csv_len,
                             const uint8_t *meta,
                             uintptr_t meta_len,
                             struct MgTrace **out);

/*
 # Safety
 `trace` must be null or a handle from `mg_trace_parse` that has not been
 freed.
 */
void mg_trace_free(struct MgTrace *trace);

/*
 Scores `trace` with `model`. `claimed_id` is the claimed participant for
 verification models; pass -1 for none.

 # Safety
 `model` and `trace` must be live handles; `out` must be writable.
 */
enum MgStatus mg_score(const struct MgModel *model,
                       const struct MgTrace *trace,
                       int64_t claimed_id,
                       struct MgScore *out);

/*
 Message for the last failed call on this thread, or "" after a success.
 Valid until the next call into this library from the same thread.
 */
const char *mg_last_error_message(void);

/*
 Library version, NUL-terminated, static.
 */
const char *mg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOTIONGATE_H */
