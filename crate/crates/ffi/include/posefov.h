#ifndef POSEFOV_H
#define POSEFOV_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PosefovStatus {
  POSEFOV_STATUS_OK = 0,
  POSEFOV_STATUS_NULL_POINTER = 1,
  POSEFOV_STATUS_INVALID_ARGUMENT = 2,
  POSEFOV_STATUS_INVALID_UTF8 = 3,
  POSEFOV_STATUS_INVALID_JSON = 4,
  POSEFOV_STATUS_INVALID_CONFIG = 5,
  POSEFOV_STATUS_GEOMETRY = 6,
  POSEFOV_STATUS_PANIC = 7,
} PosefovStatus;

// Opaque per-stream state: tracks and their heading filters.
typedef struct PosefovPipeline PosefovPipeline;

typedef struct PosefovIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} PosefovIntrinsics;

// One heading estimate; fields other than `valid` are meaningful only when
// `valid` is true.
typedef struct PosefovDirection {
  bool valid;
  // Radians in (-π, π].
  double heading;
  // Planar unit vector in the social frame.
  double direction[3];
  // `[w, x, y, z]`.
  double quaternion[4];
} PosefovDirection;

typedef struct PosefovOrientation {
  struct PosefovDirection torso;
  struct PosefovDirection gaze;
} PosefovOrientation;

typedef struct PosefovFovResult {
  bool inside;
  // Radians in [0, π].
  double angular_offset;
} PosefovFovResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *posefov_last_error_message(void);

// Back-projects pixel `(u, v)` at `depth_mm` into the camera frame, meters.
//
// # Safety
// `k` must point to a valid struct and `out` to three writable doubles.
enum PosefovStatus posefov_backproject(const struct PosefovIntrinsics *k,
                                       double u,
                                       double v,
                                       double depth_mm,
                                       double *out);

// Camera-frame point to the level social frame (X forward, Y left, Z up).
//
// # Safety
// `camera` must point to three readable doubles and `out` to three writable
// ones.
enum PosefovStatus posefov_camera_to_social(const double *camera, double *out);

// Torso and gaze headings from the 17 COCO joints, social frame.
// `points` holds 17 `xyz` triples in COCO order; `present[i] == 0` marks
// joint `i` as missing.
//
// # Safety
// `points` must point to 51 readable doubles, `present` to 17 readable bytes
// and `out` to a writable struct.
enum PosefovStatus posefov_estimate_orientation(const double *points,
                                                const uint8_t *present,
                                                struct PosefovOrientation *out);

// Whether `target` is inside the horizontal field of view of a person at
// `subject` looking along `gaze_heading` (radians).
//
// # Safety
// `subject` and `target` must point to three readable doubles each and
// `out` to a writable struct.
enum PosefovStatus posefov_fov_test(double gaze_heading,
                                    const double *subject,
                                    const double *target,
                                    double fov_deg,
                                    struct PosefovFovResult *out);

// Creates a pipeline. `config_json` may be null for the defaults.
//
// # Safety
// `k` must point to a valid struct, `config_json` must be null or a
// NUL-terminated string, and `out` must be writable.
enum PosefovStatus posefov_pipeline_new(const struct PosefovIntrinsics *k,
                                        const char *config_json,
                                        struct PosefovPipeline **out);

// # Safety
// `p` must be null or a pointer from [`posefov_pipeline_new`] not yet freed.
void posefov_pipeline_free(struct PosefovPipeline *p);

// Runs one frame. `detections_json` is an array of
// `{"score": s, "keypoints": [[u, v, c], ...17]}`; `depth` holds
// `width * height` millimeter values, row-major. On success `*out_json`
// receives a JSON array with one result object per tracked person.
//
// # Safety
// `p` must be a live pipeline, `detections_json` a NUL-terminated string,
// `depth` must point to `depth_len` readable values and `out_json` must be
// writable.
enum PosefovStatus posefov_pipeline_process_frame(struct PosefovPipeline *p,
                                                  double timestamp,
                                                  const char *detections_json,
                                                  const uint16_t *depth,
                                                  size_t depth_len,
                                                  char **out_json);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void posefov_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POSEFOV_H */
