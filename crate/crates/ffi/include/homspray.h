#ifndef HOMSPRAY_H
#define HOMSPRAY_H

/* This file is generated by cbindgen from homspray-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every API call.
 */
typedef enum HsStatus {
  HS_OK = 0,
  HS_NULL_ARGUMENT = 1,
  HS_PARSE_ERROR = 2,
  HS_VALIDATION_ERROR = 3,
  HS_NUMERICAL_ERROR = 4,
  HS_BUFFER_TOO_SMALL = 5,
  HS_PANIC = 6,
} HsStatus;

/*
 Opaque engine handle wrapping a built scene.
 */
typedef struct HsEngine HsEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Create an engine from a scene JSON document (see the repository README
 for the schema). On success writes the handle to `out_engine`.

 # Safety
 `scene_json` must be a NUL-terminated string; `out_engine` must be a
 valid pointer.
 */
enum HsStatus hs_engine_create(const char *scene_json, struct HsEngine **out_engine);

/*
 Destroy an engine created by `hs_engine_create`. A null handle is a
 no-op.

 # Safety
 `engine` must be null or a pointer returned by `hs_engine_create` that
 has not been freed yet.
 */
void hs_engine_free(struct HsEngine *engine);

/*
 Dimension of m (the tangent model space); 0 for a null handle.

 # Safety
 `engine` must be null or a live engine handle.
 */
size_t hs_engine_dim_m(const struct HsEngine *engine);

/*
 Spray vector field eta(y). `y` and `out` hold dim_m doubles.

 # Safety
 Pointers must satisfy the stated buffer contracts.
 */
enum HsStatus hs_eta(const struct HsEngine *engine, const double *y, size_t len, double *out);

/*
 Connection operator N(y, w). All buffers hold dim_m doubles.

 # Safety
 Pointers must satisfy the stated buffer contracts.
 */
enum HsStatus hs_connection(const struct HsEngine *engine,
                            const double *y,
                            const double *w,
                            size_t len,
                            double *out);

/*
 Riemann curvature operator R_y as a row-major dim_m x dim_m matrix.

 # Safety
 `out` must hold dim_m * dim_m doubles.
 */
enum HsStatus hs_riemann(const struct HsEngine *engine, const double *y, size_t len, double *out);

/*
 S-curvature at y.

 # Safety
 Pointers must satisfy the stated buffer contracts.
 */
enum HsStatus hs_s_curvature(const struct HsEngine *engine,
                             const double *y,
                             size_t len,
                             double *out);

/*
 Flag curvature K(y, w). Finsler scenes only.

 # Safety
 Pointers must satisfy the stated buffer contracts.
 */
enum HsStatus hs_flag_curvature(const struct HsEngine *engine,
                                const double *y,
                                const double *w,
                                size_t len,
                                double *out);

/*
 Landsberg curvature L_y(w,w,w). Finsler scenes only.

 # Safety
 Pointers must satisfy the stated buffer contracts.
 */
enum HsStatus hs_landsberg(const struct HsEngine *engine,
                           const double *y,
                           const double *w,
                           size_t len,
                           double *out);

/*
 Integrate the geodesic from y0 with the scene's integrator at step dt.
 Writes up to `capacity` samples: times into `out_times`, states row by
 row into `out_states` (capacity * dim_m doubles). The number of samples
 in the full trajectory is stored in `out_samples`; if it exceeds
 `capacity` the buffers are untouched and the call returns
 `HsBufferTooSmall` so the caller can retry with a larger allocation.

 # Safety
 Pointers must satisfy the stated buffer contracts.
 */
enum HsStatus hs_geodesic(const struct HsEngine *engine,
                          const double *y0,
                          size_t len,
                          double t_end,
                          double dt,
                          double *out_times,
                          double *out_states,
                          size_t capacity,
                          size_t *out_samples);

/*
 Copy the last error message of this thread into `buffer` (NUL
 terminated, truncated to `capacity`). Returns the full message length.

 # Safety
 `buffer` must hold `capacity` bytes, or be null to query the length.
 */
size_t hs_last_error_message(char *buffer, size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOMSPRAY_H */
