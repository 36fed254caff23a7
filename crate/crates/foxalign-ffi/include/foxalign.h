#ifndef FOXALIGN_H
#define FOXALIGN_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum FoxStatus {
  FOX_STATUS_OK = 0,
  FOX_STATUS_INVALID_ARGUMENT = 1,
  FOX_STATUS_IO_ERROR = 2,
  FOX_STATUS_FORMAT_ERROR = 3,
  FOX_STATUS_NUMERIC_ERROR = 4,
  FOX_STATUS_INTERNAL_ERROR = 5,
} FoxStatus;

/**
 * Opaque tensor handle.
 */
typedef struct FoxTensor FoxTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or NULL.
 * Valid until the next failing call on the same thread.
 */
const char *fox_last_error(void);

/**
 * Library version as a static string.
 */
const char *fox_version(void);

/**
 * Reads an FXT1 tensor file into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer; the
 * returned handle must be released with `fox_tensor_free`.
 */
enum FoxStatus fox_tensor_read(const char *path, struct FoxTensor **out);

/**
 * Writes a tensor handle to an FXT1 file.
 *
 * # Safety
 * `tensor` must be a live handle from this library; `path` NUL-terminated.
 */
enum FoxStatus fox_tensor_write(const struct FoxTensor *tensor, const char *path);

/**
 * Builds a tensor from caller-provided dims and data (copied).
 *
 * # Safety
 * `dims` must point to `ndim` values and `data` to their product.
 */
enum FoxStatus fox_tensor_create(const uintptr_t *dims,
                                 uintptr_t ndim,
                                 const float *data,
                                 uintptr_t len,
                                 struct FoxTensor **out);

/**
 * Number of dimensions of a tensor handle.
 *
 * # Safety
 * `tensor` must be a live handle.
 */
uintptr_t fox_tensor_ndim(const struct FoxTensor *tensor);

/**
 * Size of dimension `axis`, or 0 when out of range.
 *
 * # Safety
 * `tensor` must be a live handle.
 */
uintptr_t fox_tensor_dim(const struct FoxTensor *tensor, uintptr_t axis);

/**
 * Borrowed pointer to the row-major f32 data; valid while the handle lives.
 *
 * # Safety
 * `tensor` must be a live handle.
 */
const float *fox_tensor_data(const struct FoxTensor *tensor);

/**
 * Releases a tensor handle. NULL is a no-op.
 *
 * # Safety
 * `tensor` must come from this library and not already be freed.
 */
void fox_tensor_free(struct FoxTensor *tensor);

/**
 * Releases a string returned through an out parameter. NULL is a no-op.
 *
 * # Safety
 * `s` must come from this library and not already be freed.
 */
void fox_string_free(char *s);

/**
 * Runs NMS + embedding gather + spherical mean shift on a heatmap tensor
 * ([H, W], values in [0, 1]) and an embedding tensor ([D, H, W]); writes
 * the resulting face groups as a JSON string.
 *
 * # Safety
 * `heatmap` and `embeddings` must be live handles; `out_json` valid. Free
 * the string with `fox_string_free`.
 */
enum FoxStatus fox_parse_faces(const struct FoxTensor *heatmap,
                               const struct FoxTensor *embeddings,
                               float threshold,
                               uintptr_t nms_radius,
                               double bandwidth,
                               char **out_json);

/**
 * Weighted cosine discriminative loss of labeled embedding points.
 * `points` is row-major [n, dim]; `labels` holds n cluster ids. The four
 * loss terms are written to `out_terms` (l_var, l_dist, l_reg, l_fox).
 *
 * # Safety
 * `points` must point to n*dim values, `labels` to n values, and
 * `out_terms` to 4 writable doubles.
 */
enum FoxStatus fox_loss_eval(const double *points,
                             uintptr_t n,
                             uintptr_t dim,
                             const uintptr_t *labels,
                             double alpha,
                             double beta,
                             double gamma,
                             double delta_v,
                             double delta_d,
                             double radius,
                             double *out_terms);

/**
 * Generates a synthetic scene and writes heatmap.fxt1, mask.fxt1 and
 * annotation.json into `out_dir`.
 *
 * # Safety
 * `out_dir` must be a NUL-terminated string.
 */
enum FoxStatus fox_generate_scene(uintptr_t n_faces,
                                  uintptr_t landmarks_per_face,
                                  uintptr_t height,
                                  uintptr_t width,
                                  uint64_t seed,
                                  const char *out_dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FOXALIGN_H */
