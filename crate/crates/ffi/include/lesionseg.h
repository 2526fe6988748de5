#ifndef LESIONSEG_H
#define LESIONSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_ARGUMENT = 2,
  LS_STATUS_IO = 3,
  LS_STATUS_WEIGHT_FILE = 4,
  LS_STATUS_SHAPE = 5,
  LS_STATUS_IMAGE = 6,
  LS_STATUS_PANIC = 7,
} LsStatus;

/**
 * Opaque network handle.
 */
typedef struct LsNetwork LsNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *ls_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * Creates a freshly initialized seven-plane network.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum LsStatus ls_network_new(uint64_t seed, struct LsNetwork **out);

/**
 * Loads a weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as in [`ls_network_new`].
 */
enum LsStatus ls_network_load(const char *path, struct LsNetwork **out);

/**
 * Writes the network to `path` atomically.
 *
 * # Safety
 * `net` must be a live handle and `path` a NUL-terminated string.
 */
enum LsStatus ls_network_save(const struct LsNetwork *net, const char *path);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void ls_network_free(struct LsNetwork *net);

/**
 * Number of trainable parameters.
 *
 * # Safety
 * `net` must be a live handle and `out` writable.
 */
enum LsStatus ls_network_param_count(const struct LsNetwork *net, size_t *out);

/**
 * Seven-plane preprocessing (R, G, B, H, S, V, L) of an RGB image into
 * `out`, which holds `7 * out_height * out_width` floats.
 *
 * # Safety
 * `rgb` must hold `3 * width * height` bytes and `out` the stated floats.
 */
enum LsStatus ls_preprocess(const uint8_t *rgb,
                            size_t width,
                            size_t height,
                            size_t out_height,
                            size_t out_width,
                            float *out);

/**
 * Mean lesion probability of `count` networks for an RGB image, written
 * at the image's own resolution. The networks run at
 * `input_height x input_width` (multiples of 16).
 *
 * # Safety
 * `nets` must point to `count` live handles, `rgb` to `3 * width *
 * height` bytes and `out` to `width * height` floats.
 */
enum LsStatus ls_predict_probability(const struct LsNetwork *const *nets,
                                     size_t count,
                                     const uint8_t *rgb,
                                     size_t width,
                                     size_t height,
                                     size_t input_height,
                                     size_t input_width,
                                     float *out);

/**
 * Dual-threshold segmentation of a probability map into `out_mask`
 * (0 or 1 per pixel).
 *
 * # Safety
 * `probs` must hold `height * width` floats in [0, 1] and `out_mask`
 * as many bytes.
 */
enum LsStatus ls_segment(const float *probs,
                         size_t height,
                         size_t width,
                         float th_high,
                         float th_low,
                         uint8_t *out_mask);

/**
 * Jaccard index of two masks (nonzero = foreground); 1 when both are empty.
 *
 * # Safety
 * `a` and `b` must each hold `len` bytes; `out` must be writable.
 */
enum LsStatus ls_jaccard_index(const uint8_t *a, const uint8_t *b, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LESIONSEG_H */
