#ifndef TURBLUCKY_H
#define TURBLUCKY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TlMethod {
  TL_METHOD_MEAN = 0,
  TL_METHOD_INVERSE_VOXEL = 1,
  TL_METHOD_EGTM = 2,
} TlMethod;

// Result codes; the non-zero values match the command line exit codes.
typedef enum TlStatus {
  TL_STATUS_OK = 0,
  // Null pointer, bad enum value or otherwise invalid argument.
  TL_STATUS_INVALID_ARGUMENT = 1,
  TL_STATUS_IO = 2,
  TL_STATUS_VALIDATION = 3,
  TL_STATUS_NUMERIC = 4,
  // The library panicked; this indicates a bug.
  TL_STATUS_INTERNAL = 5,
} TlStatus;

// A restored image, channel-last values in `[0, 1]`.
typedef struct TlImage TlImage;

// A trained network.
typedef struct TlModel TlModel;

// A loaded dataset sample.
typedef struct TlSample TlSample;

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *tl_last_error(void);

// Loads a `sample_<id>` directory.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
enum TlStatus tl_sample_load(const char *dir, struct TlSample **out);

// # Safety
// `sample` must come from [`tl_sample_load`] and not be used afterwards.
void tl_sample_free(struct TlSample *sample);

// Image size, channel and frame counts, and number of events of a sample.
//
// # Safety
// `sample` must be a live handle; the out pointers must be valid or null.
enum TlStatus tl_sample_info(const struct TlSample *sample,
                             size_t *width,
                             size_t *height,
                             size_t *channels,
                             size_t *frames,
                             size_t *events);

// Writes the `bins x height x width` event voxel of a sample into `buffer`.
//
// # Safety
// `sample` must be a live handle and `buffer` must hold `len` floats.
enum TlStatus tl_sample_voxelize(const struct TlSample *sample,
                                 size_t bins,
                                 float *buffer,
                                 size_t len);

// Loads an EGTM model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TlStatus tl_model_load(const char *path, struct TlModel **out);

// # Safety
// `model` must come from [`tl_model_load`] and not be used afterwards.
void tl_model_free(struct TlModel *model);

// Number of scalar parameters of a loaded model.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum TlStatus tl_model_param_count(const struct TlModel *model, size_t *out);

// Analytic parameter and FLOP counts for `frames` frames of `channels`
// channels at `width x height`.
//
// # Safety
// `params` and `flops` must be valid pointers.
enum TlStatus tl_count_params_flops(size_t frames,
                                    size_t channels,
                                    size_t width,
                                    size_t height,
                                    size_t *params,
                                    uint64_t *flops);

// Restores a sample. `model` is required for [`TlMethod::Egtm`] and ignored otherwise.
//
// # Safety
// `sample` must be a live handle, `model` a live handle or null, `out` a valid pointer.
enum TlStatus tl_restore(const struct TlSample *sample,
                         enum TlMethod method,
                         const struct TlModel *model,
                         struct TlImage **out);

// # Safety
// `image` must come from [`tl_restore`] and not be used afterwards.
void tl_image_free(struct TlImage *image);

// Copies the channel-last pixel values into `buffer`, which must hold exactly
// `width * height * channels` doubles.
//
// # Safety
// `image` must be a live handle and `buffer` must hold `len` doubles.
enum TlStatus tl_image_copy(const struct TlImage *image, double *buffer, size_t len);

// # Safety
// `image` must be a live handle and `path` a NUL-terminated string.
enum TlStatus tl_image_save_png(const struct TlImage *image, const char *path);

// PSNR (dB, `INFINITY` for an exact match) and SSIM of `image` against the
// sample's clean reference.
//
// # Safety
// `image` and `sample` must be live handles; `psnr_out` and `ssim_out` valid pointers.
enum TlStatus tl_score(const struct TlImage *image,
                       const struct TlSample *sample,
                       double *psnr_out,
                       double *ssim_out);

#endif  /* TURBLUCKY_H */
