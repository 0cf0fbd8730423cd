#ifndef LSFBOUND_H
#define LSFBOUND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsfbStatus {
  LSFB_STATUS_OK = 0,
  LSFB_STATUS_NULL_POINTER = 1,
  LSFB_STATUS_INVALID_ARGUMENT = 2,
  LSFB_STATUS_DOMAIN = 3,
  LSFB_STATUS_FORMAT = 4,
  LSFB_STATUS_IO = 5,
  LSFB_STATUS_PARSE = 6,
  LSFB_STATUS_UNSTABLE = 7,
  LSFB_STATUS_NUMERIC = 8,
  LSFB_STATUS_INSUFFICIENT_RATE = 9,
  LSFB_STATUS_NOT_BRACKETED = 10,
  LSFB_STATUS_BUFFER_TOO_SMALL = 11,
  LSFB_STATUS_PANIC = 12,
} LsfbStatus;

// Passing a value outside the listed variants is undefined behavior.
typedef enum LsfbCoefficientMode {
  LSFB_COEFFICIENT_MODE_GAMMA_RATIO = 0,
  LSFB_COEFFICIENT_MODE_SPHERE = 1,
} LsfbCoefficientMode;

// Passing a value outside the listed variants is undefined behavior.
typedef enum LsfbTransformMode {
  LSFB_TRANSFORM_MODE_ISOTROPIC = 0,
  LSFB_TRANSFORM_MODE_JACOBIAN = 1,
} LsfbTransformMode;

// Opaque fitted or loaded mixture model.
typedef struct LsfbModel LsfbModel;

// Bound settings; obtain defaults from [`lsfb_bound_config_default`].
typedef struct LsfbBoundConfig {
  enum LsfbCoefficientMode coefficient_mode;
  enum LsfbTransformMode transform_mode;
  double lsd_target_db;
  double rate_min;
  double rate_max;
  double rate_step;
  double poly[4];
  int32_t poly_scale_exponent;
  double poly_mse_max;
} LsfbBoundConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *lsfb_last_error_message(void);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LsfbStatus lsfb_model_load(const char *path, struct LsfbModel **out);

// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum LsfbStatus lsfb_model_from_json(const char *json, struct LsfbModel **out);

// Fits a mixture by EM to `n` ΔLSF rows of `k` coordinates stored
// row-major, with default EM settings apart from `components` and `seed`.
//
// # Safety
// `data` must hold `n * k` values and `out` be writable.
enum LsfbStatus lsfb_model_fit(const double *data,
                               size_t n,
                               size_t k,
                               size_t components,
                               uint64_t seed,
                               struct LsfbModel **out);

// # Safety
// `model` must come from this library and not be used afterwards.
void lsfb_model_free(struct LsfbModel *model);

// # Safety
// `model` must be a live handle and `out` writable.
enum LsfbStatus lsfb_model_dim(const struct LsfbModel *model, size_t *out);

// # Safety
// `model` must be a live handle and `out` writable.
enum LsfbStatus lsfb_model_num_components(const struct LsfbModel *model, size_t *out);

// Serializes the model as JSON into `buf` (NUL-terminated). `needed`
// receives the required size including the terminator, also when the
// buffer is too small.
//
// # Safety
// `buf` must have room for `cap` bytes (it may be null when `cap` is 0).
enum LsfbStatus lsfb_model_to_json(const struct LsfbModel *model,
                                   char *buf,
                                   size_t cap,
                                   size_t *needed);

struct LsfbBoundConfig lsfb_bound_config_default(void);

// # Safety
// `out` must be writable.
enum LsfbStatus lsfb_quantization_coefficient(size_t k, enum LsfbCoefficientMode mode, double *out);

// Per-dimension ΔLSF-domain MSE at `rate` bits per vector.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum LsfbStatus lsfb_distortion_rate(const struct LsfbModel *model,
                                     double rate,
                                     enum LsfbCoefficientMode mode,
                                     double *out);

// # Safety
// `model` must be a live handle, `cfg` readable and both outputs writable.
enum LsfbStatus lsfb_min_transparent_rate(const struct LsfbModel *model,
                                          const struct LsfbBoundConfig *cfg,
                                          double *out_rate,
                                          uint64_t *out_ceil);

// LPC `a_1..a_K` (K even) to ascending LSFs in radians.
//
// # Safety
// `a` and `out_lsf` must each hold `k` values.
enum LsfbStatus lsfb_lpc_to_lsf(const double *a, size_t k, double *out_lsf);

// # Safety
// `lsf` and `out_a` must each hold `k` values.
enum LsfbStatus lsfb_lsf_to_lpc(const double *lsf, size_t k, double *out_a);

// RMS log spectral distortion in dB between two order-`k` filters.
//
// # Safety
// `a` and `a_hat` must each hold `k` values and `out` be writable.
enum LsfbStatus lsfb_log_spectral_distortion(const double *a,
                                             const double *a_hat,
                                             size_t k,
                                             size_t num_points,
                                             uint32_t sample_rate_hz,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSFBOUND_H */
