#ifndef SPD_EMG_H
#define SPD_EMG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum SpdStatus {
  SPD_STATUS_OK = 0,
  // A required pointer argument was null.
  SPD_STATUS_NULL_POINTER = 1,
  // Invalid argument: shape, symmetry, configuration, model document, bad UTF-8.
  SPD_STATUS_INVALID_ARGUMENT = 2,
  // Data error: not positive definite, malformed trial, I/O.
  SPD_STATUS_DATA_ERROR = 3,
  // SVM training did not converge.
  SPD_STATUS_NON_CONVERGENCE = 4,
  // Output buffer shorter than required.
  SPD_STATUS_BUFFER_TOO_SMALL = 5,
  // A Rust panic was caught at the boundary.
  SPD_STATUS_PANIC = 6,
} SpdStatus;

// A trained MDM or SVM classifier.
typedef struct SpdModel SpdModel;

// A point of the Cholesky space (lower triangular, positive diagonal).
typedef struct SpdPoint SpdPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *spd_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *spd_version(void);

// Factorises a symmetric positive-definite `dim × dim` matrix.
//
// # Safety
// `entries` must point to `dim * dim` doubles; `out` must be writable.
enum SpdStatus spd_point_from_spd(size_t dim, const double *entries, struct SpdPoint **out);

// Wraps a lower-triangular matrix with a positive diagonal.
//
// # Safety
// `entries` must point to `dim * dim` doubles; `out` must be writable.
enum SpdStatus spd_point_from_cholesky(size_t dim, const double *entries, struct SpdPoint **out);

// Releases a point. Null is ignored.
//
// # Safety
// `point` must come from this library and not be freed twice.
void spd_point_free(struct SpdPoint *point);

// # Safety
// `point` must be a live handle; `out` must be writable.
enum SpdStatus spd_point_dim(const struct SpdPoint *point, size_t *out);

// Copies the Cholesky factor `L` into `out` (row-major).
//
// # Safety
// `out` must hold `len` doubles.
enum SpdStatus spd_point_cholesky(const struct SpdPoint *point, double *out, size_t len);

// Copies `L·Lᵀ` into `out` (row-major).
//
// # Safety
// `out` must hold `len` doubles.
enum SpdStatus spd_point_spd(const struct SpdPoint *point, double *out, size_t len);

// # Safety
// `a`, `b` must be live handles; `out` must be writable.
enum SpdStatus spd_geodesic_distance(const struct SpdPoint *a,
                                     const struct SpdPoint *b,
                                     double *out);

// `exp(-gamma · d²)`.
//
// # Safety
// `a`, `b` must be live handles; `out` must be writable.
enum SpdStatus spd_kernel(const struct SpdPoint *a,
                          const struct SpdPoint *b,
                          double gamma,
                          double *out);

// # Safety
// `points` must hold `n` live handles; `out` must be writable.
enum SpdStatus spd_frechet_mean(const struct SpdPoint *const *points,
                                size_t n,
                                struct SpdPoint **out);

// Tangent at `base` pointing to `target`, written as a lower-triangular
// `dim × dim` matrix.
//
// # Safety
// `out` must hold `len` doubles.
enum SpdStatus spd_log_map(const struct SpdPoint *base,
                           const struct SpdPoint *target,
                           double *out,
                           size_t len);

// # Safety
// `tangent` must point to `dim * dim` doubles (lower triangular); `out` must be writable.
enum SpdStatus spd_exp_map(const struct SpdPoint *base,
                           const double *tangent,
                           struct SpdPoint **out);

// Transports a tangent at `from` to the tangent space at `to`.
//
// # Safety
// `tangent` must point to `dim * dim` doubles; `out` must hold `len` doubles.
enum SpdStatus spd_parallel_transport(const struct SpdPoint *from,
                                      const struct SpdPoint *to,
                                      const double *tangent,
                                      double *out,
                                      size_t len);

// Trains a minimum-distance-to-mean classifier.
//
// # Safety
// `points` and `labels` must hold `n` entries; `out` must be writable.
enum SpdStatus spd_mdm_train(const struct SpdPoint *const *points,
                             const uint32_t *labels,
                             size_t n,
                             struct SpdModel **out);

// Trains a one-vs-one geodesic-kernel SVM.
//
// # Safety
// `points` and `labels` must hold `n` entries; `out` must be writable.
enum SpdStatus spd_svm_train(const struct SpdPoint *const *points,
                             const uint32_t *labels,
                             size_t n,
                             double gamma,
                             double c,
                             struct SpdModel **out);

// # Safety
// `model` and `point` must be live handles; `out` must be writable.
enum SpdStatus spd_model_predict(const struct SpdModel *model,
                                 const struct SpdPoint *point,
                                 uint32_t *out);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum SpdStatus spd_model_dim(const struct SpdModel *model, size_t *out);

// Serialises a model; release the string with [`spd_string_free`].
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SpdStatus spd_model_to_json(const struct SpdModel *model, char **out);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SpdStatus spd_model_from_json(const char *json, struct SpdModel **out);

// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum SpdStatus spd_model_save(const struct SpdModel *model, const char *path);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SpdStatus spd_model_load(const char *path, struct SpdModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from this library and not be freed twice.
void spd_model_free(struct SpdModel *model);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void spd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPD_EMG_H */
