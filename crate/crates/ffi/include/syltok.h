#ifndef SYLTOK_H
#define SYLTOK_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SyltokStatus {
  SYLTOK_STATUS_OK = 0,
  SYLTOK_STATUS_NULL_POINTER = 1,
  SYLTOK_STATUS_INVALID_ARGUMENT = 2,
  SYLTOK_STATUS_DIMENSION_MISMATCH = 3,
  SYLTOK_STATUS_IO = 4,
  SYLTOK_STATUS_FORMAT = 5,
  SYLTOK_STATUS_PANIC = 6,
} SyltokStatus;

/**
 * Row-major frame matrix.
 */
typedef struct SyltokFrames SyltokFrames;

/**
 * Partition of a frame sequence into contiguous segments.
 */
typedef struct SyltokSegments SyltokSegments;

/**
 * Syllabic token stream.
 */
typedef struct SyltokTokens SyltokTokens;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL if none.
 * Valid until the next failing call on the same thread.
 */
const char *syltok_last_error_message(void);

/**
 * Copies `n_frames * dim` row-major values into a new frame matrix.
 *
 * # Safety
 * `data` must point to `n_frames * dim` readable doubles; `out` must be writable.
 */
enum SyltokStatus syltok_frames_new(const double *data,
                                    size_t n_frames,
                                    size_t dim,
                                    double frame_rate_hz,
                                    struct SyltokFrames **out);

/**
 * Reads a SYL2 frame file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SyltokStatus syltok_frames_read(const char *path, struct SyltokFrames **out);

/**
 * Writes a SYL2 frame file.
 *
 * # Safety
 * `frames` must be a live handle; `path` a NUL-terminated string.
 */
enum SyltokStatus syltok_frames_write(const struct SyltokFrames *frames, const char *path);

/**
 * # Safety
 * `frames` must be a live handle; `n_frames` and `dim` must be writable.
 */
enum SyltokStatus syltok_frames_shape(const struct SyltokFrames *frames,
                                      size_t *n_frames,
                                      size_t *dim);

/**
 * Copies the row-major values into `out`, which must hold exactly
 * `n_frames * dim` doubles.
 *
 * # Safety
 * `frames` must be a live handle; `out` must point to `len` writable doubles.
 */
enum SyltokStatus syltok_frames_copy_data(const struct SyltokFrames *frames,
                                          double *out,
                                          size_t len);

/**
 * # Safety
 * `frames` must be NULL or a handle not yet freed.
 */
void syltok_frames_free(struct SyltokFrames *frames);

/**
 * Single greedy centroid sweep.
 *
 * # Safety
 * `frames` must be a live handle; `out` must be writable.
 */
enum SyltokStatus syltok_greedy_segment(const struct SyltokFrames *frames,
                                        double merge_threshold,
                                        struct SyltokSegments **out);

/**
 * Greedy sweep followed by refinement.
 *
 * # Safety
 * `frames` must be a live handle; `out` must be writable.
 */
enum SyltokStatus syltok_segment(const struct SyltokFrames *frames,
                                 double merge_threshold,
                                 double refine_threshold,
                                 double refine_min_ms,
                                 struct SyltokSegments **out);

/**
 * Merges short segments into similar neighbors.
 *
 * # Safety
 * `segments` and `frames` must be live handles; `out` must be writable.
 */
enum SyltokStatus syltok_refine(const struct SyltokSegments *segments,
                                const struct SyltokFrames *frames,
                                double refine_threshold,
                                double min_ms,
                                struct SyltokSegments **out);

/**
 * Segments from peaks of a boundary-probability trace.
 *
 * # Safety
 * `probs` must point to `len` readable doubles; `out` must be writable.
 */
enum SyltokStatus syltok_detect_boundaries(const double *probs,
                                           size_t len,
                                           double min_peak,
                                           double min_prominence,
                                           double hard_prob,
                                           struct SyltokSegments **out);

/**
 * Number of segments; 0 for NULL.
 *
 * # Safety
 * `segments` must be NULL or a live handle.
 */
size_t syltok_segments_len(const struct SyltokSegments *segments);

/**
 * Half-open frame range `[start, end)` of segment `index`.
 *
 * # Safety
 * `segments` must be a live handle; `start` and `end` must be writable.
 */
enum SyltokStatus syltok_segments_get(const struct SyltokSegments *segments,
                                      size_t index,
                                      size_t *start,
                                      size_t *end);

/**
 * # Safety
 * `segments` must be NULL or a handle not yet freed.
 */
void syltok_segments_free(struct SyltokSegments *segments);

/**
 * One token per segment from mean-pooled content and acoustic frames.
 *
 * # Safety
 * All handles must be live; `out` must be writable.
 */
enum SyltokStatus syltok_encode(const struct SyltokFrames *content,
                                const struct SyltokFrames *acoustic,
                                const struct SyltokSegments *segments,
                                struct SyltokTokens **out);

/**
 * Expands tokens to frame rate with a sinusoidal positional template of
 * `template_dim` columns.
 *
 * # Safety
 * `tokens` must be a live handle; `out` must be writable.
 */
enum SyltokStatus syltok_decode(const struct SyltokTokens *tokens,
                                size_t template_dim,
                                uint64_t template_seed,
                                struct SyltokFrames **out);

/**
 * Tokens per second of audio.
 *
 * # Safety
 * `tokens` must be a live handle; `out` must be writable.
 */
enum SyltokStatus syltok_token_frequency(const struct SyltokTokens *tokens, double *out);

/**
 * Number of tokens; 0 for NULL.
 *
 * # Safety
 * `tokens` must be NULL or a live handle.
 */
size_t syltok_tokens_len(const struct SyltokTokens *tokens);

/**
 * Duration in frames of token `index`.
 *
 * # Safety
 * `tokens` must be a live handle; `out` must be writable.
 */
enum SyltokStatus syltok_tokens_duration(const struct SyltokTokens *tokens,
                                         size_t index,
                                         uint32_t *out);

/**
 * Reads a SYL2 token file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SyltokStatus syltok_tokens_read(const char *path, struct SyltokTokens **out);

/**
 * Writes a SYL2 token file.
 *
 * # Safety
 * `tokens` must be a live handle; `path` a NUL-terminated string.
 */
enum SyltokStatus syltok_tokens_write(const struct SyltokTokens *tokens, const char *path);

/**
 * # Safety
 * `tokens` must be NULL or a handle not yet freed.
 */
void syltok_tokens_free(struct SyltokTokens *tokens);

/**
 * Precision, recall and F1 (fractions) from match counts.
 *
 * # Safety
 * Out-pointers must be writable.
 */
enum SyltokStatus syltok_prf(size_t n_hit,
                             size_t n_ref,
                             size_t n_hyp,
                             double *precision,
                             double *recall,
                             double *f1);

/**
 * R-value from precision and recall (fractions).
 *
 * # Safety
 * `out` must be writable.
 */
enum SyltokStatus syltok_r_value(double precision, double recall, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYLTOK_H */
