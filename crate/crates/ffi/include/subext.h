#ifndef SUBEXT_H
#define SUBEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of the short-video filter.
typedef enum SubextFilter {
  SUBEXT_FILTER_ACCEPT = 0,
  SUBEXT_FILTER_REJECT_DURATION = 1,
  SUBEXT_FILTER_REJECT_TRACKLETS = 2,
} SubextFilter;

typedef enum SubextStatus {
  SUBEXT_STATUS_OK = 0,
  SUBEXT_STATUS_NULL_POINTER = 1,
  SUBEXT_STATUS_INVALID_UTF8 = 2,
  // Malformed input text (SRT, OCR manifest, predictions, parameters).
  SUBEXT_STATUS_PARSE = 3,
  SUBEXT_STATUS_INVALID_ARGUMENT = 4,
  // The caller's buffer is too small; the required size was written.
  SUBEXT_STATUS_BUFFER_TOO_SMALL = 5,
  // Gradient check or another internal consistency check failed.
  SUBEXT_STATUS_INVARIANT = 6,
  SUBEXT_STATUS_PANIC = 7,
} SubextStatus;

// A parsed subtitle document.
typedef struct SubextDocument SubextDocument;

// Adapter parameters together with the sizes they were built for.
typedef struct SubextS3Params SubextS3Params;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until
// the next call into the library on this thread.
const char *subext_last_error(void);

// # Safety
// `s` must come from this library and not have been freed. NULL is ignored.
void subext_string_free(char *s);

// # Safety
// `text` must be a valid C string; `out` must be writable.
enum SubextStatus subext_srt_parse(const char *text, struct SubextDocument **out);

// # Safety
// `doc` must come from [`subext_srt_parse`] and not have been freed.
void subext_document_free(struct SubextDocument *doc);

// Number of cues, or 0 for NULL.
//
// # Safety
// `doc` must be NULL or a live handle.
size_t subext_document_len(const struct SubextDocument *doc);

// Timing and text of cue `i` (0-based). Lines are joined by `\n`; free the
// text with [`subext_string_free`].
//
// # Safety
// `doc` must be a live handle; the out pointers must be writable.
enum SubextStatus subext_document_cue(const struct SubextDocument *doc,
                                      size_t i,
                                      uint64_t *start_ms,
                                      uint64_t *end_ms,
                                      char **text);

// Renders the document as SRT, numbering cues by position.
//
// # Safety
// `doc` must be a live handle; `out` must be writable.
enum SubextStatus subext_srt_emit(const struct SubextDocument *doc, char **out);

// Normalized edit distance between two strings, in characters.
//
// # Safety
// `a` and `b` must be valid C strings; `out` must be writable.
enum SubextStatus subext_normalized_edit_distance(const char *a, const char *b, double *out);

// Scores hypothesis SRT text against reference SRT text: `ned` in `[0, 1]`
// (higher is better) and SubER in percent (lower is better).
//
// # Safety
// `hyp` and `reference` must be valid C strings; `ned` and `suber` must be
// writable.
enum SubextStatus subext_evaluate(const char *hyp,
                                  const char *reference,
                                  uint64_t tolerance_ms,
                                  double *ned,
                                  double *suber);

// Refines `<b><e>text` predictions against a JSON-lines OCR manifest and
// returns SRT text. `range == 0` selects one second of frames.
//
// # Safety
// String arguments must be valid C strings; `out` must be writable.
enum SubextStatus subext_refine(const char *predictions,
                                const char *ocr_manifest,
                                uint64_t fps_num,
                                uint64_t fps_den,
                                double sim,
                                uint64_t range,
                                char **out);

// Seeded parameters for the given sizes (uniform in `[-0.1, 0.1]`).
//
// # Safety
// `out` must be writable.
enum SubextStatus subext_s3_params_new(size_t p,
                                       size_t k,
                                       size_t window,
                                       size_t c,
                                       size_t d,
                                       bool frame_index_slots,
                                       uint64_t seed,
                                       struct SubextS3Params **out);

// Loads parameters written by [`subext_s3_params_save`]. Pooling size,
// window and slot layout are not stored in the container.
//
// # Safety
// `data` must point to `len` readable bytes; `out` must be writable.
enum SubextStatus subext_s3_params_load(const uint8_t *data,
                                        size_t len,
                                        size_t p,
                                        size_t window,
                                        bool frame_index_slots,
                                        struct SubextS3Params **out);

// Serializes parameters into `buf`. `len` receives the size needed; when
// `buf` is NULL or `capacity` is too small nothing is copied and
// `SUBEXT_STATUS_BUFFER_TOO_SMALL` is returned (NULL `buf` is a size query
// and returns OK).
//
// # Safety
// `params` must be a live handle; `buf` must be NULL or hold `capacity`
// writable bytes; `len` must be writable.
enum SubextStatus subext_s3_params_save(const struct SubextS3Params *params,
                                        uint8_t *buf,
                                        size_t capacity,
                                        size_t *len);

// # Safety
// `params` must be NULL or a live handle.
void subext_s3_params_free(struct SubextS3Params *params);

// Output rows for `frames` frames: `frames * (p*p + K)`, plus one per frame
// with frame-index slots. Output width is `D`.
//
// # Safety
// `params` must be NULL (returns 0) or a live handle.
size_t subext_s3_output_rows(const struct SubextS3Params *params, size_t frames);

// Adapter forward pass over `n` frames stored row-major as `n×h×w×C`.
// `out` must hold `subext_s3_output_rows(params, n) * D` values.
//
// # Safety
// `params` must be a live handle; `frames` must hold `n*h*w*C` values and
// `out` `out_len` writable values.
enum SubextStatus subext_s3_forward(const struct SubextS3Params *params,
                                    const double *frames,
                                    size_t n,
                                    size_t h,
                                    size_t w,
                                    double *out,
                                    size_t out_len);

// Compares analytic and finite-difference gradients of the sum of squared
// outputs. Writes the largest relative error; returns
// `SUBEXT_STATUS_INVARIANT` when it reaches `tol`.
//
// # Safety
// As for [`subext_s3_forward`]; `max_rel_error` must be writable.
enum SubextStatus subext_s3_grad_check(const struct SubextS3Params *params,
                                       const double *frames,
                                       size_t n,
                                       size_t h,
                                       size_t w,
                                       double step,
                                       double tol,
                                       double *max_rel_error);

// Short-video rule: 10 to 120 seconds and at least five tracklets.
enum SubextFilter subext_filter_short_video(double duration, uint32_t tracklet_count);

// Cuts a movie into clips of 15 to 60 seconds. Writes `2 * count` values
// (start, end pairs) into `bounds`; `count` always receives the number of
// clips, so a NULL `bounds` is a size query.
//
// # Safety
// `bounds` must be NULL or hold `capacity` writable values (clip pairs);
// `count` must be writable.
enum SubextStatus subext_clip_movie(double total_duration,
                                    uint64_t seed,
                                    double *bounds,
                                    size_t capacity,
                                    size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBEXT_H */
