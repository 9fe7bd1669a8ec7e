#ifndef COLLARNET_H
#define COLLARNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `CN_STATUS_OK` is zero; everything else is a failure.
typedef enum CnStatus {
  CN_STATUS_OK = 0,
  CN_STATUS_NULL_POINTER = 1,
  CN_STATUS_INVALID_ARGUMENT = 2,
  CN_STATUS_IO = 3,
  CN_STATUS_FORMAT = 4,
  CN_STATUS_SHAPE_MISMATCH = 5,
  CN_STATUS_UNSORTED_INPUT = 6,
  CN_STATUS_BUFFER_TOO_SMALL = 7,
  CN_STATUS_INTERNAL = 8,
} CnStatus;

// Opaque model handle.
typedef struct CnModel CnModel;

// Opaque waveform handle.
typedef struct CnWaveform CnWaveform;

// Counts and scores from matching detected marks to annotated ones.
typedef struct CnMatchReport {
  size_t tp;
  size_t fp;
  size_t fn_;
  double precision;
  double recall;
  double f1;
  size_t tolerance;
} CnMatchReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *cn_last_error(void);

// Builds a waveform from `len` samples. `marks` may be NULL when `n_marks` is 0.
//
// # Safety
// `samples` must point to `len` readable doubles and `marks` to `n_marks`
// readable `size_t` values; `out` must be writable.
enum CnStatus cn_waveform_new(const double *samples,
                              size_t len,
                              double sample_rate_hz,
                              const size_t *marks,
                              size_t n_marks,
                              struct CnWaveform **out);

// Reads a CCLW waveform from `<stem>.json` and `<stem>.bin`.
//
// # Safety
// `stem` must be a NUL-terminated string and `out` writable.
enum CnStatus cn_waveform_read(const char *stem, struct CnWaveform **out);

// Writes a waveform in CCLW format.
//
// # Safety
// `w` must be a live handle and `stem` a NUL-terminated string.
enum CnStatus cn_waveform_write(const struct CnWaveform *w, const char *stem);

// Generates a synthetic waveform from a JSON spec (an empty object gives
// every default).
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out` writable.
enum CnStatus cn_synth(const char *spec_json, struct CnWaveform **out);

// Number of samples; 0 for a NULL handle.
//
// # Safety
// `w` must be NULL or a live handle.
size_t cn_waveform_len(const struct CnWaveform *w);

// Copies the samples out.
//
// # Safety
// `w` must be a live handle, `buf` NULL or writable for `cap` doubles,
// `len_out` writable.
enum CnStatus cn_waveform_samples(const struct CnWaveform *w,
                                  double *buf,
                                  size_t cap,
                                  size_t *len_out);

// Copies the collar marks out (none for an unannotated waveform).
//
// # Safety
// As for [`cn_waveform_samples`].
enum CnStatus cn_waveform_marks(const struct CnWaveform *w,
                                size_t *buf,
                                size_t cap,
                                size_t *len_out);

// Z-score normalization into a new handle.
//
// # Safety
// `w` must be a live handle and `out` writable.
enum CnStatus cn_standardize(const struct CnWaveform *w, struct CnWaveform **out);

// # Safety
// `w` must be NULL or a handle not yet freed.
void cn_waveform_free(struct CnWaveform *w);

// Loads a CCLM checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum CnStatus cn_model_load(const char *path, struct CnModel **out);

// Input window length `W`; 0 for a NULL handle.
//
// # Safety
// `m` must be NULL or a live handle.
size_t cn_model_window_len(const struct CnModel *m);

// # Safety
// `m` must be NULL or a handle not yet freed.
void cn_model_free(struct CnModel *m);

// Sliding-window probability map over an already normalized waveform;
// one value per sample.
//
// # Safety
// `m` and `w` must be live handles, `buf` NULL or writable for `cap`
// doubles, `len_out` writable.
enum CnStatus cn_sliding_infer(const struct CnModel *m,
                               const struct CnWaveform *w,
                               size_t workers,
                               double *buf,
                               size_t cap,
                               size_t *len_out);

// Thresholds a probability map and writes the region centers.
//
// # Safety
// `values` must point to `len` readable doubles, `centers` NULL or
// writable for `cap` values, `n_out` writable.
enum CnStatus cn_postprocess(const double *values,
                             size_t len,
                             double threshold,
                             size_t min_width,
                             size_t *centers,
                             size_t cap,
                             size_t *n_out);

// Greedy neighborhood matching of sorted predictions against sorted truth.
//
// # Safety
// `pred` and `truth` must point to `n_pred` and `n_truth` readable values
// (either may be NULL when its count is 0); `out` must be writable.
enum CnStatus cn_match_collars(const size_t *pred,
                               size_t n_pred,
                               const size_t *truth,
                               size_t n_truth,
                               size_t tolerance,
                               struct CnMatchReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLARNET_H */
