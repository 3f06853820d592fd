#ifndef BITROBUST_H
#define BITROBUST_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum BrStatus {
  BR_STATUS_OK = 0,
  BR_STATUS_NULL_POINTER = 1,
  BR_STATUS_INVALID_ARGUMENT = 2,
  BR_STATUS_IO = 3,
  BR_STATUS_FORMAT = 4,
  BR_STATUS_CHECKSUM = 5,
  BR_STATUS_SHAPE = 6,
  BR_STATUS_BUFFER_TOO_SMALL = 7,
  BR_STATUS_PANIC = 99,
} BrStatus;

// Opaque quantized model.
typedef struct BrBundle BrBundle;

// Opaque labeled dataset.
typedef struct BrDataset BrDataset;

// Message of the last failed call on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *br_last_error_message(void);

// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum BrStatus br_bundle_load(const char *path, struct BrBundle **out);

// # Safety
// `bundle` must come from this library; `path` must be NUL-terminated.
enum BrStatus br_bundle_save(const struct BrBundle *bundle, const char *path);

// # Safety
// `bundle` must be null or a handle from this library not yet freed.
void br_bundle_free(struct BrBundle *bundle);

// Number of stored weights, or 0 for a null handle.
//
// # Safety
// `bundle` must be null or a live handle.
uintptr_t br_bundle_parameter_count(const struct BrBundle *bundle);

// Passes every tensor through a binary symmetric channel. `flips` may be null.
//
// # Safety
// `bundle` must be a live handle and `out` writable.
enum BrStatus br_bundle_corrupt(const struct BrBundle *bundle,
                                double rber,
                                uint64_t master_seed,
                                uint64_t trial,
                                struct BrBundle **out,
                                uint64_t *flips);

// # Safety
// `path` must be NUL-terminated and `out` writable.
enum BrStatus br_dataset_load(const char *path, struct BrDataset **out);

// # Safety
// `data` must be null or a live handle.
void br_dataset_free(struct BrDataset *data);

// # Safety
// `data` must be null or a live handle.
uintptr_t br_dataset_len(const struct BrDataset *data);

// Top-k accuracy. With `sanitize`, non-finite decoded weights become zero.
//
// # Safety
// Handles must be live and `accuracy` writable.
enum BrStatus br_evaluate_accuracy(const struct BrBundle *bundle,
                                   const struct BrDataset *data,
                                   uintptr_t top_k,
                                   bool sanitize,
                                   double *accuracy);

// Runs one input through the decoded model. The output length is written to
// `written`; if `output_cap` is too small, nothing is copied and
// `BufferTooSmall` is returned with `written` set to the required length.
//
// # Safety
// `input` must point to `input_len` doubles, `output` to `output_cap` doubles.
enum BrStatus br_forward(const struct BrBundle *bundle,
                         const double *input,
                         uintptr_t input_len,
                         double *output,
                         uintptr_t output_cap,
                         uintptr_t *written);

// # Safety
// `bits` must be writable.
enum BrStatus br_half_encode(double value, uint16_t *bits);

double br_half_decode(uint16_t bits);

// Data word for `index` under codec id `codec` (0 binary, 1 gray, 2 hamming).
//
// # Safety
// `word` must be writable.
enum BrStatus br_index_to_word(uint8_t codec, uint32_t q, uint64_t index, uint64_t *word);

// # Safety
// `index` must be writable.
enum BrStatus br_word_to_index(uint8_t codec, uint32_t q, uint64_t word, uint64_t *index);

// Exhaustive distortion over the ball of radius `k`; `mode` 0 is the
// maximum, 1 the average. The exact value is `numer / denom`.
//
// # Safety
// The three output pointers must be writable.
enum BrStatus br_distortion(uint8_t codec,
                            uint32_t q,
                            uint32_t k,
                            uint32_t mode,
                            uint64_t *numer,
                            uint64_t *denom,
                            double *value);

#endif  /* BITROBUST_H */
