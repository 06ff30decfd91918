#ifndef EMOKNN_H
#define EMOKNN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum EmoknnStatus {
  EMOKNN_STATUS_OK = 0,
  EMOKNN_STATUS_NULL_POINTER = 1,
  EMOKNN_STATUS_INVALID_ARGUMENT = 2,
  EMOKNN_STATUS_IO = 3,
  EMOKNN_STATUS_PARSE = 4,
  EMOKNN_STATUS_NOT_FOUND = 5,
  EMOKNN_STATUS_UNDEFINED = 6,
  EMOKNN_STATUS_BUFFER_TOO_SMALL = 7,
  EMOKNN_STATUS_INTERNAL = 8,
} EmoknnStatus;

/**
 * Neighbour aggregation rule of a model.
 */
typedef enum EmoknnAggregation {
  EMOKNN_AGGREGATION_WEIGHTED_MEAN = 0,
  EMOKNN_AGGREGATION_WEIGHTED_MAJORITY = 1,
} EmoknnAggregation;

/**
 * Opaque embedding store loaded from an interchange file.
 */
typedef struct EmoknnEmbeddings EmoknnEmbeddings;

/**
 * Opaque trained wkNN model.
 */
typedef struct EmoknnModel EmoknnModel;

/**
 * One entry of a neighbour trace, most similar first.
 */
typedef struct EmoknnNeighbor {
  /**
   * Row of the training matrix.
   */
  size_t train_index;
  /**
   * Similarity in `[0, 1]`.
   */
  double similarity;
  /**
   * Intensity class 0..=3.
   */
  uint8_t label;
} EmoknnNeighbor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *emoknn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *emoknn_version(void);

/**
 * `(1 + cos(a, b)) / 2` for two vectors of length `len`.
 *
 * # Safety
 * `a` and `b` must point to `len` readable doubles; `out_similarity` must
 * be writable.
 */
enum EmoknnStatus emoknn_cos_similarity(const double *a,
                                        const double *b,
                                        size_t len,
                                        double *out_similarity);

/**
 * Pearson correlation of two samples of length `len`.
 *
 * # Safety
 * `x` and `y` must point to `len` readable doubles; `out_pcc` must be
 * writable.
 */
enum EmoknnStatus emoknn_pcc(const double *x, const double *y, size_t len, double *out_pcc);

/**
 * Nearest intensity class of a score in `[0, 3]`, halves rounding up.
 *
 * # Safety
 * `out_label` must be writable.
 */
enum EmoknnStatus emoknn_round_label(double score, uint8_t *out_label);

/**
 * Odd neighbour count closest to `sqrt(n) / 2`.
 */
size_t emoknn_rule_of_thumb_k(size_t n);

/**
 * Equal-weight mean of `len` member scores, independent of their order.
 *
 * # Safety
 * `scores` must point to `len` readable doubles; `out_mean` must be writable.
 */
enum EmoknnStatus emoknn_ensemble_mean(const double *scores, size_t len, double *out_mean);

/**
 * Builds a model from a row-major `rows x cols` matrix and one label
 * (0..=3) per row. `k` must be odd and at most `rows`. Free the handle with
 * [`emoknn_model_free`].
 *
 * # Safety
 * `matrix` must point to `rows * cols` doubles, `labels` to `rows` bytes,
 * and `out_model` must be writable.
 */
enum EmoknnStatus emoknn_model_new(const double *matrix,
                                   size_t rows,
                                   size_t cols,
                                   const uint8_t *labels,
                                   size_t k,
                                   enum EmoknnAggregation aggregation,
                                   struct EmoknnModel **out_model);

/**
 * Neighbour count of a model, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle from [`emoknn_model_new`].
 */
size_t emoknn_model_k(const struct EmoknnModel *model);

/**
 * Predicts one query of length `len`. The score goes to `out_score`; when
 * `out_neighbors` is not NULL the trace is written there and `capacity`
 * must be at least k. `out_count`, if not NULL, receives k.
 *
 * # Safety
 * `model` must be a live handle, `query` must point to `len` doubles, and
 * `out_neighbors` (if not NULL) to `capacity` writable entries.
 */
enum EmoknnStatus emoknn_model_predict(const struct EmoknnModel *model,
                                       const double *query,
                                       size_t len,
                                       double *out_score,
                                       struct EmoknnNeighbor *out_neighbors,
                                       size_t capacity,
                                       size_t *out_count);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must be NULL or a handle from [`emoknn_model_new`] not yet freed.
 */
void emoknn_model_free(struct EmoknnModel *model);

/**
 * Loads an embedding interchange file. Free the handle with
 * [`emoknn_embeddings_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_store` must be writable.
 */
enum EmoknnStatus emoknn_embeddings_load(const char *path, struct EmoknnEmbeddings **out_store);

/**
 * Vector width of a store, or 0 for NULL.
 *
 * # Safety
 * `store` must be NULL or a live handle.
 */
size_t emoknn_embeddings_dim(const struct EmoknnEmbeddings *store);

/**
 * Number of instances in a store, or 0 for NULL.
 *
 * # Safety
 * `store` must be NULL or a live handle.
 */
size_t emoknn_embeddings_len(const struct EmoknnEmbeddings *store);

/**
 * Writes the tweet vector of `id` (token rows mean-pooled) into
 * `out_vector`, which must hold at least `dim` doubles.
 *
 * # Safety
 * `store` must be a live handle, `id` a NUL-terminated string and `out`
 * `out_vector` must point to `capacity` writable doubles.
 */
enum EmoknnStatus emoknn_embeddings_vector(const struct EmoknnEmbeddings *store,
                                           const char *id,
                                           double *out_vector,
                                           size_t capacity);

/**
 * Releases a store. NULL is ignored.
 *
 * # Safety
 * `store` must be NULL or a handle from [`emoknn_embeddings_load`] not yet
 * freed.
 */
void emoknn_embeddings_free(struct EmoknnEmbeddings *store);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMOKNN_H */
