#ifndef TOPICFLOW_H
#define TOPICFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_UTF8 = 2,
  TF_STATUS_IO = 3,
  TF_STATUS_FORMAT = 4,
  TF_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The output buffer is shorter than the result; nothing was written.
   */
  TF_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * Numeric failure or other error inside the library.
   */
  TF_STATUS_RUNTIME = 7,
  /**
   * Bad configuration file or value.
   */
  TF_STATUS_CONFIG = 8,
  /**
   * A pipeline stage ran before the stage that produces its input.
   */
  TF_STATUS_MISSING_DEPENDENCY = 9,
  /**
   * A Rust panic was caught at the boundary.
   */
  TF_STATUS_PANIC = 10,
} TfStatus;

typedef struct TfClassifier TfClassifier;

typedef struct TfEmbedding TfEmbedding;

typedef struct TfKMeans TfKMeans;

typedef struct TfLda TfLda;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tf_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *tf_last_error_message(void);

/**
 * Normalises raw text into space-separated tokens. `*needed` receives the
 * byte length including the terminating NUL even when `buf` is too small.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `buf` must hold `buf_len` bytes.
 */
TfStatus tf_preprocess(const char *text, char *buf, size_t buf_len, size_t *needed);

/**
 * Loads an LDA model; its vocabulary comes from the ingested corpus file
 * it was trained on.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
TfStatus tf_lda_load(const char *model_path, const char *corpus_path, TfLda **out);

/**
 * # Safety
 * `lda` must come from [`tf_lda_load`] and not be used afterwards.
 */
void tf_lda_free(TfLda *lda);

/**
 * # Safety
 * `lda` must be a live handle; `out` must be writable.
 */
TfStatus tf_lda_num_topics(const TfLda *lda, size_t *out);

/**
 * Topic proportions of one document. Unknown tokens are ignored; a
 * document with none known gets the uniform distribution.
 *
 * # Safety
 * `lda` must be a live handle; `probs` must hold `len` doubles.
 */
TfStatus tf_lda_infer(const TfLda *lda, const char *tokens_utf8, double *probs, size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
TfStatus tf_embedding_load(const char *path, TfEmbedding **out);

/**
 * # Safety
 * `emb` must come from [`tf_embedding_load`] and not be used afterwards.
 */
void tf_embedding_free(TfEmbedding *emb);

/**
 * # Safety
 * `emb` must be a live handle; `out` must be writable.
 */
TfStatus tf_embedding_dim(const TfEmbedding *emb, size_t *out);

/**
 * Vector of one word, built from its subwords when it is out of vocabulary.
 * All zeros when none of those subwords occurred in training.
 *
 * # Safety
 * `emb` must be a live handle; `vec` must hold `len` doubles.
 */
TfStatus tf_embedding_word_vector(const TfEmbedding *emb,
                                  const char *word,
                                  double *vec,
                                  size_t len);

/**
 * Mean word vector of a document; all zeros when it has no tokens.
 *
 * # Safety
 * `emb` must be a live handle; `vec` must hold `len` doubles.
 */
TfStatus tf_embedding_doc_vector(const TfEmbedding *emb,
                                 const char *tokens_utf8,
                                 double *vec,
                                 size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
TfStatus tf_classifier_load(const char *path, TfClassifier **out);

/**
 * # Safety
 * `clf` must come from [`tf_classifier_load`] and not be used afterwards.
 */
void tf_classifier_free(TfClassifier *clf);

/**
 * # Safety
 * `clf` must be a live handle; `out` must be writable.
 */
TfStatus tf_classifier_num_labels(const TfClassifier *clf, size_t *out);

/**
 * The `k` most probable topic labels, best first, with their probabilities.
 *
 * # Safety
 * `clf` must be a live handle; `labels` and `probs` must hold `k` values.
 */
TfStatus tf_classifier_predict(const TfClassifier *clf,
                               const char *tokens_utf8,
                               size_t k,
                               uint32_t *labels,
                               double *probs);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
TfStatus tf_kmeans_load(const char *path, TfKMeans **out);

/**
 * # Safety
 * `km` must come from [`tf_kmeans_load`] and not be used afterwards.
 */
void tf_kmeans_free(TfKMeans *km);

/**
 * # Safety
 * `km` must be a live handle; `k` and `dim` must be writable.
 */
TfStatus tf_kmeans_shape(const TfKMeans *km, size_t *k, size_t *dim);

/**
 * Index of the nearest centroid; ties go to the lower index.
 *
 * # Safety
 * `km` must be a live handle; `vec` must hold `len` doubles.
 */
TfStatus tf_kmeans_assign(const TfKMeans *km, const double *vec, size_t len, size_t *cluster);

/**
 * Runs one pipeline stage, or every stage when `stage` is NULL or "all".
 * `config_path` and `work_dir` may be NULL for defaults.
 *
 * # Safety
 * Non-NULL arguments must be NUL-terminated strings.
 */
TfStatus tf_pipeline_run(const char *config_path, const char *work_dir, const char *stage);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPICFLOW_H */
