/* C interface to the lgap library. All strings are UTF-8 and NUL-terminated.
 * Strings returned through char** are owned by the caller and released with
 * lgap_string_free. Borrowed const char* results live as long as their handle.
 * On failure every call returns a non-zero status and lgap_last_error() holds
 * a message for the calling thread. */
#ifndef LGAP_H
#define LGAP_H

#include <stddef.h>
#include <stdint.h>

#if defined(LGAP_BUILDING_LIBRARY)
#define LGAP_API __attribute__((visibility("default")))
#else
#define LGAP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lgap_status {
  LGAP_OK = 0,
  LGAP_ERR_CONFIG = 2,
  LGAP_ERR_DATA = 3,
  LGAP_ERR_STAGE = 4,
  LGAP_ERR_FORMAT = 5,
  LGAP_ERR_PRECONDITION = 6,
  LGAP_ERR_IO = 7,
  LGAP_ERR_ARGUMENT = 8,
  LGAP_ERR_INTERNAL = 9
} lgap_status;

typedef struct lgap_corpus lgap_corpus;
typedef struct lgap_embeddings lgap_embeddings;
typedef struct lgap_probe lgap_probe;

LGAP_API const char* lgap_version(void);
LGAP_API const char* lgap_last_error(void);
/* Offending field of the last format error, or "". */
LGAP_API const char* lgap_last_error_field(void);
LGAP_API void lgap_string_free(char* s);
/* Process exit code for a status: 0, 2 (config), 3 (data/format), 4 (stage). */
LGAP_API int lgap_exit_code(lgap_status status);
LGAP_API lgap_status lgap_set_threads(unsigned threads);

/* Config. overrides_json may be NULL; recognised keys are seed, output_dir,
 * threads and per_class. On LGAP_ERR_CONFIG *errors_json holds a JSON array
 * with every problem found. */
LGAP_API lgap_status lgap_config_validate(const char* config_json, const char* overrides_json, char** normalized_json,
                                          char** errors_json);

/* Writes train.jsonl, val.jsonl and test.jsonl into out_dir. */
LGAP_API lgap_status lgap_corpus_generate(const char* config_json, const char* overrides_json, const char* out_dir,
                                          char** summary_json);
LGAP_API lgap_status lgap_run_pipeline(const char* config_json, const char* overrides_json, char** manifest_json);

/* Corpus files (JSONL). */
LGAP_API lgap_status lgap_corpus_load(const char* path, lgap_corpus** out);
LGAP_API void lgap_corpus_free(lgap_corpus* corpus);
LGAP_API size_t lgap_corpus_size(const lgap_corpus* corpus);
LGAP_API lgap_status lgap_corpus_get(const lgap_corpus* corpus, size_t index, uint64_t* id, int* label,
                                     const char** text);
LGAP_API void lgap_corpus_digest(const lgap_corpus* corpus, uint8_t digest[32]);

/* Embedding matrices (PGEM). */
LGAP_API lgap_status lgap_embeddings_create(uint64_t rows, uint64_t cols, const float* data, const char* encoder_id,
                                            const uint8_t digest[32], lgap_embeddings** out);
LGAP_API lgap_status lgap_embeddings_read(const char* path, lgap_embeddings** out);
LGAP_API lgap_status lgap_embeddings_write(const lgap_embeddings* embeddings, const char* path);
LGAP_API void lgap_embeddings_free(lgap_embeddings* embeddings);
LGAP_API uint64_t lgap_embeddings_rows(const lgap_embeddings* embeddings);
LGAP_API uint64_t lgap_embeddings_cols(const lgap_embeddings* embeddings);
LGAP_API const float* lgap_embeddings_data(const lgap_embeddings* embeddings);
LGAP_API const char* lgap_embeddings_encoder_id(const lgap_embeddings* embeddings);
LGAP_API void lgap_embeddings_digest(const lgap_embeddings* embeddings, uint8_t digest[32]);

LGAP_API lgap_status lgap_encode_hash(const lgap_corpus* corpus, uint32_t dim, uint32_t ngram_min, uint32_t ngram_max,
                                      uint64_t seed, lgap_embeddings** out, size_t* zero_rows);
LGAP_API lgap_status lgap_check_alignment(const lgap_embeddings* embeddings, const lgap_corpus* corpus);

/* estimator_json: {"estimator": "auto"|"exact"|"sampled", "samples": N, "seed": S}
 * or NULL for auto. */
LGAP_API lgap_status lgap_geometry(const lgap_embeddings* embeddings, const lgap_corpus* corpus,
                                   const char* estimator_json, char** report_json);

/* params_json: {"method": "pca"|"tsne", "components": 2, "perplexity": 30,
 * "iterations": 1000, "seed": S, "format": "csv"|"svg"}. */
LGAP_API lgap_status lgap_project(const lgap_embeddings* embeddings, const lgap_corpus* corpus,
                                  const char* params_json, const char* out_path, char** diagnostics_json);

/* params_json: {"learning_rate", "epochs", "l2", "eval_interval", "patience",
 * "seed"}; any subset, or NULL. */
LGAP_API lgap_status lgap_probe_train(const lgap_embeddings* train, const lgap_corpus* train_corpus,
                                      const lgap_embeddings* val, const lgap_corpus* val_corpus,
                                      const char* params_json, lgap_probe** out);
LGAP_API lgap_status lgap_probe_evaluate(const lgap_probe* probe, const lgap_embeddings* embeddings,
                                         const lgap_corpus* corpus, char** report_json);
LGAP_API lgap_status lgap_probe_read(const char* path, lgap_probe** out);
LGAP_API lgap_status lgap_probe_write(const lgap_probe* probe, const char* path);
LGAP_API void lgap_probe_free(lgap_probe* probe);

LGAP_API lgap_status lgap_gap_report(const char* classification_json, const char* geometry_json, double f_thresh,
                                     double r_thresh, char** gap_json);

#ifdef __cplusplus
}
#endif

#endif
