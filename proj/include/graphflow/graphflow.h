/* SPDX-License-Identifier: Apache-2.0 */
/**
 * @file   graphflow.h
 * @brief  C interface to the graphflow conversational reading model.
 *
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function. Every string returned through a `char **` out-parameter is
 * heap-allocated and released with gf_string_free. JSON is used for every
 * structured input and output.
 *
 * Functions return GF_OK or an error category. The message of the most recent
 * failure on the calling thread is available from gf_last_error.
 */
#ifndef GRAPHFLOW_GRAPHFLOW_H
#define GRAPHFLOW_GRAPHFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(GRAPHFLOW_BUILDING_LIBRARY)
#define GF_API __declspec(dllexport)
#else
#define GF_API __declspec(dllimport)
#endif
#else
#define GF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool; 1 and 2 are
 * left to generic failure and usage errors. */
typedef enum gf_status {
  GF_OK = 0,
  GF_ERR_INVALID_ARGUMENT = 3,
  GF_ERR_IO = 4,
  GF_ERR_PARSE = 5,
  GF_ERR_CONFIG = 6,
  GF_ERR_DATASET = 7,
  GF_ERR_CHECKPOINT = 8,
  GF_ERR_SHAPE = 9,
  GF_ERR_NUMERIC = 10,
  GF_ERR_TRAINING = 11,
  GF_ERR_INTERNAL = 12
} gf_status;

typedef struct gf_dataset gf_dataset;
typedef struct gf_model gf_model;

GF_API const char *gf_version(void);
/** Short lowercase name of a status, e.g. "config". */
GF_API const char *gf_status_name(gf_status status);
/** Message of the last failure on this thread; empty after a success. */
GF_API const char *gf_last_error(void);
GF_API void gf_string_free(char *s);

/* -- datasets ------------------------------------------------------------ */

/** Loads a CoQA-style JSON file. Relative paths are resolved against
 * $GRAPHFLOW_DATA_DIR when it is set. */
GF_API gf_status gf_dataset_load(const char *path, gf_dataset **out);
/** Generates a synthetic corpus; `spec_json` may be NULL or a JSON object
 * with any of dialogs, turns, min_context, max_context, entity_vocab,
 * history_rate, type_rate, seed. */
GF_API gf_status gf_dataset_synthetic(const char *spec_json, gf_dataset **out);
GF_API size_t gf_dataset_size(const gf_dataset *ds);
GF_API gf_status gf_dataset_to_json(const gf_dataset *ds, char **json_out);
GF_API gf_status gf_dataset_save(const gf_dataset *ds, const char *path);
GF_API void gf_dataset_free(gf_dataset *ds);

/* -- models -------------------------------------------------------------- */

/** New model for a JSON config (NULL for defaults). The vocabulary is built
 * from the words of the given datasets. */
GF_API gf_status gf_model_create(const char *config_json,
                                 const gf_dataset *const *datasets,
                                 size_t n_datasets, gf_model **out);
GF_API gf_status gf_model_load(const char *checkpoint_path, gf_model **out);
GF_API gf_status gf_model_save(const gf_model *model,
                               const char *checkpoint_path);
/** Overwrites word vectors from a "token v1 ... vd" text file. */
GF_API gf_status gf_model_load_embeddings(gf_model *model, const char *path,
                                          size_t *found);
GF_API gf_status gf_model_save_vocab(const gf_model *model, const char *path);
GF_API gf_status gf_model_config(const gf_model *model, char **json_out);
GF_API void gf_model_free(gf_model *model);

/* -- operations ---------------------------------------------------------- */

/** Called once per epoch with {"epoch", "train_loss", "selection_f1"}. */
typedef void (*gf_epoch_callback)(const char *epoch_json, void *user);

/** Trains in place. `dev` may be NULL, in which case the training set is used
 * for model selection. `result_json` may be NULL. */
GF_API gf_status gf_train(gf_model *model, const gf_dataset *train,
                          const gf_dataset *dev, gf_epoch_callback on_epoch,
                          void *user, char **result_json);
GF_API gf_status gf_evaluate(const gf_model *model, const gf_dataset *ds,
                             int predicted_history, int with_predictions,
                             char **report_out);
/** One prediction JSON object per line, one line per turn. */
GF_API gf_status gf_predict(const gf_model *model, const gf_dataset *ds,
                            int predicted_history, char **jsonl_out);
/** Per-turn cosine similarities of node states. Either output may be NULL. */
GF_API gf_status gf_flow_trace(const gf_model *model, const gf_dataset *ds,
                               double threshold, char **json_out,
                               char **text_out);
/** Sparsified graph rows as JSON lines {conversation_id, turn, row, kept,
 * weights}. */
GF_API gf_status gf_graph_dump(const gf_model *model, const gf_dataset *ds,
                               char **jsonl_out);
/** Trains each row (comma separated; NULL for the default rows) from the same
 * config and data and evaluates it on `eval`. `dev` may be NULL. */
GF_API gf_status gf_ablate(const char *config_json, const char *rows,
                           const gf_dataset *train, const gf_dataset *dev,
                           const gf_dataset *eval, char **json_out);
/** Finite-difference checks of the modules and of a tiny end-to-end model. */
GF_API gf_status gf_grad_check(uint64_t seed, char **json_out);

#ifdef __cplusplus
}
#endif

#endif
