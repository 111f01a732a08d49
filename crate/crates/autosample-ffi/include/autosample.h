#ifndef AUTOSAMPLE_H
#define AUTOSAMPLE_H

/* Generated by cbindgen from the autosample-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every entry point.
 */
typedef enum as_status {
  AS_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  AS_STATUS_NULL_ARGUMENT = 1,
  /*
   A string argument was not valid UTF-8.
   */
  AS_STATUS_INVALID_UTF8 = 2,
  /*
   A spec or file failed to parse.
   */
  AS_STATUS_PARSE = 3,
  /*
   A domain precondition was violated.
   */
  AS_STATUS_DOMAIN = 4,
  /*
   File system failure.
   */
  AS_STATUS_IO = 5,
  /*
   Training aborted (e.g. non-finite loss).
   */
  AS_STATUS_TRAIN = 6,
  /*
   Unexpected internal failure; see the last error message.
   */
  AS_STATUS_INTERNAL = 7,
} as_status;

/*
 Opaque interaction dataset.
 */
typedef struct as_dataset as_dataset;

/*
 Opaque model (embedding tables plus scoring-function tag).
 */
typedef struct as_model as_model;

/*
 Opaque train/valid/test split.
 */
typedef struct as_split as_split;

/*
 Training configuration; obtain defaults from
 [`autosample_train_config_default`] and adjust fields as needed.
 */
typedef struct as_train_config {
  uint64_t epochs;
  uint64_t batch_size;
  double lr_w;
  double lr_theta;
  double l2;
  /*
   Negatives per positive.
   */
  uint64_t negatives;
  uint64_t dim;
  uint64_t eval_every;
  uint64_t patience;
  uint64_t seed;
  /*
   0 = inner product, 1 = graph propagation (see `lightgcn_layers`).
   */
  uint32_t model_kind;
  uint32_t lightgcn_layers;
  double tau0;
  double tau_min;
  double tau_decay;
} as_train_config;

/*
 Metric values for one evaluation, averaged over evaluable users.
 */
typedef struct as_metrics {
  uint32_t k;
  double recall;
  double ndcg;
  double precision;
  double hit_ratio;
  uint64_t users_evaluated;
} as_metrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static string; never freed by the caller.
 */
const char *autosample_version(void);

/*
 Message for the most recent error on this thread, or NULL if none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *autosample_last_error_message(void);

/*
 Default training configuration (30 epochs, batch 1024, dim 64, one
 negative per positive, seed 42, inner-product model).
 */
struct as_train_config autosample_train_config_default(void);

/*
 Generate a synthetic dataset with planted block structure.

 # Safety
 `out` must be a valid pointer to an `AsDataset*` slot.
 */
enum as_status autosample_dataset_generate(uint64_t users,
                                           uint64_t items,
                                           uint64_t blocks,
                                           double density,
                                           double noise,
                                           uint64_t seed,
                                           struct as_dataset **out);

/*
 Load a `user<TAB>item` interaction file with iterative degree filtering.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid slot.
 */
enum as_status autosample_dataset_load(const char *path,
                                       uint64_t min_count,
                                       struct as_dataset **out);

/*
 # Safety
 `ds` must be a handle produced by this library, freed at most once.
 */
void autosample_dataset_free(struct as_dataset *ds);

/*
 Randomly partition a dataset 3:1:1 into train/valid/test.

 # Safety
 `ds` must be a live dataset handle and `out` a valid slot.
 */
enum as_status autosample_split_create(const struct as_dataset *ds,
                                       uint64_t seed,
                                       struct as_split **out);

/*
 Load a split directory written by the CLI `split` command.

 # Safety
 `dir` must be a NUL-terminated string and `out` a valid slot.
 */
enum as_status autosample_split_load(const char *dir, struct as_split **out);

/*
 # Safety
 `split` must be a handle produced by this library, freed at most once.
 */
void autosample_split_free(struct as_split *split);

/*
 Train with one fixed sampler spec (`"rns"`, `"pns:beta=0.75"`,
 `"dns:c=10"`, `"aobpr:lambda=64"`). On success `out_model` receives the
 best-validation snapshot and `out_metrics` its test-split report.

 # Safety
 All pointers must be valid; `sampler_spec` must be NUL-terminated.
 */
enum as_status autosample_train_fixed(const struct as_split *split,
                                      const char *sampler_spec,
                                      const struct as_train_config *cfg,
                                      struct as_model **out_model,
                                      struct as_metrics *out_metrics);

/*
 Search over a comma-separated list of sampler specs, then retrain with the
 winner warm-started from the best search tables. `alpha_out` must hold one
 slot per spec; `selected_out` receives the winning index.

 # Safety
 All pointers must be valid; `alpha_out` must have room for every spec.
 */
enum as_status autosample_auto(const struct as_split *split,
                               const char *specs_csv,
                               const struct as_train_config *cfg,
                               double *alpha_out,
                               uint64_t alpha_len,
                               uint64_t *selected_out,
                               struct as_model **out_model,
                               struct as_metrics *out_metrics);

/*
 Evaluate a model on one split: `which` 0 scores validation (train items
 excluded), 1 scores test (train and validation items excluded).

 # Safety
 All pointers must be valid handles/slots.
 */
enum as_status autosample_evaluate(const struct as_model *model,
                                   const struct as_split *split,
                                   uint32_t which,
                                   uint32_t k,
                                   struct as_metrics *out);

/*
 Persist a model checkpoint.

 # Safety
 `model` must be a live handle; `path` must be NUL-terminated.
 */
enum as_status autosample_model_save(const struct as_model *model, const char *path);

/*
 Load a model checkpoint.

 # Safety
 `path` must be NUL-terminated; `out` must be a valid slot.
 */
enum as_status autosample_model_load(const char *path, struct as_model **out);

/*
 # Safety
 `model` must be a handle produced by this library, freed at most once.
 */
void autosample_model_free(struct as_model *model);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* AUTOSAMPLE_H */
