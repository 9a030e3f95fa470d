/* SPDX-License-Identifier: Apache-2.0 */
#ifndef ROTUNROLL_H
#define ROTUNROLL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Stable C interface to the rotation-tied unrolled sparse-coding models.
 * Every function returns a status code; on failure, ru_last_error() gives
 * a human-readable message for the calling thread. Handles are opaque and
 * must be released with the matching *_free call. */

typedef enum ru_status {
  RU_OK = 0,
  RU_ERR_INVALID_ARGUMENT = 1, /* NULL handle, bad enum string, bad value */
  RU_ERR_IO = 2,               /* file could not be opened/read/written */
  RU_ERR_PARSE = 3,            /* malformed IDX/CIFAR/container/checkpoint */
  RU_ERR_DIMENSION = 4,        /* shape mismatch between operands */
  RU_ERR_USAGE = 5,            /* API misuse (e.g. eval before training) */
  RU_ERR_DIVERGED = 6,         /* training hit a non-finite loss */
  RU_ERR_INTERNAL = 7          /* unexpected failure */
} ru_status;

/* Message for the most recent failure on this thread; empty string if none. */
const char* ru_last_error(void);

typedef struct ru_dataset ru_dataset;
typedef struct ru_model ru_model;

/* ----------------------------------------------------------- datasets */

/* IDX image/label file pair (pixels are scaled to [0,1]). */
ru_status ru_dataset_load_idx(const char* images_path, const char* labels_path,
                              ru_dataset** out);

/* One or more CIFAR-10 binary batch files, concatenated in order. */
ru_status ru_dataset_load_cifar10(const char* const* batch_paths, size_t num_batches,
                                  ru_dataset** out);

/* Native container written by ru_dataset_save (round-trips bit-exactly). */
ru_status ru_dataset_load(const char* path, ru_dataset** out);
ru_status ru_dataset_save(const ru_dataset* ds, const char* path);

/* New dataset with every image rotated by an independent uniform-random
 * angle in [0, 360); labels are unchanged. */
ru_status ru_dataset_rotate(const ru_dataset* ds, uint64_t seed, ru_dataset** out);

/* First n examples (n is clamped to the dataset size). */
ru_status ru_dataset_take(const ru_dataset* ds, size_t n, ru_dataset** out);

size_t ru_dataset_size(const ru_dataset* ds); /* 0 for NULL */
void ru_dataset_free(ru_dataset* ds);

/* ------------------------------------------------------------- models */

typedef struct ru_train_options {
  const char* model;   /* baseline | r90 | r60 | dense-baseline | dense-r90 | dense-r60 */
  const char* dataset; /* mnist | rot-mnist | cifar10 */
  int epochs;
  int batch_size;
  double learning_rate;
  uint64_t seed;
  const char* optimizer;        /* adam | sgd (NULL means adam) */
  double target_test_acc;       /* early stop when reached; <= 0 disables */
  const char* metrics_csv_path; /* per-epoch CSV; NULL to skip */
  int verbose;                  /* nonzero: per-epoch progress on stderr */
} ru_train_options;

ru_status ru_model_train(const ru_train_options* opts, const ru_dataset* train_data,
                         const ru_dataset* test_data, ru_model** out);

ru_status ru_model_evaluate(ru_model* model, const ru_dataset* data, double* accuracy,
                            double* mean_loss, double* mean_sparsity);

/* Checkpoint save/load; load(save(m)) reproduces eval outputs bit-exactly. */
ru_status ru_model_save(const ru_model* model, const char* path);
ru_status ru_model_load(const char* path, ru_model** out);

/* Learnable-parameter breakdown for an existing model... */
ru_status ru_model_param_counts(const ru_model* model, size_t* filters,
                                size_t* batchnorm, size_t* head, size_t* total);
/* ...or for a (model, dataset) pair without building one. */
ru_status ru_param_counts_for(const char* model, const char* dataset, size_t* filters,
                              size_t* batchnorm, size_t* head, size_t* total);

/* Writes the given layer's filters as an image grid: one row per learnable
 * basis filter, one column per rotation. Grayscale filters produce PGM,
 * multi-channel PPM; each tile is min-max normalized independently. */
ru_status ru_model_export_filters(const ru_model* model, int layer, const char* path);

void ru_model_free(ru_model* model);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ROTUNROLL_H */
