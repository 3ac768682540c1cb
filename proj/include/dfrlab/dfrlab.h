/*
 * dfrlab -- spurious-correlation workbench: synthetic grouped datasets, ERM
 * training of a small convolutional classifier, group-balanced last-layer
 * retraining (L1 logistic regression), worst-group evaluation, and
 * CAM/neuron-level interpretability exports.
 *
 * C API over an opaque-handle core. Every fallible function returns a
 * dfrlab_status; on failure dfrlab_last_error() holds a thread-local
 * message valid until the next failing call on the same thread. Handles
 * are freed with their matching *_free function; freeing NULL is a no-op.
 */
#ifndef DFRLAB_H
#define DFRLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DFRLAB_API __declspec(dllexport)
#else
#define DFRLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dfrlab_status {
  DFRLAB_OK = 0,
  DFRLAB_ERR_INVALID_ARGUMENT = 1,
  DFRLAB_ERR_INVALID_SPEC = 2,
  DFRLAB_ERR_SHAPE_MISMATCH = 3,
  DFRLAB_ERR_IO = 4,
  DFRLAB_ERR_FORMAT = 5,
  DFRLAB_ERR_DIVERGED = 6,
  DFRLAB_ERR_GROUP_BALANCE = 7,
  DFRLAB_ERR_LABELS = 8,
  DFRLAB_ERR_METRIC = 9,
  DFRLAB_ERR_PROBE = 10,
  DFRLAB_ERR_PIPELINE = 11,
  DFRLAB_ERR_INTERNAL = 12
} dfrlab_status;

DFRLAB_API const char* dfrlab_version(void);
DFRLAB_API const char* dfrlab_status_name(dfrlab_status status);
DFRLAB_API const char* dfrlab_last_error(void);

/* Opaque handles. */
typedef struct dfrlab_dataset dfrlab_dataset;
typedef struct dfrlab_model dfrlab_model;
typedef struct dfrlab_features dfrlab_features;
typedef struct dfrlab_dfr_result dfrlab_dfr_result;

typedef enum dfrlab_split {
  DFRLAB_SPLIT_TRAIN = 0,
  DFRLAB_SPLIT_VALID = 1,
  DFRLAB_SPLIT_TEST = 2
} dfrlab_split;

/* ---- configuration ---------------------------------------------------- */

typedef struct dfrlab_dataset_spec {
  uint32_t image_size;        /* default 32 */
  uint32_t channels;          /* default 3 */
  uint32_t n_train_per_class; /* default 500 */
  uint32_t n_val_per_class;   /* default 100 */
  uint32_t n_test_per_class;  /* default 250 */
  double train_correlation;   /* default 0.95 */
  uint32_t patch_size;        /* default 6 */
  double noise_sigma;         /* default 0.35 */
  uint64_t seed;              /* default 42 */
} dfrlab_dataset_spec;

typedef struct dfrlab_train_config {
  double learning_rate; /* default 0.05 */
  double momentum;      /* default 0.9 */
  uint32_t epochs;      /* default 30 */
  uint32_t batch_size;  /* default 32 */
  double weight_decay;  /* default 1e-4 */
  uint64_t seed;
} dfrlab_train_config;

typedef struct dfrlab_dfr_config {
  double l1_lambda;          /* default 0.05 */
  uint32_t max_iters;        /* default 5000 */
  double step_size;          /* default 0.1, halved on objective increase */
  double tol;                /* default 1e-8 */
  uint32_t n_subset_repeats; /* default 1 */
  int standardize;           /* default 0 */
  uint64_t seed;
} dfrlab_dfr_config;

DFRLAB_API void dfrlab_dataset_spec_init(dfrlab_dataset_spec* spec);
DFRLAB_API void dfrlab_train_config_init(dfrlab_train_config* cfg);
DFRLAB_API void dfrlab_dfr_config_init(dfrlab_dfr_config* cfg);

/* ---- datasets ---------------------------------------------------------- */

DFRLAB_API dfrlab_status dfrlab_dataset_generate(
    const dfrlab_dataset_spec* spec, dfrlab_dataset** out);
DFRLAB_API dfrlab_status dfrlab_dataset_save(const dfrlab_dataset* dataset,
                                             const char* path);
DFRLAB_API dfrlab_status dfrlab_dataset_load(const char* path,
                                             dfrlab_dataset** out);
DFRLAB_API void dfrlab_dataset_free(dfrlab_dataset* dataset);

DFRLAB_API dfrlab_status dfrlab_dataset_split_size(
    const dfrlab_dataset* dataset, dfrlab_split split, size_t* out);
/* counts[4], indexed by group = label*2 + patch_flag */
DFRLAB_API dfrlab_status dfrlab_dataset_group_counts(
    const dfrlab_dataset* dataset, dfrlab_split split, uint64_t counts[4]);

/* ---- training and prediction ------------------------------------------ */

DFRLAB_API dfrlab_status dfrlab_train_erm(const dfrlab_dataset* dataset,
                                          const dfrlab_train_config* cfg,
                                          dfrlab_model** out);
DFRLAB_API dfrlab_status dfrlab_model_save(const dfrlab_model* model,
                                           const char* path);
DFRLAB_API dfrlab_status dfrlab_model_load(const char* path,
                                           dfrlab_model** out);
DFRLAB_API void dfrlab_model_free(dfrlab_model* model);

DFRLAB_API dfrlab_status dfrlab_model_feature_dim(const dfrlab_model* model,
                                                  size_t* out);
/* weights must hold feature_dim doubles. */
DFRLAB_API dfrlab_status dfrlab_model_head(const dfrlab_model* model,
                                           double* weights, double* bias);
/* Probability for one sample of the given split. */
DFRLAB_API dfrlab_status dfrlab_model_predict(const dfrlab_model* model,
                                              const dfrlab_dataset* dataset,
                                              dfrlab_split split, size_t index,
                                              double* probability);

/* ---- last-layer retraining --------------------------------------------- */

DFRLAB_API dfrlab_status dfrlab_extract_features(const dfrlab_model* model,
                                                 const dfrlab_dataset* dataset,
                                                 dfrlab_split split,
                                                 dfrlab_features** out);
DFRLAB_API dfrlab_status dfrlab_features_dims(const dfrlab_features* features,
                                              size_t* rows, size_t* cols);
DFRLAB_API void dfrlab_features_free(dfrlab_features* features);

/* Balanced subset + L1 logistic retraining on the validation split. */
DFRLAB_API dfrlab_status dfrlab_dfr_run(const dfrlab_model* model,
                                        const dfrlab_dataset* dataset,
                                        const dfrlab_dfr_config* cfg,
                                        dfrlab_dfr_result** out);
/* Solve on a feature matrix as given (see n_subset_repeats semantics). */
DFRLAB_API dfrlab_status dfrlab_retrain_head(const dfrlab_features* features,
                                             const dfrlab_dfr_config* cfg,
                                             dfrlab_dfr_result** out);
DFRLAB_API dfrlab_status dfrlab_dfr_result_zero_fraction(
    const dfrlab_dfr_result* result, double* out);
DFRLAB_API dfrlab_status dfrlab_dfr_result_head(
    const dfrlab_dfr_result* result, double* weights, double* bias);
DFRLAB_API dfrlab_status dfrlab_dfr_result_save_json(
    const dfrlab_dfr_result* result, const char* path);
DFRLAB_API void dfrlab_dfr_result_free(dfrlab_dfr_result* result);

/* Frozen encoder, retrained head. */
DFRLAB_API dfrlab_status dfrlab_apply_dfr(const dfrlab_model* model,
                                          const dfrlab_dfr_result* result,
                                          dfrlab_model** out);

/* ---- evaluation --------------------------------------------------------- */

typedef struct dfrlab_group_metrics {
  double per_group_accuracy[4];
  uint64_t n_per_group[4];
  double average_accuracy; /* micro average */
  int32_t worst_group;     /* argmin group, lowest index on ties */
} dfrlab_group_metrics;

DFRLAB_API dfrlab_status dfrlab_evaluate(const dfrlab_model* model,
                                         const dfrlab_dataset* dataset,
                                         dfrlab_split split, double threshold,
                                         dfrlab_group_metrics* out);

/* ---- interpretability ---------------------------------------------------- */

/* Diverging blue-white-red PPM of the image-level CAM. */
DFRLAB_API dfrlab_status dfrlab_export_cam(const dfrlab_model* model,
                                           const dfrlab_dataset* dataset,
                                           dfrlab_split split, size_t index,
                                           const char* path);
/* Grayscale PGM of one feature channel's activation map. */
DFRLAB_API dfrlab_status dfrlab_export_neuron_map(
    const dfrlab_model* model, const dfrlab_dataset* dataset,
    dfrlab_split split, size_t index, size_t neuron, const char* path);

/* ---- CLI drivers --------------------------------------------------------- */

typedef struct dfrlab_overrides {
  int has_seed; /* nonzero: seed replaces every configured seed */
  uint64_t seed;
  uint32_t n_runs; /* 0: keep configured value */
} dfrlab_overrides;

/* config_json may be NULL or empty for all defaults; overrides may be
 * NULL. Each driver reads and writes fixed file names under out_dir (see
 * the README). */
DFRLAB_API dfrlab_status dfrlab_cmd_generate(const char* config_json,
                                             const char* out_dir,
                                             const dfrlab_overrides* ov);
DFRLAB_API dfrlab_status dfrlab_cmd_train(const char* config_json,
                                          const char* out_dir,
                                          const dfrlab_overrides* ov);
DFRLAB_API dfrlab_status dfrlab_cmd_dfr(const char* config_json,
                                        const char* out_dir,
                                        const dfrlab_overrides* ov);
DFRLAB_API dfrlab_status dfrlab_cmd_eval(const char* config_json,
                                         const char* out_dir,
                                         const dfrlab_overrides* ov);
DFRLAB_API dfrlab_status dfrlab_cmd_cam(const char* config_json,
                                        const char* out_dir,
                                        const dfrlab_overrides* ov);
DFRLAB_API dfrlab_status dfrlab_cmd_neurons(const char* config_json,
                                            const char* out_dir,
                                            const dfrlab_overrides* ov);
DFRLAB_API dfrlab_status dfrlab_cmd_report(const char* out_dir);
DFRLAB_API dfrlab_status dfrlab_cmd_pipeline(const char* config_json,
                                             const char* out_dir,
                                             const dfrlab_overrides* ov);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DFRLAB_H */
