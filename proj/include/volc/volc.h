#ifndef VOLC_VOLC_H
#define VOLC_VOLC_H

/* C interface to the volc library. Every function returns a volc_status;
 * on failure volc_last_error() holds a message for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * volc_free_string. Nothing is written to output parameters on failure. */

#include <stddef.h>
#include <stdint.h>

#if defined(VOLC_BUILDING_LIBRARY)
#define VOLC_API __attribute__((visibility("default")))
#else
#define VOLC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum volc_status {
  VOLC_OK = 0,
  VOLC_ERR_INVALID_SHAPE = 1,
  VOLC_ERR_SHAPE = 2,
  VOLC_ERR_INVALID_PARAMETER = 3,
  VOLC_ERR_DEGENERATE_BATCH = 4,
  VOLC_ERR_PROFILE = 5,
  VOLC_ERR_TOO_SMALL = 6,
  VOLC_ERR_PARSE = 7,
  VOLC_ERR_IO = 8,
  VOLC_ERR_MISSING_CLASS = 9,
  VOLC_ERR_FORMAT = 10,
  VOLC_ERR_INTEGRITY = 11,
  VOLC_ERR_CHECKSUM = 12,
  VOLC_ERR_DIVERGENCE = 13,
  VOLC_ERR_EMPTY_INPUT = 14,
  VOLC_ERR_UNDEFINED_RATE = 15,
  VOLC_ERR_INVALID_SCORE = 16,
  VOLC_ERR_INTERNAL = 17
} volc_status;

typedef struct volc_model volc_model;

VOLC_API const char* volc_status_name(volc_status status);
VOLC_API const char* volc_last_error(void);
VOLC_API const char* volc_version(void);
VOLC_API const char* volc_build_id(void);
VOLC_API void volc_free_string(char* s);

/* Worker threads used by data-parallel kernels; 0 restores the default
 * (hardware concurrency). */
VOLC_API void volc_set_workers(int workers);

/* ------------------------------------------------------------- datasets */

/* Generates n_per_class eruption and non-eruption scenes of side
 * patch_size under out_dir, plus out_dir/manifest.jsonl. The summary is a
 * JSON object with sample counts per split and class. */
VOLC_API volc_status volc_synth(size_t n_per_class, uint64_t seed, size_t patch_size, const char* out_dir,
                                char** summary_json);

/* Labels the patches under root from their meta.json, falling back to the
 * eruption catalog at catalog_csv (may be NULL), then writes
 * root/manifest.jsonl. Catalog rows that fail to parse are listed in the
 * summary, not fatal. */
VOLC_API volc_status volc_ingest(const char* root, const char* catalog_csv, uint64_t seed, double radius_km,
                                 double window_days, char** summary_json);

/* Writes composite.vrc (side `size`, band weight alpha) next to every band
 * file under root, or into root itself when it is a single patch. */
VOLC_API volc_status volc_preprocess(const char* root, size_t size, double alpha, char** summary_json);

/* --------------------------------------------------------------- models */

/* "big" or "small" with freshly initialized weights. */
VOLC_API volc_status volc_model_create(const char* name, uint32_t input_size, uint64_t seed, volc_model** out);
VOLC_API volc_status volc_model_load(const char* path, volc_model** out);
VOLC_API volc_status volc_model_save(const volc_model* model, const char* path, size_t* bytes_written);
VOLC_API void volc_model_free(volc_model* model);

/* Layer table: kind, output shape, parameters and multiply-accumulates per
 * layer, with totals. */
VOLC_API volc_status volc_model_describe(const volc_model* model, char** json);
VOLC_API volc_status volc_model_param_count(const volc_model* model, uint64_t* out);
VOLC_API volc_status volc_model_flop_count(const volc_model* model, uint64_t* out);
/* Input side length the model expects. */
VOLC_API volc_status volc_model_input_size(const volc_model* model, uint32_t* out);

/* ------------------------------------------------------------- training */

/* Called after every epoch; a non-zero return is ignored. */
typedef void (*volc_epoch_fn)(size_t epoch, double train_loss, double train_accuracy, double val_accuracy,
                              double seconds, void* user);

/* Trains model `name` on the dataset at data_root (manifest.jsonl inside).
 * config_json holds TrainConfig fields; NULL or "{}" takes the defaults.
 * report_json and curves_csv may be NULL. */
VOLC_API volc_status volc_train(const char* name, uint32_t input_size, const char* data_root,
                                const char* config_json, volc_epoch_fn on_epoch, void* user, volc_model** out,
                                char** report_json, char** curves_csv);

/* ------------------------------------------------------------- inference */

VOLC_API volc_status volc_classify(double score, double threshold, int* label);

/* Scores one composite of `channels` x `height` x `width` floats. */
VOLC_API volc_status volc_predict_pixels(const volc_model* model, const float* pixels, size_t channels,
                                         size_t height, size_t width, double* score);

/* Scores a composite file (.vrc) or a patch directory; patches are
 * preprocessed with band weight alpha. */
VOLC_API volc_status volc_predict_path(const volc_model* model, const char* path, double alpha, double* score);

/* Confusion statistics over one split ("train", "val", "test") of the
 * dataset at data_root. */
VOLC_API volc_status volc_evaluate(const volc_model* model, const char* data_root, const char* split,
                                   double threshold, double alpha, char** report_json);

/* Confusion statistics over caller-supplied scores and labels. */
VOLC_API volc_status volc_confusion(const double* scores, const int* labels, size_t n, double threshold,
                                    size_t* tp, size_t* fn, size_t* tn, size_t* fp);

/* Single-thread throughput over `images` random composites drawn from seed. */
VOLC_API volc_status volc_benchmark(const volc_model* model, size_t images, size_t repetitions, size_t warmup,
                                    uint64_t seed, char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* VOLC_VOLC_H */
