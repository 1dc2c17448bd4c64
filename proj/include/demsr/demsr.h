/* Copyright 2026 The demsr Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the DEM super-resolution library.
 *
 * Every fallible call returns a demsr_status. On failure the message is
 * available from demsr_last_error() on the same thread until the next call.
 * Handles are opaque; free them with the matching *_free function (NULL is
 * accepted). Strings are UTF-8 and NUL-terminated.
 *
 * Text outputs use the two-call pattern: pass buf = NULL, cap = 0 to learn
 * the required size (including the NUL) through *needed. A short buffer
 * gets a truncated, NUL-terminated copy and DEMSR_ERR_INVALID_ARGUMENT.
 */

#ifndef DEMSR_DEMSR_H_
#define DEMSR_DEMSR_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DEMSR_API __declspec(dllexport)
#else
#define DEMSR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum demsr_status {
  DEMSR_OK = 0,
  DEMSR_ERR_INVALID_ARGUMENT = 1, /* NULL handle, bad enum, short buffer */
  DEMSR_ERR_CONFIG = 2,
  DEMSR_ERR_DIMENSION = 3,
  DEMSR_ERR_CONTRACT = 4,
  DEMSR_ERR_NUMERIC = 5,
  DEMSR_ERR_DEGENERATE_DATA = 6,
  DEMSR_ERR_PARSE = 7,
  DEMSR_ERR_FORMAT = 8,
  DEMSR_ERR_IO = 9,
  DEMSR_ERR_VERIFICATION = 10,
  DEMSR_ERR_INTERNAL = 11
} demsr_status;

DEMSR_API const char* demsr_version(void);
DEMSR_API const char* demsr_status_name(demsr_status status);
/* Message of the last failure on this thread, "" if none. */
DEMSR_API const char* demsr_last_error(void);

/* Progress messages from long-running calls. Process-wide; NULL disables. */
typedef void (*demsr_log_fn)(const char* message, void* user);
DEMSR_API void demsr_set_log_callback(demsr_log_fn fn, void* user);

/* ------------------------------------------------------------------ config */

typedef struct demsr_config demsr_config;

DEMSR_API demsr_status demsr_config_create(demsr_config** out);
DEMSR_API void demsr_config_free(demsr_config* cfg);
/* Dashes in key are read as underscores. */
DEMSR_API demsr_status demsr_config_set(demsr_config* cfg, const char* key, const char* value);
DEMSR_API demsr_status demsr_config_get(const demsr_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);
DEMSR_API demsr_status demsr_config_load_file(demsr_config* cfg, const char* path);
DEMSR_API demsr_status demsr_config_validate(const demsr_config* cfg);
/* "key = value" lines for every key. */
DEMSR_API demsr_status demsr_config_effective(const demsr_config* cfg, char* buf, size_t cap, size_t* needed);

DEMSR_API size_t demsr_config_key_count(void);
/* NULL when i is out of range. */
DEMSR_API const char* demsr_config_key_name(size_t i);
/* 1 for boolean keys, 0 otherwise (and for unknown keys). */
DEMSR_API int demsr_config_key_is_flag(const char* key);

/* -------------------------------------------------------------------- grid */

typedef struct demsr_grid demsr_grid;

typedef struct demsr_grid_info {
  int32_t rows;
  int32_t cols;
  double cell_size;
  double origin_x; /* lower-left corner */
  double origin_y;
  float nodata;
  int32_t has_nodata;
} demsr_grid_info;

/* .asc files are ESRI ASCII grids, anything else the binary DEMR format. */
DEMSR_API demsr_status demsr_grid_read(const char* path, demsr_grid** out);
DEMSR_API demsr_status demsr_grid_write(const demsr_grid* grid, const char* path);
/* Copies rows*cols row-major values. */
DEMSR_API demsr_status demsr_grid_create(const demsr_grid_info* info, const float* values, demsr_grid** out);
DEMSR_API void demsr_grid_free(demsr_grid* grid);
DEMSR_API demsr_status demsr_grid_info_get(const demsr_grid* grid, demsr_grid_info* out);
/* Valid until the grid is freed. */
DEMSR_API const float* demsr_grid_values(const demsr_grid* grid);

/* ------------------------------------------------------------------- model */

typedef struct demsr_model demsr_model;

/* Freshly initialized network for the config's model preset and seed. */
DEMSR_API demsr_status demsr_model_create(const demsr_config* cfg, demsr_model** out);
DEMSR_API demsr_status demsr_model_load(const char* checkpoint, demsr_model** out);
DEMSR_API void demsr_model_free(demsr_model* model);
DEMSR_API demsr_status demsr_model_param_count(const demsr_model* model, uint64_t* out);
/* (h, w) -> (s*h, s*w) in meters; refuses grids with nodata. */
DEMSR_API demsr_status demsr_model_upscale(const demsr_model* model, const demsr_grid* in, demsr_grid** out);

/* ---------------------------------------------------------------- commands */

/* Writes synth_count HR/LR grid pairs and out_dir/manifest.tsv. */
DEMSR_API demsr_status demsr_synth(const demsr_config* cfg, size_t* pairs_written);

/* Tiles one aligned HR/LR raster pair into out_dir/tiles and
 * out_dir/manifest.tsv. */
DEMSR_API demsr_status demsr_tile(const demsr_config* cfg, const char* hr_path, const char* lr_path, size_t* kept,
                                  size_t* dropped);

typedef struct demsr_stats {
  double avg;
  double min;
  double max;
  double std;
  uint64_t count;
} demsr_stats;

/* Elevation statistics over the HR tiles of a manifest. */
DEMSR_API demsr_status demsr_stats_compute(const char* manifest, demsr_stats* out);

typedef struct demsr_train_summary {
  int32_t epochs;
  double final_loss;
  double best_loss;
  double final_lr;
} demsr_train_summary;

/* Trains per the config; out may be NULL. */
DEMSR_API demsr_status demsr_train(const demsr_config* cfg, demsr_train_summary* out);

typedef enum demsr_eval_method { DEMSR_EVAL_MODEL = 0, DEMSR_EVAL_BICUBIC = 1, DEMSR_EVAL_BILINEAR = 2 } demsr_eval_method;

typedef struct demsr_report {
  double mse;
  double err_mean;
  double err_median;
  double err_std;
  double within_one_std_frac;
  uint64_t pixel_count;
} demsr_report;

/* checkpoint is only read for DEMSR_EVAL_MODEL; out_csv may be NULL. */
DEMSR_API demsr_status demsr_eval(const demsr_config* cfg, demsr_eval_method method, const char* checkpoint,
                                  const char* manifest, const char* out_csv, demsr_report* out);

DEMSR_API demsr_status demsr_upscale_file(const char* checkpoint, const char* in_path, const char* out_path);

typedef struct demsr_gradcheck_entry {
  char op[48];
  double max_rel_error;
  int32_t checks;
} demsr_gradcheck_entry;

/* Runs the gradient verification suite over `seeds` seeds. *count receives
 * the number of ops; at most cap entries are written. Passing
 * threshold > 0 turns any op at or above it into DEMSR_ERR_VERIFICATION
 * (entries are still filled). */
DEMSR_API demsr_status demsr_gradcheck(int32_t seeds, double threshold, demsr_gradcheck_entry* entries, size_t cap,
                                       size_t* count);

#ifdef __cplusplus
}
#endif

#endif /* DEMSR_DEMSR_H_ */
