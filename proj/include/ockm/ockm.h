/* SPDX-License-Identifier: Apache-2.0 */
#ifndef OCKM_OCKM_H
#define OCKM_OCKM_H

#include <stddef.h>
#include <stdint.h>

#if defined(OCKM_BUILDING_LIBRARY)
#define OCKM_API __attribute__((visibility("default")))
#else
#define OCKM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ockm_status {
  OCKM_OK = 0,
  OCKM_ERR_INVALID_ARGUMENT = 1, /* null handle or pointer, bad enum */
  OCKM_ERR_RANGE = 2,
  OCKM_ERR_DOMAIN = 3,
  OCKM_ERR_TOPOLOGY = 4,
  OCKM_ERR_CONFIG = 5,
  OCKM_ERR_FORMAT = 6,
  OCKM_ERR_DIMENSION = 7,
  OCKM_ERR_NUMERIC = 8,
  OCKM_ERR_IO = 9,
  OCKM_ERR_INTERNAL = 10
} ockm_status;

typedef enum ockm_split {
  OCKM_SPLIT_TRAIN = 0,
  OCKM_SPLIT_TEST = 1,
  OCKM_SPLIT_ALL = 2
} ockm_split;

typedef struct ockm_config ockm_config;
typedef struct ockm_dataset ockm_dataset;
typedef struct ockm_session ockm_session;
typedef struct ockm_render ockm_render;

/* Message of the last failed call on this thread; empty after success. */
OCKM_API const char* ockm_last_error(void);
OCKM_API const char* ockm_status_name(ockm_status s);
OCKM_API const char* ockm_version(void);

/* Worker thread cap; 1 runs everything inline and is bitwise reproducible. */
OCKM_API ockm_status ockm_set_threads(unsigned threads);

/* Strings returned through char** are owned by the caller. */
OCKM_API void ockm_string_free(char* s);

/* Run configuration (JSON). Unknown keys are rejected. */
OCKM_API ockm_status ockm_config_default(ockm_config** out);
OCKM_API ockm_status ockm_config_load(const char* path, ockm_config** out);
OCKM_API ockm_status ockm_config_parse(const char* json_text, ockm_config** out);
/* JSON merge patch applied to the effective config, then revalidated. */
OCKM_API ockm_status ockm_config_patch(ockm_config* cfg, const char* json_patch);
OCKM_API ockm_status ockm_config_dump(const ockm_config* cfg, char** json_out);
/* Numeric value at a dotted key path, e.g. "schedule.eval_every". */
OCKM_API ockm_status ockm_config_get_number(const ockm_config* cfg, const char* key, double* out);
OCKM_API void ockm_config_free(ockm_config* cfg);

/* Oracle datasets. */
OCKM_API ockm_status ockm_dataset_generate(const ockm_config* cfg, ockm_dataset** out);
OCKM_API ockm_status ockm_dataset_read(const char* path, ockm_dataset** out);
OCKM_API ockm_status ockm_dataset_write(const ockm_dataset* ds, const char* path);
/* {"samples", "train", "test", "grid": [V, Z], "antennas", "frequencies_ghz": [...]} */
OCKM_API ockm_status ockm_dataset_summary(const ockm_dataset* ds, char** json_out);
OCKM_API void ockm_dataset_free(ockm_dataset* ds);

/* A session owns a model, its training state and its effective config. */
OCKM_API ockm_status ockm_session_create(const ockm_config* cfg, ockm_session** out);
OCKM_API ockm_status ockm_session_load(const char* checkpoint_path, ockm_session** out);
/* Atomic: the previous file survives a failed write. */
OCKM_API ockm_status ockm_session_save(const ockm_session* s, const char* checkpoint_path);
OCKM_API ockm_status ockm_session_config(const ockm_session* s, ockm_config** out);
/* Replaces the total step target of the session config. */
OCKM_API ockm_status ockm_session_set_steps(ockm_session* s, int steps);
OCKM_API void ockm_session_free(ockm_session* s);

/* Binds training data: the train split, or with holdout_ghz > 0 the train
   split minus that carrier. The dataset must outlive the binding. */
OCKM_API ockm_status ockm_session_bind(ockm_session* s, const ockm_dataset* ds, double holdout_ghz);
/* One optimizer step. record_json (may be NULL) receives the metrics record.
   *done is set once the step target is reached. OCKM_ERR_NUMERIC leaves the
   session at its last good state. */
OCKM_API ockm_status ockm_session_step(ockm_session* s, char** record_json, int* done);
OCKM_API ockm_status ockm_session_step_count(const ockm_session* s, uint64_t* step);

/* Metrics report (JSON). With holdout_ghz > 0 every sample at that carrier is
   evaluated and split is ignored. */
OCKM_API ockm_status ockm_session_evaluate(const ockm_session* s, const ockm_dataset* ds, ockm_split split,
                                           double holdout_ghz, char** report_json);

/* {"gaussians", "active_depth", "active_order", "step", "leaves_per_depth": [...]} */
OCKM_API ockm_status ockm_session_info(const ockm_session* s, char** json_out);
/* Octree text dump, one line per node: depth code ix iy iz occupied gaussian_id. */
OCKM_API ockm_status ockm_session_snapshot(const ockm_session* s, char** text_out);

/* Renders LoS, orders 1..orders (-1 = every active order) and their sum. */
OCKM_API ockm_status ockm_session_render(const ockm_session* s, const double tx[3], const double rx[3],
                                         double freq_ghz, int orders, ockm_render** out);
OCKM_API size_t ockm_render_count(const ockm_render* r);
OCKM_API const char* ockm_render_name(const ockm_render* r, size_t i);
OCKM_API double ockm_render_gain_db(const ockm_render* r, size_t i);
/* V x Z row-major linear power; NULL when i is out of range. */
OCKM_API const double* ockm_render_spectrum(const ockm_render* r, size_t i, size_t* v, size_t* z);
/* 0 when Tx or Rx lies outside the scene bounds. */
OCKM_API int ockm_render_inside(const ockm_render* r);
OCKM_API void ockm_render_free(ockm_render* r);

#ifdef __cplusplus
}
#endif

#endif /* OCKM_OCKM_H */
