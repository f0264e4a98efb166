/**
 * Copyright 2026 The rolefed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ROLEFED_ROLEFED_H_
#define ROLEFED_ROLEFED_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ROLEFED_API __declspec(dllexport)
#else
#define ROLEFED_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rolefed_status {
  ROLEFED_OK = 0,
  ROLEFED_ERR_CONFIG = 1,       /* invalid configuration or argument */
  ROLEFED_ERR_INPUT = 2,        /* malformed input data */
  ROLEFED_ERR_IO = 3,
  ROLEFED_ERR_NUMERIC = 4,      /* non-finite values, no usable client reports */
  ROLEFED_ERR_INTERNAL = 5,
  ROLEFED_ERR_CHECK_FAILED = 6  /* a gradient check exceeded its threshold */
} rolefed_status;

ROLEFED_API const char* rolefed_version(void);
ROLEFED_API const char* rolefed_status_name(rolefed_status status);
/* Message of the last failed call on this thread; empty after a success. */
ROLEFED_API const char* rolefed_last_error(void);

/* ---- experiments -------------------------------------------------------- */

typedef struct rolefed_experiment rolefed_experiment;
typedef void (*rolefed_log_fn)(void* user, const char* message);

/* Parses and validates a JSON experiment config. */
ROLEFED_API rolefed_status rolefed_experiment_open(const char* config_path, rolefed_experiment** out);
ROLEFED_API void rolefed_experiment_close(rolefed_experiment* exp);

ROLEFED_API rolefed_status rolefed_experiment_set_seed(rolefed_experiment* exp, uint64_t seed);
ROLEFED_API rolefed_status rolefed_experiment_set_workers(rolefed_experiment* exp, uint32_t workers);
ROLEFED_API rolefed_status rolefed_experiment_set_rounds(rolefed_experiment* exp, uint32_t rounds);
/* Output directory for the next run. Defaults to the config's "output",
 * placed under `root` when set through set_output_root and relative. */
ROLEFED_API rolefed_status rolefed_experiment_set_output_dir(rolefed_experiment* exp, const char* dir);
ROLEFED_API rolefed_status rolefed_experiment_set_output_root(rolefed_experiment* exp, const char* root);
ROLEFED_API const char* rolefed_experiment_output_dir(const rolefed_experiment* exp);
/* Progress lines and warnings; `fn` may be NULL. */
ROLEFED_API rolefed_status rolefed_experiment_set_log(rolefed_experiment* exp, rolefed_log_fn fn, void* user);

/* Builds the client shards, runs every round and writes rounds.csv,
 * final.ckpt and config.json into the output directory. */
ROLEFED_API rolefed_status rolefed_experiment_run(rolefed_experiment* exp);
ROLEFED_API rolefed_status rolefed_experiment_rounds_completed(const rolefed_experiment* exp, uint32_t* out);

/* ---- preprocessing and synthetic data ------------------------------------ */

typedef struct rolefed_preproc_options {
  size_t char_len;
  size_t word_len;
  size_t dom_len;
  uint32_t word_buckets;
  uint32_t dom_buckets;
} rolefed_preproc_options;

/* "full" or "desk" stream lengths and bucket counts. */
ROLEFED_API rolefed_status rolefed_preproc_defaults(const char* profile, rolefed_preproc_options* out);

/* JSON Lines with label and html fields -> binary stream records. */
ROLEFED_API rolefed_status rolefed_preprocess_jsonl(const char* input_path, const char* output_path,
                                                    const rolefed_preproc_options* options, size_t* records);

/* Labeled Gaussian-cluster embeddings as JSON Lines. tokens == 0 writes
 * "embedding" vectors, otherwise "tokens" matrices. */
ROLEFED_API rolefed_status rolefed_synth_embeddings(const char* output_path, size_t n, size_t dim, size_t tokens,
                                                    double separation, uint64_t seed);

/* Template pages, preprocessed into binary stream records. */
ROLEFED_API rolefed_status rolefed_synth_html(const char* output_path, size_t n, uint64_t seed, double signal,
                                              const rolefed_preproc_options* options, size_t* records);

/* ---- gradient checks ---------------------------------------------------- */

typedef struct rolefed_gradcheck_report {
  char head[16];
  double max_rel_error;     /* worst over all checked seeds */
  size_t coordinates;       /* coordinates compared per seed */
  uint64_t worst_seed;
  char worst_param[128];
} rolefed_gradcheck_report;

/* Finite-difference check of the image, html, url and fusion losses over
 * `seeds` consecutive seeds from `seed`, writing four reports. Returns
 * ROLEFED_ERR_CHECK_FAILED when any error exceeds `threshold`. `corrupt`
 * perturbs one analytic gradient coordinate (negative control). */
ROLEFED_API rolefed_status rolefed_gradcheck(const char* profile, uint64_t seed, uint32_t seeds,
                                             size_t coords_per_tensor, double threshold, int corrupt,
                                             rolefed_gradcheck_report reports[4]);

#ifdef __cplusplus
}
#endif

#endif  /* ROLEFED_ROLEFED_H_ */
