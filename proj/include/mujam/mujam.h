/*
 * Copyright 2026 The MuJAM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface of the MuJAM library. Every call returns a status code; on
 * failure mujam_last_error() describes the problem (per thread). Strings are
 * copied out with the usual (buffer, capacity, needed) convention: needed
 * includes the terminating NUL and the call fails with
 * MUJAM_ERR_INVALID_ARGUMENT when capacity is too small. */

#ifndef MUJAM_MUJAM_H_
#define MUJAM_MUJAM_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define MUJAM_API __declspec(dllexport)
#else
#define MUJAM_API __attribute__((visibility("default")))
#endif

typedef enum mujam_status {
  MUJAM_OK = 0,
  MUJAM_ERR_INTERNAL = 1,
  MUJAM_ERR_CONFIG = 2,
  MUJAM_ERR_MISSING_ARTIFACT = 3,
  MUJAM_ERR_ILLEGAL_ACTION = 4,
  MUJAM_ERR_IO = 5,
  MUJAM_ERR_INVALID_ARGUMENT = 6
} mujam_status;

typedef struct mujam_config mujam_config;
typedef struct mujam_network mujam_network;
typedef struct mujam_sim mujam_sim;
typedef struct mujam_model mujam_model;

MUJAM_API const char* mujam_version(void);
MUJAM_API const char* mujam_last_error(void);
MUJAM_API const char* mujam_status_name(mujam_status s);

/* Configuration: flat "key = value" settings with defaults. */
MUJAM_API mujam_status mujam_config_create(mujam_config** out);
MUJAM_API mujam_status mujam_config_load(const char* path, mujam_config** out);
MUJAM_API mujam_status mujam_config_set(mujam_config* cfg, const char* key, const char* value);
MUJAM_API mujam_status mujam_config_get(const mujam_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);
MUJAM_API mujam_status mujam_config_to_text(const mujam_config* cfg, char* buf, size_t cap, size_t* needed);
MUJAM_API void mujam_config_destroy(mujam_config* cfg);

/* Road networks. mode is "cyclic", "acyclic" or "hybrid". */
MUJAM_API mujam_status mujam_network_generate(uint64_t seed, int min_intersections, int max_intersections,
                                              mujam_network** out);
MUJAM_API mujam_status mujam_network_load(const char* path, mujam_network** out);
MUJAM_API mujam_status mujam_network_save(const mujam_network* net, const char* path);
MUJAM_API mujam_status mujam_network_set_constraints(mujam_network* net, const char* mode, uint64_t seed);
MUJAM_API mujam_status mujam_network_num_intersections(const mujam_network* net, int* out);
MUJAM_API mujam_status mujam_network_num_lanes(const mujam_network* net, int* out);
MUJAM_API void mujam_network_destroy(mujam_network* net);

/* Writes trips for `seconds` of demand to path; rate is the per-second
 * insertion probability of the network. */
MUJAM_API mujam_status mujam_trips_generate(const mujam_network* net, uint64_t seed, double rate, int seconds,
                                            const char* path, int* count);

/* Simulation. trips_path may be NULL for an empty network. */
MUJAM_API mujam_status mujam_sim_create(const mujam_network* net, const char* trips_path, mujam_sim** out);
MUJAM_API mujam_status mujam_sim_legal_phases(const mujam_sim* sim, int intersection, int* buf, size_t cap,
                                              size_t* count);
MUJAM_API mujam_status mujam_sim_current_phase(const mujam_sim* sim, int intersection, int* out);
/* phases holds one entry per intersection. */
MUJAM_API mujam_status mujam_sim_step(mujam_sim* sim, const int* phases, size_t n, double* global_reward,
                                      double* delay);
MUJAM_API mujam_status mujam_sim_clock(const mujam_sim* sim, int* out);
MUJAM_API mujam_status mujam_sim_completed(const mujam_sim* sim, int* count, int* all_done);
MUJAM_API void mujam_sim_destroy(mujam_sim* sim);

/* Learned models. */
MUJAM_API mujam_status mujam_model_create(const mujam_config* cfg, uint64_t seed, mujam_model** out);
MUJAM_API mujam_status mujam_model_load(const char* path, mujam_model** out);
MUJAM_API mujam_status mujam_model_save(const mujam_model* model, const char* path);
/* One joint action for the current state, written to phases[0..n). method
 * names any policy ("fixed-time", "greedy", "mfgrl", "mujam", ...); model
 * may be NULL for the hand-written baselines. */
MUJAM_API mujam_status mujam_act(const mujam_config* cfg, const char* method, const mujam_model* model,
                                 const mujam_sim* sim, int* phases, size_t n);
MUJAM_API void mujam_model_destroy(mujam_model* model);

/* Workflows. Each writes its results under out_dir. */

/* Trains one repetition of a learned method: best.mjck, last.mjck,
 * periodic checkpoints under checkpoints/ and the CSV log.csv. */
MUJAM_API mujam_status mujam_train(const mujam_config* cfg, const char* method, int seed_index, const char* out_dir);

/* Evaluates one method. checkpoint is required for learned methods and may
 * be a single file or a directory holding seed_<i>/best.mjck per
 * repetition, whose seed_<i>/log.csv supplies the training curves.
 * nets_dir and trips_dir are optional: when both are given, every
 * nets_dir/<name>.json is paired with trips_dir/<name>.json and run once;
 * otherwise the generated test set is used. */
MUJAM_API mujam_status mujam_eval(const mujam_config* cfg, const char* method, const char* checkpoint,
                                  const char* nets_dir, const char* trips_dir, const char* out_dir);

/* Merges the reports in run_dirs and re-summarizes against reference. */
MUJAM_API mujam_status mujam_compare(const char* const* run_dirs, size_t n, const char* reference,
                                     const char* out_dir);

/* Grid smoke test with the given checkpoint. */
MUJAM_API mujam_status mujam_smoke(const mujam_config* cfg, const char* checkpoint, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* MUJAM_MUJAM_H_ */
