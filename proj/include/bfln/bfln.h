#ifndef BFLN_BFLN_H
#define BFLN_BFLN_H

#include <stddef.h>
#include <stdint.h>

#if defined(BFLN_BUILDING_LIBRARY)
#define BFLN_API __attribute__((visibility("default")))
#else
#define BFLN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bfln_status {
  BFLN_OK = 0,
  BFLN_INVALID_ARGUMENT = 1,
  BFLN_CONFIG = 2,
  BFLN_VALIDATION = 3,
  BFLN_IO = 4,
  BFLN_LOAD = 5,
  BFLN_TRAINING = 6,
  BFLN_DIVERGENCE = 7,
  BFLN_CHAIN = 8,
  BFLN_INTERNAL = 9
} bfln_status;

typedef struct bfln_experiment bfln_experiment;
typedef struct bfln_simulation bfln_simulation;

BFLN_API const char* bfln_status_string(bfln_status s);
/* Message of the last failed call on this thread, "" if none. */
BFLN_API const char* bfln_last_error(void);

/* Experiments: a base config plus seed and sweep axes. */
BFLN_API bfln_status bfln_experiment_load(const char* path, bfln_experiment** out);
BFLN_API bfln_status bfln_experiment_from_json(const char* json, bfln_experiment** out);
/* key: seeds, mode, k, skew, rounds, out */
BFLN_API bfln_status bfln_experiment_set(bfln_experiment* e, const char* key, const char* value);
BFLN_API bfln_status bfln_experiment_run_count(const bfln_experiment* e, size_t* out);
/* jobs: runs executed concurrently, 0 or 1 for sequential. */
BFLN_API bfln_status bfln_experiment_run(bfln_experiment* e, size_t jobs);
BFLN_API const char* bfln_experiment_output_dir(const bfln_experiment* e);
BFLN_API void bfln_experiment_destroy(bfln_experiment* e);

/* A single simulation driven round by round. */
BFLN_API bfln_status bfln_simulation_create(const char* config_json, bfln_simulation** out);
BFLN_API bfln_status bfln_simulation_step(bfln_simulation* s, double* mean_accuracy);
BFLN_API size_t bfln_simulation_rounds_completed(const bfln_simulation* s);
BFLN_API size_t bfln_simulation_clients(const bfln_simulation* s);
/* Copies min(n, clients) values. */
BFLN_API bfln_status bfln_simulation_balances(const bfln_simulation* s, double* out, size_t n);
BFLN_API bfln_status bfln_simulation_clusters(const bfln_simulation* s, size_t* out, size_t n);
BFLN_API bfln_status bfln_simulation_chain_height(const bfln_simulation* s, size_t* out);
BFLN_API bfln_status bfln_simulation_conservation_error(const bfln_simulation* s, double* out);
BFLN_API bfln_status bfln_simulation_export_chain(const bfln_simulation* s, const char* path);
BFLN_API void bfln_simulation_destroy(bfln_simulation* s);

BFLN_API bfln_status bfln_summarize(const char* run_dir);

/* failing_height is set to the first bad block, or -1 when the file is
   unreadable before any block. */
BFLN_API bfln_status bfln_verify_chain(const char* path, size_t* blocks, int64_t* failing_height);

/* Gradient check of a random network; max relative error over sampled
   coordinates. */
BFLN_API bfln_status bfln_gradcheck(size_t input_dim, const size_t* hidden, size_t hidden_count, size_t classes,
                                    size_t samples, uint64_t seed, double* max_rel_error);

/* Clamped correlation. BFLN_VALIDATION with *out = 0 when degenerate. */
BFLN_API bfln_status bfln_pearson(const double* a, const double* b, size_t n, double* out);

/* kappa, per-cluster group allocation and per-client reward, and the fee. */
BFLN_API bfln_status bfln_incentive(const size_t* sizes, size_t count, double total_reward, double rho,
                                    size_t submitters, double* kappa, double* allocation, double* per_client,
                                    double* fee);

/* SHA-256 of the canonical encoding, 32 bytes. */
BFLN_API bfln_status bfln_model_hash(const double* values, size_t n, uint8_t out[32]);

#ifdef __cplusplus
}
#endif

#endif
