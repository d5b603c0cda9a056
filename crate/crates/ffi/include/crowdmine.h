#ifndef CROWDMINE_H
#define CROWDMINE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_NULL_POINTER = 1,
  CM_STATUS_INVALID_UTF8 = 2,
  CM_STATUS_INVALID_CONFIG = 3,
  CM_STATUS_IO = 4,
  CM_STATUS_CORRUPT_DUMP = 5,
  CM_STATUS_VALIDATION_FAILURE = 6,
  // The run finished but an online check failed; the run handle is still returned.
  CM_STATUS_INVARIANT_VIOLATION = 7,
  CM_STATUS_PRECONDITION = 8,
  CM_STATUS_OUT_OF_RANGE = 9,
  CM_STATUS_PANIC = 10,
} CmStatus;

// Opaque experiment configuration.
typedef struct CmConfig CmConfig;

// Opaque finished experiment.
typedef struct CmRun CmRun;

typedef struct CmRunSummary {
  uint64_t ticks;
  uint64_t height;
  size_t rows;
  size_t violations;
  uint64_t reorgs;
  int64_t supply;
  uint64_t minted;
  uint64_t burned;
} CmRunSummary;

// One metrics window.
typedef struct CmMetricsRow {
  uint64_t start;
  uint64_t end;
  uint64_t blocks;
  uint64_t user_blocks;
  uint64_t txs;
  double block_rate;
  double problem_rate;
  double tx_rate;
  double utilization;
  uint64_t height;
  int64_t supply;
  uint64_t minted;
  uint64_t burned;
  uint64_t locked;
} CmMetricsRow;

typedef struct CmVerifySummary {
  uint64_t height;
  uint8_t tip[32];
  int64_t supply;
  int64_t conservation_gap;
  // Height of the first invalid block on [`CmStatus::ValidationFailure`], else 0.
  uint64_t failed_height;
} CmVerifySummary;

typedef struct CmDoubleSpendParams {
  // Burn ratio in parts per million.
  uint32_t k_ppm;
  uint64_t v_tx;
  uint64_t r_problem;
  uint64_t r_attacker;
  uint64_t conflict_amount;
  uint64_t seed;
} CmDoubleSpendParams;

typedef struct CmAttackOutcome {
  bool succeeded;
  bool validated;
  int64_t realized_payoff;
  // Analytic bound in millionths of a token; meaningful only when `has_analytic`.
  int64_t analytic_micro;
  bool has_analytic;
  uint64_t ticks;
} CmAttackOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *cm_version(void);

// Copies the last error message of this thread into `buf` (truncated, always terminated)
// and returns the full message length without the terminator. Returns 0 when no error is set.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t cm_last_error(char *buf, size_t len);

// Frees a string returned by this library.
//
// # Safety
// `s` must be null or a string returned by this library that has not been freed.
void cm_string_free(char *s);

// Creates the default configuration.
//
// # Safety
// `out` must be a valid pointer to a writable handle slot.
enum CmStatus cm_config_new(struct CmConfig **out);

// Creates a configuration from a JSON object deep-merged over the defaults, so partial
// objects such as `{"nodes": 3}` are accepted.
//
// # Safety
// `json` must be a NUL-terminated string; `out` a valid pointer to a writable handle slot.
enum CmStatus cm_config_from_json(const char *json, struct CmConfig **out);

// Serializes a configuration as JSON; free the result with [`cm_string_free`].
//
// # Safety
// `cfg` must be a live handle; `out` a valid pointer to a writable string slot.
enum CmStatus cm_config_to_json(const struct CmConfig *cfg, char **out);

// # Safety
// `cfg` must be null or a live handle; it is invalid afterwards.
void cm_config_free(struct CmConfig *cfg);

// Runs an experiment in memory (the config's output directory, if any, is also written).
// On [`CmStatus::Ok`] or [`CmStatus::InvariantViolation`] `*out` holds the run.
//
// # Safety
// `cfg` must be a live handle; `out` a valid pointer to a writable handle slot.
enum CmStatus cm_run_experiment(const struct CmConfig *cfg, struct CmRun **out);

// # Safety
// `run` must be a live handle; `out` a valid pointer.
enum CmStatus cm_run_summary(const struct CmRun *run, struct CmRunSummary *out);

// Copies metrics window `index` into `out`.
//
// # Safety
// `run` must be a live handle; `out` a valid pointer.
enum CmStatus cm_run_row(const struct CmRun *run, size_t index, struct CmMetricsRow *out);

// Writes the run's main chain as a JSON-lines dump readable by [`cm_verify_chain`].
//
// # Safety
// `run` must be a live handle; `path` a NUL-terminated string.
enum CmStatus cm_run_write_chain(const struct CmRun *run, const char *path);

// # Safety
// `run` must be null or a live handle; it is invalid afterwards.
void cm_run_free(struct CmRun *run);

// Replays a chain dump under `cfg`'s protocol parameters.
//
// # Safety
// `cfg` must be a live handle, `path` a NUL-terminated string and `out` a valid pointer.
enum CmStatus cm_verify_chain(const struct CmConfig *cfg,
                              const char *path,
                              struct CmVerifySummary *out);

// Scripted double spend against a block carrying a payment of `v_tx`.
//
// # Safety
// `params` and `out` must be valid pointers.
enum CmStatus cm_attack_double_spend(const struct CmDoubleSpendParams *params,
                                     struct CmAttackOutcome *out);

// Scripted fee grab: the attacker mines its own problem's block holding `count` transfers
// with the given amounts and fees.
//
// # Safety
// `amounts` and `fees` must each point to `count` readable values (or be null when
// `count` is 0); `out` must be a valid pointer.
enum CmStatus cm_attack_fee_grab(uint32_t k_ppm,
                                 uint64_t r_attacker,
                                 const uint64_t *amounts,
                                 const uint64_t *fees,
                                 size_t count,
                                 uint64_t seed,
                                 struct CmAttackOutcome *out);

// Closed-form double-spend payoff `v_tx - k * r_attacker`, in millionths of a token.
//
// # Safety
// `out_micro` must be a valid pointer.
enum CmStatus cm_analytic_double_spend(uint64_t v_tx,
                                       uint64_t volume,
                                       uint64_t r_problem,
                                       uint64_t r_attacker,
                                       uint32_t k_ppm,
                                       int64_t *out_micro);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROWDMINE_H */
