#ifndef TTCOMPLETE_H
#define TTCOMPLETE_H

/* Generated from the ttcomplete-ffi crate (cargo build --features gen-header); do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible interface call.
 */
typedef enum TtcStatus {
  TTC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  TTC_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  TTC_STATUS_UTF8 = 2,
  /**
   * An argument was out of range or inconsistent.
   */
  TTC_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A file did not match its documented format.
   */
  TTC_STATUS_FORMAT = 4,
  /**
   * The operating system reported an I/O failure.
   */
  TTC_STATUS_IO = 5,
  /**
   * A numerical precondition failed (e.g. rank-deficient input).
   */
  TTC_STATUS_NUMERIC = 6,
  /**
   * An iterative procedure exhausted its budget.
   */
  TTC_STATUS_NO_CONVERGENCE = 7,
  /**
   * An internal panic was caught at the boundary.
   */
  TTC_STATUS_PANIC = 8,
} TtcStatus;

/**
 * Opaque sample-set handle (indices plus values).
 */
typedef struct TtcSampleSet TtcSampleSet;

/**
 * Opaque tensor-train handle.
 */
typedef struct TtcTensorTrain TtcTensorTrain;

/**
 * Solver settings. Zero or negative `eps_stop` and zero `iter_max` select
 * the per-algorithm defaults.
 */
typedef struct TtcSolverConfig {
  /**
   * 0 = alternating least squares, 1 = alternating directions fitting,
   * 2 = alternating directions fitting with overrelaxation.
   */
  int32_t algorithm;
  /**
   * Final representation rank to grow towards; must be positive.
   */
  uint64_t rank;
  /**
   * Stagnation tolerance of the stopping rule.
   */
  double eps_stop;
  /**
   * Sweep budget per rank stage.
   */
  uint64_t iter_max;
  /**
   * 0 = half-alternating sweeps, 1 = forward sweeps.
   */
  int32_t sweep_order;
  /**
   * Recorded in reports; the solvers themselves are deterministic.
   */
  uint64_t seed;
} TtcSolverConfig;

/**
 * Summary of a completed solve.
 */
typedef struct TtcSolveSummary {
  uint64_t sweeps;
  uint64_t final_rank;
  /**
   * Final relative residual on the samples.
   */
  double res_p;
  /**
   * Final relative residual on the control set; negative when no
   * control set was supplied.
   */
  double res_c;
  /**
   * 0 = converged, 1 = exact interpolation, 2 = iteration budget
   * exhausted, 3 = overrelaxation search stalled.
   */
  int32_t termination;
  double elapsed_seconds;
} TtcSolveSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread.  The pointer stays
 * valid until the next failing call on the same thread; never free it.
 */
const char *ttc_last_error_message(void);

/**
 * Frees a string returned through a `char **` out-parameter.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ttc_string_free(char *s);

/**
 * Loads a tensor train from its binary container format.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid destination.
 */
enum TtcStatus ttc_tt_load(const char *path, struct TtcTensorTrain **out);

/**
 * Writes a tensor train to its binary container format.
 *
 * # Safety
 * `tt` must be a live handle and `path` a NUL-terminated string.
 */
enum TtcStatus ttc_tt_save(const struct TtcTensorTrain *tt, const char *path);

/**
 * Releases a tensor-train handle.  Accepts null.
 *
 * # Safety
 * `tt` must come from this library and not have been freed already.
 */
void ttc_tt_free(struct TtcTensorTrain *tt);

/**
 * Number of modes, or 0 for a null handle.
 *
 * # Safety
 * `tt` must be a live handle or null.
 */
uint64_t ttc_tt_order(const struct TtcTensorTrain *tt);

/**
 * Size of one mode, or 0 when the handle is null or the mode is out of
 * range.
 *
 * # Safety
 * `tt` must be a live handle or null.
 */
uint64_t ttc_tt_mode_size(const struct TtcTensorTrain *tt, uint64_t mode);

/**
 * Representation rank at one of the `order + 1` boundaries (the outermost
 * two are always 1), or 0 when out of range.
 *
 * # Safety
 * `tt` must be a live handle or null.
 */
uint64_t ttc_tt_rank(const struct TtcTensorTrain *tt, uint64_t boundary);

/**
 * Evaluates one entry; `index` holds `len` zero-based mode indices.
 *
 * # Safety
 * `index` must point at `len` readable elements; `out` must be writable.
 */
enum TtcStatus ttc_tt_evaluate(const struct TtcTensorTrain *tt,
                               const uint64_t *index,
                               uint64_t len,
                               double *out);

/**
 * Loads a sample set from its text format.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid destination.
 */
enum TtcStatus ttc_samples_load(const char *path, struct TtcSampleSet **out);

/**
 * Writes a sample set to its text format.
 *
 * # Safety
 * `set` must be a live handle and `path` a NUL-terminated string.
 */
enum TtcStatus ttc_samples_save(const struct TtcSampleSet *set, const char *path);

/**
 * Releases a sample-set handle.  Accepts null.
 *
 * # Safety
 * `set` must come from this library and not have been freed already.
 */
void ttc_samples_free(struct TtcSampleSet *set);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `set` must be a live handle or null.
 */
uint64_t ttc_samples_len(const struct TtcSampleSet *set);

/**
 * Draws the sample set (`control = 0`) or control set (`control != 0`) of
 * one trial of an experiment.  `spec_text` uses the same flat
 * `key = value` format as the command-line tool; `d`, `n`, `rank` and
 * `csd` are required.
 *
 * # Safety
 * `spec_text` must be a NUL-terminated string and `out` a valid
 * destination.
 */
enum TtcStatus ttc_samples_generate(const char *spec_text,
                                    uint64_t trial,
                                    int32_t control,
                                    struct TtcSampleSet **out);

/**
 * Fits a tensor train to `samples`.  `control` may be null; when present
 * it is evaluated once per sweep for the control residual.  `summary` may
 * be null when only the handle is wanted.
 *
 * # Safety
 * All non-null pointers must be valid; `out_tt` must be a valid
 * destination.
 */
enum TtcStatus ttc_solve(const struct TtcSampleSet *samples,
                         const struct TtcSampleSet *control,
                         const struct TtcSolverConfig *cfg,
                         struct TtcTensorTrain **out_tt,
                         struct TtcSolveSummary *summary);

/**
 * Runs a whole experiment described by the flat `key = value` format and
 * returns the aggregate and per-trial results as a JSON document.
 *
 * # Safety
 * `spec_text` must be a NUL-terminated string and `out_json` a valid
 * destination; release the returned string with [`ttc_string_free`].
 */
enum TtcStatus ttc_run_experiment_json(const char *spec_text, char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TTCOMPLETE_H */
