#ifndef SYLNET_H
#define SYLNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SylnetAlgorithm {
  SYLNET_ALGORITHM_LEAST_SQUARES = 0,
  SYLNET_ALGORITHM_EXACT = 1,
  SYLNET_ALGORITHM_REGULARIZED = 2,
} SylnetAlgorithm;

typedef enum SylnetIntegrator {
  /**
   * Euler for the smooth flows, prox-Euler for the regularized one.
   */
  SYLNET_INTEGRATOR_DEFAULT = 0,
  SYLNET_INTEGRATOR_EULER = 1,
  SYLNET_INTEGRATOR_RK4 = 2,
  SYLNET_INTEGRATOR_PROX_EULER = 3,
  SYLNET_INTEGRATOR_EXPONENTIAL = 4,
} SylnetIntegrator;

typedef enum SylnetAlphaMode {
  SYLNET_ALPHA_MODE_AS_WRITTEN = 0,
  SYLNET_ALPHA_MODE_CENTRALIZED = 1,
} SylnetAlphaMode;

/**
 * Result code of every call.
 */
typedef enum SylnetStatus {
  SYLNET_STATUS_OK = 0,
  SYLNET_STATUS_NULL_POINTER = 1,
  SYLNET_STATUS_INVALID_ARGUMENT = 2,
  SYLNET_STATUS_DIMENSION = 3,
  SYLNET_STATUS_DISCONNECTED = 4,
  SYLNET_STATUS_PARSE = 5,
  SYLNET_STATUS_IO = 6,
  SYLNET_STATUS_GENERATION = 7,
  SYLNET_STATUS_ORACLE_NONCONVERGENCE = 8,
  SYLNET_STATUS_NOT_EQUILIBRIUM = 9,
  SYLNET_STATUS_DIVERGED = 10,
  SYLNET_STATUS_TOO_FEW_SAMPLES = 11,
  SYLNET_STATUS_BUFFER_TOO_SMALL = 12,
  SYLNET_STATUS_PANIC = 13,
} SylnetStatus;

typedef enum SylnetInstanceKind {
  SYLNET_INSTANCE_KIND_EXACT = 0,
  SYLNET_INSTANCE_KIND_INCONSISTENT = 1,
} SylnetInstanceKind;

typedef enum SylnetTopology {
  SYLNET_TOPOLOGY_COMPLETE = 0,
  SYLNET_TOPOLOGY_RING = 1,
  SYLNET_TOPOLOGY_PATH = 2,
  SYLNET_TOPOLOGY_ERDOS_RENYI = 3,
} SylnetTopology;

typedef enum SylnetRunStatus {
  SYLNET_RUN_STATUS_CONVERGED = 0,
  SYLNET_RUN_STATUS_HORIZON_REACHED = 1,
  SYLNET_RUN_STATUS_DIVERGED = 2,
} SylnetRunStatus;

/**
 * Trace columns; absent values read back as NaN.
 */
typedef enum SylnetTraceColumn {
  SYLNET_TRACE_COLUMN_TIME = 0,
  SYLNET_TRACE_COLUMN_ESTIMATION_ERROR = 1,
  SYLNET_TRACE_COLUMN_CONSENSUS = 2,
  SYLNET_TRACE_COLUMN_KKT = 3,
  SYLNET_TRACE_COLUMN_LYAPUNOV = 4,
  SYLNET_TRACE_COLUMN_FIELD_NORM = 5,
} SylnetTraceColumn;

/**
 * Opaque problem handle.
 */
typedef struct SylnetProblem SylnetProblem;

/**
 * Opaque run outcome handle.
 */
typedef struct SylnetRun SylnetRun;

/**
 * Simulation settings. Start from [`sylnet_config_default`].
 */
typedef struct SylnetConfig {
  enum SylnetAlgorithm algorithm;
  enum SylnetIntegrator integrator;
  enum SylnetAlphaMode alpha_mode;
  /**
   * Step size; zero selects the default rule.
   */
  double step;
  double max_time;
  /**
   * Field-norm stop threshold; `INFINITY` never stops early.
   */
  double stop_tol;
  size_t record_every;
  uint64_t seed;
  /**
   * Scale of the random initial state; zero starts from all zeros.
   */
  double init_scale;
  /**
   * Worker threads; 0 or 1 runs sequentially.
   */
  size_t threads;
} SylnetConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *sylnet_last_error(void);

void sylnet_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sylnet_version(void);

struct SylnetConfig sylnet_config_default(enum SylnetAlgorithm algorithm);

/**
 * Builds a problem from row-major `A` (m×m), `B` (r×r), `C` (m×r), the
 * per-agent row and column block sizes (`n` each) and `n_edges` weighted
 * undirected edges. A negative or NaN `l1_alpha` means no penalty.
 *
 * # Safety
 * Every pointer must be valid for the stated number of elements.
 */
enum SylnetStatus sylnet_problem_new(const double *a,
                                     const double *b,
                                     const double *c,
                                     const size_t *row_sizes,
                                     const size_t *col_sizes,
                                     size_t n,
                                     const size_t *edge_from,
                                     const size_t *edge_to,
                                     const double *edge_weight,
                                     size_t n_edges,
                                     double l1_alpha,
                                     struct SylnetProblem **out);

/**
 * Seeded random instance on equal blocks. `edge_prob` is used only for
 * Erdős–Rényi graphs; a negative or NaN `l1_alpha` means no penalty.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SylnetStatus sylnet_problem_generate(enum SylnetInstanceKind kind,
                                          size_t m,
                                          size_t r,
                                          size_t n,
                                          enum SylnetTopology topology,
                                          double edge_prob,
                                          uint64_t seed,
                                          double l1_alpha,
                                          struct SylnetProblem **out);

/**
 * Reads a bundle directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated UTF-8 path and `out` valid for writes.
 */
enum SylnetStatus sylnet_problem_load(const char *dir, struct SylnetProblem **out);

/**
 * # Safety
 * `problem` must come from this library (or be NULL) and is not used after.
 */
void sylnet_problem_free(struct SylnetProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle; the outputs valid for writes.
 */
enum SylnetStatus sylnet_problem_dims(const struct SylnetProblem *problem,
                                      size_t *m,
                                      size_t *r,
                                      size_t *n);

/**
 * `‖AX + XB − C‖_F` for a row-major `m × r` buffer `x`.
 *
 * # Safety
 * `x` must hold `m·r` values and `out` be valid for writes.
 */
enum SylnetStatus sylnet_problem_residual(const struct SylnetProblem *problem,
                                          const double *x,
                                          double *out);

/**
 * Minimum-norm least-squares solution into `x_out` (`len ≥ m·r`).
 *
 * # Safety
 * `x_out` must hold `len` values; the other outputs may be NULL.
 */
enum SylnetStatus sylnet_oracle_least_squares(const struct SylnetProblem *problem,
                                              double *x_out,
                                              size_t len,
                                              double *residual,
                                              bool *unique);

/**
 * Simulates one flow. `x_ref` (row-major `m × r`) is optional and enables
 * the estimation-error column. A run that diverges still succeeds; query
 * [`sylnet_run_status`].
 *
 * # Safety
 * Pointers must be valid; `x_ref` may be NULL.
 */
enum SylnetStatus sylnet_run(const struct SylnetProblem *problem,
                             const struct SylnetConfig *config,
                             const double *x_ref,
                             struct SylnetRun **out);

/**
 * # Safety
 * `run` must come from this library (or be NULL) and is not used after.
 */
void sylnet_run_free(struct SylnetRun *run);

/**
 * # Safety
 * `run` must be a live handle; the outputs may be NULL.
 */
enum SylnetStatus sylnet_run_summary(const struct SylnetRun *run,
                                     enum SylnetRunStatus *status,
                                     size_t *steps,
                                     double *final_time,
                                     double *step_size);

/**
 * Agent average of the final `X_i` into `x_out` (`len ≥ m·r`).
 *
 * # Safety
 * `x_out` must hold `len` values.
 */
enum SylnetStatus sylnet_run_mean_x(const struct SylnetRun *run, double *x_out, size_t len);

/**
 * Number of recorded trace rows.
 *
 * # Safety
 * `run` must be a live handle and `out` valid for writes.
 */
enum SylnetStatus sylnet_run_trace_len(const struct SylnetRun *run, size_t *out);

/**
 * One trace column into `values` (`len ≥` trace length).
 *
 * # Safety
 * `values` must hold `len` values.
 */
enum SylnetStatus sylnet_run_trace_column(const struct SylnetRun *run,
                                          enum SylnetTraceColumn column,
                                          double *values,
                                          size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYLNET_H */
