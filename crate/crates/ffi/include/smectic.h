#ifndef SMECTIC_H
#define SMECTIC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmecticStatus {
  SMECTIC_STATUS_OK = 0,
  SMECTIC_STATUS_NULL_POINTER = 1,
  SMECTIC_STATUS_INVALID_ARGUMENT = 2,
  SMECTIC_STATUS_CONFIG = 3,
  SMECTIC_STATUS_DIVERGENCE = 4,
  SMECTIC_STATUS_BUFFER_SIZE = 5,
  SMECTIC_STATUS_NO_REPORT = 6,
  SMECTIC_STATUS_IO = 7,
  SMECTIC_STATUS_PANIC = 99,
} SmecticStatus;

typedef struct SmecticSolver SmecticSolver;

/**
 * Per-step diagnostics of the most recent step.
 */
typedef struct SmecticStepReport {
  uint64_t step;
  double t;
  double tau;
  double e0;
  double e1h;
  double s;
  double s_tilde;
  double xi;
  /**
   * 0 tracking, 1 budget, 2 division guard.
   */
  int32_t branch;
  double g;
  double r;
  double energy_before;
  double energy_after;
  double max_abs_q_f;
  double max_abs_u;
} SmecticStepReport;

/**
 * Shape and energies of the current state.
 */
typedef struct SmecticStateInfo {
  uint32_t dim;
  uint64_t nodes_per_axis;
  /**
   * Values per field component (`nodes_per_axis^dim`).
   */
  uint64_t len;
  /**
   * Stored Q components: 2 in 2D (Q11, Q12), 5 in 3D (Q11, Q12, Q13, Q22, Q23).
   */
  uint32_t q_components;
  uint64_t step;
  double t;
  double s;
  double e0;
  double e1h;
  double modified_energy;
  double max_abs_q_f;
} SmecticStateInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Standard parameters and initial data on a `nodes × nodes` grid.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum SmecticStatus smectic_solver_new_default(uint64_t nodes, struct SmecticSolver **out);

/**
 * Builds a solver from the TOML text of a run config (model, grid, scheme,
 * init; `time.tau` becomes the default step).
 *
 * # Safety
 * `toml` must be a nul-terminated string; `out` must be writable.
 */
enum SmecticStatus smectic_solver_new_from_toml(const char *toml, struct SmecticSolver **out);

/**
 * # Safety
 * `solver` must come from a constructor and not be used afterwards. Null is ignored.
 */
void smectic_solver_free(struct SmecticSolver *solver);

/**
 * Advances `n_steps` steps of size `tau`; `tau <= 0` uses the configured step.
 * On divergence the state stays at the last good step.
 *
 * # Safety
 * `solver` must be a live handle.
 */
enum SmecticStatus smectic_solver_step(struct SmecticSolver *solver, double tau, uint64_t n_steps);

/**
 * # Safety
 * `solver` must be a live handle and `out` writable.
 */
enum SmecticStatus smectic_solver_last_report(const struct SmecticSolver *solver,
                                              struct SmecticStepReport *out);

/**
 * # Safety
 * `solver` must be a live handle and `out` writable.
 */
enum SmecticStatus smectic_solver_info(const struct SmecticSolver *solver,
                                       struct SmecticStateInfo *out);

/**
 * Copies one stored Q component (row-major, last axis fastest).
 *
 * # Safety
 * `solver` must be a live handle; `buf` must hold `len` doubles.
 */
enum SmecticStatus smectic_solver_copy_q(const struct SmecticSolver *solver,
                                         uint32_t component,
                                         double *buf,
                                         uint64_t len);

/**
 * Copies the density field (row-major, last axis fastest).
 *
 * # Safety
 * `solver` must be a live handle; `buf` must hold `len` doubles.
 */
enum SmecticStatus smectic_solver_copy_u(const struct SmecticSolver *solver,
                                         double *buf,
                                         uint64_t len);

/**
 * Message of the last failure on this thread, or null. Valid until the next failing call.
 */
const char *smectic_last_error(void);

/**
 * Library version, static storage.
 */
const char *smectic_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMECTIC_H */
