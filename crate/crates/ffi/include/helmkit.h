#ifndef HELMKIT_H
#define HELMKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HelmStatus {
  HELM_STATUS_OK = 0,
  HELM_STATUS_NULL_POINTER = 1,
  HELM_STATUS_INVALID_ARGUMENT = 2,
  HELM_STATUS_IO = 3,
  HELM_STATUS_FORMAT = 4,
  HELM_STATUS_NUMERICAL = 5,
  HELM_STATUS_WEIGHTS = 6,
  HELM_STATUS_PANIC = 7,
} HelmStatus;

typedef enum HelmSolver {
  HELM_SOLVER_JACOBI = 0,
  HELM_SOLVER_GS = 1,
  HELM_SOLVER_SOR = 2,
  HELM_SOLVER_SSOR = 3,
  HELM_SOLVER_GMRES = 4,
  HELM_SOLVER_BICGSTAB = 5,
  HELM_SOLVER_RICHARDSON = 6,
} HelmSolver;

typedef enum HelmPrecond {
  HELM_PRECOND_NONE = 0,
  HELM_PRECOND_JACOBI = 1,
  HELM_PRECOND_GS = 2,
  HELM_PRECOND_SOR = 3,
  HELM_PRECOND_SSOR = 4,
  HELM_PRECOND_ILU0 = 5,
  HELM_PRECOND_TB = 6,
  HELM_PRECOND_DEEPONET = 7,
  HELM_PRECOND_MG = 8,
  HELM_PRECOND_DEEPONET_MG = 9,
} HelmPrecond;

// Assembled Helmholtz problem.
typedef struct HelmProblem HelmProblem;

// DeepONet weights.
typedef struct HelmWeights HelmWeights;

// Solver settings; start from [`helm_solve_options_default`].
typedef struct HelmSolveOptions {
  enum HelmSolver solver;
  enum HelmPrecond precond;
  double tol;
  size_t max_iters;
  size_t restart;
  size_t tb_size;
  size_t nr;
  // Relaxation factor; NaN selects the default.
  double omega;
} HelmSolveOptions;

typedef struct HelmSolveResult {
  size_t iterations;
  size_t matvecs;
  bool converged;
  bool diverged;
  double final_residual;
  double wall_time;
} HelmSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *helm_version(void);

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *helm_last_error(void);

// Builds a problem from a JSON problem description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum HelmStatus helm_problem_from_json(const char *json, struct HelmProblem **out);

// Builds a problem from a JSON problem description file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum HelmStatus helm_problem_load(const char *path, struct HelmProblem **out);

// The 2D square-scatterer problem on an `m × m` grid.
//
// # Safety
// `out` must be a valid pointer.
enum HelmStatus helm_problem_square_2d(size_t m, uint64_t seed, struct HelmProblem **out);

// Number of unknowns, or 0 for NULL.
//
// # Safety
// `problem` must be NULL or a live handle.
size_t helm_problem_size(const struct HelmProblem *problem);

// # Safety
// `problem` must be NULL or a handle not yet freed.
void helm_problem_free(struct HelmProblem *problem);

// Loads DeepONet weights from a tensor container file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum HelmStatus helm_weights_load(const char *path, struct HelmWeights **out);

// # Safety
// `weights` must be NULL or a handle not yet freed.
void helm_weights_free(struct HelmWeights *weights);

// GMRES(50), no preconditioner, tol 1e-12, 2000 iterations, TB size 32,
// one relaxation step per hybrid cycle.
struct HelmSolveOptions helm_solve_options_default(void);

// Runs the iterative solver and writes the solution into `u_re`/`u_im`,
// each of length `len` (the problem size). `weights` may be NULL unless a
// neural-operator preconditioner is selected; `result` may be NULL.
//
// A run that stops without converging still returns `HELM_STATUS_OK`;
// check `result->converged`.
//
// # Safety
// Pointers must be valid for the stated lengths; handles must be live.
enum HelmStatus helm_solve(const struct HelmProblem *problem,
                           const struct HelmWeights *weights,
                           const struct HelmSolveOptions *options,
                           double *u_re,
                           double *u_im,
                           size_t len,
                           struct HelmSolveResult *result);

// Direct band-LU solve into `u_re`/`u_im` of length `len`.
//
// # Safety
// Pointers must be valid for `len` doubles; `problem` must be live.
enum HelmStatus helm_direct_solve(const struct HelmProblem *problem,
                                  double *u_re,
                                  double *u_im,
                                  size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HELMKIT_H */
