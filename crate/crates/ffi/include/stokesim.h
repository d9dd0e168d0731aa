#ifndef STOKESIM_H
#define STOKESIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum StokesimStatus {
  STOKESIM_STATUS_OK = 0,
  STOKESIM_STATUS_NULL_ARGUMENT = 1,
  STOKESIM_STATUS_INVALID_CONFIG = 2,
  STOKESIM_STATUS_RUNTIME_ERROR = 3,
  STOKESIM_STATUS_BUFFER_TOO_SMALL = 4,
  STOKESIM_STATUS_NOT_RUN_YET = 5,
  STOKESIM_STATUS_PANIC = 6,
} StokesimStatus;

/**
 * A configured (and possibly completed) simulation.
 */
typedef struct StokesimSim StokesimSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a NUL-terminated static string.
 */
const char *stokesim_version(void);

/**
 * Copy the most recent error message for this thread into `buf`
 * (NUL-terminated, truncated to `len`). Returns the untruncated length.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes (or be NULL to query
 * the required size).
 */
uintptr_t stokesim_last_error(char *buf, uintptr_t len);

/**
 * Parse a configuration (same flat key-value text as the CLI) into a new
 * simulation handle; NULL on failure.
 *
 * # Safety
 * `config_text` must be a valid NUL-terminated string.
 */
struct StokesimSim *stokesim_sim_create(const char *config_text);

/**
 * Execute the configured run to completion.
 *
 * # Safety
 * `sim` must be a live handle from `stokesim_sim_create`.
 */
enum StokesimStatus stokesim_sim_run(struct StokesimSim *sim);

/**
 * Number of particles in the configured scenario (valid after a run).
 *
 * # Safety
 * `sim` must be a live handle.
 */
uintptr_t stokesim_sim_particle_count(const struct StokesimSim *sim);

/**
 * Number of executed time steps (valid after a run).
 *
 * # Safety
 * `sim` must be a live handle.
 */
uintptr_t stokesim_sim_step_count(const struct StokesimSim *sim);

/**
 * Final particle centers, `3 n` doubles `(x, y, z)` per particle.
 *
 * # Safety
 * `sim` must be a live handle; `out` must hold at least `len` doubles.
 */
enum StokesimStatus stokesim_sim_positions(const struct StokesimSim *sim,
                                           double *out,
                                           uintptr_t len);

/**
 * Final particle velocities, `6 n` doubles
 * `(ux, uy, uz, wx, wy, wz)` per particle.
 *
 * # Safety
 * `sim` must be a live handle; `out` must hold at least `len` doubles.
 */
enum StokesimStatus stokesim_sim_velocities(const struct StokesimSim *sim,
                                            double *out,
                                            uintptr_t len);

/**
 * Write trajectory.csv, constraints.csv, solver_stats.csv, and manifest.txt
 * into `dir`.
 *
 * # Safety
 * `sim` must be a live handle; `dir` a valid NUL-terminated path.
 */
enum StokesimStatus stokesim_sim_write_outputs(const struct StokesimSim *sim, const char *dir);

/**
 * Release a simulation handle. NULL is a no-op.
 *
 * # Safety
 * `sim` must be NULL or a handle not yet destroyed.
 */
void stokesim_sim_destroy(struct StokesimSim *sim);

/**
 * Solve the dense complementarity problem
 * `0 <= gamma  perp  M gamma + q >= 0` by projected gradient descent with
 * Barzilai-Borwein steps. `m` is row-major `n x n` and must be symmetric
 * positive semidefinite; `gamma_out` receives `n` values.
 *
 * # Safety
 * `m` must hold `n*n` doubles, `q` and `gamma_out` `n` doubles each.
 */
enum StokesimStatus stokesim_solve_lcp(uintptr_t n,
                                       const double *m,
                                       const double *q,
                                       double tolerance,
                                       uintptr_t max_steps,
                                       double *gamma_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOKESIM_H */
