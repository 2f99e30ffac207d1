/* C interface for the dem granular-flow simulator. */

#ifndef DEM_H
#define DEM_H

/* Generated by cbindgen from dem-ffi; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DEM_OK 0

#define DEM_ERR_ARGUMENT 1

#define DEM_ERR_CONFIG 2

#define DEM_ERR_EXPLOSION 3

#define DEM_ERR_IO 4

// Opaque simulation handle. Create with [`dem_create_from_file`] or
// [`dem_create_from_text`], free with [`dem_destroy`].
typedef struct DemSimulation DemSimulation;

// Counters for the most recent step, mirroring one row of the run CSV.
// `divergence` is contacts per candidate and is -1 when no candidates
// were checked.
typedef struct DemStepStats {
  uint64_t step;
  uint64_t candidates;
  uint64_t contacts;
  uint64_t max_candidates;
  uint64_t max_contacts;
  uint64_t sqrt_calls;
  uint64_t norm_sqrt_calls;
  uint64_t branch_paths;
  uint64_t wall_checks;
  uint64_t wall_contacts;
  double divergence;
  double max_displacement;
} DemStepStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a simulation from a run configuration file.
//
// `workers` is the number of stepping threads; 0 picks the machine's
// hardware thread count. On success writes the new handle to `out` and
// returns 0.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
int32_t dem_create_from_file(const char *path, size_t workers, struct DemSimulation **out);

// Builds a simulation from configuration text in the same `key = value`
// format the CLI reads. See [`dem_create_from_file`] for `workers`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
int32_t dem_create_from_text(const char *text, size_t workers, struct DemSimulation **out);

// Frees a handle. A null pointer is a no-op.
//
// # Safety
// `sim` must be a pointer returned by a create call, not yet destroyed.
void dem_destroy(struct DemSimulation *sim);

// Advances the simulation by one step. When `max_displacement_out` is
// non-null it receives the largest particle displacement of the step,
// the quantity the settling test watches.
//
// # Safety
// `sim` must be a live handle; no other call may use it concurrently.
int32_t dem_step(struct DemSimulation *sim, double *max_displacement_out);

// Number of particles in the simulation.
//
// # Safety
// `sim` must be a live handle.
size_t dem_particle_count(const struct DemSimulation *sim);

// Number of completed steps.
//
// # Safety
// `sim` must be a live handle.
uint64_t dem_step_index(const struct DemSimulation *sim);

// Copies particle centers into `out` as x,y,z triples in storage order.
// `capacity` is the buffer length in doubles and must be at least three
// per particle.
//
// # Safety
// `sim` must be a live handle and `out` must point to `capacity` doubles.
int32_t dem_copy_positions(const struct DemSimulation *sim, double *out, size_t capacity);

// Copies particle velocities; same contract as [`dem_copy_positions`].
//
// # Safety
// `sim` must be a live handle and `out` must point to `capacity` doubles.
int32_t dem_copy_velocities(const struct DemSimulation *sim, double *out, size_t capacity);

// Copies particle angular velocities; same contract as
// [`dem_copy_positions`].
//
// # Safety
// `sim` must be a live handle and `out` must point to `capacity` doubles.
int32_t dem_copy_angular_velocities(const struct DemSimulation *sim, double *out, size_t capacity);

// Fills `out` with the profiler counters of the most recent step.
// Fails with code 1 before the first step.
//
// # Safety
// `sim` must be a live handle and `out` a valid pointer.
int32_t dem_last_step_stats(const struct DemSimulation *sim, struct DemStepStats *out);

// Bit-level fingerprint of the current particle state, for cheap
// trajectory comparisons across runs.
//
// # Safety
// `sim` must be a live handle.
uint64_t dem_state_digest(const struct DemSimulation *sim);

// Total kinetic energy, translational plus rotational.
//
// # Safety
// `sim` must be a live handle.
double dem_kinetic_energy(const struct DemSimulation *sim);

// Writes total linear momentum into `out[0..3]`.
//
// # Safety
// `sim` must be a live handle and `out` must point to three doubles.
int32_t dem_total_momentum(const struct DemSimulation *sim, double *out);

// Saves the current state as a snapshot file that `dem` and
// [`dem_create_from_file`] configurations can reload.
//
// # Safety
// `sim` must be a live handle and `path` a NUL-terminated string.
int32_t dem_write_snapshot(const struct DemSimulation *sim, const char *path);

// Copies the current thread's most recent error message into `buf` and
// NUL-terminates it, truncating to `capacity` bytes. Returns the full
// message length in bytes, so callers can detect truncation.
//
// # Safety
// `buf` must point to `capacity` writable bytes, or be null to query
// the length alone.
size_t dem_last_error(char *buf, size_t capacity);

// Library version as a static NUL-terminated string.
const char *dem_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEM_H */
