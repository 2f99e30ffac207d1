//! C ABI over [`dem_core`]: an opaque simulation handle, integer error
//! codes, and copy-out accessors, so non-Rust callers can drive runs.
//!
//! Every function is safe to call from any thread, but a single handle
//! must not be used from two threads at once. Errors return the same
//! codes the CLI uses as exit codes (0 ok, 1 bad argument, 2 bad
//! configuration, 3 simulation blow-up, 4 file I/O), and the message for
//! the most recent failure on the current thread is available through
//! [`dem_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use dem_core::config::RunConfig;
use dem_core::error::DemError;
use dem_core::integrator::{Simulation, StepOutcome};
use dem_core::parallel::resolve_worker_count;
use dem_core::profiler::divergence_ratio;
use dem_core::runner::build_simulation;
use dem_core::snapshot::write_snapshot;

pub const DEM_OK: i32 = 0;
pub const DEM_ERR_ARGUMENT: i32 = 1;
pub const DEM_ERR_CONFIG: i32 = 2;
pub const DEM_ERR_EXPLOSION: i32 = 3;
pub const DEM_ERR_IO: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

fn code_for(error: &DemError) -> i32 {
    error.exit_code()
}

fn fail(error: DemError) -> i32 {
    let code = code_for(&error);
    set_error(error.to_string());
    code
}

fn fail_argument(message: &str) -> i32 {
    set_error(message);
    DEM_ERR_ARGUMENT
}

/// Opaque simulation handle. Create with [`dem_create_from_file`] or
/// [`dem_create_from_text`], free with [`dem_destroy`].
pub struct DemSimulation {
    sim: Simulation,
    last: Option<StepOutcome>,
}

/// Counters for the most recent step, mirroring one row of the run CSV.
/// `divergence` is contacts per candidate and is -1 when no candidates
/// were checked.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DemStepStats {
    pub step: u64,
    pub candidates: u64,
    pub contacts: u64,
    pub max_candidates: u64,
    pub max_contacts: u64,
    pub sqrt_calls: u64,
    pub norm_sqrt_calls: u64,
    pub branch_paths: u64,
    pub wall_checks: u64,
    pub wall_contacts: u64,
    pub divergence: f64,
    pub max_displacement: f64,
}

unsafe fn str_arg<'a>(pointer: *const c_char, what: &str) -> Result<&'a str, i32> {
    if pointer.is_null() {
        return Err(fail_argument(&format!("{what} pointer is null")));
    }
    match CStr::from_ptr(pointer).to_str() {
        Ok(text) => Ok(text),
        Err(_) => Err(fail_argument(&format!("{what} is not valid UTF-8"))),
    }
}

fn build_handle(config: RunConfig, workers: usize) -> Result<Box<DemSimulation>, i32> {
    let explicit = if workers == 0 { None } else { Some(workers) };
    let worker_count = match resolve_worker_count(explicit) {
        Ok(n) => n,
        Err(error) => return Err(fail(error)),
    };
    match build_simulation(&config, worker_count) {
        Ok(sim) => Ok(Box::new(DemSimulation { sim, last: None })),
        Err(error) => Err(fail(error)),
    }
}

unsafe fn emit(out: *mut *mut DemSimulation, handle: Box<DemSimulation>) -> i32 {
    if out.is_null() {
        return fail_argument("output handle pointer is null");
    }
    *out = Box::into_raw(handle);
    DEM_OK
}

/// Builds a simulation from a run configuration file.
///
/// `workers` is the number of stepping threads; 0 picks the machine's
/// hardware thread count. On success writes the new handle to `out` and
/// returns 0.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dem_create_from_file(
    path: *const c_char,
    workers: usize,
    out: *mut *mut DemSimulation,
) -> i32 {
    let path = match str_arg(path, "config path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    match RunConfig::load(Path::new(path)) {
        Ok(config) => match build_handle(config, workers) {
            Ok(handle) => emit(out, handle),
            Err(code) => code,
        },
        Err(error) => fail(error),
    }
}

/// Builds a simulation from configuration text in the same `key = value`
/// format the CLI reads. See [`dem_create_from_file`] for `workers`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dem_create_from_text(
    text: *const c_char,
    workers: usize,
    out: *mut *mut DemSimulation,
) -> i32 {
    let text = match str_arg(text, "config text") {
        Ok(t) => t,
        Err(code) => return code,
    };
    match RunConfig::parse(text) {
        Ok(config) => match build_handle(config, workers) {
            Ok(handle) => emit(out, handle),
            Err(code) => code,
        },
        Err(error) => fail(error),
    }
}

/// Frees a handle. A null pointer is a no-op.
///
/// # Safety
/// `sim` must be a pointer returned by a create call, not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn dem_destroy(sim: *mut DemSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances the simulation by one step. When `max_displacement_out` is
/// non-null it receives the largest particle displacement of the step,
/// the quantity the settling test watches.
///
/// # Safety
/// `sim` must be a live handle; no other call may use it concurrently.
#[no_mangle]
pub unsafe extern "C" fn dem_step(
    sim: *mut DemSimulation,
    max_displacement_out: *mut f64,
) -> i32 {
    let Some(handle) = sim.as_mut() else {
        return fail_argument("simulation handle is null");
    };
    let stepped = catch_unwind(AssertUnwindSafe(|| handle.sim.step()));
    match stepped {
        Ok(Ok(outcome)) => {
            if !max_displacement_out.is_null() {
                *max_displacement_out = outcome.max_displacement;
            }
            handle.last = Some(outcome);
            DEM_OK
        }
        Ok(Err(error)) => fail(error),
        Err(_) => {
            set_error("internal panic while stepping");
            DEM_ERR_EXPLOSION
        }
    }
}

/// Number of particles in the simulation.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dem_particle_count(sim: *const DemSimulation) -> usize {
    sim.as_ref().map(|h| h.sim.particles().len()).unwrap_or(0)
}

/// Number of completed steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dem_step_index(sim: *const DemSimulation) -> u64 {
    sim.as_ref().map(|h| h.sim.step_index()).unwrap_or(0)
}

unsafe fn copy_triples(
    sim: *const DemSimulation,
    out: *mut f64,
    capacity: usize,
    pick: impl Fn(&Simulation, usize) -> dem_core::math::Vec3,
) -> i32 {
    let Some(handle) = sim.as_ref() else {
        return fail_argument("simulation handle is null");
    };
    if out.is_null() {
        return fail_argument("output buffer is null");
    }
    let count = handle.sim.particles().len();
    if capacity < 3 * count {
        return fail_argument(&format!(
            "buffer holds {capacity} doubles but {} are needed",
            3 * count
        ));
    }
    for i in 0..count {
        let v = pick(&handle.sim, i);
        *out.add(3 * i) = v.x;
        *out.add(3 * i + 1) = v.y;
        *out.add(3 * i + 2) = v.z;
    }
    DEM_OK
}

/// Copies particle centers into `out` as x,y,z triples in storage order.
/// `capacity` is the buffer length in doubles and must be at least three
/// per particle.
///
/// # Safety
/// `sim` must be a live handle and `out` must point to `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dem_copy_positions(
    sim: *const DemSimulation,
    out: *mut f64,
    capacity: usize,
) -> i32 {
    copy_triples(sim, out, capacity, |s, i| s.particles().position[i])
}

/// Copies particle velocities; same contract as [`dem_copy_positions`].
///
/// # Safety
/// `sim` must be a live handle and `out` must point to `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dem_copy_velocities(
    sim: *const DemSimulation,
    out: *mut f64,
    capacity: usize,
) -> i32 {
    copy_triples(sim, out, capacity, |s, i| s.particles().velocity[i])
}

/// Copies particle angular velocities; same contract as
/// [`dem_copy_positions`].
///
/// # Safety
/// `sim` must be a live handle and `out` must point to `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dem_copy_angular_velocities(
    sim: *const DemSimulation,
    out: *mut f64,
    capacity: usize,
) -> i32 {
    copy_triples(sim, out, capacity, |s, i| s.particles().angular_velocity[i])
}

/// Fills `out` with the profiler counters of the most recent step.
/// Fails with code 1 before the first step.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dem_last_step_stats(
    sim: *const DemSimulation,
    out: *mut DemStepStats,
) -> i32 {
    let Some(handle) = sim.as_ref() else {
        return fail_argument("simulation handle is null");
    };
    if out.is_null() {
        return fail_argument("output stats pointer is null");
    }
    let Some(outcome) = handle.last.as_ref() else {
        return fail_argument("no step has been taken yet");
    };
    let stats = &outcome.stats;
    *out = DemStepStats {
        step: outcome.step_index,
        candidates: stats.total_candidates(),
        contacts: stats.total_contacts(),
        max_candidates: u64::from(stats.max_candidates()),
        max_contacts: u64::from(stats.max_contacts()),
        sqrt_calls: stats.sqrt_calls,
        norm_sqrt_calls: stats.norm_sqrt_calls,
        branch_paths: u64::from(stats.branch_path_count),
        wall_checks: stats.wall_checks,
        wall_contacts: stats.wall_contacts,
        divergence: divergence_ratio(stats).unwrap_or(-1.0),
        max_displacement: outcome.max_displacement,
    };
    DEM_OK
}

/// Bit-level fingerprint of the current particle state, for cheap
/// trajectory comparisons across runs.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dem_state_digest(sim: *const DemSimulation) -> u64 {
    sim.as_ref().map(|h| h.sim.state_digest()).unwrap_or(0)
}

/// Total kinetic energy, translational plus rotational.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dem_kinetic_energy(sim: *const DemSimulation) -> f64 {
    sim.as_ref().map(|h| h.sim.kinetic_energy()).unwrap_or(0.0)
}

/// Writes total linear momentum into `out[0..3]`.
///
/// # Safety
/// `sim` must be a live handle and `out` must point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn dem_total_momentum(
    sim: *const DemSimulation,
    out: *mut f64,
) -> i32 {
    let Some(handle) = sim.as_ref() else {
        return fail_argument("simulation handle is null");
    };
    if out.is_null() {
        return fail_argument("output buffer is null");
    }
    let p = handle.sim.total_momentum();
    *out.add(0) = p.x;
    *out.add(1) = p.y;
    *out.add(2) = p.z;
    DEM_OK
}

/// Saves the current state as a snapshot file that `dem` and
/// [`dem_create_from_file`] configurations can reload.
///
/// # Safety
/// `sim` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dem_write_snapshot(
    sim: *const DemSimulation,
    path: *const c_char,
) -> i32 {
    let Some(handle) = sim.as_ref() else {
        return fail_argument("simulation handle is null");
    };
    let path = match str_arg(path, "snapshot path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    match write_snapshot(Path::new(path), handle.sim.particles(), handle.sim.history()) {
        Ok(()) => DEM_OK,
        Err(error) => fail(error),
    }
}

/// Copies the current thread's most recent error message into `buf` and
/// NUL-terminates it, truncating to `capacity` bytes. Returns the full
/// message length in bytes, so callers can detect truncation.
///
/// # Safety
/// `buf` must point to `capacity` writable bytes, or be null to query
/// the length alone.
#[no_mangle]
pub unsafe extern "C" fn dem_last_error(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && capacity > 0 {
            let copied = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), copied);
            *buf.add(copied) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
