//! C ABI for the suspension simulator.
//!
//! The surface is deliberately small: create a simulation from the same flat
//! key-value configuration text the CLI consumes, run it, pull final state
//! or write the CSV outputs, and a standalone dense LCP solve for callers
//! that only want the contact solver. All functions return
//! [`StokesimStatus`]; a human-readable message for the most recent failure
//! on the calling thread is available via `stokesim_last_error`.
//!
//! Handles are opaque; every pointer obtained from `stokesim_sim_create`
//! must be released with `stokesim_sim_destroy`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use stokesim::sim::config::SimulationConfig;
use stokesim::sim::driver::run_simulation;
use stokesim::sim::record::SimulationOutcome;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StokesimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidConfig = 2,
    RuntimeError = 3,
    BufferTooSmall = 4,
    NotRunYet = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// A configured (and possibly completed) simulation.
pub struct StokesimSim {
    config: SimulationConfig,
    outcome: Option<SimulationOutcome>,
}

/// Library version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn stokesim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the most recent error message for this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the untruncated length.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes (or be NULL to query
/// the required size).
#[no_mangle]
pub unsafe extern "C" fn stokesim_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parse a configuration (same flat key-value text as the CLI) into a new
/// simulation handle; NULL on failure.
///
/// # Safety
/// `config_text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_create(config_text: *const c_char) -> *mut StokesimSim {
    if config_text.is_null() {
        set_error("config_text is NULL");
        return std::ptr::null_mut();
    }
    let Ok(text) = CStr::from_ptr(config_text).to_str() else {
        set_error("config_text is not valid UTF-8");
        return std::ptr::null_mut();
    };
    match SimulationConfig::parse(text) {
        Ok(config) => Box::into_raw(Box::new(StokesimSim {
            config,
            outcome: None,
        })),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Execute the configured run to completion.
///
/// # Safety
/// `sim` must be a live handle from `stokesim_sim_create`.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_run(sim: *mut StokesimSim) -> StokesimStatus {
    let Some(sim) = sim.as_mut() else {
        set_error("sim is NULL");
        return StokesimStatus::NullArgument;
    };
    let result = catch_unwind(AssertUnwindSafe(|| run_simulation(&sim.config)));
    match result {
        Ok(Ok(outcome)) => {
            sim.outcome = Some(outcome);
            StokesimStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            StokesimStatus::RuntimeError
        }
        Err(_) => {
            set_error("internal panic during run");
            StokesimStatus::Panic
        }
    }
}

/// Number of particles in the configured scenario (valid after a run).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_particle_count(sim: *const StokesimSim) -> usize {
    sim.as_ref()
        .and_then(|s| s.outcome.as_ref())
        .map_or(0, |o| o.final_particles.len())
}

/// Number of executed time steps (valid after a run).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_step_count(sim: *const StokesimSim) -> usize {
    sim.as_ref()
        .and_then(|s| s.outcome.as_ref())
        .map_or(0, |o| o.solver.len())
}

fn copy_out(data: &[f64], out: *mut f64, len: usize) -> StokesimStatus {
    if out.is_null() {
        set_error("output buffer is NULL");
        return StokesimStatus::NullArgument;
    }
    if len < data.len() {
        set_error(format!("buffer holds {len} values, need {}", data.len()));
        return StokesimStatus::BufferTooSmall;
    }
    unsafe { std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len()) };
    StokesimStatus::Ok
}

/// Final particle centers, `3 n` doubles `(x, y, z)` per particle.
///
/// # Safety
/// `sim` must be a live handle; `out` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_positions(
    sim: *const StokesimSim,
    out: *mut f64,
    len: usize,
) -> StokesimStatus {
    let Some(outcome) = sim.as_ref().and_then(|s| s.outcome.as_ref()) else {
        set_error("simulation has not been run");
        return StokesimStatus::NotRunYet;
    };
    let data: Vec<f64> = outcome
        .final_particles
        .particles
        .iter()
        .flat_map(|p| p.center)
        .collect();
    copy_out(&data, out, len)
}

/// Final particle velocities, `6 n` doubles
/// `(ux, uy, uz, wx, wy, wz)` per particle.
///
/// # Safety
/// `sim` must be a live handle; `out` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_velocities(
    sim: *const StokesimSim,
    out: *mut f64,
    len: usize,
) -> StokesimStatus {
    let Some(outcome) = sim.as_ref().and_then(|s| s.outcome.as_ref()) else {
        set_error("simulation has not been run");
        return StokesimStatus::NotRunYet;
    };
    copy_out(outcome.final_velocities.as_slice(), out, len)
}

/// Write trajectory.csv, constraints.csv, solver_stats.csv, and manifest.txt
/// into `dir`.
///
/// # Safety
/// `sim` must be a live handle; `dir` a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_write_outputs(
    sim: *const StokesimSim,
    dir: *const c_char,
) -> StokesimStatus {
    let Some(handle) = sim.as_ref() else {
        set_error("sim is NULL");
        return StokesimStatus::NullArgument;
    };
    let Some(outcome) = handle.outcome.as_ref() else {
        set_error("simulation has not been run");
        return StokesimStatus::NotRunYet;
    };
    if dir.is_null() {
        set_error("dir is NULL");
        return StokesimStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(dir).to_str() else {
        set_error("dir is not valid UTF-8");
        return StokesimStatus::NullArgument;
    };
    match outcome.write_outputs(Path::new(path), &handle.config) {
        Ok(()) => StokesimStatus::Ok,
        Err(e) => {
            set_error(e.to_string());
            StokesimStatus::RuntimeError
        }
    }
}

/// Release a simulation handle. NULL is a no-op.
///
/// # Safety
/// `sim` must be NULL or a handle not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn stokesim_sim_destroy(sim: *mut StokesimSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Solve the dense complementarity problem
/// `0 <= gamma  perp  M gamma + q >= 0` by projected gradient descent with
/// Barzilai-Borwein steps. `m` is row-major `n x n` and must be symmetric
/// positive semidefinite; `gamma_out` receives `n` values.
///
/// # Safety
/// `m` must hold `n*n` doubles, `q` and `gamma_out` `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn stokesim_solve_lcp(
    n: usize,
    m: *const f64,
    q: *const f64,
    tolerance: f64,
    max_steps: usize,
    gamma_out: *mut f64,
) -> StokesimStatus {
    if m.is_null() || q.is_null() || gamma_out.is_null() {
        set_error("null buffer");
        return StokesimStatus::NullArgument;
    }
    let m = std::slice::from_raw_parts(m, n * n);
    let q = std::slice::from_raw_parts(q, n);
    let mut apply = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum())
            .collect()
    };
    let mut problem = stokesim::cqp::CqpProblem {
        apply_m: &mut apply,
        q,
        tolerance,
        max_steps,
        gamma0: None,
    };
    match stokesim::cqp::solve_bbpgd(&mut problem) {
        Ok((gamma, stats)) => {
            std::ptr::copy_nonoverlapping(gamma.as_ptr(), gamma_out, n);
            if stats.converged {
                StokesimStatus::Ok
            } else {
                set_error(format!(
                    "did not converge: residual {:.3e} after {} steps",
                    stats.residual, stats.steps
                ));
                StokesimStatus::RuntimeError
            }
        }
        Err(e) => {
            set_error(e.to_string());
            StokesimStatus::RuntimeError
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(stokesim_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn create_run_query_destroy() {
        let cfg = CString::new(
            "scenario = pair_rollover\nbackend = rpy\ndt = 0.1\nsteps = 5\nseed = 2\n",
        )
        .unwrap();
        unsafe {
            let sim = stokesim_sim_create(cfg.as_ptr());
            assert!(!sim.is_null());
            assert_eq!(stokesim_sim_run(sim), StokesimStatus::Ok);
            assert_eq!(stokesim_sim_particle_count(sim), 2);
            assert_eq!(stokesim_sim_step_count(sim), 5);
            let mut pos = vec![0.0f64; 6];
            assert_eq!(
                stokesim_sim_positions(sim, pos.as_mut_ptr(), pos.len()),
                StokesimStatus::Ok
            );
            assert!(pos.iter().any(|&v| v != 0.0));
            let mut vel = vec![0.0f64; 12];
            assert_eq!(
                stokesim_sim_velocities(sim, vel.as_mut_ptr(), vel.len()),
                StokesimStatus::Ok
            );
            // too-small buffer is rejected
            assert_eq!(
                stokesim_sim_positions(sim, pos.as_mut_ptr(), 2),
                StokesimStatus::BufferTooSmall
            );
            stokesim_sim_destroy(sim);
        }
    }

    #[test]
    fn bad_config_reports_error() {
        let cfg = CString::new("no_such_key = 1\n").unwrap();
        unsafe {
            let sim = stokesim_sim_create(cfg.as_ptr());
            assert!(sim.is_null());
            let mut buf = vec![0i8; 256];
            let n = stokesim_last_error(buf.as_mut_ptr() as *mut c_char, buf.len());
            assert!(n > 0);
        }
    }

    #[test]
    fn not_run_yet_is_reported() {
        let cfg = CString::new("steps = 1\n").unwrap();
        unsafe {
            let sim = stokesim_sim_create(cfg.as_ptr());
            let mut pos = vec![0.0f64; 3];
            assert_eq!(
                stokesim_sim_positions(sim, pos.as_mut_ptr(), 3),
                StokesimStatus::NotRunYet
            );
            stokesim_sim_destroy(sim);
        }
    }

    #[test]
    fn dense_lcp_entry_point() {
        let m = [2.0, 0.0, 0.0, 3.0];
        let q = [-4.0, 6.0];
        let mut gamma = [0.0f64; 2];
        let status = unsafe {
            stokesim_solve_lcp(2, m.as_ptr(), q.as_ptr(), 1e-10, 1000, gamma.as_mut_ptr())
        };
        assert_eq!(status, StokesimStatus::Ok);
        assert!((gamma[0] - 2.0).abs() < 1e-8);
        assert_eq!(gamma[1], 0.0);
    }

    #[test]
    fn outputs_roundtrip_through_ffi() {
        let cfg = CString::new(
            "scenario = sediment_cluster\nn = 6\nbackend = local\nsteps = 3\nseed = 4\n",
        )
        .unwrap();
        let dir = std::env::temp_dir().join("stokesim_ffi_test_out");
        let dir_c = CString::new(dir.to_str().unwrap()).unwrap();
        unsafe {
            let sim = stokesim_sim_create(cfg.as_ptr());
            assert_eq!(stokesim_sim_run(sim), StokesimStatus::Ok);
            assert_eq!(
                stokesim_sim_write_outputs(sim, dir_c.as_ptr()),
                StokesimStatus::Ok
            );
            stokesim_sim_destroy(sim);
        }
        assert!(dir.join("trajectory.csv").exists());
        assert!(dir.join("manifest.txt").exists());
        let _ = std::fs::remove_dir_all(&dir);
    }
}
