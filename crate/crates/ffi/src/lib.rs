//! C ABI over the smectic solver.
//!
//! A solver is an opaque `SmecticSolver*` owned by the caller and released
//! with `smectic_solver_free`. Every fallible call returns a
//! [`SmecticStatus`]; on failure a description is available from
//! `smectic_last_error` until the next failing call on the same thread.
//! Panics never cross the boundary; they surface as `SMECTIC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use smectic_core::config::{parse, RunConfig};
use smectic_core::fields::GridFunction;
use smectic_core::stepper::{SimState, StepReport, Stepper, XiBranch};
use smectic_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmecticStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Divergence = 4,
    BufferSize = 5,
    NoReport = 6,
    Io = 7,
    Panic = 99,
}

/// Per-step diagnostics of the most recent step.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SmecticStepReport {
    pub step: u64,
    pub t: f64,
    pub tau: f64,
    pub e0: f64,
    pub e1h: f64,
    pub s: f64,
    pub s_tilde: f64,
    pub xi: f64,
    /// 0 tracking, 1 budget, 2 division guard.
    pub branch: i32,
    pub g: f64,
    pub r: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub max_abs_q_f: f64,
    pub max_abs_u: f64,
}

impl From<&StepReport> for SmecticStepReport {
    fn from(r: &StepReport) -> Self {
        SmecticStepReport {
            step: r.step as u64,
            t: r.t,
            tau: r.tau,
            e0: r.e0,
            e1h: r.e1h,
            s: r.s,
            s_tilde: r.s_tilde,
            xi: r.xi,
            branch: match r.branch {
                XiBranch::Tracking => 0,
                XiBranch::Budget => 1,
                XiBranch::Guard => 2,
            },
            g: r.g,
            r: r.r,
            energy_before: r.energy_before,
            energy_after: r.energy_after,
            max_abs_q_f: r.max_abs_q_f,
            max_abs_u: r.max_abs_u,
        }
    }
}

/// Shape and energies of the current state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SmecticStateInfo {
    pub dim: u32,
    pub nodes_per_axis: u64,
    /// Values per field component (`nodes_per_axis^dim`).
    pub len: u64,
    /// Stored Q components: 2 in 2D (Q11, Q12), 5 in 3D (Q11, Q12, Q13, Q22, Q23).
    pub q_components: u32,
    pub step: u64,
    pub t: f64,
    pub s: f64,
    pub e0: f64,
    pub e1h: f64,
    pub modified_energy: f64,
    pub max_abs_q_f: f64,
}

pub struct SmecticSolver {
    stepper: Stepper,
    state: SimState,
    tau: f64,
    last: Option<StepReport>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SmecticStatus, msg: impl Into<String>) -> SmecticStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> SmecticStatus {
    let status = match e {
        Error::Config { .. } | Error::Param { .. } => SmecticStatus::Config,
        Error::Divergence { .. } => SmecticStatus::Divergence,
        Error::Io(_) | Error::Snapshot(_) => SmecticStatus::Io,
        _ => SmecticStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guarded(f: impl FnOnce() -> SmecticStatus) -> SmecticStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SmecticStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn build(cfg: RunConfig) -> Result<SmecticSolver, Error> {
    let state = cfg.initial_state()?;
    let stepper = Stepper::new(*state.grid(), cfg.model, cfg.scheme.method)?;
    Ok(SmecticSolver { stepper, state, tau: cfg.time.tau, last: None })
}

fn create(text: &str, out: *mut *mut SmecticSolver) -> SmecticStatus {
    if out.is_null() {
        return fail(SmecticStatus::NullPointer, "out is null");
    }
    match parse::<RunConfig>(text, &[]).and_then(build) {
        Ok(s) => {
            // SAFETY: `out` is non-null and the caller promises it is writable.
            unsafe { *out = Box::into_raw(Box::new(s)) };
            SmecticStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Standard parameters and initial data on a `nodes × nodes` grid.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_new_default(nodes: u64, out: *mut *mut SmecticSolver) -> SmecticStatus {
    guarded(|| create(&format!("[grid]\nJ = {nodes}\n"), out))
}

/// Builds a solver from the TOML text of a run config (model, grid, scheme,
/// init; `time.tau` becomes the default step).
///
/// # Safety
/// `toml` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_new_from_toml(toml: *const c_char, out: *mut *mut SmecticSolver) -> SmecticStatus {
    guarded(|| {
        if toml.is_null() {
            return fail(SmecticStatus::NullPointer, "toml is null");
        }
        // SAFETY: non-null and nul-terminated per the contract.
        match unsafe { CStr::from_ptr(toml) }.to_str() {
            Ok(text) => create(text, out),
            Err(_) => fail(SmecticStatus::InvalidArgument, "toml is not valid UTF-8"),
        }
    })
}

/// # Safety
/// `solver` must come from a constructor and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_free(solver: *mut SmecticSolver) {
    if !solver.is_null() {
        // SAFETY: created by Box::into_raw in `create`.
        drop(unsafe { Box::from_raw(solver) });
    }
}

/// Advances `n_steps` steps of size `tau`; `tau <= 0` uses the configured step.
/// On divergence the state stays at the last good step.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_step(solver: *mut SmecticSolver, tau: f64, n_steps: u64) -> SmecticStatus {
    guarded(|| {
        // SAFETY: live handle per the contract.
        let Some(s) = (unsafe { solver.as_mut() }) else {
            return fail(SmecticStatus::NullPointer, "solver is null");
        };
        let tau = if tau > 0.0 { tau } else { s.tau };
        if !tau.is_finite() {
            return fail(SmecticStatus::InvalidArgument, "tau must be finite");
        }
        for _ in 0..n_steps {
            match s.stepper.step(&s.state, tau) {
                Ok((next, report)) => {
                    s.state = next;
                    s.last = Some(report);
                }
                Err(e) => return from_error(e),
            }
        }
        SmecticStatus::Ok
    })
}

/// # Safety
/// `solver` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_last_report(solver: *const SmecticSolver, out: *mut SmecticStepReport) -> SmecticStatus {
    guarded(|| {
        // SAFETY: per the contract.
        let (Some(s), false) = (unsafe { solver.as_ref() }, out.is_null()) else {
            return fail(SmecticStatus::NullPointer, "null argument");
        };
        match &s.last {
            Some(r) => {
                // SAFETY: non-null and writable per the contract.
                unsafe { *out = r.into() };
                SmecticStatus::Ok
            }
            None => fail(SmecticStatus::NoReport, "no step taken yet"),
        }
    })
}

/// # Safety
/// `solver` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_info(solver: *const SmecticSolver, out: *mut SmecticStateInfo) -> SmecticStatus {
    guarded(|| {
        // SAFETY: per the contract.
        let (Some(s), false) = (unsafe { solver.as_ref() }, out.is_null()) else {
            return fail(SmecticStatus::NullPointer, "null argument");
        };
        let st = &s.state;
        let g = st.grid();
        let info = SmecticStateInfo {
            dim: g.dim() as u32,
            nodes_per_axis: g.nodes_per_axis() as u64,
            len: g.len() as u64,
            q_components: st.q().components().len() as u32,
            step: st.step() as u64,
            t: st.t(),
            s: st.s(),
            e0: st.e0(),
            e1h: st.e1h(),
            modified_energy: st.modified_energy(),
            max_abs_q_f: st.max_abs_q(),
        };
        // SAFETY: non-null and writable per the contract.
        unsafe { *out = info };
        SmecticStatus::Ok
    })
}

fn copy_out(data: &[f64], buf: *mut f64, len: u64) -> SmecticStatus {
    if buf.is_null() {
        return fail(SmecticStatus::NullPointer, "buffer is null");
    }
    if len != data.len() as u64 {
        return fail(SmecticStatus::BufferSize, format!("buffer holds {len} values, field has {}", data.len()));
    }
    // SAFETY: `buf` has room for `len == data.len()` values per the contract.
    unsafe { ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len()) };
    SmecticStatus::Ok
}

/// Copies one stored Q component (row-major, last axis fastest).
///
/// # Safety
/// `solver` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_copy_q(
    solver: *const SmecticSolver,
    component: u32,
    buf: *mut f64,
    len: u64,
) -> SmecticStatus {
    guarded(|| {
        // SAFETY: per the contract.
        let Some(s) = (unsafe { solver.as_ref() }) else {
            return fail(SmecticStatus::NullPointer, "solver is null");
        };
        match s.state.q().components().get(component as usize) {
            Some(c) => copy_out(&c.data, buf, len),
            None => fail(SmecticStatus::InvalidArgument, format!("no Q component {component}")),
        }
    })
}

/// Copies the density field (row-major, last axis fastest).
///
/// # Safety
/// `solver` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn smectic_solver_copy_u(solver: *const SmecticSolver, buf: *mut f64, len: u64) -> SmecticStatus {
    guarded(|| {
        // SAFETY: per the contract.
        let Some(s) = (unsafe { solver.as_ref() }) else {
            return fail(SmecticStatus::NullPointer, "solver is null");
        };
        copy_out(&s.state.u().data, buf, len)
    })
}

/// Message of the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn smectic_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn smectic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
