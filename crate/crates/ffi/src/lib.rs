//! C ABI over `waldiv`.
//!
//! A system is parsed once from spec text into an opaque [`WaldivSystem`]
//! handle. Reports come back as NUL-terminated JSON strings owned by the
//! caller and released with [`waldiv_string_free`]. Every function returns a
//! [`WaldivStatus`]; on failure [`waldiv_last_error`] describes the cause for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use waldiv::cli::{self, CliError, Report, SpecFile};
use waldiv::restriction::RestrictionSystem;
use waldiv::simulate::{wald_statistic, CompiledSystem, ExperimentConfig, VhatMode};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaldivStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The spec or an argument failed to parse or validate.
    InvalidInput = 3,
    /// A mathematical precondition failed (null violated, covariance not positive definite).
    Precondition = 4,
    /// A numerical failure (singular metric, too many singular draws, failed checks).
    Numerical = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// Opaque handle to a parsed restriction system.
pub struct WaldivSystem {
    spec: SpecFile,
    system: RestrictionSystem,
    compiled: CompiledSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: WaldivStatus, msg: impl Into<String>) -> WaldivStatus {
    set_error(msg);
    status
}

fn from_cli(e: &CliError) -> WaldivStatus {
    let status = match e.exit_code() {
        2 => WaldivStatus::InvalidInput,
        3 => WaldivStatus::Precondition,
        _ => WaldivStatus::Numerical,
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting panics into [`WaldivStatus::Panic`].
fn guard(f: impl FnOnce() -> WaldivStatus) -> WaldivStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(WaldivStatus::Panic, "internal panic"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, WaldivStatus> {
    if s.is_null() {
        return Err(fail(WaldivStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(WaldivStatus::InvalidUtf8, e.to_string()))
}

unsafe fn write_json(report: &Report, out: *mut *mut c_char) -> WaldivStatus {
    let text = match serde_json::to_string(report) {
        Ok(t) => t,
        Err(e) => return fail(WaldivStatus::Numerical, e.to_string()),
    };
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            WaldivStatus::Ok
        }
        Err(e) => fail(WaldivStatus::Numerical, e.to_string()),
    }
}

/// Message for the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn waldiv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn waldiv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses spec text into a new handle stored in `*out`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn waldiv_system_new(spec: *const c_char, out: *mut *mut WaldivSystem) -> WaldivStatus {
    guard(|| {
        if out.is_null() {
            return fail(WaldivStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(spec) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed = SpecFile::parse(text).and_then(|spec| {
            spec.covariance()?;
            let system = spec.system()?;
            system.recenter()?;
            Ok((spec, system))
        });
        match parsed {
            Ok((spec, system)) => {
                let compiled = CompiledSystem::new(&system);
                *out = Box::into_raw(Box::new(WaldivSystem { spec, system, compiled }));
                WaldivStatus::Ok
            }
            Err(e) => from_cli(&e),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sys` must come from [`waldiv_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn waldiv_system_free(sys: *mut WaldivSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Parameter dimension `p` and number of restrictions `q`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn waldiv_system_dims(sys: *const WaldivSystem, p: *mut usize, q: *mut usize) -> WaldivStatus {
    guard(|| {
        let Some(s) = sys.as_ref() else {
            return fail(WaldivStatus::NullPointer, "null system");
        };
        if p.is_null() || q.is_null() {
            return fail(WaldivStatus::NullPointer, "null output pointer");
        }
        *p = s.system.p();
        *q = s.system.q();
        WaldivStatus::Ok
    })
}

/// `W_T` at `theta_hat` (length `p`) and row-major `vhat` (`p×p`).
///
/// # Safety
/// `theta_hat` must point to `p` doubles, `vhat` to `p*p` doubles, `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn waldiv_wald_statistic(
    sys: *const WaldivSystem,
    theta_hat: *const f64,
    vhat: *const f64,
    t: u64,
    out: *mut f64,
) -> WaldivStatus {
    guard(|| {
        let Some(s) = sys.as_ref() else {
            return fail(WaldivStatus::NullPointer, "null system");
        };
        if theta_hat.is_null() || vhat.is_null() || out.is_null() {
            return fail(WaldivStatus::NullPointer, "null array argument");
        }
        if t == 0 {
            return fail(WaldivStatus::InvalidInput, "T must be at least 1");
        }
        let p = s.system.p();
        let theta = std::slice::from_raw_parts(theta_hat, p);
        let v: Vec<Vec<f64>> = std::slice::from_raw_parts(vhat, p * p).chunks(p).map(<[f64]>::to_vec).collect();
        match wald_statistic(theta, &v, &s.compiled, t) {
            Ok(w) => {
                *out = w;
                WaldivStatus::Ok
            }
            Err(e) => from_cli(&CliError::Sim(e)),
        }
    })
}

unsafe fn report_call(
    sys: *const WaldivSystem,
    out: *mut *mut c_char,
    run: impl FnOnce(&WaldivSystem) -> Result<Report, CliError>,
) -> WaldivStatus {
    guard(|| {
        let Some(s) = sys.as_ref() else {
            return fail(WaldivStatus::NullPointer, "null system");
        };
        if out.is_null() {
            return fail(WaldivStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        match run(s) {
            Ok(r) => write_json(&r, out),
            Err(e) => from_cli(&e),
        }
    })
}

/// Echelon form and FRALD-T verdict as a JSON report.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer; free the result with [`waldiv_string_free`].
#[no_mangle]
pub unsafe extern "C" fn waldiv_analyze_json(sys: *const WaldivSystem, seed: u64, out: *mut *mut c_char) -> WaldivStatus {
    report_call(sys, out, |s| cli::cmd_analyze(s.spec.clone(), seed, &mut std::io::sink()))
}

/// Degrees and divergence exponents as a JSON report; `samples > 0` adds generic degrees.
///
/// # Safety
/// As for [`waldiv_analyze_json`].
#[no_mangle]
pub unsafe extern "C" fn waldiv_rates_json(
    sys: *const WaldivSystem,
    seed: u64,
    samples: usize,
    out: *mut *mut c_char,
) -> WaldivStatus {
    report_call(sys, out, |s| cli::cmd_rates(s.spec.clone(), seed, samples, &mut std::io::sink()))
}

/// Monte Carlo divergence experiment as a JSON report.
///
/// `vhat` is `"exact"` or `"perturbed:<c>"`; null means exact. `threads == 0`
/// uses the global pool. Results do not depend on the thread count.
///
/// # Safety
/// `grid` must point to `grid_len` integers; other pointers as for [`waldiv_analyze_json`].
#[no_mangle]
pub unsafe extern "C" fn waldiv_simulate_json(
    sys: *const WaldivSystem,
    seed: u64,
    grid: *const u64,
    grid_len: usize,
    reps: usize,
    vhat: *const c_char,
    threads: usize,
    out: *mut *mut c_char,
) -> WaldivStatus {
    if grid.is_null() {
        return fail(WaldivStatus::NullPointer, "null grid");
    }
    let t_grid = std::slice::from_raw_parts(grid, grid_len).to_vec();
    let mode = if vhat.is_null() {
        VhatMode::Exact
    } else {
        match read_str(vhat).map(str::parse::<VhatMode>) {
            Ok(Ok(m)) => m,
            Ok(Err(e)) => return fail(WaldivStatus::InvalidInput, e),
            Err(s) => return s,
        }
    };
    report_call(sys, out, |s| {
        let cfg = ExperimentConfig {
            threads: (threads > 0).then_some(threads),
            ..ExperimentConfig::new(t_grid, reps, seed)
        };
        cli::cmd_simulate(s.spec.clone(), seed, cfg, mode, &mut std::io::sink())
    })
}

/// Invariant checks as a JSON report. Returns [`WaldivStatus::Numerical`]
/// (with the report still written) when any check fails.
///
/// # Safety
/// As for [`waldiv_analyze_json`].
#[no_mangle]
pub unsafe extern "C" fn waldiv_verify_json(sys: *const WaldivSystem, seed: u64, out: *mut *mut c_char) -> WaldivStatus {
    let mut failed = 0;
    let status = report_call(sys, out, |s| {
        let r = cli::cmd_verify(s.spec.clone(), seed, &mut std::io::sink())?;
        failed = r.checks.iter().flatten().filter(|c| !c.passed()).count();
        Ok(r)
    });
    if status == WaldivStatus::Ok && failed > 0 {
        return fail(WaldivStatus::Numerical, CliError::ChecksFailed(failed).to_string());
    }
    status
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from one of the `*_json` functions and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn waldiv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
