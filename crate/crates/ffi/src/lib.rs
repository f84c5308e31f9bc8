//! C ABI for `manifold-descent`.
//!
//! Every entry point returns an [`MdStatus`]; on failure the message is
//! available from [`md_last_error_message`] on the same thread. Results are
//! opaque [`MdResult`] handles released with [`md_result_free`]. Strings
//! returned as `char *` are owned by the caller and released with
//! [`md_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use manifold_descent::bench::{
    run_scenario_full, smallest_eigenvalue, Flag, MethodName, RunOptions, ScenarioRun,
};
use manifold_descent::cli::render_trace_csv;
use manifold_descent::{Error, SymMatrix};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownScenario = 3,
    UnknownMethod = 4,
    UnsupportedMethod = 5,
    /// The matrix passed in is not symmetric.
    Asymmetric = 6,
    /// A run hit a non-finite value or a singular system before starting.
    Numerical = 7,
    BufferTooSmall = 8,
    /// A Rust panic was caught at the boundary.
    Panic = 9,
}

/// Outcome of one scenario run, including its iterate trace.
pub struct MdResult {
    run: ScenarioRun,
    termination: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_for(e: &Error) -> MdStatus {
    match e {
        Error::UnknownScenario(_) => MdStatus::UnknownScenario,
        Error::UnknownMethod(_) => MdStatus::UnknownMethod,
        Error::UnsupportedMethod { .. } => MdStatus::UnsupportedMethod,
        Error::Asymmetric(_) => MdStatus::Asymmetric,
        Error::NonFinite(_) | Error::SingularMatrix | Error::NoInvertibleRegularizer => {
            MdStatus::Numerical
        }
        _ => MdStatus::InvalidArgument,
    }
}

/// Runs `body`, recording any error or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), MdStatus>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MdStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            MdStatus::Panic
        }
    }
}

fn fail(e: Error) -> MdStatus {
    set_error(e.to_string());
    status_for(&e)
}

fn null(what: &str) -> MdStatus {
    set_error(format!("{what} is null"));
    MdStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MdStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        MdStatus::InvalidArgument
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

fn options(iters: i64, seed: u64) -> RunOptions {
    RunOptions {
        iters: usize::try_from(iters).ok(),
        seed,
        ..RunOptions::default()
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn md_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Runs builtin scenario `scenario` with `method`. A negative `iters` uses
/// the scenario's own budget. On success `*out` receives a new handle.
///
/// # Safety
/// `scenario` and `method` must be NUL-terminated strings and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn md_run_scenario(
    scenario: *const c_char,
    method: *const c_char,
    iters: i64,
    seed: u64,
    out: *mut *mut MdResult,
) -> MdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let scenario = str_arg(scenario, "scenario")?;
        let method = str_arg(method, "method")?;
        let run = run_scenario_full(scenario, method, &options(iters, seed)).map_err(fail)?;
        let termination = CString::new(run.result.termination.as_str()).unwrap_or_default();
        *out = Box::into_raw(Box::new(MdResult { run, termination }));
        Ok(())
    })
}

/// Releases a handle from [`md_run_scenario`]. Null is ignored.
///
/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_result_free(result: *mut MdResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Ambient dimension of the final point, or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_result_dim(result: *const MdResult) -> usize {
    result
        .as_ref()
        .map_or(0, |r| r.run.result.final_point.len())
}

/// Final objective value, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_result_value(result: *const MdResult) -> f64 {
    result
        .as_ref()
        .map_or(f64::NAN, |r| r.run.result.final_value)
}

/// Accepted steps, 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_result_steps(result: *const MdResult) -> usize {
    result.as_ref().map_or(0, |r| r.run.result.steps)
}

/// Termination reason (for example `"Diverged"`). Owned by the handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_result_termination(result: *const MdResult) -> *const c_char {
    result
        .as_ref()
        .map_or(ptr::null(), |r| r.termination.as_ptr())
}

/// 1 if the run carries `flag` (`"clamped"`, `"left_domain_would"` or
/// `"converged_to_maximum"`), 0 otherwise.
///
/// # Safety
/// `result` must be null or a live handle; `flag` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn md_result_has_flag(result: *const MdResult, flag: *const c_char) -> i32 {
    let (Some(r), false) = (result.as_ref(), flag.is_null()) else {
        return 0;
    };
    let flag = match CStr::from_ptr(flag).to_bytes() {
        b"clamped" => Flag::Clamped,
        b"left_domain_would" => Flag::LeftDomainWould,
        b"converged_to_maximum" => Flag::ConvergedToMaximum,
        _ => return 0,
    };
    i32::from(r.run.result.has_flag(flag))
}

/// Copies the final point into `buf`, which must hold `md_result_dim` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_result_point(
    result: *const MdResult,
    buf: *mut f64,
    len: usize,
) -> MdStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let p = &r.run.result.final_point;
        if len < p.len() {
            set_error(format!("buffer holds {len} values, need {}", p.len()));
            return Err(MdStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(p.as_ptr(), buf, p.len());
        Ok(())
    })
}

/// Result summary as a JSON object. Free with [`md_string_free`].
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_result_to_json(result: *const MdResult) -> *mut c_char {
    let Some(r) = result.as_ref() else {
        null("result");
        return ptr::null_mut();
    };
    match serde_json::to_string(&r.run.result) {
        Ok(s) => into_c_string(s),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Per-iteration trace as CSV (`iter,f,grad_norm,step_size,x0,...`).
/// Free with [`md_string_free`].
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_result_trace_csv(result: *const MdResult) -> *mut c_char {
    match result.as_ref() {
        Some(r) => into_c_string(render_trace_csv(&r.run.trace)),
        None => {
            null("result");
            ptr::null_mut()
        }
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Estimates the smallest eigenvalue of the symmetric `dim`×`dim` row-major
/// matrix `a` by minimizing `x^T A x / 2` on the unit sphere with `method`.
/// Writes the eigenvalue to `*lambda` and, if `vector` is non-null, a unit
/// eigenvector of `dim` entries.
///
/// # Safety
/// `a` must point to `dim*dim` doubles, `vector` to `dim` writable doubles
/// or be null, and `lambda` must be valid.
#[no_mangle]
pub unsafe extern "C" fn md_smallest_eigenvalue(
    a: *const f64,
    dim: usize,
    method: *const c_char,
    seed: u64,
    lambda: *mut f64,
    vector: *mut f64,
) -> MdStatus {
    guard(|| {
        if a.is_null() {
            return Err(null("a"));
        }
        if lambda.is_null() {
            return Err(null("lambda"));
        }
        if dim == 0 {
            set_error("dim must be positive");
            return Err(MdStatus::InvalidArgument);
        }
        let name: MethodName = str_arg(method, "method")?.parse().map_err(fail)?;
        let entries = std::slice::from_raw_parts(a, dim * dim);
        let rows: Vec<Vec<f64>> = entries.chunks(dim).map(<[f64]>::to_vec).collect();
        let m = SymMatrix::from_rows(&rows).map_err(fail)?;
        let est = smallest_eigenvalue(&m, name, &options(-1, seed)).map_err(fail)?;
        *lambda = est.lambda1;
        if !vector.is_null() {
            ptr::copy_nonoverlapping(est.vector.as_ptr(), vector, dim);
        }
        Ok(())
    })
}
