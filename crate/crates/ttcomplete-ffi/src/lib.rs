//! C interface to the tensor completion library.
//!
//! Conventions:
//!
//! * Every fallible call returns a [`TtcStatus`]; `TTC_STATUS_OK` is zero.
//!   On failure [`ttc_last_error_message`] returns a thread-local
//!   NUL-terminated description, valid on that thread until the next
//!   failing call.
//! * [`TtcTensorTrain`] and [`TtcSampleSet`] are opaque handles.  Release
//!   each one exactly once with the matching `_free` function; the `_free`
//!   functions accept null.
//! * Strings handed out through `char **` out-parameters are owned by the
//!   caller and must be released with [`ttc_string_free`].
//! * Panics never cross the boundary; they are caught and reported as
//!   `TTC_STATUS_PANIC`.
//!
//! The matching header lives in `include/ttcomplete.h` and is regenerated
//! by building with `--features gen-header`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ttcomplete::error::Error;
use ttcomplete::experiment::{self, ExperimentSpec};
use ttcomplete::io;
use ttcomplete::sampling::SampleSet;
use ttcomplete::solver::{self, Algorithm, SolverConfig, SweepOrder, Termination};
use ttcomplete::tt::TTRep;

/// Result code of every fallible interface call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TtcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// An argument was out of range or inconsistent.
    InvalidArgument = 3,
    /// A file did not match its documented format.
    Format = 4,
    /// The operating system reported an I/O failure.
    Io = 5,
    /// A numerical precondition failed (e.g. rank-deficient input).
    Numeric = 6,
    /// An iterative procedure exhausted its budget.
    NoConvergence = 7,
    /// An internal panic was caught at the boundary.
    Panic = 8,
}

/// Opaque tensor-train handle.
pub struct TtcTensorTrain {
    inner: TTRep,
}

/// Opaque sample-set handle (indices plus values).
pub struct TtcSampleSet {
    inner: SampleSet,
}

/// Solver settings. Zero or negative `eps_stop` and zero `iter_max` select
/// the per-algorithm defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct TtcSolverConfig {
    /// 0 = alternating least squares, 1 = alternating directions fitting,
    /// 2 = alternating directions fitting with overrelaxation.
    pub algorithm: i32,
    /// Final representation rank to grow towards; must be positive.
    pub rank: u64,
    /// Stagnation tolerance of the stopping rule.
    pub eps_stop: f64,
    /// Sweep budget per rank stage.
    pub iter_max: u64,
    /// 0 = half-alternating sweeps, 1 = forward sweeps.
    pub sweep_order: i32,
    /// Recorded in reports; the solvers themselves are deterministic.
    pub seed: u64,
}

/// Summary of a completed solve.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct TtcSolveSummary {
    pub sweeps: u64,
    pub final_rank: u64,
    /// Final relative residual on the samples.
    pub res_p: f64,
    /// Final relative residual on the control set; negative when no
    /// control set was supplied.
    pub res_c: f64,
    /// 0 = converged, 1 = exact interpolation, 2 = iteration budget
    /// exhausted, 3 = overrelaxation search stalled.
    pub termination: i32,
    pub elapsed_seconds: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes removed");
    });
}

fn fail(status: TtcStatus, msg: impl Into<String>) -> TtcStatus {
    set_error(msg.into());
    status
}

fn status_for(err: &Error) -> TtcStatus {
    match err {
        Error::Io(_) => TtcStatus::Io,
        Error::Format(_) => TtcStatus::Format,
        Error::NoConvergence(_) => TtcStatus::NoConvergence,
        Error::RankDeficient(_) => TtcStatus::Numeric,
        Error::Shape(_)
        | Error::IndexOutOfBounds(_)
        | Error::TooLarge { .. }
        | Error::Config(_) => TtcStatus::InvalidArgument,
    }
}

fn from_err(err: &Error) -> TtcStatus {
    fail(status_for(err), err.to_string())
}

fn guarded(f: impl FnOnce() -> TtcStatus) -> TtcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(TtcStatus::Panic, "internal panic caught at the C boundary"),
    }
}

unsafe fn read_cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, TtcStatus> {
    if ptr.is_null() {
        return Err(fail(TtcStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(TtcStatus::Utf8, format!("{what} is not valid UTF-8")))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, TtcStatus> {
    ptr.as_ref()
        .ok_or_else(|| fail(TtcStatus::NullArgument, format!("{what} is null")))
}

unsafe fn deref_out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, TtcStatus> {
    ptr.as_mut()
        .ok_or_else(|| fail(TtcStatus::NullArgument, format!("{what} is null")))
}

/// Message of the most recent failure on this thread.  The pointer stays
/// valid until the next failing call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn ttc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ttc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// --- tensor-train handles -------------------------------------------------

/// Loads a tensor train from its binary container format.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn ttc_tt_load(
    path: *const c_char,
    out: *mut *mut TtcTensorTrain,
) -> TtcStatus {
    guarded(|| {
        let path = match read_cstr(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let out = match deref_out(out, "out") {
            Ok(o) => o,
            Err(s) => return s,
        };
        match io::load_tt(path) {
            Ok(tt) => {
                *out = Box::into_raw(Box::new(TtcTensorTrain { inner: tt }));
                TtcStatus::Ok
            }
            Err(e) => from_err(&e),
        }
    })
}

/// Writes a tensor train to its binary container format.
///
/// # Safety
/// `tt` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ttc_tt_save(tt: *const TtcTensorTrain, path: *const c_char) -> TtcStatus {
    guarded(|| {
        let tt = match deref(tt, "tt") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let path = match read_cstr(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match io::save_tt(path, &tt.inner) {
            Ok(()) => TtcStatus::Ok,
            Err(e) => from_err(&e),
        }
    })
}

/// Releases a tensor-train handle.  Accepts null.
///
/// # Safety
/// `tt` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ttc_tt_free(tt: *mut TtcTensorTrain) {
    if !tt.is_null() {
        drop(Box::from_raw(tt));
    }
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `tt` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ttc_tt_order(tt: *const TtcTensorTrain) -> u64 {
    tt.as_ref().map_or(0, |t| t.inner.order() as u64)
}

/// Size of one mode, or 0 when the handle is null or the mode is out of
/// range.
///
/// # Safety
/// `tt` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ttc_tt_mode_size(tt: *const TtcTensorTrain, mode: u64) -> u64 {
    tt.as_ref().map_or(0, |t| {
        t.inner
            .mode_sizes()
            .get(mode as usize)
            .map_or(0, |&n| n as u64)
    })
}

/// Representation rank at one of the `order + 1` boundaries (the outermost
/// two are always 1), or 0 when out of range.
///
/// # Safety
/// `tt` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ttc_tt_rank(tt: *const TtcTensorTrain, boundary: u64) -> u64 {
    tt.as_ref().map_or(0, |t| {
        t.inner
            .ranks()
            .get(boundary as usize)
            .map_or(0, |&r| r as u64)
    })
}

/// Evaluates one entry; `index` holds `len` zero-based mode indices.
///
/// # Safety
/// `index` must point at `len` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttc_tt_evaluate(
    tt: *const TtcTensorTrain,
    index: *const u64,
    len: u64,
    out: *mut f64,
) -> TtcStatus {
    guarded(|| {
        let tt = match deref(tt, "tt") {
            Ok(t) => t,
            Err(s) => return s,
        };
        if index.is_null() && len > 0 {
            return fail(TtcStatus::NullArgument, "index is null");
        }
        let out = match deref_out(out, "out") {
            Ok(o) => o,
            Err(s) => return s,
        };
        let idx: Vec<usize> = std::slice::from_raw_parts(index, len as usize)
            .iter()
            .map(|&i| i as usize)
            .collect();
        match tt.inner.evaluate(&idx) {
            Ok(v) => {
                *out = v;
                TtcStatus::Ok
            }
            Err(e) => from_err(&e),
        }
    })
}

// --- sample-set handles ---------------------------------------------------

/// Loads a sample set from its text format.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn ttc_samples_load(
    path: *const c_char,
    out: *mut *mut TtcSampleSet,
) -> TtcStatus {
    guarded(|| {
        let path = match read_cstr(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let out = match deref_out(out, "out") {
            Ok(o) => o,
            Err(s) => return s,
        };
        match SampleSet::load(path) {
            Ok(set) => {
                *out = Box::into_raw(Box::new(TtcSampleSet { inner: set }));
                TtcStatus::Ok
            }
            Err(e) => from_err(&e),
        }
    })
}

/// Writes a sample set to its text format.
///
/// # Safety
/// `set` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ttc_samples_save(
    set: *const TtcSampleSet,
    path: *const c_char,
) -> TtcStatus {
    guarded(|| {
        let set = match deref(set, "set") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let path = match read_cstr(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match set.inner.save(path) {
            Ok(()) => TtcStatus::Ok,
            Err(e) => from_err(&e),
        }
    })
}

/// Releases a sample-set handle.  Accepts null.
///
/// # Safety
/// `set` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ttc_samples_free(set: *mut TtcSampleSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `set` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ttc_samples_len(set: *const TtcSampleSet) -> u64 {
    set.as_ref().map_or(0, |s| s.inner.len() as u64)
}

/// Draws the sample set (`control = 0`) or control set (`control != 0`) of
/// one trial of an experiment.  `spec_text` uses the same flat
/// `key = value` format as the command-line tool; `d`, `n`, `rank` and
/// `csd` are required.
///
/// # Safety
/// `spec_text` must be a NUL-terminated string and `out` a valid
/// destination.
#[no_mangle]
pub unsafe extern "C" fn ttc_samples_generate(
    spec_text: *const c_char,
    trial: u64,
    control: i32,
    out: *mut *mut TtcSampleSet,
) -> TtcStatus {
    guarded(|| {
        let text = match read_cstr(spec_text, "spec_text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let out = match deref_out(out, "out") {
            Ok(o) => o,
            Err(s) => return s,
        };
        let spec = match ExperimentSpec::from_key_values(text) {
            Ok(s) => s,
            Err(e) => return from_err(&e),
        };
        match experiment::prepare_trial(&spec, trial as usize) {
            Ok(data) => {
                let set = if control != 0 { data.control } else { data.samples };
                *out = Box::into_raw(Box::new(TtcSampleSet { inner: set }));
                TtcStatus::Ok
            }
            Err(e) => from_err(&e),
        }
    })
}

// --- solving --------------------------------------------------------------

fn build_config(cfg: &TtcSolverConfig) -> Result<SolverConfig, TtcStatus> {
    let algorithm = match cfg.algorithm {
        0 => Algorithm::Als,
        1 => Algorithm::Adf,
        2 => Algorithm::AdfSor,
        other => {
            return Err(fail(
                TtcStatus::InvalidArgument,
                format!("unknown algorithm code {other}"),
            ))
        }
    };
    if cfg.rank == 0 {
        return Err(fail(TtcStatus::InvalidArgument, "rank must be positive"));
    }
    let mut out = SolverConfig::new(algorithm, cfg.rank as usize);
    if cfg.eps_stop > 0.0 {
        out.eps_stop = cfg.eps_stop;
    }
    if cfg.iter_max > 0 {
        out.iter_max = cfg.iter_max as usize;
    }
    out.sweep_order = match cfg.sweep_order {
        0 => SweepOrder::HalfAlternating,
        1 => SweepOrder::Forward,
        other => {
            return Err(fail(
                TtcStatus::InvalidArgument,
                format!("unknown sweep order code {other}"),
            ))
        }
    };
    out.seed = cfg.seed;
    Ok(out)
}

fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => 0,
        Termination::Exact => 1,
        Termination::IterBudget => 2,
        Termination::StalledBack => 3,
    }
}

/// Fits a tensor train to `samples`.  `control` may be null; when present
/// it is evaluated once per sweep for the control residual.  `summary` may
/// be null when only the handle is wanted.
///
/// # Safety
/// All non-null pointers must be valid; `out_tt` must be a valid
/// destination.
#[no_mangle]
pub unsafe extern "C" fn ttc_solve(
    samples: *const TtcSampleSet,
    control: *const TtcSampleSet,
    cfg: *const TtcSolverConfig,
    out_tt: *mut *mut TtcTensorTrain,
    summary: *mut TtcSolveSummary,
) -> TtcStatus {
    guarded(|| {
        let samples = match deref(samples, "samples") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let cfg = match deref(cfg, "cfg") {
            Ok(c) => c,
            Err(s) => return s,
        };
        let out_tt = match deref_out(out_tt, "out_tt") {
            Ok(o) => o,
            Err(s) => return s,
        };
        let config = match build_config(cfg) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let control = control.as_ref().map(|c| &c.inner);
        match solver::solve(&samples.inner, control, &config) {
            Ok((tt, report)) => {
                if let Some(summary) = summary.as_mut() {
                    *summary = TtcSolveSummary {
                        sweeps: report.sweeps.len() as u64,
                        final_rank: report.final_rank as u64,
                        res_p: report.res_p,
                        res_c: report.res_c.unwrap_or(-1.0),
                        termination: termination_code(report.termination),
                        elapsed_seconds: report.elapsed_seconds,
                    };
                }
                *out_tt = Box::into_raw(Box::new(TtcTensorTrain { inner: tt }));
                TtcStatus::Ok
            }
            Err(e) => from_err(&e),
        }
    })
}

/// Runs a whole experiment described by the flat `key = value` format and
/// returns the aggregate and per-trial results as a JSON document.
///
/// # Safety
/// `spec_text` must be a NUL-terminated string and `out_json` a valid
/// destination; release the returned string with [`ttc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ttc_run_experiment_json(
    spec_text: *const c_char,
    out_json: *mut *mut c_char,
) -> TtcStatus {
    guarded(|| {
        let text = match read_cstr(spec_text, "spec_text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let out_json = match deref_out(out_json, "out_json") {
            Ok(o) => o,
            Err(s) => return s,
        };
        let spec = match ExperimentSpec::from_key_values(text) {
            Ok(s) => s,
            Err(e) => return from_err(&e),
        };
        match experiment::run_experiment(&spec) {
            Ok(result) => {
                let json = experiment::result_json(&spec, &result).replace('\0', " ");
                *out_json = CString::new(json).expect("NUL bytes removed").into_raw();
                TtcStatus::Ok
            }
            Err(e) => from_err(&e),
        }
    })
}
