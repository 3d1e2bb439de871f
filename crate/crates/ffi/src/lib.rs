//! C interface to loopinv.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_parse`
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`LoopinvStatus`]; on failure a description is available from
//! [`loopinv_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use loopinv::ast::Program;
use loopinv::checker::{check, encode_in, formula_to_smt, infer_loop, InferError, Status};
use loopinv::cli::{Overrides, Settings};
use loopinv::frontend::{parse, parse_formula, print_formula};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopinvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    /// Inference ended without a verified invariant.
    NotFound = 5,
    Solver = 6,
    Encode = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopinvVerdict {
    Valid = 0,
    Refuted = 1,
    Unknown = 2,
}

/// A parsed program.
pub struct LoopinvProgram {
    program: Program,
}

/// Settings for inference and checking.
pub struct LoopinvConfig {
    layers: Vec<Overrides>,
}

/// A verified invariant with run statistics.
pub struct LoopinvResult {
    invariant: CString,
    smt: CString,
    solver_calls: u64,
    templates_tried: u64,
    wall_time_ms: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (LoopinvStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LoopinvStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LoopinvStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LoopinvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((LoopinvStatus::NullPointer, format!("`{name}` is null")));
    }
    // SAFETY: the caller passes a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| (LoopinvStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-null handles come from this library and are still live.
    unsafe { p.as_ref() }.ok_or_else(|| (LoopinvStatus::NullPointer, format!("`{name}` is null")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err((LoopinvStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

fn settings(cfg: &LoopinvConfig) -> Settings {
    Settings::resolve(cfg.layers.iter().cloned())
}

/// Description of the last failure on this thread, or NULL. The string is
/// owned by the library.
#[no_mangle]
pub extern "C" fn loopinv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn loopinv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses program source into `*out`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn loopinv_program_parse(source: *const c_char, out: *mut *mut LoopinvProgram) -> LoopinvStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let src = unsafe { str_arg(source, "source") }?;
        let program = parse(src).map_err(|e| (LoopinvStatus::Parse, e.to_string()))?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(LoopinvProgram { program })) };
        Ok(())
    })
}

/// Number of program variables.
///
/// # Safety
/// `program` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loopinv_program_num_vars(program: *const LoopinvProgram) -> usize {
    unsafe { program.as_ref() }.map_or(0, |p| p.program.vars.len())
}

/// # Safety
/// `program` must be NULL or a handle from [`loopinv_program_parse`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn loopinv_program_free(program: *mut LoopinvProgram) {
    if !program.is_null() {
        // SAFETY: created by Box::into_raw in loopinv_program_parse.
        drop(unsafe { Box::from_raw(program) });
    }
}

/// Default settings, with the solver taken from `SMT_SOLVER` when set.
#[no_mangle]
pub extern "C" fn loopinv_config_new() -> *mut LoopinvConfig {
    Box::into_raw(Box::new(LoopinvConfig { layers: vec![Overrides::from_env(), Overrides::default()] }))
}

/// Sets one option using the keys of the settings file (`solver`, `tnorm`,
/// `eq`, `mode`, `seed`, `timeout`, `query_timeout`, `domain`, ...).
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn loopinv_config_set(config: *mut LoopinvConfig, key: *const c_char, value: *const c_char) -> LoopinvStatus {
    guard(|| {
        // SAFETY: live handle per contract.
        let cfg = unsafe { config.as_mut() }.ok_or((LoopinvStatus::NullPointer, "`config` is null".to_string()))?;
        let key = unsafe { str_arg(key, "key") }?;
        let value = unsafe { str_arg(value, "value") }?;
        let flags = cfg.layers.last_mut().expect("flag layer");
        flags.set(key, value).map_err(|e| (LoopinvStatus::Config, e.to_string()))
    })
}

/// # Safety
/// `config` must be NULL or a handle from [`loopinv_config_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn loopinv_config_free(config: *mut LoopinvConfig) {
    if !config.is_null() {
        // SAFETY: created by Box::into_raw in loopinv_config_new.
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Infers a verified invariant. On success `*out` receives a result handle.
///
/// # Safety
/// `program` and `config` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn loopinv_infer(
    program: *const LoopinvProgram,
    config: *const LoopinvConfig,
    out: *mut *mut LoopinvResult,
) -> LoopinvStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let p = unsafe { handle(program, "program") }?;
        let cfg = unsafe { handle(config, "config") }?;
        let outcome = infer_loop(&p.program, &settings(cfg).infer_config()).map_err(|e| {
            let status = match e {
                InferError::PlanExhausted { .. } | InferError::BudgetExceeded { .. } => LoopinvStatus::NotFound,
                InferError::Solver(_) => LoopinvStatus::Solver,
                InferError::Encode(_) => LoopinvStatus::Encode,
                _ => LoopinvStatus::Config,
            };
            (status, e.to_string())
        })?;
        let text = |s: String| CString::new(s).unwrap_or_default();
        let result = LoopinvResult {
            invariant: text(print_formula(&outcome.invariant)),
            smt: text(formula_to_smt(&outcome.invariant)),
            solver_calls: outcome.stats.solver_calls as u64,
            templates_tried: outcome.stats.templates_tried as u64,
            wall_time_ms: outcome.stats.wall_time.as_millis() as u64,
        };
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(result)) };
        Ok(())
    })
}

/// Invariant in the input language; owned by the result.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loopinv_result_invariant(result: *const LoopinvResult) -> *const c_char {
    unsafe { result.as_ref() }.map_or(ptr::null(), |r| r.invariant.as_ptr())
}

/// Invariant as an SMT-LIB term; owned by the result.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loopinv_result_smt(result: *const LoopinvResult) -> *const c_char {
    unsafe { result.as_ref() }.map_or(ptr::null(), |r| r.smt.as_ptr())
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loopinv_result_solver_calls(result: *const LoopinvResult) -> u64 {
    unsafe { result.as_ref() }.map_or(0, |r| r.solver_calls)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loopinv_result_templates_tried(result: *const LoopinvResult) -> u64 {
    unsafe { result.as_ref() }.map_or(0, |r| r.templates_tried)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loopinv_result_wall_time_ms(result: *const LoopinvResult) -> u64 {
    unsafe { result.as_ref() }.map_or(0, |r| r.wall_time_ms)
}

/// # Safety
/// `result` must be NULL or a handle from [`loopinv_infer`] that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn loopinv_result_free(result: *mut LoopinvResult) {
    if !result.is_null() {
        // SAFETY: created by Box::into_raw in loopinv_infer.
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Checks `invariant` against the program's conditions.
///
/// # Safety
/// `program` and `config` must be live handles, `invariant` a NUL-terminated
/// string and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn loopinv_check(
    program: *const LoopinvProgram,
    config: *const LoopinvConfig,
    invariant: *const c_char,
    verdict: *mut LoopinvVerdict,
) -> LoopinvStatus {
    guard(|| {
        out_ptr(verdict, "verdict")?;
        let p = unsafe { handle(program, "program") }?;
        let cfg = unsafe { handle(config, "config") }?;
        let inv = parse_formula(unsafe { str_arg(invariant, "invariant") }?).map_err(|e| (LoopinvStatus::Parse, e.to_string()))?;
        let s = settings(cfg);
        let domain = s.infer_config().domain.unwrap_or_else(|| p.program.natural_domain());
        let vcs = encode_in(&p.program, &inv, domain).map_err(|e| (LoopinvStatus::Encode, e.to_string()))?;
        let v = match check(&vcs, &s.solver_config()).status {
            Status::Valid => LoopinvVerdict::Valid,
            Status::Refuted { condition, .. } => {
                set_error(&format!("refuted at {condition}"));
                LoopinvVerdict::Refuted
            }
            Status::SolverUnknown { reason, .. } => {
                set_error(&reason);
                LoopinvVerdict::Unknown
            }
            Status::SolverError(e) => return Err((LoopinvStatus::Solver, e)),
        };
        // SAFETY: checked non-null above.
        unsafe { *verdict = v };
        Ok(())
    })
}
