//! C ABI for the `pointmatch` matcher.
//!
//! Every entry point returns a [`PmStatus`]. On failure the message is kept
//! per thread and can be read with [`pm_last_error_message`]. Results live
//! behind an opaque [`PmResult`] handle released by [`pm_result_free`].
//! Point arrays are row-major `count x dim` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use pointmatch::assign::{solve_k_lap, AssignmentProblem};
use pointmatch::bnb::{BoundScheme, Certificate};
use pointmatch::energy::ScaleRange;
use pointmatch::{match_point_sets, Error, MatchOptions, MatchOutcome, Mode, PairCount, PointSet};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid or degenerate input data.
    Input = 2,
    /// A matrix that had to be positive definite was not.
    Numeric = 3,
    /// Solver invariant violated.
    Internal = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

pub const PM_MODE_REG_SIM2D: u32 = 0;
pub const PM_MODE_REG_AFF2D: u32 = 1;
pub const PM_MODE_REG_SCALE3D: u32 = 2;
pub const PM_MODE_SIM2D: u32 = 3;
pub const PM_MODE_SIM3D: u32 = 4;

pub const PM_BOUND_LP: u32 = 0;
pub const PM_BOUND_FAST: u32 = 1;

pub const PM_CERT_EPS_OPTIMAL: u32 = 0;
pub const PM_CERT_DEPTH_TERMINATED: u32 = 1;
pub const PM_CERT_ITERATION_LIMIT: u32 = 2;

/// Search settings. Start from [`pm_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmOptions {
    /// One of the `PM_MODE_*` constants.
    pub mode: u32,
    /// Number of pairs. Zero means use `np_fraction`.
    pub n_p: usize,
    /// Fraction of `min(m, n)` used when `n_p` is zero.
    pub np_fraction: f64,
    /// One of the `PM_BOUND_*` constants.
    pub bound: u32,
    pub epsilon: f64,
    pub max_depth: usize,
    /// Zero means unlimited.
    pub max_iterations: usize,
    /// Zero means all cores.
    pub workers: usize,
    pub scale_lo: f64,
    pub scale_hi: f64,
}

/// Opaque match result.
pub struct PmResult {
    outcome: MatchOutcome,
    pairs: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PmStatus {
    match err {
        Error::NumericDomain { .. } => PmStatus::Numeric,
        Error::Internal(_) => PmStatus::Internal,
        _ => PmStatus::Input,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (PmStatus, String)>) -> PmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PmStatus::Panic
        }
    }
}

fn fail(err: Error) -> (PmStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (PmStatus, String) {
    (PmStatus::NullPointer, format!("{name} is null"))
}

fn input(msg: impl Into<String>) -> (PmStatus, String) {
    (PmStatus::Input, msg.into())
}

/// # Safety
/// `data` must point to `len` readable doubles when `len > 0`.
unsafe fn slice<'a>(data: *const f64, len: usize, name: &str) -> Result<&'a [f64], (PmStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn mode_of(code: u32) -> Option<Mode> {
    match code {
        PM_MODE_REG_SIM2D => Some(Mode::RegSim2d),
        PM_MODE_REG_AFF2D => Some(Mode::RegAff2d),
        PM_MODE_REG_SCALE3D => Some(Mode::RegScale3d),
        PM_MODE_SIM2D => Some(Mode::Sim2d),
        PM_MODE_SIM3D => Some(Mode::Sim3d),
        _ => None,
    }
}

fn options_of(o: &PmOptions) -> Result<MatchOptions, (PmStatus, String)> {
    let mode = mode_of(o.mode).ok_or_else(|| input(format!("unknown mode {}", o.mode)))?;
    let pairs =
        if o.n_p > 0 { PairCount::Absolute(o.n_p) } else { PairCount::Fraction(o.np_fraction) };
    let mut opts = MatchOptions::new(mode, pairs);
    opts.bnb.scheme = match o.bound {
        PM_BOUND_LP => BoundScheme::Lp,
        PM_BOUND_FAST => BoundScheme::Fast,
        other => return Err(input(format!("unknown bound scheme {other}"))),
    };
    opts.bnb.epsilon = o.epsilon;
    opts.bnb.max_depth = o.max_depth;
    opts.bnb.max_iterations = (o.max_iterations > 0).then_some(o.max_iterations);
    opts.bnb.workers = o.workers;
    opts.scale_range = ScaleRange::new(o.scale_lo, o.scale_hi).map_err(fail)?;
    Ok(opts)
}

/// Default settings: similarity 2D, all pairs of the smaller set, fast bound.
#[no_mangle]
pub extern "C" fn pm_options_default() -> PmOptions {
    let defaults = MatchOptions::new(Mode::Sim2d, PairCount::Fraction(1.0));
    PmOptions {
        mode: PM_MODE_SIM2D,
        n_p: 0,
        np_fraction: 1.0,
        bound: PM_BOUND_FAST,
        epsilon: defaults.bnb.epsilon,
        max_depth: defaults.bnb.max_depth,
        max_iterations: 0,
        workers: 0,
        scale_lo: defaults.scale_range.lo,
        scale_hi: defaults.scale_range.hi,
    }
}

/// Matches `m` model points against `n` scene points of dimension `dim`.
/// On success `*out` receives a handle owned by the caller.
///
/// # Safety
/// `model` and `scene` must point to `m * dim` and `n * dim` doubles,
/// `options` may be null for defaults, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_match(
    model: *const f64,
    m: usize,
    scene: *const f64,
    n: usize,
    dim: usize,
    options: *const PmOptions,
    out: *mut *mut PmResult,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let x = slice(model, m.checked_mul(dim).ok_or_else(|| input("size overflow"))?, "model")?;
        let y = slice(scene, n.checked_mul(dim).ok_or_else(|| input("size overflow"))?, "scene")?;
        let o = if options.is_null() { pm_options_default() } else { *options };
        let opts = options_of(&o)?;
        let x = PointSet::new(dim, x.to_vec()).map_err(fail)?;
        let y = PointSet::new(dim, y.to_vec()).map_err(fail)?;
        let outcome = match_point_sets(&x, &y, &opts).map_err(fail)?;
        let pairs = outcome.search.best_pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
        *out = Box::into_raw(Box::new(PmResult { outcome, pairs }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `result` must come from [`pm_match`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pm_result_free(result: *mut PmResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle or null.
unsafe fn handle<'a>(result: *const PmResult) -> Option<&'a PmResult> {
    result.as_ref()
}

/// Energy of the best correspondence, NaN for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_result_energy(result: *const PmResult) -> f64 {
    handle(result).map_or(f64::NAN, |r| r.outcome.search.best_e)
}

/// Number of matched pairs, zero for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_result_pair_count(result: *const PmResult) -> usize {
    handle(result).map_or(0, |r| r.pairs.len() / 2)
}

/// Pairs as `(model index, scene index)`, `2 * pair_count` entries. The
/// pointer stays valid until the handle is freed.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_result_pairs(result: *const PmResult) -> *const usize {
    handle(result).map_or(ptr::null(), |r| r.pairs.as_ptr())
}

/// Search iterations performed.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_result_iterations(result: *const PmResult) -> usize {
    handle(result).map_or(0, |r| r.outcome.search.iterations)
}

/// One of the `PM_CERT_*` constants, `u32::MAX` for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_result_certificate(result: *const PmResult) -> u32 {
    handle(result).map_or(u32::MAX, |r| match r.outcome.search.certificate {
        Certificate::EpsOptimal => PM_CERT_EPS_OPTIMAL,
        Certificate::DepthTerminated => PM_CERT_DEPTH_TERMINATED,
        Certificate::IterationLimit => PM_CERT_ITERATION_LIMIT,
    })
}

/// Dimension of the recovered transformation.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_result_dim(result: *const PmResult) -> usize {
    handle(result).map_or(0, |r| r.outcome.transform.translation.len())
}

/// Copies the `dim x dim` linear part, row-major, into `out`.
///
/// # Safety
/// `result` must be a live handle and `out` must hold `dim * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_result_linear(result: *const PmResult, out: *mut f64) -> PmStatus {
    guard(|| {
        let r = handle(result).ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let l = &r.outcome.transform.linear;
        let d = l.nrows();
        for i in 0..d {
            for j in 0..d {
                *out.add(i * d + j) = l[(i, j)];
            }
        }
        Ok(())
    })
}

/// Copies the translation into `out`.
///
/// # Safety
/// `result` must be a live handle and `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_result_translation(result: *const PmResult, out: *mut f64) -> PmStatus {
    guard(|| {
        let r = handle(result).ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = &r.outcome.transform.translation;
        ptr::copy_nonoverlapping(t.as_ptr(), out, t.len());
        Ok(())
    })
}

/// Minimum-cost selection of `k` disjoint pairs from a row-major `rows x
/// cols` cost matrix. Writes `2 * k` indices to `pairs` and the total to
/// `value`.
///
/// # Safety
/// `cost` must hold `rows * cols` doubles, `pairs` must hold `2 * k`
/// entries and `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_solve_k_lap(
    cost: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    pairs: *mut usize,
    value: *mut f64,
) -> PmStatus {
    guard(|| {
        if pairs.is_null() {
            return Err(null("pairs"));
        }
        if value.is_null() {
            return Err(null("value"));
        }
        let c = slice(cost, rows.checked_mul(cols).ok_or_else(|| input("size overflow"))?, "cost")?;
        let prob = AssignmentProblem::new(DMatrix::from_row_slice(rows, cols, c), k).map_err(fail)?;
        let a = solve_k_lap(&prob).map_err(fail)?;
        for (t, &(i, j)) in a.pairs.iter().enumerate() {
            *pairs.add(2 * t) = i;
            *pairs.add(2 * t + 1) = j;
        }
        *value = a.value;
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
