//! C ABI for `localnet`.
//!
//! Every function returns an [`LnStatus`]. On failure a message is kept in
//! thread-local storage and can be read with [`ln_last_error_message`].
//! Objects are opaque handles released with their `_free` function; strings
//! returned by the library are released with [`ln_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use localnet::charts::{build_atlas, Atlas, AtlasOptions};
use localnet::error::Error;
use localnet::estimator::{build_from_parts, choose_n, DeepNetEstimator, Mode};
use localnet::geometry::{Manifold, ManifoldSpec};
use localnet::harness::{run_rate_sweep, ExperimentConfig};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Config = 4,
    NonFinite = 5,
    Cover = 6,
    NoChart = 7,
    FitResidual = 8,
    Trial = 9,
    Io = 10,
    Json = 11,
    Csv = 12,
    Panic = 99,
}

/// Prediction modes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LnMode {
    Literal = 0,
    Interior = 1,
    Feedback = 2,
}

impl From<LnMode> for Mode {
    fn from(m: LnMode) -> Self {
        match m {
            LnMode::Literal => Mode::Literal,
            LnMode::Interior => Mode::Interior,
            LnMode::Feedback => Mode::Feedback,
        }
    }
}

/// Opaque chart atlas.
pub struct LnAtlas(Atlas);

/// Opaque fitted estimator.
pub struct LnEstimator(DeepNetEstimator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LnStatus {
    match e {
        Error::Domain(_) => LnStatus::Domain,
        Error::Config(_) => LnStatus::Config,
        Error::NonFinite => LnStatus::NonFinite,
        Error::Cover { .. } => LnStatus::Cover,
        Error::NoChart { .. } => LnStatus::NoChart,
        Error::FitResidual { .. } => LnStatus::FitResidual,
        Error::Trial { .. } => LnStatus::Trial,
        Error::Io(_) => LnStatus::Io,
        Error::Json(_) => LnStatus::Json,
        Error::Csv(_) => LnStatus::Csv,
    }
}

struct Fail(LnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            LnStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LnStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn json_fail(e: serde_json::Error) -> Fail {
    Fail(LnStatus::Json, e.to_string())
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(LnStatus::Json, "output contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ln_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ln_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ln_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `ceil(m^(1/(2s+d)))`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_choose_n(m: usize, s: f64, d: usize, out: *mut u32) -> LnStatus {
    guard(|| write_out(out, choose_n(m, s, d)?, "out"))
}

/// Builds an atlas with default options for a manifold given as JSON, e.g.
/// `{"kind":"circle","radius":1.0}`.
///
/// # Safety
/// `manifold_json` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_atlas_build(manifold_json: *const c_char, seed: u64, out: *mut *mut LnAtlas) -> LnStatus {
    guard(|| {
        let spec: ManifoldSpec = serde_json::from_str(read_str(manifold_json, "manifold_json")?).map_err(json_fail)?;
        let atlas = build_atlas(&Manifold::new(spec)?, &AtlasOptions::default(), seed)?;
        write_out(out, Box::into_raw(Box::new(LnAtlas(atlas))), "out")
    })
}

/// # Safety
/// `atlas` must come from [`ln_atlas_build`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ln_atlas_free(atlas: *mut LnAtlas) {
    if !atlas.is_null() {
        drop(Box::from_raw(atlas));
    }
}

/// # Safety
/// `atlas` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_atlas_ambient_dim(atlas: *const LnAtlas, out: *mut usize) -> LnStatus {
    guard(|| write_out(out, borrow(atlas, "atlas")?.0.ambient_dim(), "out"))
}

/// # Safety
/// `atlas` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_atlas_q_star(atlas: *const LnAtlas, out: *mut u32) -> LnStatus {
    guard(|| write_out(out, borrow(atlas, "atlas")?.0.q_star(), "out"))
}

/// # Safety
/// `atlas` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_atlas_chart_count(atlas: *const LnAtlas, out: *mut usize) -> LnStatus {
    guard(|| write_out(out, borrow(atlas, "atlas")?.0.len(), "out"))
}

/// Builds an estimator from `m` samples. `x` is row-major with `dim`
/// columns; `y` has `m` entries. `n = 0` picks the resolution from `m`
/// with smoothness 1.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ln_estimator_build(
    atlas: *const LnAtlas,
    x: *const f64,
    y: *const f64,
    m: usize,
    dim: usize,
    bound: f64,
    n: u32,
    out: *mut *mut LnEstimator,
) -> LnStatus {
    guard(|| {
        let atlas = &borrow(atlas, "atlas")?.0;
        if dim != atlas.ambient_dim() {
            return Err(Fail(
                LnStatus::Domain,
                format!("dim = {dim}, atlas expects {}", atlas.ambient_dim()),
            ));
        }
        let total = m
            .checked_mul(dim)
            .ok_or_else(|| Fail(LnStatus::Config, "m * dim overflows".into()))?;
        let xs: Vec<Vec<f64>> = slice(x, total, "x")?.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let ys = slice(y, m, "y")?;
        let n = if n == 0 {
            choose_n(m.max(1), 1.0, atlas.intrinsic_dim())?
        } else {
            n
        };
        let est = build_from_parts(atlas, &xs, ys, bound, n)?;
        write_out(out, Box::into_raw(Box::new(LnEstimator(est))), "out")
    })
}

/// Loads an estimator from its JSON form.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_estimator_from_json(json: *const c_char, out: *mut *mut LnEstimator) -> LnStatus {
    guard(|| {
        let est = DeepNetEstimator::from_json(read_str(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(LnEstimator(est))), "out")
    })
}

/// Serializes an estimator. Release the string with [`ln_string_free`].
///
/// # Safety
/// `est` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_estimator_to_json(est: *const LnEstimator, out: *mut *mut c_char) -> LnStatus {
    guard(|| {
        let s = borrow(est, "est")?.0.to_json()?;
        write_out(out, into_c_string(s)?, "out")
    })
}

/// # Safety
/// `est` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ln_estimator_free(est: *mut LnEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Predicts one query of length `dim`.
///
/// # Safety
/// `x` must hold `dim` values; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_estimator_predict(
    est: *const LnEstimator,
    x: *const f64,
    dim: usize,
    mode: LnMode,
    out: *mut f64,
) -> LnStatus {
    guard(|| {
        let est = &borrow(est, "est")?.0;
        let v = est.predict_mode(slice(x, dim, "x")?, mode.into())?;
        write_out(out, v, "out")
    })
}

/// Predicts `count` row-major queries into `out[0..count]`.
///
/// # Safety
/// `xs` must hold `count * dim` values and `out` room for `count`.
#[no_mangle]
pub unsafe extern "C" fn ln_estimator_predict_batch(
    est: *const LnEstimator,
    xs: *const f64,
    count: usize,
    dim: usize,
    mode: LnMode,
    out: *mut f64,
) -> LnStatus {
    guard(|| {
        let est = &borrow(est, "est")?.0;
        if dim != est.atlas().ambient_dim() {
            return Err(Fail(LnStatus::Domain, format!("dim = {dim} does not match the estimator")));
        }
        let total = count
            .checked_mul(dim)
            .ok_or_else(|| Fail(LnStatus::Config, "count * dim overflows".into()))?;
        let queries: Vec<Vec<f64>> = slice(xs, total, "xs")?.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let preds = est.predict_batch(&queries, mode.into())?;
        if count > 0 && out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(preds.as_ptr(), out, preds.len());
        Ok(())
    })
}

/// Runs a rate sweep for a JSON experiment config and returns the result
/// as JSON. Release the string with [`ln_string_free`].
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ln_rates_json(config_json: *const c_char, out: *mut *mut c_char) -> LnStatus {
    guard(|| {
        let cfg: ExperimentConfig = serde_json::from_str(read_str(config_json, "config_json")?).map_err(json_fail)?;
        let result = run_rate_sweep(&cfg)?;
        let s = serde_json::to_string_pretty(&[result]).map_err(json_fail)?;
        write_out(out, into_c_string(s)?, "out")
    })
}
