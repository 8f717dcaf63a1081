//! C ABI over `pdd-rdo`.
//!
//! Surrogates are exposed as opaque [`PddSurrogateHandle`] pointers owned by
//! the caller and released with [`pdd_surrogate_free`]. Every function
//! returns a [`PddStatus`]; on failure a message for the calling thread is
//! available from [`pdd_last_error`]. Strings returned by the library are
//! released with [`pdd_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use pdd_rdo::config::RunConfig;
use pdd_rdo::qoi::Dataset;
use pdd_rdo::rdo::{run_rdo, RdoSetup};
use pdd_rdo::surrogate::{transform_x_to_z, PddSurrogate, SinglePassTrainer, TrainingSet, TransformVector};
use pdd_rdo::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PddStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// A fitted surrogate, optionally with the training samples needed for
/// retraining and optimization.
pub struct PddSurrogateHandle {
    surrogate: PddSurrogate,
    training: Option<TrainingSet>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PddStatus {
    match e {
        Error::Parse { .. } | Error::Schema { .. } => PddStatus::Parse,
        Error::Io(_) => PddStatus::Io,
        e if e.is_input_error() => PddStatus::InvalidArgument,
        _ => PddStatus::Numerical,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PddStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PddStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PddStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            PddStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PddStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

fn boxed(h: PddSurrogateHandle) -> *mut PddSurrogateHandle {
    Box::into_raw(Box::new(h))
}

fn config(toml: &str) -> Result<RunConfig, Fail> {
    Ok(RunConfig::from_toml(toml)?)
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn pdd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pdd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of PDD basis functions `L(n, s, m)`.
///
/// # Safety
/// `out_count` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_count_basis(n: usize, s: usize, m: usize, out_count: *mut usize) -> PddStatus {
    guard(|| {
        *out(out_count, "out_count")? = pdd_rdo::pdd::count_l(n, s, m)?;
        Ok(())
    })
}

/// Reads a surrogate file written by the library or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_handle` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_load(
    path: *const c_char,
    out_handle: *mut *mut PddSurrogateHandle,
) -> PddStatus {
    guard(|| {
        let path = text(path, "path")?;
        let slot = out(out_handle, "out_handle")?;
        let (surrogate, training) = PddSurrogate::load(path)?;
        *slot = boxed(PddSurrogateHandle { surrogate, training });
        Ok(())
    })
}

/// Parses a surrogate from its text form.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out_handle` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_from_string(
    source: *const c_char,
    out_handle: *mut *mut PddSurrogateHandle,
) -> PddStatus {
    guard(|| {
        let s = text(source, "text")?;
        let slot = out(out_handle, "out_handle")?;
        let (surrogate, training) = PddSurrogate::from_text(s)?;
        *slot = boxed(PddSurrogateHandle { surrogate, training });
        Ok(())
    })
}

/// Text form of a surrogate, including its training samples when present.
/// Release with [`pdd_string_free`].
///
/// # Safety
/// `handle` must be live; `out_text` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_to_string(
    handle: *const PddSurrogateHandle,
    out_text: *mut *mut c_char,
) -> PddStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let slot = out(out_text, "out_text")?;
        let s = h.surrogate.to_text(h.training.as_ref());
        *slot = CString::new(s).expect("surrogate text has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a surrogate. NULL is ignored.
///
/// # Safety
/// `handle` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_free(handle: *mut PddSurrogateHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of inputs, basis functions and stored training samples.
///
/// # Safety
/// `handle` must be live; outputs may be NULL when not wanted.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_dims(
    handle: *const PddSurrogateHandle,
    out_inputs: *mut usize,
    out_terms: *mut usize,
    out_samples: *mut usize,
) -> PddStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let b = h.surrogate.basis();
        if let Some(p) = out_inputs.as_mut() {
            *p = b.dim();
        }
        if let Some(p) = out_terms.as_mut() {
            *p = b.len();
        }
        if let Some(p) = out_samples.as_mut() {
            *p = h.training.as_ref().map_or(0, |t| t.len());
        }
        Ok(())
    })
}

/// Evaluates the surrogate at `n` physical inputs `x`.
///
/// # Safety
/// `x` must hold `n` values; `out_value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_predict(
    handle: *const PddSurrogateHandle,
    x: *const f64,
    n: usize,
    out_value: *mut f64,
) -> PddStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let x = slice(x, n, "x")?;
        let slot = out(out_value, "out_value")?;
        let z = transform_x_to_z(x, h.surrogate.r())?;
        *slot = h.surrogate.predict(&z)?;
        Ok(())
    })
}

/// Mean and standard deviation of the surrogate output.
///
/// # Safety
/// `handle` must be live; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_moments(
    handle: *const PddSurrogateHandle,
    out_mean: *mut f64,
    out_sd: *mut f64,
) -> PddStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let m = h.surrogate.moments();
        *out(out_mean, "out_mean")? = m.mean;
        *out(out_sd, "out_sd")? = m.sd();
        Ok(())
    })
}

/// Copies the coefficients into `buf`, which must hold exactly the number of
/// basis functions.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_coefficients(
    handle: *const PddSurrogateHandle,
    buf: *mut f64,
    len: usize,
) -> PddStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let c = h.surrogate.coefficients();
        if len != c.len() {
            return Err(Fail::Arg(format!(
                "buffer holds {len} values, surrogate has {}",
                c.len()
            )));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(c.as_slice());
        Ok(())
    })
}

/// Single-pass retrain at transform vector `r_new` (length = inputs). The
/// handle must carry training samples. The new surrogate shares them.
///
/// # Safety
/// `r_new` must hold `n` values; `out_handle` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_surrogate_retrain(
    handle: *const PddSurrogateHandle,
    r_new: *const f64,
    n: usize,
    config_toml: *const c_char,
    out_handle: *mut *mut PddSurrogateHandle,
) -> PddStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let r = TransformVector::new(slice(r_new, n, "r_new")?.to_vec())?;
        let cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            config(text(config_toml, "config_toml")?)?
        };
        let slot = out(out_handle, "out_handle")?;
        let train = h
            .training
            .clone()
            .ok_or_else(|| Fail::Arg("surrogate carries no training samples".into()))?;
        let method = h.surrogate.method();
        let trainer = SinglePassTrainer::new(h.surrogate.clone(), train.clone(), cfg.regression, method)?;
        let surrogate = trainer.retrain(&r)?;
        *slot = boxed(PddSurrogateHandle {
            surrogate,
            training: Some(train),
        });
        Ok(())
    })
}

/// Fits a surrogate to `m` samples of `n` inputs. `x` is row-major `m × n`,
/// `q` holds the outputs. The problem, truncation, method and initial design
/// come from `config_toml` (NULL or empty for defaults).
///
/// # Safety
/// `x` must hold `m·n` values, `q` `m` values; `out_handle` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pdd_fit(
    x: *const f64,
    q: *const f64,
    m: usize,
    n: usize,
    config_toml: *const c_char,
    out_handle: *mut *mut PddSurrogateHandle,
) -> PddStatus {
    guard(|| {
        let x = slice(
            x,
            m.checked_mul(n).ok_or_else(|| Fail::Arg("m·n overflows".into()))?,
            "x",
        )?;
        let q = slice(q, m, "q")?;
        let cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            config(text(config_toml, "config_toml")?)?
        };
        let slot = out(out_handle, "out_handle")?;
        let data = Dataset::new(DMatrix::from_row_slice(m, n, x), q.to_vec())?;
        let setup = RdoSetup::from_dataset(
            &data,
            &cfg.input_law()?,
            &cfg.problem.nominal_means,
            cfg.design_space()?,
            &cfg.rdo.d0,
            &cfg.surrogate,
            &cfg.regression,
        )?;
        *slot = boxed(PddSurrogateHandle {
            surrogate: setup.surrogate().clone(),
            training: Some(setup.trainer().training().clone()),
        });
        Ok(())
    })
}

/// Optimizes one weight pair starting from the surrogate's design `rdo.d0`
/// in `config_toml`. Writes the optimum (`d_len` = design dimension) and
/// its surrogate mean and standard deviation.
///
/// # Safety
/// `d_star` must be valid for `d_len` writes; other outputs valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pdd_optimize(
    handle: *const PddSurrogateHandle,
    config_toml: *const c_char,
    w1: f64,
    w2: f64,
    d_star: *mut f64,
    d_len: usize,
    out_mean: *mut f64,
    out_sd: *mut f64,
) -> PddStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            config(text(config_toml, "config_toml")?)?
        };
        let train = h
            .training
            .clone()
            .ok_or_else(|| Fail::Arg("surrogate carries no training samples".into()))?;
        let space = cfg.design_space()?;
        if d_len != space.dim() {
            return Err(Fail::Arg(format!(
                "d_star holds {d_len} values, design has {}",
                space.dim()
            )));
        }
        if d_star.is_null() {
            return Err(Fail::Null("d_star"));
        }
        let setup = RdoSetup::from_surrogate(
            h.surrogate.clone(),
            train,
            &cfg.regression,
            &cfg.problem.nominal_means,
            space,
            &cfg.rdo.d0,
        )?;
        let res = run_rdo(&setup, &setup.config(w1, w2, &cfg.rdo.nm))?;
        std::slice::from_raw_parts_mut(d_star, d_len).copy_from_slice(&res.d_star);
        *out(out_mean, "out_mean")? = res.mean;
        *out(out_sd, "out_sd")? = res.sd;
        Ok(())
    })
}
