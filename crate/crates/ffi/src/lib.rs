//! C ABI over the k3prf estimator.
//!
//! Matrices are passed row-major as `const double*` plus dimensions. Every
//! call returns a [`K3prfStatus`]; on failure [`k3prf_last_error`] gives a
//! message for the calling thread. Models are opaque handles released with
//! [`k3prf_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use k3prf::autoproxy::auto_proxy_fit;
use k3prf::evaluation::oos_r2;
use k3prf::linalg::{Mat, Vector};
use k3prf::{fit, Error, ErrorKind, K3prfFit, KernelSpec, ProxyProvenance, ProxySet};

/// Bumped on any incompatible change to this header.
pub const K3PRF_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K3prfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K3prfKernel {
    Linear = 0,
    /// `(x'y + param)^2`
    Poly2 = 1,
    /// `exp(-|x - y|^2 / (2 param^2))`
    Gaussian = 2,
}

/// Opaque fitted model.
pub struct K3prfModel {
    fit: K3prfFit,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(K3prfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Config => K3prfStatus::InvalidArgument,
            ErrorKind::Data => K3prfStatus::DataError,
            ErrorKind::Numerical => K3prfStatus::NumericalError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(K3prfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(K3prfStatus::InvalidArgument, msg.into())
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> K3prfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => K3prfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
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
            K3prfStatus::Panic
        }
    }
}

/// # Safety
/// `data` must point to `len` readable doubles when non-null.
unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn matrix(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Mat, Failure> {
    if rows == 0 || cols == 0 {
        return Err(invalid(format!("{what} has a zero dimension ({rows} x {cols})")));
    }
    let len = rows.checked_mul(cols).ok_or_else(|| invalid(format!("{what} dimensions overflow")))?;
    Ok(Mat::from_row_slice(rows, cols, slice(data, len, what)?))
}

fn kernel_spec(kernel: K3prfKernel, param: f64) -> Result<KernelSpec, Failure> {
    let spec = match kernel {
        K3prfKernel::Linear => KernelSpec::Linear,
        K3prfKernel::Poly2 => KernelSpec::poly2(param),
        K3prfKernel::Gaussian => KernelSpec::gaussian(param),
    };
    spec.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(spec)
}

unsafe fn store(out: *mut *mut K3prfModel, fit: K3prfFit) -> Result<(), Failure> {
    *out = Box::into_raw(Box::new(K3prfModel { fit }));
    Ok(())
}

/// Fits on `x` (t x n), target `y` (t) and proxies `z` (t x l).
///
/// # Safety
/// Pointers must reference buffers of the stated sizes; `out` must be
/// writable. On success `*out` owns a model to release with
/// [`k3prf_model_free`].
#[no_mangle]
pub unsafe extern "C" fn k3prf_fit(
    x: *const f64,
    t: usize,
    n: usize,
    y: *const f64,
    z: *const f64,
    l: usize,
    kernel: K3prfKernel,
    param: f64,
    out: *mut *mut K3prfModel,
) -> K3prfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let x = matrix(x, t, n, "x")?;
        let y = Vector::from_column_slice(slice(y, t, "y")?);
        let z = matrix(z, t, l, "z")?;
        let spec = kernel_spec(kernel, param)?;
        let proxies = ProxySet::new(z, ProxyProvenance::TheoryGuided(Vec::new()))?;
        store(out, fit(&x, &y, &proxies, &spec)?)
    })
}

/// Fits with `l` automatically built proxies.
///
/// # Safety
/// As for [`k3prf_fit`].
#[no_mangle]
pub unsafe extern "C" fn k3prf_fit_auto(
    x: *const f64,
    t: usize,
    n: usize,
    y: *const f64,
    l: usize,
    kernel: K3prfKernel,
    param: f64,
    out: *mut *mut K3prfModel,
) -> K3prfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if l == 0 {
            return Err(invalid("l must be at least 1"));
        }
        let x = matrix(x, t, n, "x")?;
        let y = Vector::from_column_slice(slice(y, t, "y")?);
        let spec = kernel_spec(kernel, param)?;
        store(out, auto_proxy_fit(&x, &y, &spec, l)?.1)
    })
}

/// Number of training observations.
///
/// # Safety
/// `model` must come from a fit call; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn k3prf_num_obs(model: *const K3prfModel, out: *mut usize) -> K3prfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.fit.num_obs();
        Ok(())
    })
}

/// Copies the in-sample fitted values into `out` (length `len`, which
/// must equal the number of observations).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn k3prf_fitted_values(model: *const K3prfModel, out: *mut f64, len: usize) -> K3prfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let fitted = m.fit.fitted_values();
        if len != fitted.len() {
            return Err(invalid(format!("out has length {len}, model has {} observations", fitted.len())));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(fitted.as_slice());
        Ok(())
    })
}

/// Forecasts for `rows` new observations `x_new` (rows x n) into `out`.
///
/// # Safety
/// `x_new` must hold `rows * n` doubles and `out` `rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn k3prf_predict(
    model: *const K3prfModel,
    x_new: *const f64,
    rows: usize,
    n: usize,
    out: *mut f64,
) -> K3prfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if n != m.fit.num_inputs() {
            return Err(invalid(format!("x_new has {n} columns, model was fitted on {}", m.fit.num_inputs())));
        }
        let x = matrix(x_new, rows, n, "x_new")?;
        let pred = m.fit.predict(&x)?;
        std::slice::from_raw_parts_mut(out, rows).copy_from_slice(pred.as_slice());
        Ok(())
    })
}

/// Out-of-sample R² of `forecast` against `actual` relative to
/// `train_mean`.
///
/// # Safety
/// `actual` and `forecast` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn k3prf_oos_r2(
    actual: *const f64,
    forecast: *const f64,
    len: usize,
    train_mean: f64,
    out: *mut f64,
) -> K3prfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = oos_r2(slice(actual, len, "actual")?, slice(forecast, len, "forecast")?, train_mean)?;
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from a fit call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn k3prf_model_free(model: *mut K3prfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn k3prf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn k3prf_abi_version() -> u32 {
    K3PRF_ABI_VERSION
}
