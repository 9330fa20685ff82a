//! C ABI for kronlik.
//!
//! A `KlModel` handle holds the observation grid and an optional design
//! matrix. Data matrices are passed row-major, n rows (points) by k columns
//! (series). Every call returns a `KlStatus`; on failure the message is
//! available from `kl_last_error_message` on the same thread. Panics are
//! caught at the boundary and reported as `KL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kronlik::experiments::polynomial_design;
use kronlik::{efficiency_ii_vs_i, fit_beta, gamma_of, Ar1Model, DesignMatrix, Error, Matrix, ModelKind, ProfileKernel, SearchConfig};

pub const KL_MODEL_I: u32 = 1;
pub const KL_MODEL_II: u32 = 2;
pub const KL_MODEL_III: u32 = 3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Degenerate = 3,
    InvalidArgument = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KlFitResult {
    pub beta_hat: f64,
    /// Infinite when the information at the estimate is zero.
    pub se: f64,
    pub loglik: f64,
    pub evaluations: usize,
    pub at_boundary: bool,
}

/// Opaque model handle.
pub struct KlModel {
    model: Ar1Model,
    design: Option<DesignMatrix>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> KlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KlStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            KlStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(&msg);
            KlStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            if e.is_degenerate() {
                KlStatus::Degenerate
            } else {
                KlStatus::Domain
            }
        }
        Err(_) => {
            set_error("internal panic");
            KlStatus::Panic
        }
    }
}

fn model_kind(code: u32) -> Result<ModelKind, Failure> {
    match code {
        KL_MODEL_I => Ok(ModelKind::I),
        KL_MODEL_II => Ok(ModelKind::II),
        KL_MODEL_III => Ok(ModelKind::III),
        other => Err(Failure::Invalid(format!("unknown model code {other}"))),
    }
}

unsafe fn row_major(data: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<Matrix, Failure> {
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    let len = rows
        .checked_mul(cols)
        .filter(|l| *l > 0)
        .ok_or_else(|| Failure::Invalid(format!("{what} has invalid shape {rows}x{cols}")))?;
    let slice: &[f64] = std::slice::from_raw_parts(data, len);
    Ok(Matrix::from_row_slice(rows, cols, slice))
}

unsafe fn handle<'a>(m: *const KlModel) -> Result<&'a KlModel, Failure> {
    m.as_ref().ok_or(Failure::Null("model"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

impl KlModel {
    unsafe fn data(&self, y: *const f64, n: usize, k: usize) -> Result<Matrix, Failure> {
        if n != self.model.n() {
            return Err(Failure::Invalid(format!("data have {n} rows, model has {}", self.model.n())));
        }
        row_major(y, n, k, "y")
    }
}

/// Create a model on the integer grid 1..n.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn kl_model_new(n: usize, out: *mut *mut KlModel) -> KlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let model = Ar1Model::new(n)?;
        *out = Box::into_raw(Box::new(KlModel { model, design: None }));
        Ok(())
    })
}

/// Create a model on strictly increasing coordinates.
///
/// # Safety
/// `points` must point to `n` readable doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn kl_model_with_points(points: *const f64, n: usize, out: *mut *mut KlModel) -> KlStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if points.is_null() {
            return Err(Failure::Null("points"));
        }
        let pts = std::slice::from_raw_parts(points, n).to_vec();
        let model = Ar1Model::with_points(pts)?;
        *out = Box::into_raw(Box::new(KlModel { model, design: None }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `model` must come from `kl_model_new`/`kl_model_with_points` and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kl_model_free(model: *mut KlModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Set the n×p design matrix (row-major); `x = NULL` with `p = 0` clears it.
///
/// # Safety
/// `model` must be a live handle and `x` must point to n·p readable doubles.
#[no_mangle]
pub unsafe extern "C" fn kl_model_set_design(model: *mut KlModel, x: *const f64, n: usize, p: usize) -> KlStatus {
    guard(|| {
        let m = out_ref(model, "model")?;
        if p == 0 && x.is_null() {
            m.design = None;
            return Ok(());
        }
        if n != m.model.n() {
            return Err(Failure::Invalid(format!("design has {n} rows, model has {}", m.model.n())));
        }
        m.design = Some(DesignMatrix::new(row_major(x, n, p, "x")?)?);
        Ok(())
    })
}

/// Use a polynomial design with p columns (intercept first); p = 0 clears it.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kl_model_set_polynomial_design(model: *mut KlModel, p: usize) -> KlStatus {
    guard(|| {
        let m = out_ref(model, "model")?;
        m.design = polynomial_design(&m.model, p)?;
        Ok(())
    })
}

/// Profile (residual, when a design is set) log likelihood at β.
///
/// # Safety
/// `model` must be a live handle, `y` must point to n·k doubles and `out`
/// to a writable double.
#[no_mangle]
pub unsafe extern "C" fn kl_profile_loglik(
    model: *const KlModel,
    y: *const f64,
    n: usize,
    k: usize,
    beta: f64,
    kind: u32,
    out: *mut f64,
) -> KlStatus {
    guard(|| {
        let m = handle(model)?;
        let out = out_ref(out, "out")?;
        let kind = model_kind(kind)?;
        let y = m.data(y, n, k)?;
        *out = ProfileKernel::new(&gamma_of(&m.model, beta)?, m.design.as_ref())?.loglik(&y, kind)?;
        Ok(())
    })
}

/// Derivative of `kl_profile_loglik` in β.
///
/// # Safety
/// As for `kl_profile_loglik`.
#[no_mangle]
pub unsafe extern "C" fn kl_score(
    model: *const KlModel,
    y: *const f64,
    n: usize,
    k: usize,
    beta: f64,
    kind: u32,
    out: *mut f64,
) -> KlStatus {
    guard(|| {
        let m = handle(model)?;
        let out = out_ref(out, "out")?;
        let kind = model_kind(kind)?;
        let y = m.data(y, n, k)?;
        *out = ProfileKernel::new(&gamma_of(&m.model, beta)?, m.design.as_ref())?.score(&y, kind)?;
        Ok(())
    })
}

/// Fisher information for β with k series.
///
/// # Safety
/// `model` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn kl_expected_info(model: *const KlModel, beta: f64, k: usize, kind: u32, out: *mut f64) -> KlStatus {
    guard(|| {
        let m = handle(model)?;
        let out = out_ref(out, "out")?;
        let kind = model_kind(kind)?;
        *out = ProfileKernel::new(&gamma_of(&m.model, beta)?, m.design.as_ref())?.expected_info(k, kind)?;
        Ok(())
    })
}

/// Maximum likelihood estimate of β over (−1, 1).
///
/// # Safety
/// `model` must be a live handle, `y` must point to n·k doubles and `out`
/// to a writable `KlFitResult`.
#[no_mangle]
pub unsafe extern "C" fn kl_fit_beta(
    model: *const KlModel,
    y: *const f64,
    n: usize,
    k: usize,
    kind: u32,
    out: *mut KlFitResult,
) -> KlStatus {
    guard(|| {
        let m = handle(model)?;
        let out = out_ref(out, "out")?;
        let kind = model_kind(kind)?;
        let y = m.data(y, n, k)?;
        let f = fit_beta(&m.model, &y, kind, m.design.as_ref(), SearchConfig::default())?;
        *out = KlFitResult {
            beta_hat: f.beta_hat,
            se: f.se,
            loglik: f.loglik_at_max,
            evaluations: f.evaluations,
            at_boundary: f.at_boundary,
        };
        Ok(())
    })
}

/// Efficiency of model II relative to model I, (nk+2)/(nk+2k).
#[no_mangle]
pub extern "C" fn kl_efficiency_ii_vs_i(n: u64, k: u64) -> f64 {
    efficiency_ii_vs_i(n, k)
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no message.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null with `len = 0`.
#[no_mangle]
pub unsafe extern "C" fn kl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}
