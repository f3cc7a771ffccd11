//! C ABI over the `qjs` library.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! by the matching `*_free`. Every fallible call returns a [`QjsStatus`];
//! on failure the message is available from [`qjs_last_error_message`] on
//! the same thread. Outputs are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qjs::analytic::{bright_coeff, dark_coeff, qjs as build_table, qjs_with_emission, QjsCoefficients};
use qjs::characterization::counting_rates;
use qjs::field_state::{apply_jump, FockDistribution, JumpOptions};
use qjs::{DetectorParams, QjsError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QjsStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    BiasOff = 3,
    Noiseless = 4,
    NoClickPossible = 5,
    ResolutionTooCoarse = 6,
    QuadratureNonConvergence = 7,
    StepperFailure = 8,
    Unsupported = 9,
    TruncationOverflow = 10,
    NoPlateau = 11,
    Residue = 12,
    Config = 13,
    Io = 14,
    Panic = 15,
}

impl From<&QjsError> for QjsStatus {
    fn from(e: &QjsError) -> Self {
        match e {
            QjsError::Domain(_) => QjsStatus::Domain,
            QjsError::BiasOff => QjsStatus::BiasOff,
            QjsError::Noiseless => QjsStatus::Noiseless,
            QjsError::NoClickPossible => QjsStatus::NoClickPossible,
            QjsError::ResolutionTooCoarse(_) => QjsStatus::ResolutionTooCoarse,
            QjsError::QuadratureNonConvergence { .. } => QjsStatus::QuadratureNonConvergence,
            QjsError::StepperFailure { .. } => QjsStatus::StepperFailure,
            QjsError::Unsupported(_) => QjsStatus::Unsupported,
            QjsError::TruncationOverflow { .. } => QjsStatus::TruncationOverflow,
            QjsError::NoPlateau { .. } => QjsStatus::NoPlateau,
            QjsError::Residue(_) => QjsStatus::Residue,
            QjsError::Config(_) => QjsStatus::Config,
            QjsError::Io(_) => QjsStatus::Io,
        }
    }
}

/// Detector parameters.
pub struct QjsParams(DetectorParams);

/// Coefficient tables `bright[n]`, `dark[n]`, `emission[n]`.
pub struct QjsTable(QjsCoefficients);

/// Diagonal photon-number distribution.
pub struct QjsState(FockDistribution);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Model(QjsError),
}

impl From<QjsError> for Failure {
    fn from(e: QjsError) -> Self {
        Failure::Model(e)
    }
}

fn guard<F>(body: F) -> QjsStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            QjsStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            QjsStatus::NullPointer
        }
        Ok(Err(Failure::Model(e))) => {
            set_error(&e.to_string());
            QjsStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            QjsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn qjs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parameters from wavelengths in metres and `g` in rad/s.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qjs_params_new_wavelengths(
    g: f64,
    lambda0: f64,
    lambda: f64,
    b: f64,
    tau: f64,
    nbar: f64,
    out: *mut *mut QjsParams,
) -> QjsStatus {
    guard(|| {
        let p = DetectorParams::from_wavelengths(g, lambda0, lambda, b, tau, nbar)?;
        put(out, Box::into_raw(Box::new(QjsParams(p))), "out")
    })
}

/// Dimensionless parameters from the detuning `q` (`g = 1`).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qjs_params_new_detuning(
    q: f64,
    b: f64,
    tau: f64,
    nbar: f64,
    out: *mut *mut QjsParams,
) -> QjsStatus {
    guard(|| {
        let p = DetectorParams::from_detuning(q, b, tau, nbar)?;
        put(out, Box::into_raw(Box::new(QjsParams(p))), "out")
    })
}

/// # Safety
/// `params` must come from a `qjs_params_new_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qjs_params_free(params: *mut QjsParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Bright rate `J_1^(B)`, dark rate `J_0^(D)` (units of `g`) and their ratio.
///
/// # Safety
/// `params` must be a live handle; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qjs_counting_rates(
    params: *const QjsParams,
    r_b: *mut f64,
    r_d: *mut f64,
    s: *mut f64,
) -> QjsStatus {
    guard(|| {
        if r_b.is_null() || r_d.is_null() || s.is_null() {
            return Err(Failure::Null("rate output"));
        }
        let rates = counting_rates(&get(params, "params")?.0)?;
        put(r_b, rates.r_b, "r_b")?;
        put(r_d, rates.r_d, "r_d")?;
        put(s, rates.s, "s")
    })
}

/// Bright coefficient `J_n^(B)`, units of `g`.
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qjs_bright_coeff(params: *const QjsParams, n: usize, out: *mut f64) -> QjsStatus {
    guard(|| {
        let v = bright_coeff(n, &get(params, "params")?.0)?;
        put(out, v, "out")
    })
}

/// Dark coefficient `J_n^(D)`, units of `g`.
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qjs_dark_coeff(params: *const QjsParams, n: usize, out: *mut f64) -> QjsStatus {
    guard(|| {
        let v = dark_coeff(n, &get(params, "params")?.0)?;
        put(out, v, "out")
    })
}

/// Coefficient tables for `n = 0..=n_max`. With `with_emission` nonzero the
/// emission term is integrated to relative tolerance `quad_tol`.
///
/// # Safety
/// `params` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qjs_table_new(
    params: *const QjsParams,
    n_max: usize,
    with_emission: i32,
    quad_tol: f64,
    out: *mut *mut QjsTable,
) -> QjsStatus {
    guard(|| {
        let p = &get(params, "params")?.0;
        let table = if with_emission != 0 {
            qjs_with_emission(p, n_max, quad_tol)?
        } else {
            build_table(p, n_max)?
        };
        put(out, Box::into_raw(Box::new(QjsTable(table))), "out")
    })
}

/// # Safety
/// `table` must come from `qjs_table_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qjs_table_free(table: *mut QjsTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of rows, `n_max + 1`; 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qjs_table_len(table: *const QjsTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.n_max + 1)
}

/// Row `n` of the table. Any output pointer may be null to skip it.
///
/// # Safety
/// `table` must be a live handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qjs_table_get(
    table: *const QjsTable,
    n: usize,
    bright: *mut f64,
    dark: *mut f64,
    emission: *mut f64,
) -> QjsStatus {
    guard(|| {
        let t = &get(table, "table")?.0;
        if n > t.n_max {
            return Err(QjsError::Domain(format!("row {n} beyond n_max = {}", t.n_max)).into());
        }
        for (ptr, v) in [(bright, t.bright[n]), (dark, t.dark[n]), (emission, t.emission[n])] {
            if !ptr.is_null() {
                ptr.write(v);
            }
        }
        Ok(())
    })
}

/// Thermal distribution with the given mean on `n_max + 1` levels.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qjs_state_new_thermal(mean: f64, n_max: usize, out: *mut *mut QjsState) -> QjsStatus {
    guard(|| {
        let s = FockDistribution::thermal(mean, n_max)?;
        put(out, Box::into_raw(Box::new(QjsState(s))), "out")
    })
}

/// Distribution from `len` non-negative weights, normalized on input.
///
/// # Safety
/// `weights` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qjs_state_new_weights(weights: *const f64, len: usize, out: *mut *mut QjsState) -> QjsStatus {
    guard(|| {
        if weights.is_null() {
            return Err(Failure::Null("weights"));
        }
        let w = std::slice::from_raw_parts(weights, len).to_vec();
        let s = FockDistribution::from_weights(w)?;
        put(out, Box::into_raw(Box::new(QjsState(s))), "out")
    })
}

/// # Safety
/// `state` must come from a `qjs_state_new_*` or `qjs_apply_jump` call and
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qjs_state_free(state: *mut QjsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of photon-number levels; 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qjs_state_len(state: *const QjsState) -> usize {
    state.as_ref().map_or(0, |s| s.0.probs().len())
}

/// Copies `min(len, qjs_state_len(state))` probabilities into `buf`.
///
/// # Safety
/// `state` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qjs_state_copy(state: *const QjsState, buf: *mut f64, len: usize) -> QjsStatus {
    guard(|| {
        let probs = get(state, "state")?.0.probs();
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let k = len.min(probs.len());
        ptr::copy_nonoverlapping(probs.as_ptr(), buf, k);
        Ok(())
    })
}

/// Post-click state and click rate `Tr[J rho]` (units of `g`). A nonzero
/// `absorb` drops emission weight pushed past the truncation.
///
/// # Safety
/// `state` and `table` must be live handles; `out` and `rate` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qjs_apply_jump(
    state: *const QjsState,
    table: *const QjsTable,
    absorb: i32,
    out: *mut *mut QjsState,
    rate: *mut f64,
) -> QjsStatus {
    guard(|| {
        if out.is_null() || rate.is_null() {
            return Err(Failure::Null("jump output"));
        }
        let result = apply_jump(
            &get(state, "state")?.0,
            &get(table, "table")?.0,
            JumpOptions {
                truncation_absorb: absorb != 0,
            },
        )?;
        put(rate, result.rate, "rate")?;
        put(out, Box::into_raw(Box::new(QjsState(result.state))), "out")
    })
}
