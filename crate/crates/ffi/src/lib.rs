//! C ABI for the conductlab laboratory.
//!
//! Conventions:
//! - Every fallible entry point returns a [`ConductlabStatus`]; outputs are
//!   written through out-pointers only on `Ok`.
//! - Datasets are opaque handles created by `conductlab_dataset_generate` or
//!   `conductlab_dataset_from_csv` and released with
//!   `conductlab_dataset_free`.
//! - Strings returned by the library are NUL-terminated, UTF-8, and owned by
//!   the caller, who must release them with `conductlab_string_free`.
//! - A human-readable message for the most recent failure on the current
//!   thread is available from `conductlab_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use conductlab::dgp::{generate_dataset, DgpConfig, MarketDataset};
use conductlab::error::Error;
use conductlab::estimation::{estimate_demand, estimate_supply, recover_theta};
use conductlab::model::{solve_equilibrium, supply_intercept, ExogenousDraw, StructuralParams};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConductlabStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A parameter or configuration value violates its documented domain.
    InvalidArgument = 2,
    /// The structural system is singular (equal demand and cost elasticities).
    SingularModel = 3,
    /// A computation produced non-finite values.
    NumericalError = 4,
    /// Instruments or regressors are rank deficient.
    RankDeficient = 5,
    /// Too few observations for the requested fit.
    InsufficientData = 6,
    /// Malformed CSV or JSON input.
    ParseError = 7,
    /// A returned string was not valid UTF-8 or contained a NUL byte.
    EncodingError = 8,
}

/// Structural parameters, mirroring the core library's layout field by field.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ConductlabParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub theta: f64,
    pub sigma: f64,
}

/// One market's exogenous state: shifters in levels, instruments on the log
/// scale, structural errors on the log scale.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ConductlabDraw {
    pub x1d: f64,
    pub x2d: f64,
    pub x1s: f64,
    pub x2s: f64,
    pub z1s: f64,
    pub z2s: f64,
    pub eps_d: f64,
    pub eps_s: f64,
}

/// Log-scale equilibrium outcome.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ConductlabEquilibrium {
    pub log_q: f64,
    pub log_p: f64,
}

/// Both fitted equations plus the recovered conduct parameter.
/// `theta_hat` is NaN when `theta_valid` is false.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ConductlabEstimates {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub theta_hat: f64,
    pub theta_valid: bool,
}

/// Opaque dataset handle.
pub struct ConductlabDataset(MarketDataset);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn record_error(err: &Error) -> ConductlabStatus {
    let message = CString::new(err.to_string().replace('\0', " "))
        .unwrap_or_else(|_| CString::new("unrepresentable error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
    match err {
        Error::Domain(_) | Error::InvalidConfig(_) | Error::EmptyInput(_) | Error::Dimension(_) => {
            ConductlabStatus::InvalidArgument
        }
        Error::SingularModel(_) => ConductlabStatus::SingularModel,
        Error::Numerical(_) | Error::Degenerate(_) => ConductlabStatus::NumericalError,
        Error::RankDeficient(_) => ConductlabStatus::RankDeficient,
        Error::InsufficientData { .. } => ConductlabStatus::InsufficientData,
        Error::Parse { .. } => ConductlabStatus::ParseError,
        Error::Io(_) => ConductlabStatus::NumericalError,
    }
}

fn record_message(status: ConductlabStatus, message: &str) -> ConductlabStatus {
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
    status
}

impl From<&ConductlabParams> for StructuralParams {
    fn from(p: &ConductlabParams) -> Self {
        StructuralParams {
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            beta0: p.beta0,
            beta1: p.beta1,
            beta2: p.beta2,
            theta: p.theta,
            sigma: p.sigma,
        }
    }
}

/// Message describing the most recent failure on the calling thread.
///
/// # Safety
/// The returned pointer stays valid until the next failing call on the same
/// thread; do not free it.
#[no_mangle]
pub unsafe extern "C" fn conductlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fills `out` with the standard calibration (unit exponents, demand slope
/// -1, conduct 0.5, sigma 0.5).
///
/// # Safety
/// `out` must point to writable memory for one `ConductlabParams`.
#[no_mangle]
pub unsafe extern "C" fn conductlab_params_default(out: *mut ConductlabParams) -> ConductlabStatus {
    if out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "out is null");
    }
    let p = StructuralParams::baseline(0.5);
    unsafe {
        *out = ConductlabParams {
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            beta0: p.beta0,
            beta1: p.beta1,
            beta2: p.beta2,
            theta: p.theta,
            sigma: p.sigma,
        };
    }
    ConductlabStatus::Ok
}

/// Supply-relation intercept `-log(1 + theta*alpha0)`.
///
/// # Safety
/// `params` and `out` must be valid non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn conductlab_supply_intercept(
    params: *const ConductlabParams,
    out: *mut f64,
) -> ConductlabStatus {
    if params.is_null() || out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "params or out is null");
    }
    let p: StructuralParams = unsafe { (&*params).into() };
    match supply_intercept(&p) {
        Ok(gamma) => {
            unsafe { *out = gamma };
            ConductlabStatus::Ok
        }
        Err(e) => record_error(&e),
    }
}

/// Solves the market equilibrium for one exogenous configuration.
///
/// # Safety
/// `params`, `draw`, and `out` must be valid non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn conductlab_solve_equilibrium(
    params: *const ConductlabParams,
    draw: *const ConductlabDraw,
    out: *mut ConductlabEquilibrium,
) -> ConductlabStatus {
    if params.is_null() || draw.is_null() || out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "params, draw, or out is null");
    }
    let p: StructuralParams = unsafe { (&*params).into() };
    if let Err(e) = p.validate() {
        return record_error(&e);
    }
    let d = unsafe { &*draw };
    let exo = ExogenousDraw {
        x1d: d.x1d,
        x2d: d.x2d,
        x1s: d.x1s,
        x2s: d.x2s,
        z1s: d.z1s,
        z2s: d.z2s,
        eps_d: d.eps_d,
        eps_s: d.eps_s,
    };
    match solve_equilibrium(&p, &exo) {
        Ok(eq) => {
            unsafe {
                *out = ConductlabEquilibrium {
                    log_q: eq.log_q,
                    log_p: eq.log_p,
                };
            }
            ConductlabStatus::Ok
        }
        Err(e) => record_error(&e),
    }
}

/// Generates a synthetic dataset of `sample_size` markets.
///
/// # Safety
/// `params` and `out` must be valid non-null pointers. On `Ok` the caller
/// owns the handle written to `out` and must release it with
/// `conductlab_dataset_free`.
#[no_mangle]
pub unsafe extern "C" fn conductlab_dataset_generate(
    params: *const ConductlabParams,
    sample_size: usize,
    seed: u64,
    shifter_low: f64,
    shifter_high: f64,
    instrument_noise_sd: f64,
    out: *mut *mut ConductlabDataset,
) -> ConductlabStatus {
    if params.is_null() || out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "params or out is null");
    }
    let config = DgpConfig {
        params: unsafe { (&*params).into() },
        sample_size,
        seed,
        shifter_low,
        shifter_high,
        instrument_noise_sd,
    };
    match generate_dataset(&config) {
        Ok(data) => {
            unsafe { *out = Box::into_raw(Box::new(ConductlabDataset(data))) };
            ConductlabStatus::Ok
        }
        Err(e) => record_error(&e),
    }
}

/// Parses a dataset from CSV text in the schema written by
/// `conductlab_dataset_to_csv`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid non-null
/// pointer. On `Ok` the caller owns the returned handle.
#[no_mangle]
pub unsafe extern "C" fn conductlab_dataset_from_csv(
    text: *const c_char,
    out: *mut *mut ConductlabDataset,
) -> ConductlabStatus {
    if text.is_null() || out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "text or out is null");
    }
    let text = match unsafe { CStr::from_ptr(text) }.to_str() {
        Ok(t) => t,
        Err(_) => return record_message(ConductlabStatus::EncodingError, "text is not UTF-8"),
    };
    match MarketDataset::from_csv(text) {
        Ok(data) => {
            unsafe { *out = Box::into_raw(Box::new(ConductlabDataset(data))) };
            ConductlabStatus::Ok
        }
        Err(e) => record_error(&e),
    }
}

/// Serializes a dataset to CSV at full precision.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid non-null pointer. On
/// `Ok` the caller owns the returned string and must release it with
/// `conductlab_string_free`.
#[no_mangle]
pub unsafe extern "C" fn conductlab_dataset_to_csv(
    dataset: *const ConductlabDataset,
    out: *mut *mut c_char,
) -> ConductlabStatus {
    if dataset.is_null() || out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "dataset or out is null");
    }
    let csv = unsafe { &*dataset }.0.to_csv();
    match CString::new(csv) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            ConductlabStatus::Ok
        }
        Err(_) => record_message(ConductlabStatus::EncodingError, "CSV contained a NUL byte"),
    }
}

/// Number of markets in the dataset; zero for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn conductlab_dataset_len(dataset: *const ConductlabDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.0.len()
}

/// Copies one dataset column into `out`. Columns are indexed in CSV order:
/// 0 log_p, 1 log_q, 2 log_x1d, 3 log_x2d, 4 log_x1s, 5 log_x2s, 6 z1s,
/// 7 z2s.
///
/// # Safety
/// `dataset` must be a live handle and `out` must point to at least
/// `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn conductlab_dataset_copy_column(
    dataset: *const ConductlabDataset,
    column: usize,
    out: *mut f64,
    capacity: usize,
) -> ConductlabStatus {
    if dataset.is_null() || out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "dataset or out is null");
    }
    let data = &unsafe { &*dataset }.0;
    let col = match column {
        0 => &data.log_p,
        1 => &data.log_q,
        2 => &data.log_x1d,
        3 => &data.log_x2d,
        4 => &data.log_x1s,
        5 => &data.log_x2s,
        6 => &data.z1s,
        7 => &data.z2s,
        _ => {
            return record_message(
                ConductlabStatus::InvalidArgument,
                "column index must be in 0..8",
            )
        }
    };
    if capacity < col.len() {
        return record_message(
            ConductlabStatus::InvalidArgument,
            "capacity is smaller than the dataset length",
        );
    }
    unsafe { ptr::copy_nonoverlapping(col.as_ptr(), out, col.len()) };
    ConductlabStatus::Ok
}

/// Estimates both equations by two-stage least squares and recovers the
/// conduct parameter.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid non-null pointer.
#[no_mangle]
pub unsafe extern "C" fn conductlab_estimate(
    dataset: *const ConductlabDataset,
    out: *mut ConductlabEstimates,
) -> ConductlabStatus {
    if dataset.is_null() || out.is_null() {
        return record_message(ConductlabStatus::NullPointer, "dataset or out is null");
    }
    let data = &unsafe { &*dataset }.0;
    let demand = match estimate_demand(data) {
        Ok(fit) => fit,
        Err(e) => return record_error(&e),
    };
    let (supply, gamma_hat) = match estimate_supply(data) {
        Ok(pair) => pair,
        Err(e) => return record_error(&e),
    };
    let theta = recover_theta(gamma_hat, demand.coefficients[0]);
    unsafe {
        *out = ConductlabEstimates {
            alpha0: demand.coefficients[0],
            alpha1: demand.coefficients[1],
            alpha2: demand.coefficients[2],
            gamma: gamma_hat,
            beta0: supply.coefficients[1],
            beta1: supply.coefficients[2],
            beta2: supply.coefficients[3],
            theta_hat: theta.theta_hat,
            theta_valid: theta.valid,
        };
    }
    ConductlabStatus::Ok
}

/// Inverts a supply intercept and demand elasticity into a conduct
/// parameter. `theta_valid` is false (and `theta_hat` NaN) when the
/// elasticity is too close to zero.
///
/// # Safety
/// `out_theta` and `out_valid` must be valid non-null pointers.
#[no_mangle]
pub unsafe extern "C" fn conductlab_recover_theta(
    gamma_hat: f64,
    alpha0_hat: f64,
    out_theta: *mut f64,
    out_valid: *mut bool,
) -> ConductlabStatus {
    if out_theta.is_null() || out_valid.is_null() {
        return record_message(ConductlabStatus::NullPointer, "out_theta or out_valid is null");
    }
    let estimate = recover_theta(gamma_hat, alpha0_hat);
    unsafe {
        *out_theta = estimate.theta_hat;
        *out_valid = estimate.valid;
    }
    ConductlabStatus::Ok
}

/// Releases a dataset handle. Null is a no-op.
///
/// # Safety
/// `dataset` must be null or a handle obtained from this library that has
/// not already been freed.
#[no_mangle]
pub unsafe extern "C" fn conductlab_dataset_free(dataset: *mut ConductlabDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `text` must be null or a string obtained from this library that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn conductlab_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}
