//! C ABI over `tip-core`.
//!
//! Every function returns a [`TipStatus`]; results come back through out-pointers.
//! On failure, [`tip_last_error`] describes the most recent error on the calling
//! thread. Trajectories and fit results are opaque handles owned by the caller
//! and released with their `_free` function. Absent reports are passed as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tip_core::inference::{self, FitConfig, FitResult};
use tip_core::kernel::{self, Trajectory, TrustEvent};
use tip_core::special::{self, BetaParams};
use tip_core::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TipStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    InvalidParameter = 3,
    MalformedTrajectory = 4,
    NonConvergence = 5,
    NonFinite = 6,
    InsufficientData = 7,
    OutOfRange = 8,
    Panic = 9,
    Other = 10,
}

/// Six-parameter vector (α₀, β₀, s, f, ŝ, f̂).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub s: f64,
    pub f: f64,
    pub s_hat: f64,
    pub f_hat: f64,
}

impl TipParams {
    fn to_core(self) -> tip_core::Result<kernel::TipParams> {
        kernel::TipParams::new(
            self.alpha0,
            self.beta0,
            self.s,
            self.f,
            self.s_hat,
            self.f_hat,
        )
    }

    fn from_core(p: &kernel::TipParams) -> Self {
        TipParams {
            alpha0: p.alpha0,
            beta0: p.beta0,
            s: p.s,
            f: p.f,
            s_hat: p.s_hat,
            f_hat: p.f_hat,
        }
    }
}

/// Opaque trajectory for one (human, robot) pair.
pub struct TipTrajectory(Trajectory);

/// Opaque result of a maximum-likelihood fit.
pub struct TipFitResult(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> TipStatus {
    match err {
        Error::Domain { .. } => TipStatus::Domain,
        Error::InvalidParameter { .. } | Error::Config(_) => TipStatus::InvalidParameter,
        Error::MalformedTrajectory(_) => TipStatus::MalformedTrajectory,
        Error::NonConvergence(_) => TipStatus::NonConvergence,
        Error::NonFinite(_) => TipStatus::NonFinite,
        Error::InsufficientData(_) => TipStatus::InsufficientData,
        _ => TipStatus::Other,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Range(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TipStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => return TipStatus::Ok,
        Ok(Err(Failure::Core(e))) => (status_of(&e), e.to_string()),
        Ok(Err(Failure::Null(name))) => (TipStatus::NullPointer, format!("`{name}` is null")),
        Ok(Err(Failure::Range(m))) => (TipStatus::OutOfRange, m),
        Err(_) => (TipStatus::Panic, "internal panic".to_string()),
    };
    set_last_error(message);
    status
}

unsafe fn reference<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn write<T>(out: *mut T, name: &'static str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn text(p: *const c_char, name: &'static str) -> Result<String, Failure> {
    Ok(CStr::from_ptr(reference(p, name)?)
        .to_string_lossy()
        .into_owned())
}

fn report(value: f64) -> Option<f64> {
    (!value.is_nan()).then_some(value)
}

/// Message describing the last failure on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn tip_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_log_gamma(x: f64, out: *mut f64) -> TipStatus {
    guard(|| write(out, "out", special::log_gamma(x)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_digamma(x: f64, out: *mut f64) -> TipStatus {
    guard(|| write(out, "out", special::digamma(x)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_beta_log_pdf(
    t: f64,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> TipStatus {
    guard(|| write(out, "out", BetaParams::new(alpha, beta)?.log_pdf(t)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_beta_cdf(t: f64, alpha: f64, beta: f64, out: *mut f64) -> TipStatus {
    guard(|| write(out, "out", BetaParams::new(alpha, beta)?.cdf(t)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_beta_quantile(
    q: f64,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> TipStatus {
    guard(|| write(out, "out", BetaParams::new(alpha, beta)?.quantile(q)?))
}

/// Long-run expected trust under constant performance.
///
/// # Safety
/// `params` must point to a valid `TipParams`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_asymptotic_trust(
    params: *const TipParams,
    perf_success: f64,
    perf_failure: f64,
    out: *mut f64,
) -> TipStatus {
    guard(|| {
        let params = reference(params, "params")?.to_core()?;
        write(
            out,
            "out",
            kernel::asymptotic_trust(&params, perf_success, perf_failure)?,
        )
    })
}

/// Starts a trajectory with the initial trust rating.
///
/// # Safety
/// `human_id` and `robot_id` must be NUL-terminated strings; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_trajectory_new(
    human_id: *const c_char,
    robot_id: *const c_char,
    initial_trust: f64,
    out: *mut *mut TipTrajectory,
) -> TipStatus {
    guard(|| {
        let traj = Trajectory::start(
            text(human_id, "human_id")?,
            text(robot_id, "robot_id")?,
            TrustEvent::prior(initial_trust),
        )?;
        write(out, "out", Box::into_raw(Box::new(TipTrajectory(traj))))
    })
}

/// # Safety
/// `traj` must be null or a handle from [`tip_trajectory_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tip_trajectory_free(traj: *mut TipTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Appends a direct experience. `reported_trust` is NaN when no rating was given.
///
/// # Safety
/// `traj` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn tip_trajectory_push_direct(
    traj: *mut TipTrajectory,
    session: u32,
    perf_success: f64,
    perf_failure: f64,
    reported_trust: f64,
) -> TipStatus {
    guard(|| {
        let traj = traj.as_mut().ok_or(Failure::Null("traj"))?;
        traj.0.push(TrustEvent::direct(
            session,
            perf_success,
            perf_failure,
            report(reported_trust),
        ))?;
        Ok(())
    })
}

/// Appends an indirect experience relayed by a teammate. `reported_trust` is NaN
/// when no rating was given.
///
/// # Safety
/// `traj` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn tip_trajectory_push_indirect(
    traj: *mut TipTrajectory,
    session: u32,
    trust_in_teammate: f64,
    teammate_trust: f64,
    reported_trust: f64,
) -> TipStatus {
    guard(|| {
        let traj = traj.as_mut().ok_or(Failure::Null("traj"))?;
        traj.0.push(TrustEvent::indirect(
            session,
            trust_in_teammate,
            teammate_trust,
            report(reported_trust),
        ))?;
        Ok(())
    })
}

/// Number of events, including the initial rating.
///
/// # Safety
/// `traj` must be a live trajectory handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_trajectory_len(
    traj: *const TipTrajectory,
    out: *mut usize,
) -> TipStatus {
    guard(|| write(out, "out", reference(traj, "traj")?.0.events().len()))
}

/// Writes the expected trust after every event into `out[0..len]`, where `len`
/// must equal the trajectory length.
///
/// # Safety
/// `traj` and `params` must be valid; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tip_replay_expected_trust(
    traj: *const TipTrajectory,
    params: *const TipParams,
    out: *mut f64,
    len: usize,
) -> TipStatus {
    guard(|| {
        let traj = &reference(traj, "traj")?.0;
        let params = reference(params, "params")?.to_core()?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let steps = kernel::replay(traj, &params)?;
        if len != steps.len() {
            return Err(Failure::Range(format!(
                "buffer holds {len} values, trajectory has {}",
                steps.len()
            )));
        }
        let out = std::slice::from_raw_parts_mut(out, len);
        for (slot, step) in out.iter_mut().zip(&steps) {
            *slot = step.expected_trust;
        }
        Ok(())
    })
}

/// # Safety
/// `traj` and `params` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_log_likelihood(
    traj: *const TipTrajectory,
    params: *const TipParams,
    out: *mut f64,
) -> TipStatus {
    guard(|| {
        let traj = &reference(traj, "traj")?.0;
        let params = reference(params, "params")?.to_core()?;
        write(out, "out", inference::log_likelihood(traj, &params)?)
    })
}

/// Gradient of the log-likelihood, in the field order of [`TipParams`].
///
/// # Safety
/// `traj` and `params` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_gradient(
    traj: *const TipTrajectory,
    params: *const TipParams,
    out: *mut TipParams,
) -> TipStatus {
    guard(|| {
        let traj = &reference(traj, "traj")?.0;
        let params = reference(params, "params")?.to_core()?;
        let g = inference::gradient(traj, &params)?;
        write(
            out,
            "out",
            TipParams::from_core(&kernel::TipParams::from_array(g)),
        )
    })
}

/// Fits all six parameters (`direct_only` false) or the direct-only baseline.
/// Pass 0 for `max_iterations` or a non-positive `tolerance` to use the defaults.
///
/// # Safety
/// `traj` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_fit(
    traj: *const TipTrajectory,
    direct_only: bool,
    max_iterations: usize,
    tolerance: f64,
    out: *mut *mut TipFitResult,
) -> TipStatus {
    guard(|| {
        let traj = &reference(traj, "traj")?.0;
        let mut config = FitConfig::default();
        if max_iterations > 0 {
            config.max_iterations = max_iterations;
        }
        if tolerance > 0.0 {
            config.gradient_tolerance = tolerance;
        }
        let fit = if direct_only {
            inference::fit_direct_only(traj, &config)?
        } else {
            inference::fit(traj, &config)?
        };
        write(out, "out", Box::into_raw(Box::new(TipFitResult(fit))))
    })
}

/// # Safety
/// `fit` must be null or a handle from [`tip_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tip_fit_free(fit: *mut TipFitResult) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live fit handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_fit_params(
    fit: *const TipFitResult,
    out: *mut TipParams,
) -> TipStatus {
    guard(|| {
        write(
            out,
            "out",
            TipParams::from_core(&reference(fit, "fit")?.0.theta_star),
        )
    })
}

/// # Safety
/// `fit` must be a live fit handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_fit_log_likelihood(
    fit: *const TipFitResult,
    out: *mut f64,
) -> TipStatus {
    guard(|| write(out, "out", reference(fit, "fit")?.0.log_likelihood))
}

/// Mean absolute difference between expected and reported trust.
///
/// # Safety
/// `fit` must be a live fit handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_fit_mean_error(fit: *const TipFitResult, out: *mut f64) -> TipStatus {
    guard(|| write(out, "out", reference(fit, "fit")?.0.mean_fit_error))
}

/// # Safety
/// `fit` must be a live fit handle; `converged` and `iterations` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tip_fit_convergence(
    fit: *const TipFitResult,
    converged: *mut bool,
    iterations: *mut usize,
) -> TipStatus {
    guard(|| {
        let fit = &reference(fit, "fit")?.0;
        write(converged, "converged", fit.converged)?;
        write(iterations, "iterations", fit.iterations)
    })
}

/// Copies the fitted expected-trust curve into `out[0..len]`; `len` must equal
/// the trajectory length.
///
/// # Safety
/// `fit` must be a live fit handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tip_fit_expected_trust(
    fit: *const TipFitResult,
    out: *mut f64,
    len: usize,
) -> TipStatus {
    guard(|| {
        let curve = &reference(fit, "fit")?.0.expected_trust;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if len != curve.len() {
            return Err(Failure::Range(format!(
                "buffer holds {len} values, fit has {}",
                curve.len()
            )));
        }
        ptr::copy_nonoverlapping(curve.as_ptr(), out, len);
        Ok(())
    })
}
