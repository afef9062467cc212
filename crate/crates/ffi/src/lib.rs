//! C ABI over `demon_sim`.
//!
//! Distributions and trajectories are opaque heap handles owned by the
//! caller and released with their `_free` function. Every fallible call
//! returns a [`DsStatus`]; on failure a description is available from
//! [`ds_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use demon_sim::fock::{fock_distribution, moments, poisson_distribution, thermal_distribution};
use demon_sim::jc::{
    excitation_probability_linear, excitation_probability_nonlinear,
    first_local_optimal_theta_nonlinear, optimal_theta_linear, InteractionAngle, OptimumReport,
    SearchOptions,
};
use demon_sim::protocols::{charge_performance, mass_production, run_schedule, Protocol};
use demon_sim::{DemonError, FockDistribution, ProtocolTrajectory, Schedule};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Truncation, missing maximum, or nothing to excite.
    NumericalGuard = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque truncated Fock distribution.
pub struct DsDistribution(FockDistribution);

/// Opaque result of running a schedule.
pub struct DsTrajectory(ProtocolTrajectory);

/// Undefined statistics (`g2`, `fano` of the vacuum) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsMoments {
    pub mean: f64,
    pub variance: f64,
    pub g2: f64,
    pub fano: f64,
    pub mdr: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsOptimum {
    pub theta_star: f64,
    pub p_success: f64,
    pub seed_theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsRound {
    /// 1-based.
    pub index: usize,
    /// `'L'` or `'N'`.
    pub kind: c_char,
    pub theta: f64,
    pub p_success: f64,
    pub mean: f64,
    pub variance: f64,
    pub leak: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsSearchOptions {
    pub grid_points: usize,
    pub window_factor: f64,
    pub refine_tol: f64,
    pub scan_step_divisor: usize,
}

impl From<SearchOptions> for DsSearchOptions {
    fn from(o: SearchOptions) -> Self {
        DsSearchOptions {
            grid_points: o.grid_points,
            window_factor: o.window_factor,
            refine_tol: o.refine_tol,
            scan_step_divisor: o.scan_step_divisor,
        }
    }
}

impl From<DsSearchOptions> for SearchOptions {
    fn from(o: DsSearchOptions) -> Self {
        SearchOptions {
            grid_points: o.grid_points,
            window_factor: o.window_factor,
            refine_tol: o.refine_tol,
            scan_step_divisor: o.scan_step_divisor,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DsStatus, String);

impl From<DemonError> for Failure {
    fn from(e: DemonError) -> Self {
        let status = match e.exit_code() {
            1 => DsStatus::InvalidArgument,
            2 => DsStatus::NumericalGuard,
            _ => DsStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DsStatus::NullPointer, format!("{what} is NULL"))
}

fn guard<F>(f: F) -> DsStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller guarantees `p` is NULL or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and, per the caller's contract, valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn options(opts: *const DsSearchOptions) -> SearchOptions {
    // SAFETY: caller guarantees `opts` is NULL or valid for reads.
    match unsafe { opts.as_ref() } {
        Some(o) => (*o).into(),
        None => SearchOptions::default(),
    }
}

unsafe fn emit_distribution(
    dist: FockDistribution,
    out: *mut *mut DsDistribution,
) -> Result<(), Failure> {
    let boxed = Box::into_raw(Box::new(DsDistribution(dist)));
    if out.is_null() {
        // SAFETY: reclaiming the box just created.
        drop(unsafe { Box::from_raw(boxed) });
        return Err(null("out"));
    }
    // SAFETY: non-null out pointer provided by the caller.
    unsafe { out.write(boxed) };
    Ok(())
}

fn optimum(r: OptimumReport) -> DsOptimum {
    DsOptimum {
        theta_star: r.theta_star.value(),
        p_success: r.p_success,
        seed_theta: r.seed_theta.value(),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn ds_search_options_default() -> DsSearchOptions {
    SearchOptions::default().into()
}

/// Thermal state with mean occupation `nbar` truncated at `n_max`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_thermal(
    nbar: f64,
    n_max: usize,
    out: *mut *mut DsDistribution,
) -> DsStatus {
    guard(|| unsafe { emit_distribution(thermal_distribution(nbar, n_max)?, out) })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_poisson(
    mean: f64,
    n_max: usize,
    out: *mut *mut DsDistribution,
) -> DsStatus {
    guard(|| unsafe { emit_distribution(poisson_distribution(mean, n_max)?, out) })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_fock(
    n: usize,
    n_max: usize,
    out: *mut *mut DsDistribution,
) -> DsStatus {
    guard(|| unsafe { emit_distribution(fock_distribution(n, n_max)?, out) })
}

/// Distribution over levels `0..len` with explicit leaked mass.
///
/// # Safety
/// `probs` must point to `len` readable doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_distribution_from_probs(
    probs: *const f64,
    len: usize,
    leak: f64,
    out: *mut *mut DsDistribution,
) -> DsStatus {
    guard(|| {
        if probs.is_null() {
            return Err(null("probs"));
        }
        // SAFETY: caller guarantees `len` readable elements.
        let slice = unsafe { std::slice::from_raw_parts(probs, len) };
        let dist = FockDistribution::from_parts(slice.to_vec(), leak)?;
        unsafe { emit_distribution(dist, out) }
    })
}

/// # Safety
/// `dist` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_distribution_free(dist: *mut DsDistribution) {
    if !dist.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(dist) });
    }
}

/// Number of stored levels, `n_max + 1`; 0 for NULL.
///
/// # Safety
/// `dist` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_distribution_len(dist: *const DsDistribution) -> usize {
    unsafe { dist.as_ref() }.map_or(0, |d| d.0.probs().len())
}

/// # Safety
/// `dist` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_distribution_leak(dist: *const DsDistribution) -> f64 {
    unsafe { dist.as_ref() }.map_or(f64::NAN, |d| d.0.leak())
}

/// Copies the probabilities into `buf`. `out_len` always receives the
/// required length; when `cap` is smaller nothing is copied and
/// `BufferTooSmall` is returned.
///
/// # Safety
/// `buf` must hold `cap` writable doubles; `out_len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_distribution_copy_probs(
    dist: *const DsDistribution,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> DsStatus {
    guard(|| {
        let d = unsafe { deref(dist, "dist") }?;
        let probs = d.0.probs();
        unsafe { write_out(out_len, probs.len(), "out_len") }?;
        if cap < probs.len() {
            return Err(Failure(
                DsStatus::BufferTooSmall,
                format!("buffer holds {cap} values, {} needed", probs.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        // SAFETY: `buf` holds at least `probs.len()` elements.
        unsafe { ptr::copy_nonoverlapping(probs.as_ptr(), buf, probs.len()) };
        Ok(())
    })
}

/// # Safety
/// `dist` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_moments(dist: *const DsDistribution, out: *mut DsMoments) -> DsStatus {
    guard(|| {
        let s = moments(&unsafe { deref(dist, "dist") }?.0);
        let m = DsMoments {
            mean: s.mean,
            variance: s.variance,
            g2: s.g2.unwrap_or(f64::NAN),
            fano: s.fano.unwrap_or(f64::NAN),
            mdr: s.mdr,
        };
        unsafe { write_out(out, m, "out") }
    })
}

/// Probability of exciting a ground-state qubit; `nonlinear` selects
/// two-quantum coupling.
///
/// # Safety
/// `dist` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_excitation_probability(
    dist: *const DsDistribution,
    theta: f64,
    nonlinear: bool,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let d = &unsafe { deref(dist, "dist") }?.0;
        let theta = InteractionAngle::new(theta)?;
        let p = if nonlinear {
            excitation_probability_nonlinear(d, theta)
        } else {
            excitation_probability_linear(d, theta)
        };
        unsafe { write_out(out, p, "out") }
    })
}

/// Global optimum of the linear excitation probability. `opts` may be NULL.
///
/// # Safety
/// `dist` must be a live handle; `opts` NULL or readable; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_optimal_theta_linear(
    dist: *const DsDistribution,
    opts: *const DsSearchOptions,
    out: *mut DsOptimum,
) -> DsStatus {
    guard(|| {
        let d = &unsafe { deref(dist, "dist") }?.0;
        let r = optimal_theta_linear(d, &unsafe { options(opts) })?;
        unsafe { write_out(out, optimum(r), "out") }
    })
}

/// First local maximum of the two-quantum excitation probability below pi/2.
///
/// # Safety
/// As for [`ds_optimal_theta_linear`].
#[no_mangle]
pub unsafe extern "C" fn ds_first_local_theta_nonlinear(
    dist: *const DsDistribution,
    opts: *const DsSearchOptions,
    out: *mut DsOptimum,
) -> DsStatus {
    guard(|| {
        let d = &unsafe { deref(dist, "dist") }?.0;
        let r = first_local_optimal_theta_nonlinear(d, &unsafe { options(opts) })?;
        unsafe { write_out(out, optimum(r), "out") }
    })
}

/// Best probability of charging a battery qubit from `dist`.
///
/// # Safety
/// As for [`ds_optimal_theta_linear`].
#[no_mangle]
pub unsafe extern "C" fn ds_charge_performance(
    dist: *const DsDistribution,
    opts: *const DsSearchOptions,
    out: *mut DsOptimum,
) -> DsStatus {
    guard(|| {
        let d = &unsafe { deref(dist, "dist") }?.0;
        let r = charge_performance(d, &unsafe { options(opts) })?;
        unsafe { write_out(out, optimum(r), "out") }
    })
}

/// `p^k`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_mass_production(p: f64, k: u32, out: *mut f64) -> DsStatus {
    guard(|| unsafe { write_out(out, mass_production(p, k)?, "out") })
}

#[no_mangle]
pub extern "C" fn ds_dawson(x: f64) -> f64 {
    demon_sim::dawson::dawson(x)
}

/// Runs `schedule` (a string of `L` and `N`) from `initial` under protocol
/// 1 or 2. `opts` may be NULL.
///
/// # Safety
/// `initial` must be a live handle, `schedule` a NUL-terminated string,
/// `opts` NULL or readable, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_run_schedule(
    initial: *const DsDistribution,
    schedule: *const c_char,
    protocol: u32,
    allow_ripple: bool,
    opts: *const DsSearchOptions,
    out: *mut *mut DsTrajectory,
) -> DsStatus {
    guard(|| {
        let init = &unsafe { deref(initial, "initial") }?.0;
        if schedule.is_null() {
            return Err(null("schedule"));
        }
        // SAFETY: caller passes a NUL-terminated string.
        let text = unsafe { CStr::from_ptr(schedule) }
            .to_str()
            .map_err(|_| Failure(DsStatus::InvalidArgument, "schedule is not UTF-8".into()))?;
        let protocol = match protocol {
            1 => Protocol::I,
            2 => Protocol::II,
            other => {
                return Err(Failure(
                    DsStatus::InvalidArgument,
                    format!("protocol must be 1 or 2, got {other}"),
                ))
            }
        };
        let sched = Schedule::parse(text, protocol, allow_ripple)?;
        let tr = run_schedule(init, &sched, &unsafe { options(opts) })?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: non-null out pointer.
        unsafe { out.write(Box::into_raw(Box::new(DsTrajectory(tr)))) };
        Ok(())
    })
}

/// # Safety
/// `traj` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_free(traj: *mut DsTrajectory) {
    if !traj.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Number of rounds; 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_len(traj: *const DsTrajectory) -> usize {
    unsafe { traj.as_ref() }.map_or(0, |t| t.0.rounds.len())
}

/// Record of round `index` (1-based).
///
/// # Safety
/// `traj` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_round(
    traj: *const DsTrajectory,
    index: usize,
    out: *mut DsRound,
) -> DsStatus {
    guard(|| {
        let t = &unsafe { deref(traj, "traj") }?.0;
        let r = index
            .checked_sub(1)
            .and_then(|i| t.rounds.get(i))
            .ok_or_else(|| {
                Failure(
                    DsStatus::InvalidArgument,
                    format!("round {index} outside 1..={}", t.rounds.len()),
                )
            })?;
        let rec = DsRound {
            index: r.index,
            kind: r.kind.symbol() as c_char,
            theta: r.theta_used.value(),
            p_success: r.p_success,
            mean: r.moments_after.mean,
            variance: r.moments_after.variance,
            leak: r.dist_after.leak(),
        };
        unsafe { write_out(out, rec, "out") }
    })
}

/// New handle holding the distribution after `index` rounds (0 = initial).
///
/// # Safety
/// `traj` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_trajectory_distribution(
    traj: *const DsTrajectory,
    index: usize,
    out: *mut *mut DsDistribution,
) -> DsStatus {
    guard(|| {
        let t = &unsafe { deref(traj, "traj") }?.0;
        if index > t.rounds.len() {
            return Err(Failure(
                DsStatus::InvalidArgument,
                format!("index {index} outside 0..={}", t.rounds.len()),
            ));
        }
        unsafe { emit_distribution(t.input_of(index + 1).clone(), out) }
    })
}
