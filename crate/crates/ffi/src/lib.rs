//! C ABI for lgen.
//!
//! Priors are opaque handles created by the `lgen_prior_*` constructors and
//! released with [`lgen_prior_free`]. Every fallible call returns an
//! [`LgenStatus`]; on failure [`lgen_last_error`] describes what went wrong
//! on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, size_t};
use lgen::fixtures::FixtureLibrary;
use lgen::numerics::{
    BetaMixturePrior, BetaParams, GridDistribution, GridSpec, RateMixturePrior, Scale, DEFAULT_RATE_HI, DEFAULT_RATE_LO,
};
use lgen::pragmatics::{endorse, endorse_expectation, endorse_fixed, interpret, FixedThresholdParams, SpeakerConfig};
use lgen::priors::{rate_from_frequency, Interval};
use lgen::semantics::{threshold_prior_for, ThresholdPrior, Utterance};
use lgen::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegeneratePrior = 3,
    VacuousUtterance = 4,
    InconsistentPrior = 5,
    Numerical = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for LgenStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DegeneratePrior(_) => LgenStatus::DegeneratePrior,
            Error::VacuousUtterance(_) => LgenStatus::VacuousUtterance,
            Error::InconsistentPrior(_) => LgenStatus::InconsistentPrior,
            Error::Numerical(_) => LgenStatus::Numerical,
            Error::Io(_) => LgenStatus::Io,
            _ => LgenStatus::InvalidArgument,
        }
    }
}

/// A discretized prior and its threshold prior.
pub struct LgenPrior {
    grid: GridDistribution,
    theta: ThresholdPrior,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: LgenStatus, msg: impl Into<String>) -> LgenStatus {
    set_error(msg.into());
    status
}

/// Run `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), LgenStatus>>(f: F) -> LgenStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LgenStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(LgenStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: lgen::Result<T>) -> Result<T, LgenStatus> {
    r.map_err(|e| fail(LgenStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), LgenStatus> {
    if p.is_null() {
        Err(fail(LgenStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, LgenStatus> {
    non_null(s, name)?;
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(LgenStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn prior_ref<'a>(p: *const LgenPrior) -> Result<&'a LgenPrior, LgenStatus> {
    non_null(p, "prior")?;
    Ok(&*p)
}

fn boxed(grid: GridDistribution, spec: &GridSpec) -> Result<*mut LgenPrior, LgenStatus> {
    let theta = lift(threshold_prior_for(spec))?;
    Ok(Box::into_raw(Box::new(LgenPrior { grid, theta })))
}

fn unit_spec(bins: size_t) -> Result<GridSpec, LgenStatus> {
    let g = GridSpec::unit(bins);
    lift(g.validate())?;
    Ok(g)
}

fn rate_spec(bins: size_t) -> Result<GridSpec, LgenStatus> {
    let g = GridSpec::log_rate(bins, DEFAULT_RATE_LO, DEFAULT_RATE_HI);
    lift(g.validate())?;
    Ok(g)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next lgen call on the same thread.
#[no_mangle]
pub extern "C" fn lgen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn lgen_status_str(status: LgenStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        LgenStatus::Ok => b"ok\0",
        LgenStatus::NullPointer => b"null pointer\0",
        LgenStatus::InvalidArgument => b"invalid argument\0",
        LgenStatus::DegeneratePrior => b"degenerate prior\0",
        LgenStatus::VacuousUtterance => b"vacuous utterance\0",
        LgenStatus::InconsistentPrior => b"inconsistent prior\0",
        LgenStatus::Numerical => b"numerical failure\0",
        LgenStatus::Io => b"io error\0",
        LgenStatus::BufferTooSmall => b"buffer too small\0",
        LgenStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Prevalence prior: weight `phi` on Beta with mean `gamma` and
/// concentration `xi`, the rest on the near-zero component.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lgen_prior_beta_mixture(
    phi: f64,
    gamma: f64,
    xi: f64,
    bins: size_t,
    out: *mut *mut LgenPrior,
) -> LgenStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = unit_spec(bins)?;
        let prior = lift(BetaParams::new(gamma, xi).and_then(|b| BetaMixturePrior::new(phi, b)))?;
        *out = boxed(lift(prior.discretize(&spec))?, &spec)?;
        Ok(())
    })
}

/// Rate prior (events/year): weight `phi` on LogNormal(`mu`, `sigma`), the
/// rest at the floor rate.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn lgen_prior_rate_mixture(
    phi: f64,
    mu: f64,
    sigma: f64,
    bins: size_t,
    out: *mut *mut LgenPrior,
) -> LgenStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = rate_spec(bins)?;
        let prior = lift(RateMixturePrior::new(phi, mu, sigma))?;
        *out = boxed(lift(prior.discretize(&spec))?, &spec)?;
        Ok(())
    })
}

/// Named fixture prior, e.g. "lays eggs" or "runs".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lgen_prior_fixture(name: *const c_char, bins: size_t, out: *mut *mut LgenPrior) -> LgenStatus {
    guard(|| {
        non_null(out, "out")?;
        let name = read_str(name, "name")?;
        let (unit, rate) = (unit_spec(bins)?, rate_spec(bins)?);
        let grid = lift(FixtureLibrary.grid(name, &unit, &rate))?;
        let spec = if grid.scale() == Scale::Unit { unit } else { rate };
        *out = boxed(grid, &spec)?;
        Ok(())
    })
}

/// Release a prior. Null is ignored.
///
/// # Safety
/// `prior` must come from an `lgen_prior_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn lgen_prior_free(prior: *mut LgenPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// Number of grid points.
///
/// # Safety
/// `prior` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lgen_prior_len(prior: *const LgenPrior) -> size_t {
    if prior.is_null() {
        0
    } else {
        (*prior).grid.len()
    }
}

/// Copy grid support and mass into caller buffers of length `len`.
///
/// # Safety
/// `support` and `mass` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lgen_prior_grid(
    prior: *const LgenPrior,
    support: *mut f64,
    mass: *mut f64,
    len: size_t,
) -> LgenStatus {
    guard(|| {
        let p = prior_ref(prior)?;
        non_null(support, "support")?;
        non_null(mass, "mass")?;
        if len < p.grid.len() {
            return Err(fail(LgenStatus::BufferTooSmall, format!("need {} slots, got {len}", p.grid.len())));
        }
        ptr::copy_nonoverlapping(p.grid.support().as_ptr(), support, p.grid.len());
        ptr::copy_nonoverlapping(p.grid.mass().as_ptr(), mass, p.grid.len());
        Ok(())
    })
}

/// Listener posterior after `utterance` ("gen", "silence", "some", "most",
/// "quant:<t>"); writes the posterior mass into `mass` (length `len`) when
/// it is non-null and the posterior mean into `mean` when non-null.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn lgen_interpret(
    prior: *const LgenPrior,
    utterance: *const c_char,
    mass: *mut f64,
    len: size_t,
    mean: *mut f64,
) -> LgenStatus {
    guard(|| {
        let p = prior_ref(prior)?;
        let u: Utterance = lift(read_str(utterance, "utterance")?.parse())?;
        let post = lift(interpret(&u, &p.grid, &p.theta))?;
        if !mass.is_null() {
            if len < post.len() {
                return Err(fail(LgenStatus::BufferTooSmall, format!("need {} slots, got {len}", post.len())));
            }
            ptr::copy_nonoverlapping(post.mass().as_ptr(), mass, post.len());
        }
        if !mean.is_null() {
            *mean = post.mean();
        }
        Ok(())
    })
}

/// Endorsement probability for a known referent prevalence or rate.
///
/// # Safety
/// `prior` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lgen_endorse(prior: *const LgenPrior, referent: f64, lambda: f64, out: *mut f64) -> LgenStatus {
    guard(|| {
        let p = prior_ref(prior)?;
        non_null(out, "out")?;
        let cfg = lift(SpeakerConfig::new(lambda))?;
        *out = lift(endorse(referent, &p.grid, &p.theta, &cfg))?;
        Ok(())
    })
}

/// Endorsement when the speaker's referent belief is a distribution over
/// the prior's grid (`referent_mass`, length `len`).
///
/// # Safety
/// `referent_mass` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lgen_endorse_expectation(
    prior: *const LgenPrior,
    referent_mass: *const f64,
    len: size_t,
    lambda: f64,
    out: *mut f64,
) -> LgenStatus {
    guard(|| {
        let p = prior_ref(prior)?;
        non_null(referent_mass, "referent_mass")?;
        non_null(out, "out")?;
        if len != p.grid.len() {
            return Err(fail(LgenStatus::InvalidArgument, format!("referent has {len} points, prior {}", p.grid.len())));
        }
        let weights = std::slice::from_raw_parts(referent_mass, len).to_vec();
        let referent = lift(GridDistribution::from_weights(p.grid.scale(), p.grid.support().to_vec(), weights))?;
        let cfg = lift(SpeakerConfig::new(lambda))?;
        *out = lift(endorse_expectation(&referent, &p.grid, &p.theta, &cfg))?;
        Ok(())
    })
}

/// Endorsement of the fixed-threshold speaker with guessing rate `noise`.
///
/// # Safety
/// `prior` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lgen_endorse_fixed(
    prior: *const LgenPrior,
    referent: f64,
    theta_star: f64,
    noise: f64,
    lambda: f64,
    out: *mut f64,
) -> LgenStatus {
    guard(|| {
        let p = prior_ref(prior)?;
        non_null(out, "out")?;
        let params = lift(FixedThresholdParams::new(theta_star, noise))?;
        let cfg = lift(SpeakerConfig::new(lambda))?;
        *out = lift(endorse_fixed(referent, &p.grid, &params, &cfg))?;
        Ok(())
    })
}

/// Events/year for "`times` times in `interval`" ("week", "month",
/// "5 years", ...).
///
/// # Safety
/// `interval` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lgen_rate_from_frequency(times: f64, interval: *const c_char, out: *mut f64) -> LgenStatus {
    guard(|| {
        non_null(out, "out")?;
        let interval: Interval = lift(read_str(interval, "interval")?.parse())?;
        *out = lift(rate_from_frequency(times, interval))?;
        Ok(())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn lgen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
