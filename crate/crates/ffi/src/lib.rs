//! C ABI over the adiaband core.
//!
//! Objects cross the boundary as opaque handles; every call returns an
//! [`AdiabandStatus`] and writes results through out-pointers. On failure the
//! message is available from [`adiaband_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adiaband::bounds::theorem3_bound;
use adiaband::family::{grover_family_for, interpolating_family, random_smooth_family, GroverProblem, GroverRepresentation, HamiltonianFamily};
use adiaband::harness::{run_single, write_run_csv, RunConfig};
use adiaband::operator::{CMatrix, HermitianOperator};
use adiaband::propagate::{adiabatic_diagnostics, evolve_real, track_grid, TimeGrid};
use adiaband::schedule::Schedule;
use adiaband::spectral::{decompose, BandSelector, BandTracker};
use adiaband::{Error, NumericalPolicy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdiabandStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GapCollapse = 3,
    NumericalFailure = 4,
    ConfigError = 5,
    IoError = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A Hamiltonian family `s -> H(s)` with the ground band tracked.
pub struct AdiabandFamily {
    family: HamiltonianFamily,
    policy: NumericalPolicy,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AdiabandStatus {
    match e {
        Error::GapCollapse { .. } | Error::BandDiscontinuity { .. } | Error::NonPositiveGap { .. } => AdiabandStatus::GapCollapse,
        Error::Config { .. } => AdiabandStatus::ConfigError,
        Error::Io(_) => AdiabandStatus::IoError,
        Error::NotSquare { .. }
        | Error::EmptyOperator
        | Error::NonFiniteEntry { .. }
        | Error::NonHermitianInput { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyBand
        | Error::InvalidBand(_)
        | Error::EndpointViolation { .. }
        | Error::DimensionTooLarge { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidGrid(_)
        | Error::TooFewContourNodes(_)
        | Error::InsufficientPoints { .. }
        | Error::NonPositiveValue { .. } => AdiabandStatus::InvalidArgument,
        _ => AdiabandStatus::NumericalFailure,
    }
}

enum Failure {
    Status(AdiabandStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(AdiabandStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure::Status(AdiabandStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AdiabandStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdiabandStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            AdiabandStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn family_ref<'a>(f: *const AdiabandFamily) -> Result<&'a AdiabandFamily, Failure> {
    f.as_ref().ok_or_else(|| null("family"))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn boxed(family: HamiltonianFamily) -> *mut AdiabandFamily {
    Box::into_raw(Box::new(AdiabandFamily {
        family,
        policy: NumericalPolicy::default(),
    }))
}

fn ground_tracker(f: &AdiabandFamily) -> Result<BandTracker, Failure> {
    Ok(BandTracker::new(&f.family, &BandSelector::ground(), &f.policy)?)
}

unsafe fn read_matrix(re: *const f64, im: *const f64, dim: usize, what: &str) -> Result<HermitianOperator, Failure> {
    if re.is_null() {
        return Err(null(what));
    }
    let re = std::slice::from_raw_parts(re, dim * dim);
    let im = (!im.is_null()).then(|| std::slice::from_raw_parts(im, dim * dim));
    let m = CMatrix::from_fn(dim, dim, |i, j| {
        let k = i * dim + j;
        adiaband::operator::C64::new(re[k], im.map_or(0.0, |v| v[k]))
    });
    Ok(HermitianOperator::new(m, &NumericalPolicy::default())?)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn adiaband_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn adiaband_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Grover search family on `n` qubits (full `2^n` representation, marked
/// state 0) under the named schedule, e.g. `"linear"` or `"adaptive:p=1.5"`.
///
/// # Safety
/// `schedule` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiaband_grover_new(n: u32, schedule: *const c_char, out: *mut *mut AdiabandFamily) -> AdiabandStatus {
    guard(|| {
        let name = str_arg(schedule, "schedule")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let problem = GroverProblem::new(n, GroverRepresentation::Full)?;
        let sched = Schedule::parse(name, Some(&problem.gap_profile()))?;
        let (family, _) = grover_family_for(&problem, sched)?;
        put(out, boxed(family), "out")
    })
}

/// `H(s) = (1 - f(s)) H0 + f(s) H1` from row-major `dim x dim` matrices.
/// The imaginary parts may be null (real matrices).
///
/// # Safety
/// Each non-null matrix pointer must reference `dim * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn adiaband_interpolating_new(
    dim: usize,
    h0_re: *const f64,
    h0_im: *const f64,
    h1_re: *const f64,
    h1_im: *const f64,
    schedule: *const c_char,
    out: *mut *mut AdiabandFamily,
) -> AdiabandStatus {
    guard(|| {
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let name = str_arg(schedule, "schedule")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h0 = read_matrix(h0_re, h0_im, dim, "h0_re")?;
        let h1 = read_matrix(h1_re, h1_im, dim, "h1_re")?;
        if name.starts_with("adaptive") {
            return Err(invalid("adaptive schedules are only available for Grover families here"));
        }
        let sched = Schedule::parse(name, None)?;
        put(out, boxed(interpolating_family(&h0, &h1, sched)?), "out")
    })
}

/// Seeded random smooth family of dimension `dim`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiaband_random_new(dim: usize, seed: u64, harmonics: usize, out: *mut *mut AdiabandFamily) -> AdiabandStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, boxed(random_smooth_family(dim, seed, harmonics)?), "out")
    })
}

/// Releases a family; null is ignored.
///
/// # Safety
/// `family` must come from one of the constructors and not be used again.
#[no_mangle]
pub unsafe extern "C" fn adiaband_family_free(family: *mut AdiabandFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// # Safety
/// `family` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiaband_family_dim(family: *const AdiabandFamily, out: *mut usize) -> AdiabandStatus {
    guard(|| put(out, family_ref(family)?.family.dim(), "out"))
}

/// Eigenvalues of `H(s)`, ascending, into `buf[0..dim]`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn adiaband_family_spectrum(family: *const AdiabandFamily, s: f64, buf: *mut f64, len: usize) -> AdiabandStatus {
    guard(|| {
        let f = family_ref(family)?;
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("s = {s} is outside [0, 1]")));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let spec = decompose(&f.family.h(s), &f.policy)?;
        if len < spec.eigenvalues.len() {
            return Err(Failure::Status(
                AdiabandStatus::BufferTooSmall,
                format!("buffer holds {len}, need {}", spec.eigenvalues.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len)[..spec.eigenvalues.len()].copy_from_slice(&spec.eigenvalues);
        Ok(())
    })
}

/// Gap between the ground band and the rest of the spectrum at `s`.
///
/// # Safety
/// `family` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiaband_family_gap(family: *const AdiabandFamily, s: f64, out: *mut f64) -> AdiabandStatus {
    guard(|| {
        let f = family_ref(family)?;
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("s = {s} is outside [0, 1]")));
        }
        put(out, ground_tracker(f)?.bundle_at(s)?.gap, "out")
    })
}

/// Evolves from `P(0)` for time scale `tau` on `grid_points` grid points and
/// reports the leakage out of the ground band at `s = 1`.
///
/// # Safety
/// `family` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiaband_evolve(
    family: *const AdiabandFamily,
    tau: f64,
    grid_points: usize,
    transition_prob: *mut f64,
    proj_distance: *mut f64,
) -> AdiabandStatus {
    guard(|| {
        let f = family_ref(family)?;
        if transition_prob.is_null() || proj_distance.is_null() {
            return Err(null("output"));
        }
        let grid = TimeGrid::uniform(grid_points)?;
        let tracker = ground_tracker(f)?;
        let bundles = track_grid(&tracker, &grid)?;
        let real = evolve_real(&f.family, tau, &grid, &f.policy)?;
        let last = *adiabatic_diagnostics(&real, &bundles)?.last().expect("grid is non-empty");
        put(transition_prob, last.transition_prob, "transition_prob")?;
        put(proj_distance, last.proj_distance, "proj_distance")
    })
}

/// Tight and coarse first-order bounds on the ground-band leakage at `s`.
///
/// # Safety
/// `family` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiaband_theorem3_bound(
    family: *const AdiabandFamily,
    tau: f64,
    s: f64,
    quadrature_points: usize,
    tight: *mut f64,
    coarse: *mut f64,
) -> AdiabandStatus {
    guard(|| {
        let f = family_ref(family)?;
        if tight.is_null() || coarse.is_null() {
            return Err(null("output"));
        }
        let b = theorem3_bound(&ground_tracker(f)?, tau, s, quadrature_points)?;
        put(tight, b.a_tight, "tight")?;
        put(coarse, b.a_coarse, "coarse")
    })
}

/// Runs a JSON run configuration and returns the per-point CSV as a newly
/// allocated string (free with [`adiaband_string_free`]).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiaband_run_config_json(config_json: *const c_char, out: *mut *mut c_char) -> AdiabandStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::from_json_str(text)?;
        let reports = run_single(&config)?;
        let mut buf = Vec::new();
        write_run_csv(&mut buf, &reports)?;
        let c = CString::new(buf).map_err(|_| invalid("output contains NUL"))?;
        put(out, c.into_raw(), "out")
    })
}

/// Frees a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn adiaband_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
