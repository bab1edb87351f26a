//! Real and adiabatic evolutions of `i U' = tau H U`, the wave operator
//! `Omega = U_A^dag U`, and the dynamical identity checks.

use crate::error::{Error, Result};
use crate::family::HamiltonianFamily;
use crate::operator::{comm, hermitian_eigen, norm, CMatrix, UnitaryOperator, C64, I};
use crate::policy::NumericalPolicy;
use crate::quadrature::cumulative_simpson;
use crate::spectral::{twiddle, BandTracker, ProjectorBundle};

/// Uniform grid on `[0, 1]` including both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    s: Vec<f64>,
    step: f64,
}

impl TimeGrid {
    pub const MIN_POINTS: usize = 64;

    pub fn uniform(points: usize) -> Result<Self> {
        if points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points, got {points}",
                Self::MIN_POINTS
            )));
        }
        let step = 1.0 / (points - 1) as f64;
        let mut s: Vec<f64> = (0..points).map(|k| k as f64 * step).collect();
        s[points - 1] = 1.0;
        Ok(Self { s, step })
    }

    pub fn points(&self) -> usize {
        self.s.len()
    }

    pub fn intervals(&self) -> usize {
        self.s.len() - 1
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// The grid with twice as many intervals.
    pub fn refined(&self) -> Self {
        Self::uniform(2 * self.intervals() + 1).expect("refining a valid grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Real,
    Adiabatic,
}

/// How many exponential-midpoint steps to take per grid interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Substeps {
    /// Start from the phase limit and double until `U(1)` self-converges.
    #[default]
    Auto,
    Fixed(usize),
}

/// Propagator sampled on the output grid.
#[derive(Debug, Clone)]
pub struct PropagatorTrace {
    pub tau: f64,
    pub grid: TimeGrid,
    pub u: Vec<UnitaryOperator>,
    pub kind: TraceKind,
    /// Steps per grid interval actually used.
    pub substeps: usize,
    /// `||U_N(1) - U_2N(1)||` from the last refinement, when refined.
    pub self_change: Option<f64>,
}

impl PropagatorTrace {
    pub fn last(&self) -> &UnitaryOperator {
        self.u.last().expect("trace is never empty")
    }

    pub fn total_steps(&self) -> usize {
        self.substeps * self.grid.intervals()
    }
}

/// Options for one evolution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolveOptions {
    pub substeps: Substeps,
}

/// `exp(-i dt G)` for Hermitian `G`.
fn step_unitary(g: &CMatrix, dt: f64, policy: &NumericalPolicy) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(g, policy.eigen_max_iter)?;
    let mut scaled = vectors.clone();
    let n = values.len();
    for (k, &l) in values.iter().enumerate() {
        let w = C64::from_polar(1.0, -dt * l);
        for r in 0..n {
            scaled[(r, k)] *= w;
        }
    }
    Ok(scaled * vectors.adjoint())
}

/// Largest `lambda_max - lambda_min` of `H` over the grid points.
fn spectral_spread(family: &HamiltonianFamily, grid: &TimeGrid, policy: &NumericalPolicy) -> Result<f64> {
    let mut spread = 0.0f64;
    for &s in grid.s_values() {
        let (v, _) = hermitian_eigen(&family.h(s), policy.eigen_max_iter)?;
        spread = spread.max(v[v.len() - 1] - v[0]);
    }
    Ok(spread)
}

fn initial_substeps(phase_rate: f64, grid: &TimeGrid, policy: &NumericalPolicy) -> usize {
    let phase = phase_rate * grid.step();
    ((phase / policy.max_step_phase).ceil() as usize).max(1)
}

/// Steps `U' = -i G(s) U` with the exponential midpoint rule.
fn march(
    generator: &dyn Fn(f64) -> Result<CMatrix>,
    dim: usize,
    grid: &TimeGrid,
    substeps: usize,
    policy: &NumericalPolicy,
) -> Result<Vec<CMatrix>> {
    let mut u = CMatrix::identity(dim, dim);
    let mut out = Vec::with_capacity(grid.points());
    out.push(u.clone());
    let s = grid.s_values();
    for k in 0..grid.intervals() {
        let dt = (s[k + 1] - s[k]) / substeps as f64;
        for j in 0..substeps {
            let mid = s[k] + (j as f64 + 0.5) * dt;
            u = step_unitary(&generator(mid)?, dt, policy)? * u;
        }
        out.push(u.clone());
    }
    Ok(out)
}

fn evolve_with_generator(
    generator: &dyn Fn(f64) -> Result<CMatrix>,
    dim: usize,
    phase_rate: f64,
    tau: f64,
    grid: &TimeGrid,
    kind: TraceKind,
    options: EvolveOptions,
    policy: &NumericalPolicy,
) -> Result<PropagatorTrace> {
    let wrap = |u: Vec<CMatrix>, substeps: usize, self_change: Option<f64>| PropagatorTrace {
        tau,
        grid: grid.clone(),
        u: u.into_iter().map(UnitaryOperator::from_matrix_unchecked).collect(),
        kind,
        substeps,
        self_change,
    };
    let intervals = grid.intervals();
    match options.substeps {
        Substeps::Fixed(n) => {
            let n = n.max(1);
            if n * intervals > policy.max_steps {
                return Err(Error::StepLimitExceeded {
                    max_steps: policy.max_steps,
                    change: f64::NAN,
                });
            }
            Ok(wrap(march(generator, dim, grid, n, policy)?, n, None))
        }
        Substeps::Auto => {
            let mut sub = initial_substeps(phase_rate, grid, policy);
            if sub * intervals > policy.max_steps {
                return Err(Error::StepLimitExceeded {
                    max_steps: policy.max_steps,
                    change: f64::NAN,
                });
            }
            let mut coarse = march(generator, dim, grid, sub, policy)?;
            let mut change = f64::NAN;
            loop {
                if 2 * sub * intervals > policy.max_steps {
                    return Err(Error::StepLimitExceeded {
                        max_steps: policy.max_steps,
                        change,
                    });
                }
                let fine = march(generator, dim, grid, 2 * sub, policy)?;
                change = norm(&(coarse.last().unwrap() - fine.last().unwrap()));
                sub *= 2;
                if change <= policy.step_tol {
                    return Ok(wrap(fine, sub, Some(change)));
                }
                coarse = fine;
            }
        }
    }
}

/// Solves `i U' = tau H(s) U`, `U(0) = I`.
pub fn evolve_real(family: &HamiltonianFamily, tau: f64, grid: &TimeGrid, policy: &NumericalPolicy) -> Result<PropagatorTrace> {
    evolve_real_with(family, tau, grid, policy, EvolveOptions::default())
}

pub fn evolve_real_with(
    family: &HamiltonianFamily,
    tau: f64,
    grid: &TimeGrid,
    policy: &NumericalPolicy,
    options: EvolveOptions,
) -> Result<PropagatorTrace> {
    check_tau(tau)?;
    let dim = family.dim();
    if tau == 0.0 {
        return Ok(PropagatorTrace {
            tau,
            grid: grid.clone(),
            u: vec![UnitaryOperator::identity(dim); grid.points()],
            kind: TraceKind::Real,
            substeps: 1,
            self_change: Some(0.0),
        });
    }
    let rate = tau * spectral_spread(family, grid, policy)?;
    let generator = |s: f64| -> Result<CMatrix> { Ok(family.h(s) * C64::new(tau, 0.0)) };
    evolve_with_generator(&generator, dim, rate, tau, grid, TraceKind::Real, options, policy)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be finite and non-negative, got {tau}")));
    }
    Ok(())
}

/// Generator of the adiabatic evolution, `tau H + i [P', P]`.
pub fn adiabatic_generator(tau: f64, h: &CMatrix, dh: &CMatrix, bundle: &ProjectorBundle) -> CMatrix {
    let pdot = twiddle(dh, bundle);
    h * C64::new(tau, 0.0) + comm(&pdot, &bundle.p) * I
}

/// Solves `i U_A' = (tau H + i [P', P]) U_A`, which transports the band
/// projector exactly: `U_A(s) P(0) = P(s) U_A(s)`.
pub fn evolve_adiabatic(tracker: &BandTracker, tau: f64, grid: &TimeGrid, policy: &NumericalPolicy) -> Result<PropagatorTrace> {
    evolve_adiabatic_with(tracker, tau, grid, policy, EvolveOptions::default())
}

pub fn evolve_adiabatic_with(
    tracker: &BandTracker,
    tau: f64,
    grid: &TimeGrid,
    policy: &NumericalPolicy,
    options: EvolveOptions,
) -> Result<PropagatorTrace> {
    check_tau(tau)?;
    let family = tracker.family();
    let bundles = tracker.track(grid.s_values())?;
    let mut rate = 0.0f64;
    for (b, &s) in bundles.iter().zip(grid.s_values()) {
        let e = &b.spectral.eigenvalues;
        let pdot = twiddle(&family.eval(s).dh, b);
        rate = rate.max(tau * (e[e.len() - 1] - e[0]) + 2.0 * norm(&pdot));
    }
    let generator = |s: f64| -> Result<CMatrix> {
        let point = family.eval(s);
        let bundle = tracker.bundle_for(&point.h, s)?;
        Ok(adiabatic_generator(tau, &point.h, &point.dh, &bundle))
    };
    evolve_with_generator(&generator, family.dim(), rate, tau, grid, TraceKind::Adiabatic, options, policy)
}

/// `Omega(s) = U_A(s)^dag U(s)`.
#[derive(Debug, Clone)]
pub struct WaveOperatorTrace {
    pub tau: f64,
    pub grid: TimeGrid,
    pub omega: Vec<CMatrix>,
}

pub fn wave_operator(real: &PropagatorTrace, adiabatic: &PropagatorTrace) -> Result<WaveOperatorTrace> {
    if real.grid != adiabatic.grid || real.tau != adiabatic.tau || real.u.len() != adiabatic.u.len() {
        return Err(Error::GridMismatch);
    }
    let omega = real
        .u
        .iter()
        .zip(&adiabatic.u)
        .map(|(u, ua)| ua.adjoint().into_matrix() * u.matrix())
        .collect();
    Ok(WaveOperatorTrace {
        tau: real.tau,
        grid: real.grid.clone(),
        omega,
    })
}

/// Pointwise `||Omega(s) - (I - int_0^s K Omega)||` with
/// `K = U_A^dag [P', P] U_A`, the integral by cumulative Simpson.
pub fn volterra_residuals(
    wave: &WaveOperatorTrace,
    adiabatic: &PropagatorTrace,
    tracker: &BandTracker,
    bundles: &[ProjectorBundle],
) -> Result<Vec<f64>> {
    if wave.grid != adiabatic.grid || bundles.len() != wave.grid.points() {
        return Err(Error::GridMismatch);
    }
    let family = tracker.family();
    let n = family.dim();
    let integrand: Vec<CMatrix> = wave
        .grid
        .s_values()
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let b = &bundles[k];
            let pdot = twiddle(&family.eval(s).dh, b);
            let ua = adiabatic.u[k].matrix();
            ua.adjoint() * comm(&pdot, &b.p) * ua * &wave.omega[k]
        })
        .collect();
    let integral = cumulative_simpson(&integrand, wave.grid.step(), CMatrix::zeros(n, n));
    Ok(wave
        .omega
        .iter()
        .zip(&integral)
        .map(|(o, i)| norm(&(o - CMatrix::identity(n, n) + i)))
        .collect())
}

/// Maximum over the grid of [`volterra_residuals`].
pub fn volterra_residual(wave: &WaveOperatorTrace, adiabatic: &PropagatorTrace, tracker: &BandTracker) -> Result<f64> {
    let bundles = tracker.track(wave.grid.s_values())?;
    Ok(volterra_residuals(wave, adiabatic, tracker, &bundles)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Pointwise `||U_A(s) P(0) - P(s) U_A(s)||`.
pub fn intertwining_residuals(adiabatic: &PropagatorTrace, bundles: &[ProjectorBundle]) -> Result<Vec<f64>> {
    if bundles.len() != adiabatic.u.len() {
        return Err(Error::GridMismatch);
    }
    let p0 = &bundles[0].p;
    Ok(adiabatic
        .u
        .iter()
        .zip(bundles)
        .map(|(u, b)| norm(&(u.matrix() * p0 - &b.p * u.matrix())))
        .collect())
}

/// Transition probability and projector distance at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostic {
    /// `||Q(s) U(s) P(0)||^2`: the worst-case leakage out of the band.
    pub transition_prob: f64,
    /// `||U(s) P(0) U(s)^dag - P(s)||`.
    pub proj_distance: f64,
}

pub fn adiabatic_diagnostics(real: &PropagatorTrace, bundles: &[ProjectorBundle]) -> Result<Vec<Diagnostic>> {
    if bundles.len() != real.u.len() {
        return Err(Error::GridMismatch);
    }
    let p0 = &bundles[0].p;
    Ok(real
        .u
        .iter()
        .zip(bundles)
        .map(|(u, b)| {
            let up0 = u.matrix() * p0;
            let leak = norm(&(&b.q * &up0));
            let pt = &up0 * u.matrix().adjoint();
            Diagnostic {
                transition_prob: leak * leak,
                proj_distance: norm(&(pt - &b.p)),
            }
        })
        .collect())
}

/// Bundles along the grid (continuity-checked), for reuse across diagnostics.
pub fn track_grid(tracker: &BandTracker, grid: &TimeGrid) -> Result<Vec<ProjectorBundle>> {
    tracker.track(grid.s_values())
}
