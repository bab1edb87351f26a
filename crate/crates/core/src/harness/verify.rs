//! The identity and inequality suite behind `adiaband verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{bound_profile, expansion_residual, lemma8_chain, twiddle_norm_check};
use crate::error::Result;
use crate::family::{grover_family, random_smooth_family, GroverRepresentation, HamiltonianFamily};
use crate::operator::{comm, norm, random, spectral_decompose, CMatrix, HermitianOperator};
use crate::policy::NumericalPolicy;
use crate::propagate::{
    adiabatic_diagnostics, evolve_adiabatic, evolve_real, intertwining_residuals, track_grid, volterra_residuals,
    wave_operator, TimeGrid,
};
use crate::schedule::{linear_schedule, Schedule};
use crate::spectral::{
    band_projector, g_operator, g_operator_algebraic, projector_derivative_fd, twiddle, twiddle_contour_oracle, BandSelector,
    BandTracker, ContourSpec, ProjectorBundle,
};

/// The twiddle map under test; replaceable so that a broken implementation
/// can be shown to fail the suite.
pub type TwiddleFn = fn(&CMatrix, &ProjectorBundle) -> CMatrix;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Run only checks whose name contains this string.
    pub filter: Option<String>,
    pub twiddle: TwiddleFn,
    /// Instances per property sweep.
    pub instances: usize,
    pub policy: NumericalPolicy,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            filter: None,
            twiddle,
            instances: 100,
            policy: NumericalPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed defect (or violation count for inequality sweeps).
    pub value: f64,
    pub tolerance: f64,
    pub instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Worst value over a set of instances.
struct Outcome {
    value: f64,
    instances: usize,
}

impl Outcome {
    fn new() -> Self {
        Self {
            value: 0.0,
            instances: 0,
        }
    }

    fn add(&mut self, v: f64) {
        self.value = if v.is_nan() { f64::NAN } else { self.value.max(v) };
        self.instances += 1;
    }
}

/// A Hermitian operator whose spectrum has a band in `[0, 0.3]` with gap at
/// least `0.5` on both sides, some band eigenvalues repeated.
fn banded_instance(seed: u64) -> (HermitianOperator, ProjectorBundle, CMatrix, CMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(3..=8);
    let inside = rng.gen_range(1..dim);
    let mut spectrum = Vec::with_capacity(dim);
    for k in 0..inside {
        if k > 0 && rng.gen_bool(0.3) {
            spectrum.push(spectrum[k - 1]);
        } else {
            spectrum.push(rng.gen_range(0.0..0.3));
        }
    }
    for _ in inside..dim {
        spectrum.push(if rng.gen_bool(0.5) {
            rng.gen_range(-2.0..-0.5)
        } else {
            rng.gen_range(0.8..2.0)
        });
    }
    let h = HermitianOperator::symmetrized(&random::hermitian_with_spectrum(&mut rng, &spectrum));
    let spec = spectral_decompose(&h, 1e-9).expect("finite spectrum");
    let bundle = band_projector(&spec, &BandSelector::Window { lo: -0.1, hi: 0.4 }, &NumericalPolicy::default())
        .expect("band is separated by construction");
    let x = random::matrix(&mut rng, dim);
    let y = random::matrix(&mut rng, dim);
    (h, bundle, x, y)
}

/// Seeded random families with a tracked band; instances whose band closes
/// along `[0, 1]` are skipped.
fn family_fleet(count: usize, policy: &NumericalPolicy) -> Vec<BandTracker> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count && seed < 50 * count as u64 + 50 {
        let dim = 3 + (seed % 6) as usize;
        let band = if seed % 3 == 0 {
            BandSelector::Clusters(vec![0, 1])
        } else {
            BandSelector::ground()
        };
        seed += 1;
        let Ok(f) = random_smooth_family(dim, seed, 2) else {
            continue;
        };
        let Ok(t) = BandTracker::new(&f, &band, policy) else {
            continue;
        };
        let s: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        match t.track(&s) {
            Ok(b) if b.iter().all(|b| b.gap > 0.05) => out.push(t),
            _ => {}
        }
    }
    out
}

fn grover_tracker(n: u32, schedule: Schedule, policy: &NumericalPolicy) -> Result<BandTracker> {
    let (f, _) = grover_family(n, schedule, GroverRepresentation::Full)?;
    BandTracker::new(&f, &BandSelector::ground(), policy)
}

fn random_tracker(dim: usize, seed: u64, policy: &NumericalPolicy) -> Result<BandTracker> {
    let f: HamiltonianFamily = random_smooth_family(dim, seed, 2)?;
    BandTracker::new(&f, &BandSelector::ground(), policy)
}

type CheckFn<'a> = Box<dyn Fn(&VerifyOptions) -> Result<Outcome> + 'a>;

fn checks<'a>() -> Vec<(&'static str, f64, CheckFn<'a>)> {
    vec![
        (
            "lemma1.intertwining",
            1e-6,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                let grid = TimeGrid::uniform(256)?;
                for (t, tau) in [
                    (grover_tracker(2, linear_schedule(), &o.policy)?, 20.0),
                    (grover_tracker(3, linear_schedule(), &o.policy)?, 100.0),
                    (random_tracker(6, 7, &o.policy)?, 10.0),
                ] {
                    let ad = evolve_adiabatic(&t, tau, &grid, &o.policy)?;
                    let b = track_grid(&t, &grid)?;
                    out.add(intertwining_residuals(&ad, &b)?.into_iter().fold(0.0, f64::max));
                }
                Ok(out)
            }),
        ),
        (
            "lemma2.commutator",
            1e-8,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                for seed in 0..o.instances as u64 {
                    let (h, b, x, _) = banded_instance(seed);
                    let xt = (o.twiddle)(&x, &b);
                    let lhs = comm(h.matrix(), &xt);
                    let rhs = &b.p * &x - &x * &b.p;
                    out.add(norm(&(lhs - rhs)));
                }
                Ok(out)
            }),
        ),
        (
            "lemma2.off_diagonal",
            1e-9,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                for seed in 0..o.instances as u64 {
                    let (_, b, x, _) = banded_instance(seed);
                    let xt = (o.twiddle)(&x, &b);
                    out.add(norm(&(&b.p * &xt * &b.p)).max(norm(&(&b.q * &xt * &b.q))));
                }
                Ok(out)
            }),
        ),
        (
            "lemma5.contour",
            1e-8,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                for seed in 0..o.instances as u64 {
                    let (h, b, x, _) = banded_instance(seed);
                    let oracle = twiddle_contour_oracle(&x, &h, &b, &ContourSpec::default(), &o.policy)?;
                    let xt = (o.twiddle)(&x, &b);
                    out.add(norm(&(xt - &oracle)) / norm(&oracle).max(1e-300));
                }
                Ok(out)
            }),
        ),
        (
            "g_operator",
            1e-7,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                for seed in 0..o.instances as u64 {
                    let (h, b, x, y) = banded_instance(seed);
                    let quad = g_operator(&x, &y, &h, &b, &ContourSpec::default(), &o.policy)?;
                    out.add(norm(&(quad - g_operator_algebraic(&x, &y, &b))));
                }
                Ok(out)
            }),
        ),
        (
            "lemma6.projector_derivative",
            1e-6,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                let fleet = family_fleet(o.instances.div_ceil(5), &o.policy);
                for t in &fleet {
                    for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
                        let jet = t.jet(s)?;
                        let fd = projector_derivative_fd(t, s, 1e-4)?;
                        out.add(norm(&(fd - &jet.pdot)));
                    }
                }
                Ok(out)
            }),
        ),
        (
            "lemma7.twiddle_norm",
            0.0,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                for seed in 0..o.instances as u64 {
                    let (_, b, x, _) = banded_instance(seed);
                    let c = twiddle_norm_check(&x, &b);
                    out.add(if c.holds(1e-9) { 0.0 } else { 1.0 });
                }
                Ok(out)
            }),
        ),
        (
            "lemma8.chain",
            0.0,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                let fleet = family_fleet(o.instances.div_ceil(5), &o.policy);
                for t in &fleet {
                    for s in [0.05, 0.25, 0.5, 0.75, 0.95] {
                        let bad = lemma8_chain(t, s)?.iter().filter(|c| !c.holds(1e-8)).count();
                        out.add(bad as f64);
                    }
                }
                Ok(out)
            }),
        ),
        (
            "volterra",
            1e-5,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                let grid = TimeGrid::uniform(512)?;
                for (t, tau) in [
                    (grover_tracker(2, linear_schedule(), &o.policy)?, 50.0),
                    (random_tracker(4, 7, &o.policy)?, 20.0),
                ] {
                    let real = evolve_real(t.family(), tau, &grid, &o.policy)?;
                    let ad = evolve_adiabatic(&t, tau, &grid, &o.policy)?;
                    let w = wave_operator(&real, &ad)?;
                    let b = track_grid(&t, &grid)?;
                    out.add(volterra_residuals(&w, &ad, &t, &b)?.into_iter().fold(0.0, f64::max));
                }
                Ok(out)
            }),
        ),
        (
            "expansion",
            1e-4,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                let grid = TimeGrid::uniform(1024)?;
                for (t, tau) in [
                    (grover_tracker(2, linear_schedule(), &o.policy)?, 50.0),
                    (random_tracker(5, 2, &o.policy)?, 20.0),
                ] {
                    let real = evolve_real(t.family(), tau, &grid, &o.policy)?;
                    let ad = evolve_adiabatic(&t, tau, &grid, &o.policy)?;
                    let w = wave_operator(&real, &ad)?;
                    let b = track_grid(&t, &grid)?;
                    out.add(expansion_residual(&t, &w, &ad, &b)?.max_second_order());
                }
                Ok(out)
            }),
        ),
        (
            "bounds.validity",
            0.0,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                let grid = TimeGrid::uniform(256)?;
                for n in [2, 3] {
                    for tau in [20.0, 100.0] {
                        let t = grover_tracker(n, linear_schedule(), &o.policy)?;
                        let real = evolve_real(t.family(), tau, &grid, &o.policy)?;
                        let b = track_grid(&t, &grid)?;
                        let diag = adiabatic_diagnostics(&real, &b)?;
                        let prof = bound_profile(&t, tau, &grid)?;
                        let bad = prof.reports(&diag, 1.0)?.iter().filter(|r| !r.violations(1e-6).is_empty()).count();
                        out.add(bad as f64);
                    }
                }
                Ok(out)
            }),
        ),
        (
            "gap.grover_formula",
            1e-10,
            Box::new(|o: &VerifyOptions| {
                let mut out = Outcome::new();
                for n in 2..=6 {
                    let (f, gap) = grover_family(n, linear_schedule(), GroverRepresentation::Full)?;
                    let t = BandTracker::new(&f, &BandSelector::ground(), &o.policy)?;
                    for k in 0..20 {
                        let s = k as f64 / 19.0;
                        out.add((t.bundle_at(s)?.gap - gap.at(s)).abs());
                    }
                }
                Ok(out)
            }),
        ),
    ]
}

/// Names of all checks, in run order.
pub fn check_names() -> Vec<&'static str> {
    checks().into_iter().map(|c| c.0).collect()
}

/// Runs the suite. Numerical errors inside a check fail that check.
pub fn verify_suite(options: &VerifyOptions) -> VerifyReport {
    let mut results = Vec::new();
    for (name, tolerance, f) in checks() {
        if let Some(filter) = &options.filter {
            if !name.contains(filter.as_str()) {
                continue;
            }
        }
        let r = match f(options) {
            Ok(o) => CheckResult {
                name,
                passed: o.instances > 0 && o.value <= tolerance,
                value: o.value,
                tolerance,
                instances: o.instances,
                error: None,
            },
            Err(e) => CheckResult {
                name,
                passed: false,
                value: f64::NAN,
                tolerance,
                instances: 0,
                error: Some(e.to_string()),
            },
        };
        results.push(r);
    }
    VerifyReport { checks: results }
}
