//! Time-dependent Hamiltonians `s -> H(s)` with up to three derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::{hermitian_deviation, norm, random, CMatrix, HermitianOperator, C64};
use crate::policy::NumericalPolicy;
use crate::schedule::{GapProfile, Schedule, ScheduleValue};

/// `H(s)` together with `H'`, `H''` and `H'''`.
#[derive(Debug, Clone)]
pub struct FamilyPoint {
    pub h: CMatrix,
    pub dh: CMatrix,
    pub ddh: CMatrix,
    pub dddh: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences, Richardson-extrapolated once. Samples `H`
    /// slightly outside `[0, 1]`.
    FiniteDifference { h1: f64, h2: f64, h3: f64 },
}

impl DerivativeMode {
    pub fn finite_difference(policy: &NumericalPolicy) -> Self {
        DerivativeMode::FiniteDifference {
            h1: policy.fd_step,
            h2: policy.fd_step_second,
            h3: policy.fd_step_second,
        }
    }
}

enum Kind {
    Interpolating {
        h0: CMatrix,
        diff: CMatrix,
        schedule: Schedule,
    },
    ThreeTerm {
        h0: CMatrix,
        diff: CMatrix,
        h2: CMatrix,
        f: Schedule,
        k: Schedule,
    },
    Fourier {
        a0: CMatrix,
        /// `(omega, A, B)` for `A cos(omega s) + B sin(omega s)`.
        terms: Vec<(f64, CMatrix, CMatrix)>,
    },
    Function(Arc<dyn Fn(f64) -> CMatrix + Send + Sync>),
    Reparametrized {
        inner: HamiltonianFamily,
        schedule: Schedule,
    },
}

#[derive(Clone)]
pub struct HamiltonianFamily {
    dim: usize,
    kind: Arc<Kind>,
    mode: DerivativeMode,
    description: String,
}

impl fmt::Debug for HamiltonianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianFamily")
            .field("dim", &self.dim)
            .field("mode", &self.mode)
            .field("description", &self.description)
            .finish()
    }
}

fn scale(m: &CMatrix, x: f64) -> CMatrix {
    m * C64::new(x, 0.0)
}

impl HamiltonianFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.mode
    }

    /// The same family with derivatives taken by finite differences.
    pub fn with_finite_differences(&self, policy: &NumericalPolicy) -> Self {
        Self {
            mode: DerivativeMode::finite_difference(policy),
            ..self.clone()
        }
    }

    /// The interpolation schedule, for families built from one.
    pub fn schedule(&self) -> Option<&Schedule> {
        match &*self.kind {
            Kind::Interpolating { schedule, .. } => Some(schedule),
            Kind::ThreeTerm { f, .. } => Some(f),
            Kind::Reparametrized { schedule, .. } => Some(schedule),
            _ => None,
        }
    }

    /// `H(s)`.
    pub fn h(&self, s: f64) -> CMatrix {
        match &*self.kind {
            Kind::Interpolating { h0, diff, schedule } => h0 + scale(diff, schedule.f(s)),
            Kind::ThreeTerm { h0, diff, h2, f, k } => h0 + scale(diff, f.f(s)) + scale(h2, k.f(s)),
            Kind::Fourier { a0, terms } => {
                let mut h = a0.clone();
                for (w, a, b) in terms {
                    h += scale(a, (w * s).cos()) + scale(b, (w * s).sin());
                }
                h
            }
            Kind::Function(f) => f(s),
            Kind::Reparametrized { inner, schedule } => inner.h(schedule.f(s)),
        }
    }

    pub fn hamiltonian(&self, s: f64) -> HermitianOperator {
        HermitianOperator::from_matrix_unchecked(self.h(s))
    }

    /// `H` and three derivatives at `s`.
    pub fn eval(&self, s: f64) -> FamilyPoint {
        match self.mode {
            DerivativeMode::Analytic => self.eval_analytic(s),
            DerivativeMode::FiniteDifference { h1, h2, h3 } => self.eval_fd(s, h1, h2, h3),
        }
    }

    fn eval_analytic(&self, s: f64) -> FamilyPoint {
        match &*self.kind {
            Kind::Interpolating { h0, diff, schedule } => {
                let v = schedule.eval(s);
                FamilyPoint {
                    h: h0 + scale(diff, v.f),
                    dh: scale(diff, v.df),
                    ddh: scale(diff, v.ddf),
                    dddh: scale(diff, v.dddf),
                }
            }
            Kind::ThreeTerm { h0, diff, h2, f, k } => {
                let (a, b): (ScheduleValue, ScheduleValue) = (f.eval(s), k.eval(s));
                FamilyPoint {
                    h: h0 + scale(diff, a.f) + scale(h2, b.f),
                    dh: scale(diff, a.df) + scale(h2, b.df),
                    ddh: scale(diff, a.ddf) + scale(h2, b.ddf),
                    dddh: scale(diff, a.dddf) + scale(h2, b.dddf),
                }
            }
            Kind::Fourier { a0, terms } => {
                let n = a0.nrows();
                let mut p = FamilyPoint {
                    h: a0.clone(),
                    dh: CMatrix::zeros(n, n),
                    ddh: CMatrix::zeros(n, n),
                    dddh: CMatrix::zeros(n, n),
                };
                for (w, a, b) in terms {
                    let (c, sn) = ((w * s).cos(), (w * s).sin());
                    p.h += scale(a, c) + scale(b, sn);
                    p.dh += scale(a, -w * sn) + scale(b, w * c);
                    p.ddh += scale(a, -w * w * c) + scale(b, -w * w * sn);
                    p.dddh += scale(a, w * w * w * sn) + scale(b, -w * w * w * c);
                }
                p
            }
            Kind::Reparametrized { inner, schedule } => {
                let v = schedule.eval(s);
                let p = inner.eval(v.f);
                FamilyPoint {
                    dddh: scale(&p.dddh, v.df.powi(3)) + scale(&p.ddh, 3.0 * v.df * v.ddf) + scale(&p.dh, v.dddf),
                    ddh: scale(&p.ddh, v.df * v.df) + scale(&p.dh, v.ddf),
                    dh: scale(&p.dh, v.df),
                    h: p.h,
                }
            }
            Kind::Function(_) => {
                let d = DerivativeMode::finite_difference(&NumericalPolicy::default());
                match d {
                    DerivativeMode::FiniteDifference { h1, h2, h3 } => self.eval_fd(s, h1, h2, h3),
                    DerivativeMode::Analytic => unreachable!(),
                }
            }
        }
    }

    fn eval_fd(&self, s: f64, h1: f64, h2: f64, h3: f64) -> FamilyPoint {
        let h = |x: f64| self.h(x);
        let c = h(s);
        let d1 = |d: f64| (h(s + d) - h(s - d)) / C64::new(2.0 * d, 0.0);
        let d2 = |d: f64| (h(s + d) - &c * C64::new(2.0, 0.0) + h(s - d)) / C64::new(d * d, 0.0);
        let d3 = |d: f64| {
            (h(s + 2.0 * d) - h(s + d) * C64::new(2.0, 0.0) + h(s - d) * C64::new(2.0, 0.0) - h(s - 2.0 * d))
                / C64::new(2.0 * d * d * d, 0.0)
        };
        let rich = |coarse: CMatrix, fine: CMatrix| (fine * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0);
        FamilyPoint {
            dh: rich(d1(h1), d1(0.5 * h1)),
            ddh: rich(d2(h2), d2(0.5 * h2)),
            dddh: rich(d3(h3), d3(0.5 * h3)),
            h: c,
        }
    }

    /// Checks the family against the Hermiticity tolerance at `samples` points.
    pub fn check_hermitian(&self, samples: usize, policy: &NumericalPolicy) -> Result<()> {
        for i in 0..samples.max(2) {
            let s = i as f64 / (samples.max(2) - 1) as f64;
            let h = self.h(s);
            let dev = hermitian_deviation(&h);
            let tol = policy.hermitian_tol * (1.0 + norm(&h));
            if dev > tol {
                return Err(Error::NonHermitianInput {
                    deviation: dev,
                    tolerance: tol,
                });
            }
        }
        Ok(())
    }
}

/// `H(s) = [1 - f(s)] H0 + f(s) H1`.
pub fn interpolating_family(h0: &HermitianOperator, h1: &HermitianOperator, schedule: Schedule) -> Result<HamiltonianFamily> {
    if h0.dim() != h1.dim() {
        return Err(Error::DimensionMismatch {
            expected: h0.dim(),
            found: h1.dim(),
        });
    }
    Ok(HamiltonianFamily {
        dim: h0.dim(),
        description: format!("interpolating dim {} ({})", h0.dim(), schedule.name()),
        kind: Arc::new(Kind::Interpolating {
            h0: h0.matrix().clone(),
            diff: h1.matrix() - h0.matrix(),
            schedule,
        }),
        mode: DerivativeMode::Analytic,
    })
}

/// `H(s) = [1 - f(s)] H0 + f(s) H1 + k(s) H2` with `k(0) = k(1) = 0`.
pub fn three_term_family(
    h0: &HermitianOperator,
    h1: &HermitianOperator,
    h2: &HermitianOperator,
    f: Schedule,
    k: Schedule,
) -> Result<HamiltonianFamily> {
    for other in [h1, h2] {
        if other.dim() != h0.dim() {
            return Err(Error::DimensionMismatch {
                expected: h0.dim(),
                found: other.dim(),
            });
        }
    }
    let (k0, k1) = (k.f(0.0), k.f(1.0));
    if k0.abs() > 1e-12 || k1.abs() > 1e-12 {
        return Err(Error::EndpointViolation { k0, k1 });
    }
    Ok(HamiltonianFamily {
        dim: h0.dim(),
        description: format!("three-term dim {} ({}, {})", h0.dim(), f.name(), k.name()),
        kind: Arc::new(Kind::ThreeTerm {
            h0: h0.matrix().clone(),
            diff: h1.matrix() - h0.matrix(),
            h2: h2.matrix().clone(),
            f,
            k,
        }),
        mode: DerivativeMode::Analytic,
    })
}

/// A user-supplied `s -> H(s)`; derivatives by finite differences.
pub fn function_family(
    dim: usize,
    description: impl Into<String>,
    h: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    policy: &NumericalPolicy,
) -> HamiltonianFamily {
    HamiltonianFamily {
        dim,
        description: description.into(),
        kind: Arc::new(Kind::Function(Arc::new(h))),
        mode: DerivativeMode::finite_difference(policy),
    }
}

/// `s -> H(f(s))`, derivatives by the chain rule.
pub fn reparametrized_family(inner: &HamiltonianFamily, schedule: Schedule) -> HamiltonianFamily {
    HamiltonianFamily {
        dim: inner.dim,
        description: format!("{} ({})", inner.description, schedule.name()),
        mode: inner.mode,
        kind: Arc::new(Kind::Reparametrized {
            inner: inner.clone(),
            schedule,
        }),
    }
}

/// `H(s) = A0 + sum_r [A_r cos(2 pi r s) + B_r sin(2 pi r s)]`, seeded,
/// scaled so that `||H(s)|| <= 1`.
pub fn random_smooth_family(dim: usize, seed: u64, num_harmonics: usize) -> Result<HamiltonianFamily> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("random families need dim >= 2, got {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0 = random::hermitian(&mut rng, dim);
    let mut terms = Vec::with_capacity(num_harmonics);
    for r in 1..=num_harmonics {
        let a = random::hermitian(&mut rng, dim);
        let b = random::hermitian(&mut rng, dim);
        terms.push((2.0 * std::f64::consts::PI * r as f64, a, b));
    }
    // sup_s ||H(s)|| from a periodic sample plus the largest drift between
    // samples, bounded through ||H'|| <= sum_r omega_r (||A_r|| + ||B_r||).
    let eval = |s: f64| {
        let mut h = a0.clone();
        for (w, a, b) in &terms {
            h += scale(a, (w * s).cos()) + scale(b, (w * s).sin());
        }
        h
    };
    let samples = 1024;
    let sampled = (0..samples).map(|k| norm(&eval(k as f64 / samples as f64))).fold(0.0, f64::max);
    let slope: f64 = terms.iter().map(|(w, a, b)| w * (norm(a) + norm(b))).sum();
    let c = 1.0 / (sampled + slope / (2.0 * samples as f64));
    let a0 = scale(&a0, c);
    let terms = terms.into_iter().map(|(w, a, b)| (w, scale(&a, c), scale(&b, c))).collect();
    Ok(HamiltonianFamily {
        dim,
        description: format!("random dim {dim} seed {seed} harmonics {num_harmonics}"),
        kind: Arc::new(Kind::Fourier { a0, terms }),
        mode: DerivativeMode::Analytic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroverRepresentation {
    /// Dense `2^n x 2^n` matrices.
    Full,
    /// The invariant plane spanned by the marked state and the uniform superposition.
    Reduced,
}

impl GroverRepresentation {
    pub fn name(self) -> &'static str {
        match self {
            GroverRepresentation::Full => "full",
            GroverRepresentation::Reduced => "reduced",
        }
    }

    pub fn max_qubits(self) -> u32 {
        match self {
            GroverRepresentation::Full => 12,
            GroverRepresentation::Reduced => 40,
        }
    }
}

/// Unstructured search over `n` qubits with marked bitstring `marked`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroverProblem {
    pub n: u32,
    pub marked: u64,
    pub representation: GroverRepresentation,
}

impl GroverProblem {
    pub fn new(n: u32, representation: GroverRepresentation) -> Result<Self> {
        Self::with_marked(n, 0, representation)
    }

    pub fn with_marked(n: u32, marked: u64, representation: GroverRepresentation) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("Grover problems need n >= 1".into()));
        }
        if n > representation.max_qubits() {
            return Err(Error::DimensionTooLarge {
                n,
                max: representation.max_qubits(),
                representation: representation.name(),
            });
        }
        if n < 64 && marked >= 1u64 << n {
            return Err(Error::InvalidParameter(format!("marked element {marked} needs more than {n} bits")));
        }
        Ok(Self {
            n,
            marked,
            representation,
        })
    }

    pub fn dim(&self) -> usize {
        match self.representation {
            GroverRepresentation::Full => 1usize << self.n,
            GroverRepresentation::Reduced => 2,
        }
    }

    /// `(H0, H1)`: `I - |0^><0^|` and `I - |u><u|`.
    pub fn hamiltonians(&self) -> (HermitianOperator, HermitianOperator) {
        match self.representation {
            GroverRepresentation::Full => {
                let d = self.dim();
                let amp = C64::new((d as f64).sqrt().recip(), 0.0);
                let uniform = DVector::from_element(d, amp);
                let h0 = CMatrix::identity(d, d) - &uniform * uniform.adjoint();
                let mut h1 = CMatrix::identity(d, d);
                h1[(self.marked as usize, self.marked as usize)] = C64::new(0.0, 0.0);
                (
                    HermitianOperator::from_matrix_unchecked(h0),
                    HermitianOperator::from_matrix_unchecked(h1),
                )
            }
            GroverRepresentation::Reduced => {
                // Basis {|u>, |w>} with |0^> = a|u> + b|w>.
                let a2 = (-(self.n as f64) * std::f64::consts::LN_2).exp();
                let a = a2.sqrt();
                let b2 = 1.0 - a2;
                let b = b2.sqrt();
                let h0 = CMatrix::from_row_slice(
                    2,
                    2,
                    &[C64::new(1.0 - a2, 0.0), C64::new(-a * b, 0.0), C64::new(-a * b, 0.0), C64::new(a2, 0.0)],
                );
                let h1 = CMatrix::from_row_slice(
                    2,
                    2,
                    &[C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                );
                (
                    HermitianOperator::from_matrix_unchecked(h0),
                    HermitianOperator::from_matrix_unchecked(h1),
                )
            }
        }
    }

    /// Ground-state gap as a function of the interpolation parameter `u = f(s)`.
    pub fn gap_profile(&self) -> GapProfile {
        let eps = (-(self.n as f64) * std::f64::consts::LN_2).exp();
        let c = 4.0 * (1.0 - eps);
        GapProfile::with_derivative(
            move |u| (eps + c * (u - 0.5) * (u - 0.5)).sqrt(),
            move |u| c * (u - 0.5) / (eps + c * (u - 0.5) * (u - 0.5)).sqrt(),
        )
    }

    pub fn min_gap(&self) -> f64 {
        (-(self.n as f64) * 0.5 * std::f64::consts::LN_2).exp()
    }
}

/// The analytic gap `s -> g(f(s))` of a Grover family.
#[derive(Debug, Clone)]
pub struct AnalyticGap {
    profile: GapProfile,
    schedule: Schedule,
}

impl AnalyticGap {
    pub fn at(&self, s: f64) -> f64 {
        self.profile.value(self.schedule.f(s))
    }

    pub fn profile(&self) -> &GapProfile {
        &self.profile
    }
}

/// The Grover family in the requested representation with its analytic gap.
pub fn grover_family(
    n: u32,
    schedule: Schedule,
    representation: GroverRepresentation,
) -> Result<(HamiltonianFamily, AnalyticGap)> {
    grover_family_for(&GroverProblem::new(n, representation)?, schedule)
}

pub fn grover_family_for(problem: &GroverProblem, schedule: Schedule) -> Result<(HamiltonianFamily, AnalyticGap)> {
    let (h0, h1) = problem.hamiltonians();
    let mut family = interpolating_family(&h0, &h1, schedule.clone())?;
    family.description = format!(
        "grover n={} {} ({})",
        problem.n,
        problem.representation.name(),
        schedule.name()
    );
    Ok((
        family,
        AnalyticGap {
            profile: problem.gap_profile(),
            schedule,
        },
    ))
}
