//! Explicit gap-dependent error bounds, the norm-inequality chain, the
//! first-order criterion and the second-order expansion residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{hermitian_norm, norm, CMatrix, C64, I};
use crate::propagate::{Diagnostic, PropagatorTrace, TimeGrid, WaveOperatorTrace};
use crate::quadrature::cumulative_simpson;
use crate::spectral::{projector_second_derivative_fd, twiddle, BandTracker, ProjectorBundle, SpectralJet};

/// Norms entering the bounds at one point `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointIngredients {
    pub s: f64,
    /// Number of distinct eigenvalues in the band.
    pub m: usize,
    pub g: f64,
    pub dh: f64,
    pub ddh: f64,
    pub dddh: f64,
    /// `max(||H'||, ||H''||, ||H'''||)`.
    pub h: f64,
    pub pdot: f64,
    pub ptw: f64,
    /// `||Q P'' P||`.
    pub qppp: f64,
    /// `||Q (P'~)' P||`.
    pub w: f64,
}

impl PointIngredients {
    pub fn from_jet(s: f64, jet: &SpectralJet) -> Result<Self> {
        // Each derivative of H is Hermitian; P', its twiddle, Q P'' P and W
        // are all determined by their lower block.
        let dh = hermitian_norm(&jet.point.dh)?;
        let ddh = hermitian_norm(&jet.point.ddh)?;
        let dddh = hermitian_norm(&jet.point.dddh)?;
        let b = &jet.bundle;
        Ok(Self {
            s,
            m: jet.bundle.m,
            g: jet.bundle.gap,
            dh,
            ddh,
            dddh,
            h: dh.max(ddh).max(dddh),
            pdot: b.lower_block_norm(&jet.pdot)?,
            ptw: b.lower_block_norm(&jet.ptw)?,
            qppp: b.lower_block_norm(&jet.pddot)?,
            w: b.lower_block_norm(&jet.w)?,
        })
    }

    fn mf(&self) -> f64 {
        self.m as f64
    }

    pub fn tight_boundary(&self) -> f64 {
        self.mf().sqrt() * self.pdot / self.g
    }

    pub fn tight_integrand(&self) -> f64 {
        let m = self.mf();
        m.sqrt() * (self.qppp + self.pdot * self.pdot) / self.g + 2.0 * m * self.dh * self.pdot / (self.g * self.g)
    }

    pub fn coarse_boundary(&self) -> f64 {
        self.mf() * self.dh / (self.g * self.g)
    }

    pub fn coarse_integrand(&self) -> f64 {
        let m = self.mf();
        m * self.ddh / self.g.powi(2) + 7.0 * m * m.sqrt() * self.dh * self.dh / self.g.powi(3)
    }

    /// `m h / g^2`, the first-order term of the third-derivative bound.
    pub fn first_order(&self) -> f64 {
        self.mf() * self.h / (self.g * self.g)
    }

    fn h2_g3(&self) -> f64 {
        self.h * self.h / self.g.powi(3)
    }
}

/// Ingredients and running integrals on a uniform node set starting at 0.
#[derive(Debug, Clone)]
struct Integrals {
    nodes: Vec<PointIngredients>,
    tight: Vec<f64>,
    coarse: Vec<f64>,
    /// `int h^2/g^3`
    h2g3: Vec<f64>,
    /// `int h^2/g^5`
    h2g5: Vec<f64>,
    /// `int (h^2/g^3)(s') int_0^{s'} (h^2/g^3)`
    nested: Vec<f64>,
}

fn ingredients_on(tracker: &BandTracker, s_values: &[f64]) -> Result<Vec<PointIngredients>> {
    let bundles = tracker.track(s_values)?;
    let family = tracker.family();
    s_values
        .iter()
        .zip(bundles)
        .map(|(&s, b)| PointIngredients::from_jet(s, &SpectralJet::new(family.eval(s), b)?))
        .collect()
}

fn node_values(end: f64, intervals: usize) -> Vec<f64> {
    let step = end / intervals as f64;
    (0..=intervals)
        .map(|k| if k == intervals { end } else { k as f64 * step })
        .collect()
}

fn integrals_from(nodes: Vec<PointIngredients>, step: f64) -> Integrals {
    let col = |f: &dyn Fn(&PointIngredients) -> f64| -> Vec<f64> { nodes.iter().map(f).collect() };
    let cum = |v: &[f64]| cumulative_simpson(v, step, 0.0);
    let a = col(&|p| p.h2_g3());
    let h2g3 = cum(&a);
    let inner: Vec<f64> = a.iter().zip(&h2g3).map(|(x, y)| x * y).collect();
    Integrals {
        tight: cum(&col(&|p| p.tight_integrand())),
        coarse: cum(&col(&|p| p.coarse_integrand())),
        h2g5: cum(&col(&|p| p.h * p.h / p.g.powi(5))),
        nested: cum(&inner),
        h2g3,
        nodes,
    }
}

/// The next level: the existing nodes interleaved with new midpoints.
fn refined(tracker: &BandTracker, end: f64, coarse: &Integrals) -> Result<Integrals> {
    let intervals = 2 * (coarse.nodes.len() - 1);
    let s = node_values(end, intervals);
    let odd: Vec<f64> = s.iter().skip(1).step_by(2).copied().collect();
    let mids = ingredients_on(tracker, &odd)?;
    let mut nodes = Vec::with_capacity(intervals + 1);
    for (k, old) in coarse.nodes.iter().enumerate() {
        nodes.push(*old);
        if let Some(m) = mids.get(k) {
            nodes.push(*m);
        }
    }
    Ok(integrals_from(nodes, end / intervals as f64))
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

impl Integrals {
    fn finals(&self) -> [f64; 5] {
        let l = self.nodes.len() - 1;
        [self.tight[l], self.coarse[l], self.h2g3[l], self.h2g5[l], self.nested[l]]
    }

    fn disagreement(&self, other: &Integrals) -> f64 {
        self.finals()
            .iter()
            .zip(other.finals())
            .map(|(&a, b)| rel_diff(a, b))
            .fold(0.0, f64::max)
    }
}

/// Refinement steps allowed beyond the requested node count.
const MAX_REFINEMENTS: u32 = 7;

/// Integrals on `[0, end]` starting from `intervals`, doubled until the
/// Simpson values of successive levels agree. Returns the finer level and
/// the refinement factor relative to `intervals`.
fn converged_integrals(tracker: &BandTracker, end: f64, intervals: usize) -> Result<(Integrals, usize)> {
    let tol = tracker.policy().quadrature_rel_tol;
    let mut factor = 1usize;
    let mut coarse = integrals_from(ingredients_on(tracker, &node_values(end, intervals))?, end / intervals as f64);
    let mut last = f64::INFINITY;
    for _ in 0..=MAX_REFINEMENTS {
        let fine = refined(tracker, end, &coarse)?;
        last = coarse.disagreement(&fine);
        factor *= 2;
        if last <= tol {
            return Ok((fine, factor));
        }
        coarse = fine;
    }
    Err(Error::QuadratureNotConverged { relative: last })
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive and finite, got {tau}")));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("s = {s} outside [0, 1]")));
    }
    Ok(())
}

/// Both expressions of the first-derivative bound at one `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem3Bound {
    pub s: f64,
    pub tau: f64,
    pub a_tight: f64,
    pub a_coarse: f64,
    pub at_zero: PointIngredients,
    pub at_s: PointIngredients,
    /// `int_0^s` of the tight and coarse integrands.
    pub tight_integral: f64,
    pub coarse_integral: f64,
    /// Quadrature intervals actually used.
    pub intervals: usize,
}

/// `A(s)` in its tight and coarse forms, by composite Simpson over
/// `quadrature_points` nodes on `[0, s]` (refined automatically until two
/// levels agree to the policy tolerance).
pub fn theorem3_bound(tracker: &BandTracker, tau: f64, s: f64, quadrature_points: usize) -> Result<Theorem3Bound> {
    check_tau(tau)?;
    check_s(s)?;
    if quadrature_points < 3 {
        return Err(Error::InvalidParameter("need at least 3 quadrature points".into()));
    }
    let at_zero = PointIngredients::from_jet(0.0, &tracker.jet(0.0)?)?;
    if s == 0.0 {
        return Ok(Theorem3Bound {
            s,
            tau,
            a_tight: 2.0 * at_zero.tight_boundary() / tau,
            a_coarse: 2.0 * at_zero.coarse_boundary() / tau,
            at_zero,
            at_s: at_zero,
            tight_integral: 0.0,
            coarse_integral: 0.0,
            intervals: 0,
        });
    }
    let intervals = quadrature_points - 1;
    let (ints, factor) = converged_integrals(tracker, s, intervals)?;
    let at_s = *ints.nodes.last().unwrap();
    let [tight_integral, coarse_integral, ..] = ints.finals();
    Ok(Theorem3Bound {
        s,
        tau,
        a_tight: (at_zero.tight_boundary() + at_s.tight_boundary() + tight_integral) / tau,
        a_coarse: (at_zero.coarse_boundary() + at_s.coarse_boundary() + coarse_integral) / tau,
        at_zero,
        at_s,
        tight_integral,
        coarse_integral,
        intervals: intervals * factor,
    })
}

/// `[m h / g^2]_ub` and the bracket multiplying `C / tau^2` in the
/// third-derivative bound.
fn theorem4_parts(zero: &PointIngredients, at: &PointIngredients, h2g3: f64, h2g5: f64, nested: f64) -> (f64, f64) {
    let first = zero.first_order() + at.first_order();
    let ub = zero.h * zero.h / zero.g.powi(4) + at.h * at.h / at.g.powi(4);
    let bracket = ub + zero.h / (zero.g * zero.g) * h2g3 + h2g5 + nested;
    (first, bracket)
}

/// The third-derivative bound at one `s` for a supplied constant `c`.
pub fn theorem4_bound(tracker: &BandTracker, tau: f64, s: f64, c: f64, quadrature_points: usize) -> Result<f64> {
    check_tau(tau)?;
    check_s(s)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be finite and non-negative, got {c}")));
    }
    if quadrature_points < 3 {
        return Err(Error::InvalidParameter("need at least 3 quadrature points".into()));
    }
    let zero = PointIngredients::from_jet(0.0, &tracker.jet(0.0)?)?;
    let (first, bracket) = if s == 0.0 {
        theorem4_parts(&zero, &zero, 0.0, 0.0, 0.0)
    } else {
        let (ints, _) = converged_integrals(tracker, s, quadrature_points - 1)?;
        let [_, _, a, b, n] = ints.finals();
        theorem4_parts(&zero, ints.nodes.last().unwrap(), a, b, n)
    };
    Ok(first / tau + c * bracket / (tau * tau))
}

/// All bounds sampled on a time grid.
#[derive(Debug, Clone)]
pub struct BoundProfile {
    pub tau: f64,
    pub ingredients: Vec<PointIngredients>,
    pub a_tight: Vec<f64>,
    pub a_coarse: Vec<f64>,
    /// `[m h / g^2]_ub / tau`.
    pub t4_first: Vec<f64>,
    /// Bracket of the `C / tau^2` term.
    pub t4_bracket: Vec<f64>,
    /// Quadrature refinement factor over the output grid.
    pub refine: usize,
}

impl BoundProfile {
    pub fn a_theorem4(&self, c: f64) -> Vec<f64> {
        let t2 = self.tau * self.tau;
        self.t4_first.iter().zip(&self.t4_bracket).map(|(f, b)| f + c * b / t2).collect()
    }

    /// Smallest `C >= 0` for which the third-derivative bound covers the
    /// measured errors at every grid point.
    pub fn fit_theorem4_c(&self, measured: &[Diagnostic]) -> Result<f64> {
        if measured.len() != self.t4_first.len() {
            return Err(Error::GridMismatch);
        }
        let t2 = self.tau * self.tau;
        let mut c = 0.0f64;
        for ((d, first), bracket) in measured.iter().zip(&self.t4_first).zip(&self.t4_bracket) {
            let err = d.proj_distance.max(d.transition_prob.sqrt());
            if *bracket > 0.0 {
                c = c.max((err - first) * t2 / bracket);
            }
        }
        Ok(c)
    }

    pub fn reports(&self, measured: &[Diagnostic], c: f64) -> Result<Vec<BoundReport>> {
        if measured.len() != self.a_tight.len() {
            return Err(Error::GridMismatch);
        }
        let a4 = self.a_theorem4(c);
        Ok((0..measured.len())
            .map(|k| BoundReport {
                s: self.ingredients[k].s,
                a_tight: self.a_tight[k],
                a_coarse: self.a_coarse[k],
                a_theorem4: a4[k],
                measured_proj_distance: measured[k].proj_distance,
                measured_transition: measured[k].transition_prob,
                ingredients: self.ingredients[k],
            })
            .collect())
    }
}

/// Bounds at every grid point; the integrals run on the grid refined until
/// the totals at `s = 1` converge.
pub fn bound_profile(tracker: &BandTracker, tau: f64, grid: &TimeGrid) -> Result<BoundProfile> {
    check_tau(tau)?;
    let (ints, refine) = converged_integrals(tracker, 1.0, grid.intervals())?;
    let zero = ints.nodes[0];
    let mut profile = BoundProfile {
        tau,
        ingredients: Vec::with_capacity(grid.points()),
        a_tight: Vec::with_capacity(grid.points()),
        a_coarse: Vec::with_capacity(grid.points()),
        t4_first: Vec::with_capacity(grid.points()),
        t4_bracket: Vec::with_capacity(grid.points()),
        refine,
    };
    for k in 0..grid.points() {
        let j = k * refine;
        let at = ints.nodes[j];
        let mut at_s = at;
        at_s.s = grid.s_values()[k];
        profile.ingredients.push(at_s);
        profile
            .a_tight
            .push((zero.tight_boundary() + at.tight_boundary() + ints.tight[j]) / tau);
        profile
            .a_coarse
            .push((zero.coarse_boundary() + at.coarse_boundary() + ints.coarse[j]) / tau);
        let (first, bracket) = theorem4_parts(&zero, &at, ints.h2g3[j], ints.h2g5[j], ints.nested[j]);
        profile.t4_first.push(first / tau);
        profile.t4_bracket.push(bracket);
    }
    Ok(profile)
}

/// Bound values and measured errors at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub s: f64,
    pub a_tight: f64,
    pub a_coarse: f64,
    pub a_theorem4: f64,
    pub measured_proj_distance: f64,
    pub measured_transition: f64,
    pub ingredients: PointIngredients,
}

impl BoundReport {
    /// Checks `distance <= A_tight`, `transition <= A_tight^2` and
    /// `A_tight <= A_coarse`, each with `slack`.
    pub fn violations(&self, slack: f64) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.measured_proj_distance > self.a_tight + slack {
            v.push("proj_distance > A_tight");
        }
        if self.measured_transition > self.a_tight * self.a_tight + slack {
            v.push("transition > A_tight^2");
        }
        if self.a_tight > self.a_coarse + slack {
            v.push("A_tight > A_coarse");
        }
        v
    }
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// `||X~|| <= sqrt(m) ||X|| / g`.
pub fn twiddle_norm_check(x: &CMatrix, bundle: &ProjectorBundle) -> InequalityCheck {
    InequalityCheck {
        name: "twiddle_norm",
        lhs: norm(&twiddle(x, bundle)),
        rhs: (bundle.m as f64).sqrt() * norm(x) / bundle.gap,
    }
}

/// The six comparisons of the derivative norm chain at `s`.
pub fn lemma8_chain(tracker: &BandTracker, s: f64) -> Result<Vec<InequalityCheck>> {
    let p = PointIngredients::from_jet(s, &tracker.jet(s)?)?;
    Ok(lemma8_chain_from(&p))
}

pub fn lemma8_chain_from(p: &PointIngredients) -> Vec<InequalityCheck> {
    let m = p.m as f64;
    let sm = m.sqrt();
    let g = p.g;
    let mid = sm * p.qppp / g + 2.0 * m * p.dh * p.pdot / (g * g);
    vec![
        InequalityCheck {
            name: "pdot",
            lhs: p.pdot,
            rhs: sm * p.dh / g,
        },
        InequalityCheck {
            name: "pdot_twiddle",
            lhs: p.ptw,
            rhs: sm * p.pdot / g,
        },
        InequalityCheck {
            name: "pdot_twiddle_coarse",
            lhs: sm * p.pdot / g,
            rhs: m * p.dh / (g * g),
        },
        InequalityCheck {
            name: "qpddotp",
            lhs: p.qppp,
            rhs: sm * p.ddh / g + 4.0 * m * p.dh * p.dh / (g * g),
        },
        InequalityCheck {
            name: "twiddle_dot",
            lhs: p.w,
            rhs: mid,
        },
        InequalityCheck {
            name: "twiddle_dot_coarse",
            lhs: mid,
            rhs: m * p.ddh / (g * g) + 6.0 * m * sm * p.dh * p.dh / g.powi(3),
        },
    ]
}

/// `||Q P'' P||` from the algebraic formula and from Richardson second
/// differences of the tracked projector with step `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondDerivativeCrossCheck {
    pub algebraic: f64,
    pub finite_difference: f64,
    /// `||Q (P''_alg - P''_fd) P||`.
    pub deviation: f64,
}

pub fn qppp_cross_check(tracker: &BandTracker, s: f64, h: f64) -> Result<SecondDerivativeCrossCheck> {
    let jet = tracker.jet(s)?;
    let fd = projector_second_derivative_fd(tracker, s, h)?;
    let b = &jet.bundle;
    let fd_q = &b.q * fd * &b.p;
    let alg = jet.qppp();
    Ok(SecondDerivativeCrossCheck {
        algebraic: norm(&alg),
        finite_difference: norm(&fd_q),
        deviation: norm(&(alg - fd_q)),
    })
}

/// `sup_s ||H'|| / g^2` over `points` uniform samples.
pub fn traditional_criterion(tracker: &BandTracker, points: usize) -> Result<f64> {
    if points < 2 {
        return Err(Error::InvalidParameter("need at least 2 sample points".into()));
    }
    let s_values: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
    let bundles = tracker.track(&s_values)?;
    let family = tracker.family();
    Ok(s_values
        .iter()
        .zip(&bundles)
        .map(|(&s, b)| norm(&family.eval(s).dh) / (b.gap * b.gap))
        .fold(0.0, f64::max))
}

/// Default sample count for [`traditional_criterion`].
pub const CRITERION_POINTS: usize = 1001;

/// Pointwise residuals of the exact first- and second-order expansions of
/// `Q0 Omega(s) P0`.
#[derive(Debug, Clone)]
pub struct ExpansionResidual {
    pub first_order: Vec<f64>,
    pub second_order: Vec<f64>,
    /// `||Q0 Omega(s) P0||`, for scale.
    pub magnitude: Vec<f64>,
}

impl ExpansionResidual {
    pub fn max_second_order(&self) -> f64 {
        self.second_order.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_first_order(&self) -> f64 {
        self.first_order.iter().cloned().fold(0.0, f64::max)
    }
}

/// `Z = (Q (P'~)' P)~` at an arbitrary `s`.
fn z_at(tracker: &BandTracker, s: f64) -> Result<CMatrix> {
    let jet = tracker.jet(s)?;
    let (p, q) = (&jet.bundle.p, &jet.bundle.q);
    Ok(q * twiddle(&jet.w, &jet.bundle) * p)
}

/// Step for the off-grid differences of `Z`.
const Z_STEP: f64 = 3e-4;

/// `Z'` by fourth-order differences off the grid (central inside, one-sided
/// within two steps of an end).
fn z_derivative(tracker: &BandTracker, s: f64) -> Result<CMatrix> {
    let d = Z_STEP;
    let c = |x: f64| C64::new(x, 0.0);
    if s - 2.0 * d < 0.0 || s + 2.0 * d > 1.0 {
        let sg = if s - 2.0 * d < 0.0 { 1.0 } else { -1.0 };
        let f: Vec<CMatrix> = (0..5).map(|k| z_at(tracker, s + sg * k as f64 * d)).collect::<Result<_>>()?;
        let sum = &f[0] * c(-25.0) + &f[1] * c(48.0) - &f[2] * c(36.0) + &f[3] * c(16.0) - &f[4] * c(3.0);
        return Ok(sum * c(sg / (12.0 * d)));
    }
    let sum = (z_at(tracker, s + d)? - z_at(tracker, s - d)?) * c(8.0) - z_at(tracker, s + 2.0 * d)? + z_at(tracker, s - 2.0 * d)?;
    Ok(sum * c(1.0 / (12.0 * d)))
}

/// Compares `Q0 Omega P0` with its exact expansions, obtained by two
/// integrations by parts, evaluated by quadrature on the trace grid.
///
/// With `X[s] = U_A^dag X U_A`, `Y = Q P'~ P`, `W = Q (P'~)' P`, `Z = W~`
/// and `M = Q P'~ P' Q`:
///
/// ```text
/// Q0 Om P0 = -(i/t) [Y Om P0] + (i/t) int (W + M)[s'] Om P0
///          = -(i/t) [Y Om P0] - (1/t^2) [Z Om P0] - (1/t^2) (int M[s']) Y(0) P0
///            + (1/t^2) int (Q Z' P + Z P' + P'~ P' P'~)[s'] Om P0
///            - (1/t^2) int ds' M[s'] int_0^s' (W + M)[s''] Om P0
/// ```
///
/// where `[X Om P0]` is `X[s] Om(s) P0 - X(0) P0` and `Z'` is taken by
/// differences of `Z` off the grid.
pub fn expansion_residual(
    tracker: &BandTracker,
    wave: &WaveOperatorTrace,
    adiabatic: &PropagatorTrace,
    bundles: &[ProjectorBundle],
) -> Result<ExpansionResidual> {
    let n = wave.omega.len();
    if wave.grid != adiabatic.grid || bundles.len() != n || adiabatic.u.len() != n {
        return Err(Error::GridMismatch);
    }
    let tau = wave.tau;
    check_tau(tau)?;
    let family = tracker.family();
    let dim = family.dim();
    let h = wave.grid.step();
    let zero = CMatrix::zeros(dim, dim);
    let p0 = &bundles[0].p;
    let q0 = &bundles[0].q;

    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut wm = Vec::with_capacity(n);
    let mut m_op = Vec::with_capacity(n);
    let mut rest = Vec::with_capacity(n);
    for (k, &s) in wave.grid.s_values().iter().enumerate() {
        let jet = SpectralJet::new(family.eval(s), bundles[k].clone())?;
        let (p, q) = (&jet.bundle.p, &jet.bundle.q);
        let zk = q * twiddle(&jet.w, &jet.bundle) * p;
        let mk = q * &jet.ptw * &jet.pdot * q;
        rest.push(&zk * &jet.pdot + &mk * &jet.ptw * p);
        y.push(q * &jet.ptw * p);
        wm.push(&jet.w + &mk);
        m_op.push(mk);
        z.push(zk);
    }
    let zdot: Vec<CMatrix> = wave.grid.s_values().iter().map(|&s| z_derivative(tracker, s)).collect::<Result<_>>()?;

    let conj = |k: usize, x: &CMatrix| -> CMatrix {
        let ua = adiabatic.u[k].matrix();
        ua.adjoint() * x * ua
    };
    let om_p0: Vec<CMatrix> = wave.omega.iter().map(|o| o * p0).collect();
    let mut a_int = Vec::with_capacity(n);
    let mut inner = Vec::with_capacity(n);
    let mut m_conj = Vec::with_capacity(n);
    for k in 0..n {
        let q = &bundles[k].q;
        let p = &bundles[k].p;
        a_int.push(conj(k, &(q * &zdot[k] * p + &rest[k])) * &om_p0[k]);
        inner.push(conj(k, &wm[k]) * &om_p0[k]);
        m_conj.push(conj(k, &m_op[k]));
    }
    let a_cum = cumulative_simpson(&a_int, h, zero.clone());
    let inner_cum = cumulative_simpson(&inner, h, zero.clone());
    let m_cum = cumulative_simpson(&m_conj, h, zero.clone());
    let outer: Vec<CMatrix> = m_conj.iter().zip(&inner_cum).map(|(m, j)| m * j).collect();
    let outer_cum = cumulative_simpson(&outer, h, zero);
    let it = I / tau;
    let t2 = C64::new(1.0 / (tau * tau), 0.0);
    let y0p0 = &y[0] * p0;
    let z0p0 = &z[0] * p0;
    let mut out = ExpansionResidual {
        first_order: Vec::with_capacity(n),
        second_order: Vec::with_capacity(n),
        magnitude: Vec::with_capacity(n),
    };
    for k in 0..n {
        let lhs = q0 * &wave.omega[k] * p0;
        let y_b = conj(k, &y[k]) * &om_p0[k] - &y0p0;
        let z_b = conj(k, &z[k]) * &om_p0[k] - &z0p0;
        let first = -(&y_b * it) + &inner_cum[k] * it;
        let second = -(y_b * it) - z_b * t2 - &m_cum[k] * &y0p0 * t2 + &a_cum[k] * t2 - &outer_cum[k] * t2;
        out.first_order.push(norm(&(&lhs - first)));
        out.second_order.push(norm(&(&lhs - second)));
        out.magnitude.push(norm(&lhs));
    }
    Ok(out)
}
