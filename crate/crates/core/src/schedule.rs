//! Interpolation schedules `f: [0,1] -> [0,1]` with three derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, gauss_legendre, gauss_legendre_integrate, unit_interval_derivative};

/// `f` and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScheduleValue {
    pub f: f64,
    pub df: f64,
    pub ddf: f64,
    pub dddf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Linear,
    /// Regularized incomplete beta `I_s(k, k)`.
    SmoothSwitching { k: u32 },
    /// Normalized primitive of `exp(-1/(s(1-s)))`.
    Bump,
    Adaptive { p: f64 },
    Custom { name: String },
}

/// A strictly positive gap function on `[0,1]`, optionally with its derivative.
#[derive(Clone)]
pub struct GapProfile {
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    dg: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for GapProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GapProfile").field("analytic_derivative", &self.dg.is_some()).finish()
    }
}

impl GapProfile {
    pub fn new(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { g: Arc::new(g), dg: None }
    }

    pub fn with_derivative(
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dg: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            g: Arc::new(g),
            dg: Some(Arc::new(dg)),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::with_derivative(move |_| value, |_| 0.0)
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.g)(u)
    }

    /// Analytic derivative when available, otherwise a central difference.
    pub fn derivative(&self, u: f64) -> f64 {
        match &self.dg {
            Some(dg) => dg(u),
            None => {
                let h = 1e-5;
                ((self.g)(u + h) - (self.g)(u - h)) / (2.0 * h)
            }
        }
    }
}

#[derive(Clone)]
enum Repr {
    Linear,
    /// Monomial coefficients of `f`, lowest degree first.
    Polynomial(Arc<Vec<f64>>),
    Bump(Arc<BumpTable>),
    Adaptive(Arc<AdaptiveData>),
    Custom(Arc<dyn Fn(f64) -> ScheduleValue + Send + Sync>),
}

#[derive(Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    repr: Repr,
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Schedule({})", self.name())
    }
}

impl Schedule {
    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Config-file spelling: `linear`, `beta:k=3`, `bump`, `adaptive:p=1.5`.
    pub fn name(&self) -> String {
        match &self.kind {
            ScheduleKind::Linear => "linear".into(),
            ScheduleKind::SmoothSwitching { k } => format!("beta:k={k}"),
            ScheduleKind::Bump => "bump".into(),
            ScheduleKind::Adaptive { p } => format!("adaptive:p={p}"),
            ScheduleKind::Custom { name } => name.clone(),
        }
    }

    /// The adaptive exponent, if any.
    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            ScheduleKind::Adaptive { p } => Some(p),
            _ => None,
        }
    }

    pub fn eval(&self, s: f64) -> ScheduleValue {
        match &self.repr {
            Repr::Linear => ScheduleValue {
                f: s,
                df: 1.0,
                ddf: 0.0,
                dddf: 0.0,
            },
            Repr::Polynomial(c) => eval_polynomial(c, s),
            Repr::Bump(t) => t.eval(s),
            Repr::Adaptive(a) => a.eval(s),
            Repr::Custom(f) => f(s),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        self.eval(s).f
    }

    /// `f(0) = 0`, `f(1) = 1` within `1e-10` (skipped for custom schedules)
    /// and monotone non-decreasing on a `1e-3` grid.
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.kind, ScheduleKind::Custom { .. }) {
            let (f0, f1) = (self.f(0.0), self.f(1.0));
            if f0.abs() > 1e-10 || (f1 - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!(
                    "schedule {} has f(0) = {f0}, f(1) = {f1}",
                    self.name()
                )));
            }
        }
        let mut prev = self.f(0.0);
        for i in 1..=1000 {
            let v = self.f(i as f64 * 1e-3);
            if v < prev - 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "schedule {} decreases near s = {}",
                    self.name(),
                    i as f64 * 1e-3
                )));
            }
            prev = v;
        }
        Ok(())
    }

    /// Custom schedule from a closure returning `f` and three derivatives.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> ScheduleValue + Send + Sync + 'static) -> Self {
        Self {
            kind: ScheduleKind::Custom { name: name.into() },
            repr: Repr::Custom(Arc::new(f)),
        }
    }

    /// Custom polynomial schedule, coefficients lowest degree first.
    pub fn polynomial(name: impl Into<String>, coefficients: Vec<f64>) -> Self {
        Self {
            kind: ScheduleKind::Custom { name: name.into() },
            repr: Repr::Polynomial(Arc::new(coefficients)),
        }
    }

    /// Parse a config name. Adaptive schedules need the gap of the family
    /// they are meant for.
    pub fn parse(spec: &str, gap: Option<&GapProfile>) -> Result<Self> {
        let spec = spec.trim();
        let (head, args) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let arg = |key: &str| -> Result<Option<f64>> {
            let Some(a) = args else { return Ok(None) };
            // Every parameterized schedule takes exactly one `key=value`.
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("malformed schedule argument `{a}`")))?;
            if k.trim() != key {
                return Err(Error::InvalidParameter(format!("unknown schedule argument `{}`", k.trim())));
            }
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("`{v}` is not a number")))?;
            Ok(Some(v))
        };
        match head {
            "linear" if args.is_none() => Ok(linear_schedule()),
            "bump" if args.is_none() => Ok(bump_schedule()),
            "beta" => {
                let k = arg("k")?.unwrap_or(2.0);
                if k.fract() != 0.0 || k < 2.0 {
                    return Err(Error::InvalidParameter(format!("beta order must be an integer >= 2, got {k}")));
                }
                smooth_switching(k as u32)
            }
            "adaptive" => {
                let p = arg("p")?.unwrap_or(1.5);
                let gap = gap.ok_or_else(|| {
                    Error::InvalidParameter("adaptive schedules need a family with a known gap".into())
                })?;
                adaptive_schedule(gap.clone(), p, DEFAULT_ADAPTIVE_STEPS)
            }
            _ => Err(Error::InvalidParameter(format!("unknown schedule `{spec}`"))),
        }
    }
}

pub const DEFAULT_ADAPTIVE_STEPS: usize = 10_000;

pub fn linear_schedule() -> Schedule {
    Schedule {
        kind: ScheduleKind::Linear,
        repr: Repr::Linear,
    }
}

/// `I_s(k, k)`; derivatives `1..k-1` vanish at both endpoints.
pub fn smooth_switching(k: u32) -> Result<Schedule> {
    if !(2..=30).contains(&k) {
        return Err(Error::InvalidParameter(format!("smooth switching order must be in 2..=30, got {k}")));
    }
    let k = k as usize;
    // f'(s) = s^{k-1} (1-s)^{k-1} / B(k,k), B(k,k) = ((k-1)!)^2 / (2k-1)!.
    let inv_beta = (k..2 * k).map(|j| j as f64).product::<f64>() / (1..k).map(|j| j as f64).product::<f64>();
    let mut coeffs = vec![0.0; 2 * k];
    let mut binom = 1.0;
    for i in 0..k {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let deg = k - 1 + i; // power in f'
        coeffs[deg + 1] = sign * binom * inv_beta / (deg + 1) as f64;
        binom = binom * (k - 1 - i) as f64 / (i + 1) as f64;
    }
    Ok(Schedule {
        kind: ScheduleKind::SmoothSwitching { k: k as u32 },
        repr: Repr::Polynomial(Arc::new(coeffs)),
    })
}

fn eval_polynomial(c: &[f64], s: f64) -> ScheduleValue {
    let mut v = [0.0f64; 4];
    // Horner for the polynomial and its first three derivatives together.
    for &a in c.iter().rev() {
        v[3] = v[3] * s + 3.0 * v[2];
        v[2] = v[2] * s + 2.0 * v[1];
        v[1] = v[1] * s + v[0];
        v[0] = v[0] * s + a;
    }
    ScheduleValue {
        f: v[0],
        df: v[1],
        ddf: v[2],
        dddf: v[3],
    }
}

struct BumpTable {
    cumulative: Vec<f64>,
    total: f64,
    rule: (Vec<f64>, Vec<f64>),
}

const BUMP_INTERVALS: usize = 2048;

fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

impl BumpTable {
    fn new() -> Self {
        let rule = gauss_legendre(10);
        let h = 1.0 / BUMP_INTERVALS as f64;
        let mut cumulative = Vec::with_capacity(BUMP_INTERVALS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..BUMP_INTERVALS {
            acc += gauss_legendre_integrate(bump, i as f64 * h, (i + 1) as f64 * h, &rule);
            cumulative.push(acc);
        }
        Self {
            total: acc,
            cumulative,
            rule,
        }
    }

    fn eval(&self, s: f64) -> ScheduleValue {
        if s <= 0.0 {
            return ScheduleValue::default();
        }
        if s >= 1.0 {
            return ScheduleValue {
                f: 1.0,
                ..Default::default()
            };
        }
        let h = 1.0 / BUMP_INTERVALS as f64;
        let i = ((s / h) as usize).min(BUMP_INTERVALS - 1);
        let x0 = i as f64 * h;
        let f = (self.cumulative[i] + gauss_legendre_integrate(bump, x0, s, &self.rule)) / self.total;
        let phi = bump(s);
        if phi == 0.0 {
            return ScheduleValue {
                f,
                ..Default::default()
            };
        }
        // phi = exp(q), q = -1/u, u = s(1-s).
        let u = s * (1.0 - s);
        let du = 1.0 - 2.0 * s;
        let q1 = du / (u * u);
        let q2 = -2.0 / (u * u) - 2.0 * du * du / (u * u * u);
        ScheduleValue {
            f,
            df: phi / self.total,
            ddf: q1 * phi / self.total,
            dddf: (q2 + q1 * q1) * phi / self.total,
        }
    }
}

/// C-infinity switching schedule built from the standard bump function.
pub fn bump_schedule() -> Schedule {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Arc<BumpTable>> = OnceLock::new();
    Schedule {
        kind: ScheduleKind::Bump,
        repr: Repr::Bump(TABLE.get_or_init(|| Arc::new(BumpTable::new())).clone()),
    }
}

struct AdaptiveData {
    gap: GapProfile,
    p: f64,
    k: f64,
    /// `f` at the uniform RK4 nodes.
    nodes: Vec<f64>,
}

impl AdaptiveData {
    fn rate(&self, f: f64) -> f64 {
        self.k * self.gap.value(f).powf(self.p)
    }

    fn f_at(&self, s: f64) -> f64 {
        let n = self.nodes.len() - 1;
        let h = 1.0 / n as f64;
        if s < 0.0 {
            return rk4_span(|f| self.rate(f), 0.0, s, 4);
        }
        if s > 1.0 {
            return rk4_span(|f| self.rate(f), self.nodes[n], s - 1.0, 4);
        }
        let i = ((s / h) as usize).min(n - 1);
        let t = (s - i as f64 * h) / h;
        let (y0, y1) = (self.nodes[i], self.nodes[i + 1]);
        let (d0, d1) = (self.rate(y0) * h, self.rate(y1) * h);
        // Cubic Hermite interpolation between RK4 nodes.
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    fn ddf_at(&self, s: f64) -> f64 {
        let f = self.f_at(s);
        let g = self.gap.value(f);
        self.k * self.k * self.p * g.powf(2.0 * self.p - 1.0) * self.gap.derivative(f)
    }

    fn eval(&self, s: f64) -> ScheduleValue {
        let f = self.f_at(s);
        ScheduleValue {
            f,
            df: self.rate(f),
            ddf: self.ddf_at(s),
            dddf: unit_interval_derivative(|x| self.ddf_at(x), s, 1e-4),
        }
    }
}

/// Integrates `y' = rate(y)` from `y0` over a span of length `span` in `steps` RK4 steps.
fn rk4_span(rate: impl Fn(f64) -> f64, y0: f64, span: f64, steps: usize) -> f64 {
    let h = span / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = rate(y);
        let k2 = rate(y + 0.5 * h * k1);
        let k3 = rate(y + 0.5 * h * k2);
        let k4 = rate(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Gap-adaptive schedule: `f(0) = 0`, `f' = k g(f)^p`, `k = int_0^1 g^{-p}`.
pub fn adaptive_schedule(gap: GapProfile, p: f64, grid_points: usize) -> Result<Schedule> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidParameter(format!("adaptive exponent must lie in (1, 2), got {p}")));
    }
    if grid_points < 100 {
        return Err(Error::InvalidParameter(format!("adaptive schedule needs >= 100 steps, got {grid_points}")));
    }
    for i in 0..=1000 {
        let u = i as f64 / 1000.0;
        let g = gap.value(u);
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::NonPositiveGap { u, value: g });
        }
    }
    let integrand = |u: f64| gap.value(u).powf(-p);
    let k = adaptive_simpson(&integrand, 0.0, 1.0, 1e-13, 60)?;
    let mut data = AdaptiveData {
        gap,
        p,
        k,
        nodes: Vec::with_capacity(grid_points + 1),
    };
    let h = 1.0 / grid_points as f64;
    let mut y = 0.0;
    data.nodes.push(y);
    for _ in 0..grid_points {
        y = rk4_span(|f| data.rate(f), y, h, 1);
        data.nodes.push(y);
    }
    let deviation = (y - 1.0).abs();
    if !(deviation <= 1e-6) {
        return Err(Error::NormalizationFailure { deviation });
    }
    Ok(Schedule {
        kind: ScheduleKind::Adaptive { p },
        repr: Repr::Adaptive(Arc::new(data)),
    })
}

/// The normalization constant `k` of an adaptive schedule.
pub fn adaptive_normalization(schedule: &Schedule) -> Option<f64> {
    match &schedule.repr {
        Repr::Adaptive(a) => Some(a.k),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(s: &Schedule, x: f64, h: f64) -> [f64; 3] {
        let d = |g: &dyn Fn(f64) -> f64| (g(x + h) - g(x - h)) / (2.0 * h);
        [
            d(&|t| s.eval(t).f),
            d(&|t| s.eval(t).df),
            d(&|t| s.eval(t).ddf),
        ]
    }

    #[test]
    fn linear_values() {
        let s = linear_schedule();
        assert_eq!(s.f(0.0), 0.0);
        assert_eq!(s.f(1.0), 1.0);
        assert_eq!(s.f(0.5), 0.5);
        assert_eq!(s.eval(0.37).df, 1.0);
        assert_eq!(s.name(), "linear");
    }

    #[test]
    fn beta_two_is_smoothstep() {
        let s = smooth_switching(2).unwrap();
        for x in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            let v = s.eval(x);
            assert!((v.f - (3.0 * x * x - 2.0 * x * x * x)).abs() < 1e-14);
            assert!((v.df - 6.0 * x * (1.0 - x)).abs() < 1e-13);
        }
        assert_eq!(s.eval(0.0).df, 0.0);
        assert!(s.eval(1.0).df.abs() < 1e-13);
    }

    #[test]
    fn beta_three_symmetric_and_flat() {
        let s = smooth_switching(3).unwrap();
        assert!((s.f(0.5) - 0.5).abs() < 1e-14);
        for x in [0.0, 1.0] {
            let v = s.eval(x);
            assert!(v.df.abs() < 1e-12 && v.ddf.abs() < 1e-12);
        }
        for x in [0.2, 0.5, 0.77] {
            let [d1, d2, d3] = fd(&s, x, 1e-5);
            let v = s.eval(x);
            assert!((v.df - d1).abs() < 1e-8);
            assert!((v.ddf - d2).abs() < 1e-6);
            assert!((v.dddf - d3).abs() < 1e-5);
        }
        s.validate().unwrap();
    }

    #[test]
    fn bump_is_normalized_smooth_and_symmetric() {
        let s = bump_schedule();
        s.validate().unwrap();
        assert!((s.f(0.5) - 0.5).abs() < 1e-13);
        for x in [0.15, 0.3, 0.5, 0.8] {
            let [d1, _, _] = fd(&s, x, 1e-5);
            let [_, d2, d3] = fd(&s, x, 1e-4);
            let v = s.eval(x);
            assert!((v.df - d1).abs() < 1e-7 * (1.0 + d1.abs()), "df at {x}");
            assert!((v.ddf - d2).abs() < 1e-5 * (1.0 + d2.abs()), "ddf at {x}: {} vs {d2}", v.ddf);
            assert!((v.dddf - d3).abs() < 1e-4 * (1.0 + d3.abs()), "dddf at {x}: {} vs {d3}", v.dddf);
        }
        assert_eq!(s.eval(1e-4).df, 0.0);
    }

    #[test]
    fn adaptive_with_constant_gap_is_linear() {
        for p in [1.2, 1.5, 1.9] {
            let s = adaptive_schedule(GapProfile::constant(1.0), p, 200).unwrap();
            assert!((adaptive_normalization(&s).unwrap() - 1.0).abs() < 1e-12);
            for x in [0.0, 0.3, 0.71, 1.0] {
                let v = s.eval(x);
                assert!((v.f - x).abs() < 1e-12);
                assert!((v.df - 1.0).abs() < 1e-12);
                assert!(v.ddf.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adaptive_second_derivative_matches_finite_difference() {
        let g = GapProfile::with_derivative(|u: f64| 0.3 + (u - 0.4).powi(2), |u: f64| 2.0 * (u - 0.4));
        let s = adaptive_schedule(g, 1.5, 10_000).unwrap();
        s.validate().unwrap();
        for x in [0.1, 0.45, 0.9] {
            let [d1, d2, _] = fd(&s, x, 1e-4);
            let v = s.eval(x);
            assert!((v.df - d1).abs() < 1e-7, "df {x}: {} vs {d1}", v.df);
            assert!((v.ddf - d2).abs() < 1e-6, "ddf {x}: {} vs {d2}", v.ddf);
        }
    }

    #[test]
    fn adaptive_rejects_bad_input() {
        assert!(matches!(
            adaptive_schedule(GapProfile::constant(1.0), 2.5, 1000),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            adaptive_schedule(GapProfile::new(|u| u - 0.5), 1.5, 1000),
            Err(Error::NonPositiveGap { .. })
        ));
    }

    #[test]
    fn parse_names() {
        assert_eq!(Schedule::parse("linear", None).unwrap().name(), "linear");
        assert_eq!(Schedule::parse("beta:k=3", None).unwrap().name(), "beta:k=3");
        assert_eq!(Schedule::parse("bump", None).unwrap().name(), "bump");
        let g = GapProfile::constant(1.0);
        assert_eq!(Schedule::parse("adaptive:p=1.5", Some(&g)).unwrap().name(), "adaptive:p=1.5");
        assert!(Schedule::parse("adaptive:p=1.5", None).is_err());
        assert!(Schedule::parse("beta:k=3,k=4", None).is_err());
        assert!(Schedule::parse("beta:q=3", None).is_err());
        assert!(Schedule::parse("cubic", None).is_err());
    }

    #[test]
    fn polynomial_custom() {
        let k = Schedule::polynomial("s(1-s)", vec![0.0, 1.0, -1.0]);
        let v = k.eval(0.25);
        assert!((v.f - 0.1875).abs() < 1e-15 && (v.df - 0.5).abs() < 1e-15 && (v.ddf + 2.0).abs() < 1e-15);
        assert_eq!(v.dddf, 0.0);
    }
}
