//! Scalar and operator-valued quadrature on uniform grids.

use crate::error::{Error, Result};
use crate::operator::{CMatrix, C64};

/// Values that quadrature rules can combine linearly.
pub trait Integrand: Clone {
    fn plus(self, other: Self) -> Self;
    fn times(self, a: f64) -> Self;
}

impl Integrand for f64 {
    fn plus(self, other: Self) -> Self {
        self + other
    }
    fn times(self, a: f64) -> Self {
        self * a
    }
}

impl Integrand for CMatrix {
    fn plus(self, other: Self) -> Self {
        self + other
    }
    fn times(self, a: f64) -> Self {
        self * C64::new(a, 0.0)
    }
}

/// Composite Simpson rule for samples on a uniform grid of spacing `h`.
///
/// An odd number of intervals is handled with a 3/8 rule on the last three.
pub fn simpson<T: Integrand>(values: &[T], h: f64) -> T {
    let n = values.len();
    assert!(n >= 2, "simpson needs at least two samples");
    let intervals = n - 1;
    match intervals {
        1 => values[0].clone().plus(values[1].clone()).times(0.5 * h),
        3 => three_eighths(&values[0..4], h),
        _ => {
            let even_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
            let mut acc = values[0].clone().plus(values[even_end].clone());
            for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                acc = acc.plus(v.clone().times(if i % 2 == 1 { 4.0 } else { 2.0 }));
            }
            let mut total = acc.times(h / 3.0);
            if intervals % 2 == 1 {
                total = total.plus(three_eighths(&values[n - 4..n], h));
            }
            total
        }
    }
}

fn three_eighths<T: Integrand>(v: &[T], h: f64) -> T {
    v[0].clone()
        .plus(v[1].clone().times(3.0))
        .plus(v[2].clone().times(3.0))
        .plus(v[3].clone())
        .times(3.0 * h / 8.0)
}

fn simpson_panel<T: Integrand>(v: &[T], h: f64) -> T {
    v[0].clone().plus(v[1].clone().times(4.0)).plus(v[2].clone()).times(h / 3.0)
}

/// Running integrals `I_k = int_{x_0}^{x_k}` on a uniform grid, fourth order
/// at every node.
///
/// Even nodes use composite Simpson from the origin; odd nodes add a 3/8
/// panel over the last three intervals to the Simpson value three nodes
/// back. Node 1 uses the three-point formula `h (5 f0 + 8 f1 - f2) / 12`.
pub fn cumulative_simpson<T: Integrand>(values: &[T], h: f64, zero: T) -> Vec<T> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(zero.clone());
    if n == 1 {
        return out;
    }
    if n == 2 {
        out.push(values[0].clone().plus(values[1].clone()).times(0.5 * h));
        return out;
    }
    let mut even = vec![zero; n];
    let mut k = 2;
    while k < n {
        even[k] = even[k - 2].clone().plus(simpson_panel(&values[k - 2..=k], h));
        k += 2;
    }
    for k in 1..n {
        let v = if k % 2 == 0 {
            even[k].clone()
        } else if k == 1 {
            values[0]
                .clone()
                .times(5.0)
                .plus(values[1].clone().times(8.0))
                .plus(values[2].clone().times(-1.0))
                .times(h / 12.0)
        } else {
            even[k - 3].clone().plus(three_eighths(&values[k - 3..=k], h))
        };
        out.push(v);
    }
    out
}

/// Adaptive Simpson quadrature of a scalar function.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut ok = true;
    let v = adaptive_step(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut ok);
    if !v.is_finite() {
        return Err(Error::QuadratureNotConverged { relative: f64::INFINITY });
    }
    if !ok {
        return Err(Error::QuadratureNotConverged { relative: tol });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *ok = false;
        return left + right + delta / 15.0;
    }
    adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok)
        + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p, d)
}

/// `int_a^b f` with an `n`-point Gauss–Legendre rule.
pub fn gauss_legendre_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .0
        .iter()
        .zip(&nodes.1)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Second-order derivative of a scalar function that stays inside `[0, 1]`:
/// central where possible, one-sided three-point at the ends.
pub fn unit_interval_derivative(f: impl Fn(f64) -> f64, s: f64, h: f64) -> f64 {
    if s - h < 0.0 {
        (-3.0 * f(s) + 4.0 * f(s + h) - f(s + 2.0 * h)) / (2.0 * h)
    } else if s + h > 1.0 {
        (3.0 * f(s) - 4.0 * f(s - h) + f(s - 2.0 * h)) / (2.0 * h)
    } else {
        (f(s + h) - f(s - h)) / (2.0 * h)
    }
}
