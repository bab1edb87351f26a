//! Independent reference implementations. Nothing here calls into the
//! numerical routines of the crate under test; only the matrix types are
//! shared.
#![allow(dead_code)]

use adiaband::operator::{CMatrix, C64};
use nalgebra::DMatrix;

/// Real symmetric `2n x 2n` embedding `[[Re A, -Im A], [Im A, Re A]]`.
fn embed(a: &CMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let z = a[(i % n, j % n)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Cyclic Jacobi rotations on a real symmetric matrix; returns eigenvalues
/// and eigenvectors (columns), ascending.
pub fn jacobi_symmetric(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let vals = idx.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, idx[c])]);
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending (each embedded eigenvalue
/// appears twice; one copy is kept).
pub fn eigenvalues(a: &CMatrix) -> Vec<f64> {
    let (vals, _) = jacobi_symmetric(&embed(a));
    vals.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

/// Projector onto the `k` lowest eigenvectors of a Hermitian matrix.
pub fn lowest_projector(a: &CMatrix, k: usize) -> CMatrix {
    let n = a.nrows();
    let (_, vecs) = jacobi_symmetric(&embed(a));
    let cols = vecs.columns(0, 2 * k);
    let pr = &cols * cols.transpose();
    CMatrix::from_fn(n, n, |i, j| C64::new(pr[(i, j)], pr[(i + n, j)]))
}

/// Operator norm as the square root of the top eigenvalue of `A^dag A`.
pub fn op_norm(a: &CMatrix) -> f64 {
    let ata = a.adjoint() * a;
    eigenvalues(&ata).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// `exp(A)` by Taylor summation with scaling and squaring.
pub fn expm_taylor(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let frob = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut squarings = 0;
    let mut scale = 1.0;
    while frob * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * C64::new(scale, 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &x * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Dormand–Prince 5(4) with step control for `U' = -i tau H(s) U`,
/// returning `U` at each requested (increasing) `s`.
pub fn dopri5(h: impl Fn(f64) -> CMatrix, tau: f64, u0: &CMatrix, at: &[f64], tol: f64) -> Vec<CMatrix> {
    let rhs = |s: f64, u: &CMatrix| -> CMatrix { h(s) * u * C64::new(0.0, -tau) };
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut s = 0.0;
    let mut u = u0.clone();
    let mut dt = 1e-3 / (1.0 + tau);
    let mut out = Vec::with_capacity(at.len());
    for &target in at {
        while s < target {
            let step = dt.min(target - s);
            let mut k: Vec<CMatrix> = Vec::with_capacity(7);
            for i in 0..7 {
                let mut y = u.clone();
                for (j, kj) in k.iter().enumerate() {
                    if A[i][j] != 0.0 {
                        y += kj * C64::new(step * A[i][j], 0.0);
                    }
                }
                k.push(rhs(s + C[i] * step, &y));
            }
            let mut y5 = u.clone();
            let mut err = CMatrix::zeros(u.nrows(), u.ncols());
            for i in 0..7 {
                y5 += &k[i] * C64::new(step * B5[i], 0.0);
                err += &k[i] * C64::new(step * (B5[i] - B4[i]), 0.0);
            }
            let e = err.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if e <= tol {
                s += step;
                u = y5;
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * (tol / e).powf(0.2)).clamp(0.2, 5.0) };
            dt = step * factor;
        }
        out.push(u.clone());
    }
    out
}

/// Minimal-norm solution of `[H, Y] = P X - X P` through the SVD
/// pseudo-inverse of the vectorized commutator map.
pub fn sylvester_twiddle(h: &CMatrix, p: &CMatrix, x: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let id = CMatrix::identity(n, n);
    // vec(H Y - Y H) = (I (x) H - H^T (x) I) vec(Y), column-major vec.
    let ad = id.kronecker(h) - h.transpose().kronecker(&id);
    let rhs = p * x - x * p;
    let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let svd = ad.svd(true, true);
    let y = svd.solve(&b, 1e-9).expect("svd solve");
    CMatrix::from_column_slice(n, n, y.as_slice())
}

/// Closed-form ground gap of the Grover family at interpolation parameter `u`.
pub fn grover_gap(n: u32, u: f64) -> f64 {
    let big = 2f64.powi(n as i32);
    (1.0 - 4.0 * (1.0 - 1.0 / big) * u * (1.0 - u)).sqrt()
}

/// Composite trapezoid rule on `[a, b]` with `nodes` nodes.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: usize) -> f64 {
    let h = (b - a) / (nodes - 1) as f64;
    let inner: f64 = (1..nodes - 1).map(|k| f(a + k as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Two-dimensional product rule for `int_0^s ds' a(s') int_0^s' b(s'') ds''`
/// over the triangle `0 <= s'' <= s' <= s`: each grid cell contributes its
/// area times the corner averages of `a` and `b`, the diagonal cells half.
pub fn triangle_trapezoid(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, s: f64, nodes: usize) -> f64 {
    let h = s / (nodes - 1) as f64;
    let av: Vec<f64> = (0..nodes).map(|k| a(k as f64 * h)).collect();
    let bv: Vec<f64> = (0..nodes).map(|k| b(k as f64 * h)).collect();
    let abar: Vec<f64> = av.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let bbar: Vec<f64> = bv.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut total = 0.0;
    for i in 0..nodes - 1 {
        for j in 0..i {
            total += h * h * abar[i] * bbar[j];
        }
        total += 0.5 * h * h * abar[i] * bbar[i];
    }
    total
}
