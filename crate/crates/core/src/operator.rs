//! Dense complex operators: Hermitian and unitary newtypes, spectral
//! decomposition with eigenvalue clustering, operator norm and the unitary
//! exponential.

use std::ops::{Deref, Range};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::NumericalPolicy;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A bounded operator on a finite-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(CMatrix);

/// A self-adjoint operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

/// A unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

fn check_shape_and_finite(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::EmptyOperator);
    }
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFiniteEntry { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// `max_jk |A_jk - conj(A_kj)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for c in 0..n {
        for r in c..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_shape_and_finite(&m)?;
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Operator {
        Operator(self.0.adjoint())
    }
}

impl HermitianOperator {
    /// Validates Hermiticity against `policy.hermitian_tol * (1 + ||A||)`.
    pub fn new(m: CMatrix, policy: &NumericalPolicy) -> Result<Self> {
        check_shape_and_finite(&m)?;
        let dev = hermitian_deviation(&m);
        if dev > 0.0 {
            // Frobenius norm brackets the operator norm within sqrt(dim); only
            // pay for the exact norm when the cheap bounds are inconclusive.
            let fro = m.norm();
            let lower = fro / (m.nrows() as f64).sqrt();
            if dev > policy.hermitian_tol * (1.0 + fro) {
                return Err(Error::NonHermitianInput {
                    deviation: dev,
                    tolerance: policy.hermitian_tol * (1.0 + fro),
                });
            }
            if dev > policy.hermitian_tol * (1.0 + lower) {
                let norm = operator_norm_matrix(&m)?;
                let tol = policy.hermitian_tol * (1.0 + norm);
                if dev > tol {
                    return Err(Error::NonHermitianInput {
                        deviation: dev,
                        tolerance: tol,
                    });
                }
            }
        }
        Ok(Self(m))
    }

    /// Hermitian part `(A + A^dag) / 2` of an arbitrary square matrix.
    pub fn symmetrized(m: &CMatrix) -> Self {
        Self((m + m.adjoint()) * C64::new(0.5, 0.0))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self(CMatrix::from_diagonal(&d))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn as_operator(&self) -> Operator {
        Operator(self.0.clone())
    }
}

impl UnitaryOperator {
    pub fn new(m: CMatrix, unitarity_tol: f64) -> Result<Self> {
        check_shape_and_finite(&m)?;
        let dev = unitarity_defect(&m)?;
        if dev > unitarity_tol {
            return Err(Error::NonUnitary {
                deviation: dev,
                tolerance: unitarity_tol,
            });
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator(self.0.adjoint())
    }

    /// `||U^dag U - I||`.
    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.0).unwrap_or(f64::INFINITY)
    }
}

macro_rules! deref_matrix {
    ($($t:ty),*) => {$(
        impl Deref for $t {
            type Target = CMatrix;
            fn deref(&self) -> &CMatrix {
                &self.0
            }
        }
        impl AsRef<CMatrix> for $t {
            fn as_ref(&self) -> &CMatrix {
                &self.0
            }
        }
    )*};
}
deref_matrix!(Operator, HermitianOperator, UnitaryOperator);

impl From<HermitianOperator> for Operator {
    fn from(h: HermitianOperator) -> Self {
        Operator(h.0)
    }
}

impl From<UnitaryOperator> for Operator {
    fn from(u: UnitaryOperator) -> Self {
        Operator(u.0)
    }
}

fn unitarity_defect(m: &CMatrix) -> Result<f64> {
    let n = m.nrows();
    let g = m.adjoint() * m - CMatrix::identity(n, n);
    operator_norm_matrix(&g)
}

/// One group of numerically coincident eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the ascending eigenvalue list.
    pub indices: Range<usize>,
    /// Mean eigenvalue of the group.
    pub mean: f64,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.indices.len()
    }
}

/// Eigen-decomposition of a Hermitian operator, grouped into clusters.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one column per eigenvalue.
    pub eigenvectors: CMatrix,
    pub clusters: Vec<Cluster>,
    pub cluster_tol: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Orthogonal projector onto the span of the eigenvectors with the given indices.
    pub fn projector_onto(&self, indices: impl IntoIterator<Item = usize>) -> CMatrix {
        let n = self.dim();
        let mut p = CMatrix::zeros(n, n);
        for k in indices {
            let v = self.eigenvectors.column(k);
            p.ger(C64::new(1.0, 0.0), &v, &v.conjugate(), C64::new(1.0, 0.0));
        }
        p
    }

    pub fn cluster_projector(&self, j: usize) -> CMatrix {
        self.projector_onto(self.clusters[j].indices.clone())
    }

    pub fn cluster_projectors(&self) -> Vec<CMatrix> {
        (0..self.clusters.len()).map(|j| self.cluster_projector(j)).collect()
    }

    /// Index of the cluster that contains eigenvalue `k`.
    pub fn cluster_of(&self, k: usize) -> usize {
        self.clusters
            .iter()
            .position(|c| c.indices.contains(&k))
            .expect("eigenvalue index out of range")
    }

    /// Largest intra-cluster spread `max - min`.
    pub fn max_cluster_spread(&self) -> f64 {
        self.clusters
            .iter()
            .map(|c| self.eigenvalues[c.indices.end - 1] - self.eigenvalues[c.indices.start])
            .fold(0.0, f64::max)
    }

    /// `sum_j mean_j P_j`, the operator rebuilt from the clustered spectrum.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        let mut a = CMatrix::zeros(n, n);
        for c in &self.clusters {
            for k in c.indices.clone() {
                let v = self.eigenvectors.column(k);
                a.ger(C64::new(c.mean, 0.0), &v, &v.conjugate(), C64::new(1.0, 0.0));
            }
        }
        a
    }

    /// Apply `phi` to the spectrum: `V diag(phi(lambda)) V^dag`.
    pub fn map_spectrum(&self, phi: impl Fn(f64) -> C64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = phi(lam);
            for r in 0..scaled.nrows() {
                scaled[(r, k)] *= w;
            }
        }
        scaled * v.adjoint()
    }
}

/// Default clustering tolerance `1e-8 * ||A||`.
pub fn default_cluster_tol(a: &HermitianOperator, policy: &NumericalPolicy) -> Result<f64> {
    Ok(policy.cluster_tol_for(operator_norm(a)?))
}

/// Eigen-decomposition with eigenvalues ascending and clusters formed from
/// maximal runs whose consecutive gaps are at most `cluster_tol`.
pub fn spectral_decompose(a: &HermitianOperator, cluster_tol: f64) -> Result<SpectralData> {
    spectral_decompose_with(a, cluster_tol, &NumericalPolicy::default())
}

pub fn spectral_decompose_with(
    a: &HermitianOperator,
    cluster_tol: f64,
    policy: &NumericalPolicy,
) -> Result<SpectralData> {
    if !(cluster_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cluster_tol must be non-negative, got {cluster_tol}"
        )));
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(a.matrix(), policy.eigen_max_iter)?;
    let clusters = cluster_eigenvalues(&eigenvalues, cluster_tol);
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        clusters,
        cluster_tol,
    })
}

/// Checks Hermiticity before decomposing a raw matrix.
pub fn spectral_decompose_matrix(
    m: &CMatrix,
    cluster_tol: f64,
    policy: &NumericalPolicy,
) -> Result<SpectralData> {
    let h = HermitianOperator::new(m.clone(), policy)?;
    spectral_decompose_with(&h, cluster_tol, policy)
}

pub(crate) fn cluster_eigenvalues(eigenvalues: &[f64], cluster_tol: f64) -> Vec<Cluster> {
    let mut clusters = Vec::new();
    let mut start = 0;
    for k in 1..=eigenvalues.len() {
        if k == eigenvalues.len() || eigenvalues[k] - eigenvalues[k - 1] > cluster_tol {
            let slice = &eigenvalues[start..k];
            let mean = slice.iter().sum::<f64>() / slice.len() as f64;
            clusters.push(Cluster {
                indices: start..k,
                mean,
            });
            start = k;
        }
    }
    clusters
}

/// Ascending eigenvalues and matching eigenvector columns of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: &CMatrix, max_iter: usize) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((vec![m[(0, 0)].re], CMatrix::identity(1, 1)));
    }
    if n == 2 {
        return Ok(hermitian_eigen_2x2(m));
    }
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, max_iter)
        .ok_or_else(|| {
            Error::ConvergenceFailure(format!("no convergence within {max_iter} iterations (dim {n})"))
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure("non-finite eigenvalue".into()));
    }
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Closed-form eigen-decomposition of a 2x2 Hermitian matrix (lower triangle read).
fn hermitian_eigen_2x2(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(1, 0)].conj(); // upper-right entry implied by the lower triangle
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    let values = vec![mean - r, mean + r];
    let mut v = CMatrix::zeros(2, 2);
    if b.norm() <= f64::MIN_POSITIVE.sqrt() * (1.0 + r) {
        if a <= d {
            v[(0, 0)] = C64::new(1.0, 0.0);
            v[(1, 1)] = C64::new(1.0, 0.0);
        } else {
            v[(1, 0)] = C64::new(1.0, 0.0);
            v[(0, 1)] = C64::new(1.0, 0.0);
        }
        return (values, v);
    }
    // Stable half-angle form: for the lower eigenvalue use (b, -(half + r)) or
    // (half - r, b*) depending on the sign of `half`.
    let lower = if half >= 0.0 {
        [b, C64::new(-(half + r), 0.0)]
    } else {
        [C64::new(half - r, 0.0), b.conj()]
    };
    let norm = (lower[0].norm_sqr() + lower[1].norm_sqr()).sqrt();
    let l0 = lower[0] / norm;
    let l1 = lower[1] / norm;
    v[(0, 0)] = l0;
    v[(1, 0)] = l1;
    // Orthogonal complement in C^2.
    v[(0, 1)] = -l1.conj();
    v[(1, 1)] = l0.conj();
    (values, v)
}

/// Largest singular value, `sqrt(lambda_max(A^dag A))`.
pub fn operator_norm(a: &CMatrix) -> Result<f64> {
    operator_norm_matrix(a)
}

pub(crate) fn operator_norm_matrix(a: &CMatrix) -> Result<f64> {
    let n = a.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let gram = a.adjoint() * a;
    Ok(spectral_radius(&gram)?.sqrt())
}

/// Largest `|lambda|` of a Hermitian matrix (lower triangle read), without
/// eigenvectors.
pub(crate) fn spectral_radius(m: &CMatrix) -> Result<f64> {
    match m.nrows() {
        0 => return Ok(0.0),
        1 => return Ok(m[(0, 0)].re.abs()),
        _ => {}
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConvergenceFailure("non-finite matrix entry".into()));
    }
    Ok(m.symmetric_eigenvalues().iter().fold(0.0f64, |a, &l| a.max(l.abs())))
}

/// Spectral norm of a Hermitian matrix, `max |lambda|`; cheaper than
/// [`norm`] since no Gram matrix is formed.
pub fn hermitian_norm(a: &CMatrix) -> Result<f64> {
    spectral_radius(&((a + a.adjoint()) * C64::new(0.5, 0.0)))
}

/// Spectral norm; panics only if the eigen-solver fails, which does not
/// happen for finite input in practice. Intended for diagnostics.
pub fn norm(a: &CMatrix) -> f64 {
    operator_norm_matrix(a).expect("eigen-solver failed while computing an operator norm")
}

/// `exp(-i t A)` via the spectral decomposition of `A`.
pub fn unitary_exp(a: &HermitianOperator, t: f64) -> Result<UnitaryOperator> {
    unitary_exp_matrix(a.matrix(), t)
}

pub(crate) fn unitary_exp_matrix(a: &CMatrix, t: f64) -> Result<UnitaryOperator> {
    let (values, vectors) = hermitian_eigen(a, NumericalPolicy::default().eigen_max_iter)?;
    let n = values.len();
    let mut scaled = vectors.clone();
    for (k, &lam) in values.iter().enumerate() {
        let w = C64::from_polar(1.0, -t * lam);
        for r in 0..n {
            scaled[(r, k)] *= w;
        }
    }
    Ok(UnitaryOperator(scaled * vectors.adjoint()))
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<Operator> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(Operator(a * b - b * a))
}

pub(crate) fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C64::new(0., 0.), C64::new(1., 0.), C64::new(1., 0.), C64::new(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C64::new(0., 0.), C64::new(0., -1.), C64::new(0., 1.), C64::new(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C64::new(1., 0.), C64::new(0., 0.), C64::new(0., 0.), C64::new(-1., 0.)])
}

/// Seeded random operators for tests and generated families.
pub mod random {
    use super::*;

    /// Complex matrix with independent entries uniform in the unit square `[-1,1]^2`.
    pub fn matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
        CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    /// Hermitian part of [`matrix`].
    pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
        let m = matrix(rng, dim);
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Unitary taken from the eigenvectors of a random Hermitian matrix.
    pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
        let h = hermitian(rng, dim);
        hermitian_eigen(&h, 0).expect("eigen-solver failed on a random matrix").1
    }

    /// `V diag(spectrum) V^dag` with a random unitary `V`.
    pub fn hermitian_with_spectrum<R: Rng + ?Sized>(rng: &mut R, spectrum: &[f64]) -> CMatrix {
        let v = unitary(rng, spectrum.len());
        let d = DVector::from_iterator(spectrum.len(), spectrum.iter().map(|&x| C64::new(x, 0.0)));
        &v * CMatrix::from_diagonal(&d) * v.adjoint()
    }
}
