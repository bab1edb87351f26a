//! Band projectors, gaps, reduced resolvents, the twiddle map `X -> X~`
//! (the off-diagonal partial inverse of `A -> [H, A]`) and the projector
//! derivative identities built on it.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::family::{FamilyPoint, HamiltonianFamily};
use crate::operator::{comm, hermitian_eigen, norm, spectral_radius, CMatrix, HermitianOperator, Operator, SpectralData, C64, I};
use crate::policy::NumericalPolicy;

/// Which part of the spectrum forms the band.
#[derive(Debug, Clone, PartialEq)]
pub enum BandSelector {
    /// Cluster indices (ascending energy order) at the reference point.
    Clusters(Vec<usize>),
    /// All eigenvalues inside `[lo, hi]`.
    Window { lo: f64, hi: f64 },
}

impl BandSelector {
    pub fn ground() -> Self {
        BandSelector::Clusters(vec![0])
    }

    /// Eigenvalue indices selected in `spec`.
    pub fn resolve(&self, spec: &SpectralData, policy: &NumericalPolicy) -> Result<Vec<usize>> {
        let mut idx = Vec::new();
        match self {
            BandSelector::Clusters(cs) => {
                if cs.is_empty() {
                    return Err(Error::EmptyBand);
                }
                for &c in cs {
                    let cluster = spec.clusters.get(c).ok_or_else(|| {
                        Error::InvalidBand(format!("cluster {c} does not exist ({} clusters)", spec.clusters.len()))
                    })?;
                    idx.extend(cluster.indices.clone());
                }
                idx.sort_unstable();
                idx.dedup();
            }
            BandSelector::Window { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::InvalidBand(format!("window [{lo}, {hi}] is empty")));
                }
                for (k, &l) in spec.eigenvalues.iter().enumerate() {
                    let margin = (l - lo).abs().min((l - hi).abs());
                    if margin <= policy.gap_floor {
                        return Err(Error::InvalidBand(format!(
                            "eigenvalue {l} lies within {margin:e} of the window boundary"
                        )));
                    }
                    if l > *lo && l < *hi {
                        idx.push(k);
                    }
                }
                if idx.is_empty() {
                    return Err(Error::EmptyBand);
                }
            }
        }
        Ok(idx)
    }
}

/// One eigenvalue cluster inside the band.
#[derive(Debug, Clone)]
pub struct BandCluster {
    pub lambda: f64,
    pub projector: CMatrix,
}

/// Band projector `P`, its complement `Q`, the in-band clusters and the gap.
#[derive(Debug, Clone)]
pub struct ProjectorBundle {
    pub p: CMatrix,
    pub q: CMatrix,
    pub clusters: Vec<BandCluster>,
    /// Number of distinct eigenvalues (clusters) in the band.
    pub m: usize,
    /// Distance from the band eigenvalues to the rest of the spectrum
    /// (`+inf` when the band is the whole spectrum).
    pub gap: f64,
    pub spectral: SpectralData,
    /// Eigenvalue indices in the band, ascending.
    pub band: Vec<usize>,
    /// For each eigenvalue: `Some(cluster mean)` if in the band.
    band_energy: Vec<Option<f64>>,
}

impl ProjectorBundle {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `||Q X P||`, evaluated on the band eigenvectors so that only an
    /// `rank(P)`-square Gram matrix is diagonalized.
    pub fn lower_block_norm(&self, x: &CMatrix) -> Result<f64> {
        let v = self.spectral.eigenvectors.select_columns(&self.band);
        let xv = x * &v;
        let qxv = &xv - &v * (v.adjoint() * &xv);
        Ok(spectral_radius(&(qxv.adjoint() * &qxv))?.sqrt())
    }

    pub fn rank(&self) -> usize {
        self.band.len()
    }

    pub fn in_band(&self, k: usize) -> bool {
        self.band_energy[k].is_some()
    }

    /// Smallest and largest band eigenvalue.
    pub fn band_range(&self) -> (f64, f64) {
        let e = &self.spectral.eigenvalues;
        (e[self.band[0]], e[*self.band.last().unwrap()])
    }
}

/// Builds the bundle for eigenvalue indices `band` of `spec`.
pub fn bundle_from_indices(spec: SpectralData, band: Vec<usize>, s: f64, policy: &NumericalPolicy) -> Result<ProjectorBundle> {
    if band.is_empty() {
        return Err(Error::EmptyBand);
    }
    let n = spec.dim();
    if let Some(&k) = band.iter().find(|&&k| k >= n) {
        return Err(Error::InvalidBand(format!("eigenvalue index {k} out of range (dim {n})")));
    }
    let mut member = vec![false; n];
    for &k in &band {
        member[k] = true;
    }
    let mut gap = f64::INFINITY;
    for &a in &band {
        for (k, &mu) in spec.eigenvalues.iter().enumerate() {
            if !member[k] {
                gap = gap.min((spec.eigenvalues[a] - mu).abs());
            }
        }
    }
    // A cluster that straddles the band boundary has no spectral separation.
    for c in &spec.clusters {
        let inside = c.indices.clone().filter(|&k| member[k]).count();
        if inside != 0 && inside != c.multiplicity() {
            gap = gap.min(0.0);
        }
    }
    if !(gap > policy.gap_floor) {
        return Err(Error::GapCollapse {
            s,
            gap,
            floor: policy.gap_floor,
        });
    }
    let mut band_energy = vec![None; n];
    let mut clusters = Vec::new();
    for c in &spec.clusters {
        if member[c.indices.start] {
            for k in c.indices.clone() {
                band_energy[k] = Some(c.mean);
            }
            clusters.push(BandCluster {
                lambda: c.mean,
                projector: spec.projector_onto(c.indices.clone()),
            });
        }
    }
    let p = spec.projector_onto(band.iter().copied());
    let q = CMatrix::identity(n, n) - &p;
    Ok(ProjectorBundle {
        p,
        q,
        m: clusters.len(),
        clusters,
        gap,
        spectral: spec,
        band,
        band_energy,
    })
}

/// Band projector bundle for a fixed operator.
pub fn band_projector(spec: &SpectralData, band: &BandSelector, policy: &NumericalPolicy) -> Result<ProjectorBundle> {
    let idx = band.resolve(spec, policy)?;
    bundle_from_indices(spec.clone(), idx, f64::NAN, policy)
}

/// Eigen-decomposition with the policy's relative clustering tolerance.
pub fn decompose(h: &CMatrix, policy: &NumericalPolicy) -> Result<SpectralData> {
    let (eigenvalues, eigenvectors) = hermitian_eigen(h, policy.eigen_max_iter)?;
    let scale = eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let cluster_tol = policy.cluster_tol_for(scale);
    let clusters = crate::operator::cluster_eigenvalues(&eigenvalues, cluster_tol);
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        clusters,
        cluster_tol,
    })
}

/// Follows a band along a family. The band is fixed as a set of eigenvalue
/// indices at `s = 0`; between neighbouring sample points the projectors
/// must overlap, `tr(P(s') P(s)) >= rank - 1/4`.
#[derive(Debug, Clone)]
pub struct BandTracker {
    family: HamiltonianFamily,
    band: Vec<usize>,
    policy: NumericalPolicy,
}

impl BandTracker {
    pub fn new(family: &HamiltonianFamily, selector: &BandSelector, policy: &NumericalPolicy) -> Result<Self> {
        let spec = decompose(&family.h(0.0), policy)?;
        let band = selector.resolve(&spec, policy)?;
        // Validate at the reference point.
        bundle_from_indices(spec, band.clone(), 0.0, policy)?;
        Ok(Self {
            family: family.clone(),
            band,
            policy: *policy,
        })
    }

    pub fn family(&self) -> &HamiltonianFamily {
        &self.family
    }

    pub fn policy(&self) -> &NumericalPolicy {
        &self.policy
    }

    pub fn band_indices(&self) -> &[usize] {
        &self.band
    }

    pub fn rank(&self) -> usize {
        self.band.len()
    }

    pub fn bundle_at(&self, s: f64) -> Result<ProjectorBundle> {
        self.bundle_for(&self.family.h(s), s)
    }

    pub fn bundle_for(&self, h: &CMatrix, s: f64) -> Result<ProjectorBundle> {
        bundle_from_indices(decompose(h, &self.policy)?, self.band.clone(), s, &self.policy)
    }

    /// Bundles at every sample point, with the continuity check.
    pub fn track(&self, s_values: &[f64]) -> Result<Vec<ProjectorBundle>> {
        let bundles = s_values.iter().map(|&s| self.bundle_at(s)).collect::<Result<Vec<_>>>()?;
        for k in 1..bundles.len() {
            check_overlap(&bundles[k - 1], &bundles[k], s_values[k - 1], s_values[k])?;
        }
        Ok(bundles)
    }

    /// Derivative data at `s`.
    pub fn jet(&self, s: f64) -> Result<SpectralJet> {
        SpectralJet::new(self.family.eval(s), self.bundle_at(s)?)
    }
}

pub(crate) fn check_overlap(a: &ProjectorBundle, b: &ProjectorBundle, from: f64, to: f64) -> Result<()> {
    let overlap = (&a.p * &b.p).trace().re;
    let rank = a.rank();
    if overlap < rank as f64 - 0.25 {
        return Err(Error::BandDiscontinuity { from, to, overlap, rank });
    }
    Ok(())
}

/// `Q (H - z)^{-1} Q` on the complement of the band.
pub fn reduced_resolvent(bundle: &ProjectorBundle, z: C64, policy: &NumericalPolicy) -> Result<Operator> {
    let spec = &bundle.spectral;
    let n = bundle.dim();
    let mut scaled = spec.eigenvectors.clone();
    for (k, &mu) in spec.eigenvalues.iter().enumerate() {
        let w = if bundle.in_band(k) {
            C64::new(0.0, 0.0)
        } else {
            let d = C64::new(mu, 0.0) - z;
            if d.norm() < policy.gap_floor {
                return Err(Error::SingularReducedOperator { re: z.re, im: z.im });
            }
            d.inv()
        };
        for r in 0..n {
            scaled[(r, k)] *= w;
        }
    }
    Ok(Operator::from_matrix_unchecked(scaled * spec.eigenvectors.adjoint()))
}

/// `X~ = -sum_j (P_j X R_j + R_j X P_j)` with `R_j` the reduced resolvent at
/// the band eigenvalue `lambda_j`, evaluated in the eigenbasis of `H`.
pub fn twiddle(x: &CMatrix, bundle: &ProjectorBundle) -> CMatrix {
    let v = &bundle.spectral.eigenvectors;
    let mut y = v.adjoint() * x * v;
    let e = &bundle.spectral.eigenvalues;
    let n = e.len();
    for c in 0..n {
        for r in 0..n {
            y[(r, c)] = match (bundle.band_energy[r], bundle.band_energy[c]) {
                (Some(l), None) => -y[(r, c)] / (e[c] - l),
                (None, Some(l)) => -y[(r, c)] / (e[r] - l),
                _ => C64::new(0.0, 0.0),
            };
        }
    }
    v * y * v.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContourShape {
    Circle,
    /// Same real extent as the circle, imaginary semi-axis `aspect` times smaller.
    Ellipse { aspect: f64 },
}

/// Closed curve around the band eigenvalues for the contour oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub nodes: usize,
    pub shape: ContourShape,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            nodes: 128,
            shape: ContourShape::Circle,
        }
    }
}

impl ContourSpec {
    pub fn circle(nodes: usize) -> Self {
        Self {
            nodes,
            shape: ContourShape::Circle,
        }
    }
}

/// Quadrature nodes `z_k` and weights `w_k` with
/// `(2 pi i)^{-1} \oint F(z) dz ~= sum_k w_k F(z_k)`.
pub fn contour_nodes(bundle: &ProjectorBundle, contour: &ContourSpec, policy: &NumericalPolicy) -> Result<Vec<(C64, C64)>> {
    if contour.nodes < 16 {
        return Err(Error::TooFewContourNodes(contour.nodes));
    }
    let e = &bundle.spectral.eigenvalues;
    let (lo, hi) = bundle.band_range();
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let below = e.iter().enumerate().filter(|(k, &l)| !bundle.in_band(*k) && l < lo).map(|(_, &l)| lo - l);
    let above = e.iter().enumerate().filter(|(k, &l)| !bundle.in_band(*k) && l > hi).map(|(_, &l)| l - hi);
    let reach = below.chain(above).fold(f64::INFINITY, f64::min);
    let reach = if reach.is_finite() { 0.5 * reach } else { half.max(1.0) };
    let radius = half + reach;
    let b = match contour.shape {
        ContourShape::Circle => radius,
        ContourShape::Ellipse { aspect } => {
            if !(aspect > 0.0 && aspect <= 1.0) {
                return Err(Error::InvalidParameter(format!("ellipse aspect must lie in (0, 1], got {aspect}")));
            }
            radius * aspect
        }
    };
    // Band eigenvalues strictly inside, the rest strictly outside.
    let mut margin = f64::INFINITY;
    for (k, &l) in e.iter().enumerate() {
        let d = (l - center).abs() - radius;
        let signed = if bundle.in_band(k) { -d } else { d };
        margin = margin.min(signed);
    }
    if !(margin >= policy.gap_floor) {
        return Err(Error::ContourTooClose {
            margin,
            floor: policy.gap_floor,
        });
    }
    let n = contour.nodes;
    Ok((0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let z = C64::new(center + radius * t.cos(), b * t.sin());
            let dz = C64::new(-radius * t.sin(), b * t.cos());
            (z, dz / (I * n as f64))
        })
        .collect())
}

fn resolvent(h: &CMatrix, z: C64) -> Result<CMatrix> {
    let n = h.nrows();
    (h - CMatrix::identity(n, n) * z)
        .try_inverse()
        .ok_or(Error::SingularReducedOperator { re: z.re, im: z.im })
}

/// `(2 pi i)^{-1} \oint (H - z)^{-1} X (H - z)^{-1} dz` by the trapezoid rule.
pub fn twiddle_contour_oracle(
    x: &CMatrix,
    h: &HermitianOperator,
    bundle: &ProjectorBundle,
    contour: &ContourSpec,
    policy: &NumericalPolicy,
) -> Result<CMatrix> {
    let n = h.dim();
    let mut acc = CMatrix::zeros(n, n);
    for (z, w) in contour_nodes(bundle, contour, policy)? {
        let r = resolvent(h.matrix(), z)?;
        acc += &r * x * &r * w;
    }
    Ok(acc)
}

/// Riesz projector `-(2 pi i)^{-1} \oint (H - z)^{-1} dz`.
pub fn riesz_projector(h: &HermitianOperator, bundle: &ProjectorBundle, contour: &ContourSpec, policy: &NumericalPolicy) -> Result<CMatrix> {
    let n = h.dim();
    let mut acc = CMatrix::zeros(n, n);
    for (z, w) in contour_nodes(bundle, contour, policy)? {
        acc -= resolvent(h.matrix(), z)? * w;
    }
    Ok(acc)
}

/// `(2 pi i)^{-1} \oint R A R B R dz` by quadrature.
pub fn g_operator(
    a: &CMatrix,
    b: &CMatrix,
    h: &HermitianOperator,
    bundle: &ProjectorBundle,
    contour: &ContourSpec,
    policy: &NumericalPolicy,
) -> Result<CMatrix> {
    let n = h.dim();
    let mut acc = CMatrix::zeros(n, n);
    for (z, w) in contour_nodes(bundle, contour, policy)? {
        let r = resolvent(h.matrix(), z)?;
        acc += &r * a * &r * b * &r * w;
    }
    Ok(acc)
}

/// The twiddle-algebra form of [`g_operator`]:
/// `(P - Q)(A~ B~ + (A B~)~ - (A~ B)~)`.
pub fn g_operator_algebraic(a: &CMatrix, b: &CMatrix, bundle: &ProjectorBundle) -> CMatrix {
    let at = twiddle(a, bundle);
    let bt = twiddle(b, bundle);
    let inner = &at * &bt + twiddle(&(a * &bt), bundle) - twiddle(&(&at * b), bundle);
    (&bundle.p - &bundle.q) * inner
}

/// `P' = (H')~`.
pub fn projector_derivative(family: &HamiltonianFamily, s: f64, bundle: &ProjectorBundle) -> CMatrix {
    twiddle(&family.eval(s).dh, bundle)
}

/// `P'' = (H'')~ + (Q - P)(2 P'^2 + 2 ([H', P'])~)`.
pub fn projector_second_derivative(dh: &CMatrix, ddh: &CMatrix, pdot: &CMatrix, bundle: &ProjectorBundle) -> CMatrix {
    let two = C64::new(2.0, 0.0);
    let inner = pdot * pdot * two + twiddle(&comm(dh, pdot), bundle) * two;
    twiddle(ddh, bundle) + (&bundle.q - &bundle.p) * inner
}

/// Derivative of `X~` along the family:
/// `(X~)' = (X')~ + (Q - P)(P' X~ + X~ P' + ([H', X~])~ - ([P', X])~)`.
pub fn twiddle_dot(x: &CMatrix, xdot: &CMatrix, dh: &CMatrix, pdot: &CMatrix, bundle: &ProjectorBundle) -> CMatrix {
    let xt = twiddle(x, bundle);
    let inner = pdot * &xt + &xt * pdot + twiddle(&comm(dh, &xt), bundle) - twiddle(&comm(pdot, x), bundle);
    twiddle(xdot, bundle) + (&bundle.q - &bundle.p) * inner
}

/// `Q ((P')~)' P = Q ((P'')~ + (H' P'~)~ - (P'~ H')~) P`.
pub fn twiddle_derivative_from(dh: &CMatrix, pddot: &CMatrix, ptw: &CMatrix, bundle: &ProjectorBundle) -> CMatrix {
    let inner = twiddle(pddot, bundle) + twiddle(&(dh * ptw), bundle) - twiddle(&(ptw * dh), bundle);
    &bundle.q * inner * &bundle.p
}

/// `Q ((P')~)' P` for a family at `s`.
pub fn twiddle_derivative(family: &HamiltonianFamily, s: f64, bundle: &ProjectorBundle) -> CMatrix {
    let jet = SpectralJet::new(family.eval(s), bundle.clone()).expect("bundle dimension matches family");
    jet.w
}

/// Everything the bounds need at one point: `H` and its derivatives, the
/// band bundle, `P'`, `P'~`, `P''` and `W = Q (P'~)' P`.
#[derive(Debug, Clone)]
pub struct SpectralJet {
    pub point: FamilyPoint,
    pub bundle: ProjectorBundle,
    pub pdot: CMatrix,
    pub ptw: CMatrix,
    pub pddot: CMatrix,
    pub w: CMatrix,
}

impl SpectralJet {
    pub fn new(point: FamilyPoint, bundle: ProjectorBundle) -> Result<Self> {
        if point.h.nrows() != bundle.dim() {
            return Err(Error::DimensionMismatch {
                expected: bundle.dim(),
                found: point.h.nrows(),
            });
        }
        let pdot = twiddle(&point.dh, &bundle);
        let ptw = twiddle(&pdot, &bundle);
        let pddot = projector_second_derivative(&point.dh, &point.ddh, &pdot, &bundle);
        let w = twiddle_derivative_from(&point.dh, &pddot, &ptw, &bundle);
        Ok(Self {
            point,
            bundle,
            pdot,
            ptw,
            pddot,
            w,
        })
    }

    /// `||Q P'' P||`.
    pub fn qppp(&self) -> CMatrix {
        &self.bundle.q * &self.pddot * &self.bundle.p
    }
}

/// Five-point central-difference `P'` from projectors at `s +- h`,
/// `s +- 2h` (test and cross-check use).
pub fn projector_derivative_fd(tracker: &BandTracker, s: f64, h: f64) -> Result<CMatrix> {
    let p = |x: f64| tracker.bundle_at(x).map(|b| b.p);
    let c = |x: f64| C64::new(x, 0.0);
    Ok(((p(s + h)? - p(s - h)?) * c(8.0) - p(s + 2.0 * h)? + p(s - 2.0 * h)?) * c(1.0 / (12.0 * h)))
}

/// Richardson-extrapolated central second difference of `P`.
pub fn projector_second_derivative_fd(tracker: &BandTracker, s: f64, h: f64) -> Result<CMatrix> {
    let p0 = tracker.bundle_at(s)?.p;
    let d2 = |d: f64| -> Result<CMatrix> {
        let a = tracker.bundle_at(s + d)?.p;
        let b = tracker.bundle_at(s - d)?.p;
        Ok((a - &p0 * C64::new(2.0, 0.0) + b) / C64::new(d * d, 0.0))
    };
    let coarse = d2(h)?;
    let fine = d2(0.5 * h)?;
    Ok((fine * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0))
}

/// `||P X~ P|| + ||Q X~ Q||`, zero for an off-diagonal operator.
pub fn diagonal_defect(x: &CMatrix, bundle: &ProjectorBundle) -> f64 {
    norm(&(&bundle.p * x * &bundle.p)) + norm(&(&bundle.q * x * &bundle.q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli_x, random, spectral_decompose};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pol() -> NumericalPolicy {
        NumericalPolicy::default()
    }

    fn bundle_of(h: &HermitianOperator, band: BandSelector) -> ProjectorBundle {
        let spec = spectral_decompose(h, 1e-8).unwrap();
        band_projector(&spec, &band, &pol()).unwrap()
    }

    #[test]
    fn projector_examples() {
        let b = bundle_of(&HermitianOperator::from_real_diagonal(&[0.0, 0.0, 1.0]), BandSelector::ground());
        assert!(norm(&(&b.p - HermitianOperator::from_real_diagonal(&[1.0, 1.0, 0.0]).matrix())) < 1e-14);
        assert_eq!((b.m, b.gap), (1, 1.0));
        let b = bundle_of(
            &HermitianOperator::from_real_diagonal(&[0.0, 1.0, 5.0]),
            BandSelector::Window { lo: -0.5, hi: 1.5 },
        );
        assert_eq!((b.m, b.gap), (2, 4.0));
    }

    #[test]
    fn band_errors() {
        let spec = spectral_decompose(&HermitianOperator::from_real_diagonal(&[0.0, 1.0]), 0.0).unwrap();
        assert!(matches!(
            band_projector(&spec, &BandSelector::Clusters(vec![]), &pol()),
            Err(Error::EmptyBand)
        ));
        assert!(matches!(
            band_projector(&spec, &BandSelector::Window { lo: 2.0, hi: 3.0 }, &pol()),
            Err(Error::EmptyBand)
        ));
        assert!(matches!(
            band_projector(&spec, &BandSelector::Clusters(vec![4]), &pol()),
            Err(Error::InvalidBand(_))
        ));
        let spec = spectral_decompose(&HermitianOperator::from_real_diagonal(&[0.0, 1e-14]), 0.0).unwrap();
        assert!(matches!(
            band_projector(&spec, &BandSelector::Clusters(vec![0]), &pol()),
            Err(Error::GapCollapse { .. })
        ));
    }

    #[test]
    fn reduced_resolvent_examples() {
        let b = bundle_of(&HermitianOperator::from_real_diagonal(&[0.0, 1.0]), BandSelector::ground());
        let r = reduced_resolvent(&b, C64::new(0.0, 0.0), &pol()).unwrap();
        assert!(norm(&(r.matrix() - HermitianOperator::from_real_diagonal(&[0.0, 1.0]).matrix())) < 1e-15);
        let b = bundle_of(&HermitianOperator::from_real_diagonal(&[0.0, 2.0, 3.0]), BandSelector::ground());
        let r = reduced_resolvent(&b, C64::new(0.0, 0.0), &pol()).unwrap();
        let want = HermitianOperator::from_real_diagonal(&[0.0, 0.5, 1.0 / 3.0]);
        assert!(norm(&(r.matrix() - want.matrix())) < 1e-15);
        assert!(matches!(
            reduced_resolvent(&b, C64::new(2.0, 0.0), &pol()),
            Err(Error::SingularReducedOperator { .. })
        ));
    }

    #[test]
    fn twiddle_examples() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let b = bundle_of(&h, BandSelector::ground());
        assert!(norm(&twiddle(&b.p, &b)) < 1e-15);
        let t = twiddle(&pauli_x(), &b);
        assert!(norm(&(t + pauli_x())) < 1e-15);
    }

    #[test]
    fn twiddle_identities_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = HermitianOperator::symmetrized(&random::hermitian_with_spectrum(
            &mut rng,
            &[-1.0, -0.7, -0.7, 0.3, 0.9, 1.4],
        ));
        let b = bundle_of(&h, BandSelector::Clusters(vec![0, 1]));
        assert_eq!(b.m, 2);
        let x = random::matrix(&mut rng, 6);
        let xt = twiddle(&x, &b);
        assert!(diagonal_defect(&xt, &b) < 1e-12);
        let lhs = comm(h.matrix(), &xt);
        let rhs = &b.p * &x - &x * &b.p;
        assert!(norm(&(lhs - rhs)) < 1e-12);
        assert!(norm(&xt) <= (b.m as f64).sqrt() * norm(&x) / b.gap + 1e-12);
    }

    #[test]
    fn lower_block_norm_matches_full_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = HermitianOperator::symmetrized(&random::hermitian_with_spectrum(&mut rng, &[-1.0, -0.8, -0.8, 0.4, 1.1]));
        let b = bundle_of(&h, BandSelector::Clusters(vec![0, 1]));
        let x = random::matrix(&mut rng, 5);
        let full = norm(&(&b.q * &x * &b.p));
        assert!((b.lower_block_norm(&x).unwrap() - full).abs() < 1e-12 * full);
        let xt = twiddle(&random::hermitian(&mut rng, 5), &b);
        assert!((b.lower_block_norm(&xt).unwrap() - norm(&xt)).abs() < 1e-12 * norm(&xt));
    }

    #[test]
    fn contour_oracles_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = HermitianOperator::symmetrized(&random::hermitian_with_spectrum(
            &mut rng,
            &[-1.0, -0.6, 0.3, 0.7, 1.0, 1.3],
        ));
        let b = bundle_of(&h, BandSelector::Clusters(vec![0, 1]));
        let x = random::matrix(&mut rng, 6);
        let c = ContourSpec::default();
        let oracle = twiddle_contour_oracle(&x, &h, &b, &c, &pol()).unwrap();
        let alg = twiddle(&x, &b);
        assert!((oracle - &alg).norm() <= 1e-10 * alg.norm());
        let p = riesz_projector(&h, &b, &c, &pol()).unwrap();
        assert!(norm(&(p - &b.p)) < 1e-10);
        let e = ContourSpec {
            nodes: 256,
            shape: ContourShape::Ellipse { aspect: 0.5 },
        };
        let p = riesz_projector(&h, &b, &e, &pol()).unwrap();
        assert!(norm(&(p - &b.p)) < 1e-9);
        assert!(matches!(
            twiddle_contour_oracle(&x, &h, &b, &ContourSpec::circle(8), &pol()),
            Err(Error::TooFewContourNodes(8))
        ));
    }

    #[test]
    fn g_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let h = HermitianOperator::symmetrized(&random::hermitian_with_spectrum(&mut rng, &[-1.0, -0.8, 0.2, 0.5, 0.8, 1.1]));
        let b = bundle_of(&h, BandSelector::Clusters(vec![0, 1]));
        let (x, y) = (random::matrix(&mut rng, 6), random::matrix(&mut rng, 6));
        let q = g_operator(&x, &y, &h, &b, &ContourSpec::default(), &pol()).unwrap();
        let a = g_operator_algebraic(&x, &y, &b);
        assert!(norm(&(q - a)) < 1e-9);
    }

    #[test]
    fn rotating_spin_projector_speed() {
        // H(s) = cos(s) Z + sin(s) X: the ground projector rotates at half the field angle speed.
        let f = crate::family::function_family(
            2,
            "rotating spin",
            |s| crate::operator::pauli_z() * C64::new(s.cos(), 0.0) + pauli_x() * C64::new(s.sin(), 0.0),
            &pol(),
        );
        let t = BandTracker::new(&f, &BandSelector::ground(), &pol()).unwrap();
        let jet = t.jet(0.4).unwrap();
        assert!((norm(&jet.pdot) - 0.5).abs() < 1e-9);
        let fd = projector_derivative_fd(&t, 0.4, 1e-4).unwrap();
        assert!(norm(&(fd - &jet.pdot)) < 1e-7);
    }
}
