mod common;

use adiaband::bounds::{
    expansion_residual, lemma8_chain, theorem3_bound, theorem4_bound, traditional_criterion, CRITERION_POINTS,
};
use adiaband::family::{grover_family, random_smooth_family, GroverRepresentation, HamiltonianFamily};
use adiaband::operator::{CMatrix, C64};
use adiaband::propagate::{evolve_adiabatic_with, evolve_real_with, track_grid, wave_operator, EvolveOptions, Substeps, TimeGrid};
use adiaband::schedule::linear_schedule;
use adiaband::spectral::{BandSelector, BandTracker};
use adiaband::NumericalPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grover(n: u32) -> (HamiltonianFamily, BandTracker) {
    let (f, _) = grover_family(n, linear_schedule(), GroverRepresentation::Full).unwrap();
    let t = BandTracker::new(&f, &BandSelector::ground(), &NumericalPolicy::default()).unwrap();
    (f, t)
}

/// `P'` and `Q P'' P` from differences of Jacobi ground projectors
/// (one-sided at the ends of `[0, 1]`).
fn projector_derivatives(f: &HamiltonianFamily, s: f64) -> (CMatrix, CMatrix, CMatrix) {
    let p = |x: f64| common::lowest_projector(&f.h(x), 1);
    let c = |x: f64| C64::new(x, 0.0);
    let p0 = p(s);
    let (d1, d2) = if s < 0.01 || s > 0.99 {
        let sg = if s < 0.01 { 1.0 } else { -1.0 };
        let h = 1e-3 * sg;
        let pk: Vec<CMatrix> = (1..4).map(|k| p(s + k as f64 * h)).collect();
        let d1 = (&p0 * c(-3.0) + &pk[0] * c(4.0) - &pk[1]) * c(0.5 / h);
        let d2 = (&p0 * c(2.0) - &pk[0] * c(5.0) + &pk[1] * c(4.0) - &pk[2]) * c(1.0 / (h * h));
        (d1, d2)
    } else {
        let h = 1e-3;
        let (pp, pm) = (p(s + h), p(s - h));
        let d1 = (&pp - &pm) * c(0.5 / h);
        let d2 = (&pp + &pm - &p0 * c(2.0)) * c(1.0 / (h * h));
        (d1, d2)
    };
    (p0, d1, d2)
}

fn gap(f: &HamiltonianFamily, s: f64) -> f64 {
    let ev = common::eigenvalues(&f.h(s));
    ev[1] - ev[0]
}

/// `A_tight(s)` assembled from finite differences and the trapezoid rule.
fn tight_oracle(f: &HamiltonianFamily, tau: f64, s: f64, nodes: usize) -> f64 {
    let boundary = |x: f64| {
        let (_, d1, _) = projector_derivatives(f, x);
        common::op_norm(&d1) / gap(f, x)
    };
    let integrand = |x: f64| {
        let (p, d1, d2) = projector_derivatives(f, x);
        let q = CMatrix::identity(p.nrows(), p.ncols()) - &p;
        let g = gap(f, x);
        let pd = common::op_norm(&d1);
        let dh = common::op_norm(&f.eval(x).dh);
        (common::op_norm(&(&q * d2 * &p)) + pd * pd) / g + 2.0 * dh * pd / (g * g)
    };
    (boundary(0.0) + boundary(s) + common::trapezoid(integrand, 0.0, s, nodes)) / tau
}

#[test]
fn tight_bound_matches_difference_oracle() {
    let (f, t) = grover(2);
    let b = theorem3_bound(&t, 100.0, 1.0, 129).unwrap();
    let oracle = tight_oracle(&f, 100.0, 1.0, 801);
    assert!((b.a_tight - oracle).abs() < 1e-5 * oracle, "{} vs {oracle}", b.a_tight);

    let r = random_smooth_family(3, 2, 2).unwrap();
    let rt = BandTracker::new(&r, &BandSelector::ground(), &NumericalPolicy::default()).unwrap();
    let b = theorem3_bound(&rt, 30.0, 0.6, 129).unwrap();
    let oracle = tight_oracle(&r, 30.0, 0.6, 1601);
    assert!((b.a_tight - oracle).abs() < 1e-4 * oracle, "{} vs {oracle}", b.a_tight);
}

#[test]
fn coarse_bound_for_grover_two() {
    let (_, t) = grover(2);
    let b = theorem3_bound(&t, 100.0, 1.0, 129).unwrap();
    let dh = 3f64.sqrt() / 2.0;
    let boundary = b.a_coarse - b.coarse_integral / 100.0;
    assert!((boundary - 3f64.sqrt() / 100.0).abs() < 1e-12);
    let integral = common::trapezoid(|u| 7.0 * dh * dh / common::grover_gap(2, u).powi(3), 0.0, 1.0, 100_001);
    assert!((b.coarse_integral - integral).abs() < 1e-6 * integral, "{} vs {integral}", b.coarse_integral);
}

#[test]
fn theorem4_bracket_matches_two_dimensional_rule() {
    let (_, t) = grover(3);
    let tau = 200.0;
    let with = theorem4_bound(&t, tau, 1.0, 1.0, 129).unwrap();
    let without = theorem4_bound(&t, tau, 1.0, 0.0, 129).unwrap();
    let bracket = (with - without) * tau * tau;
    let h = (7.0f64 / 8.0).sqrt();
    let g = |u: f64| common::grover_gap(3, u);
    let w3 = |u: f64| h * h / g(u).powi(3);
    let nodes = 4001;
    let oracle = (h * h / g(0.0).powi(4) + h * h / g(1.0).powi(4))
        + h / g(0.0).powi(2) * common::trapezoid(w3, 0.0, 1.0, nodes)
        + common::trapezoid(|u| h * h / g(u).powi(5), 0.0, 1.0, nodes)
        + common::triangle_trapezoid(w3, w3, 1.0, nodes);
    assert!((bracket - oracle).abs() < 1e-5 * oracle, "{bracket} vs {oracle}");
}

#[test]
fn traditional_criterion_matches_dense_grid() {
    let (_, t) = grover(4);
    let v = traditional_criterion(&t, CRITERION_POINTS).unwrap();
    let dh = (15.0f64 / 16.0).sqrt();
    let oracle = (0..100_000)
        .map(|k| dh / common::grover_gap(4, k as f64 / 99_999.0).powi(2))
        .fold(0.0, f64::max);
    assert!((v - oracle).abs() < 1e-3 * oracle, "{v} vs {oracle}");
    assert!((oracle - dh * 16.0).abs() < 1e-3 * oracle);
}

fn expansion_max(t: &BandTracker, tau: f64, points: usize) -> f64 {
    let policy = NumericalPolicy::default();
    let grid = TimeGrid::uniform(points).unwrap();
    let o = EvolveOptions {
        substeps: Substeps::Fixed(1),
    };
    let real = evolve_real_with(t.family(), tau, &grid, &policy, o).unwrap();
    let ad = evolve_adiabatic_with(t, tau, &grid, &policy, o).unwrap();
    let w = wave_operator(&real, &ad).unwrap();
    let b = track_grid(t, &grid).unwrap();
    expansion_residual(t, &w, &ad, &b).unwrap().max_second_order()
}

#[test]
fn expansion_residual_is_small_and_converges() {
    let (_, t) = grover(2);
    let coarse = expansion_max(&t, 50.0, 1024);
    let fine = expansion_max(&t, 50.0, 2048);
    assert!(fine <= 1e-4, "{fine}");
    assert!(coarse >= 3.0 * fine, "{coarse} -> {fine}");
}

#[test]
fn inequality_chain_on_two_cluster_band() {
    let policy = NumericalPolicy::default();
    let band = BandSelector::Clusters(vec![0, 1]);
    let grid: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
    let t = (0..40u64)
        .filter_map(|seed| {
            let f = random_smooth_family(8, seed, 2).ok()?;
            let t = BandTracker::new(&f, &band, &policy).ok()?;
            let b = t.track(&grid).ok()?;
            (b.iter().all(|b| b.gap > 0.02 && b.m == 2)).then_some(t)
        })
        .next()
        .expect("some seed keeps a two-cluster band open");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    for _ in 0..20 {
        let s = rng.gen_range(0.0..1.0);
        violations += lemma8_chain(&t, s).unwrap().iter().filter(|c| !c.holds(1e-9)).count();
    }
    assert_eq!(violations, 0);
}
