mod common;

use adiaband::family::{grover_family, interpolating_family, random_smooth_family, GroverRepresentation, HamiltonianFamily};
use adiaband::operator::{random, CMatrix, HermitianOperator, C64};
use adiaband::propagate::{
    adiabatic_diagnostics, evolve_adiabatic, evolve_adiabatic_with, evolve_real, evolve_real_with, intertwining_residuals, track_grid,
    volterra_residuals, wave_operator, EvolveOptions, Substeps, TimeGrid,
};
use adiaband::schedule::linear_schedule;
use adiaband::spectral::{BandSelector, BandTracker};
use adiaband::NumericalPolicy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tracker(f: &HamiltonianFamily) -> BandTracker {
    BandTracker::new(f, &BandSelector::ground(), &NumericalPolicy::default()).unwrap()
}

fn grover(n: u32) -> HamiltonianFamily {
    grover_family(n, linear_schedule(), GroverRepresentation::Full).unwrap().0
}

fn ground_vector(h: &CMatrix) -> CMatrix {
    let p = common::lowest_projector(h, 1);
    // Any nonzero column of the rank-one projector, normalized.
    let (k, _) = (0..p.ncols()).map(|k| (k, p[(k, k)].re)).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
    let v = p.column(k).into_owned();
    let n = v.norm();
    CMatrix::from_column_slice(v.nrows(), 1, (v / C64::new(n, 0.0)).as_slice())
}

#[test]
fn grover_population_matches_runge_kutta() {
    let policy = NumericalPolicy::default();
    let f = grover(2);
    let grid = TimeGrid::uniform(1024).unwrap();
    let real = evolve_real(&f, 50.0, &grid, &policy).unwrap();
    let bundles = track_grid(&tracker(&f), &grid).unwrap();
    let diag = adiabatic_diagnostics(&real, &bundles).unwrap();
    let psi0 = ground_vector(&f.h(0.0));
    let psi1 = common::dopri5(|s| f.h(s), 50.0, &psi0, &[1.0], 1e-11).pop().unwrap();
    let g1 = ground_vector(&f.h(1.0));
    let population = (g1.adjoint() * psi1)[(0, 0)].norm_sqr();
    let ours = 1.0 - diag.last().unwrap().transition_prob;
    assert!((population - ours).abs() < 1e-6, "{population} vs {ours}");
}

#[test]
fn random_family_propagator_matches_runge_kutta() {
    let policy = NumericalPolicy::default();
    let f = random_smooth_family(4, 5, 2).unwrap();
    let grid = TimeGrid::uniform(512).unwrap();
    let real = evolve_real(&f, 8.0, &grid, &policy).unwrap();
    let idx = [128usize, 300, 511];
    let at: Vec<f64> = idx.iter().map(|&k| grid.s_values()[k]).collect();
    let oracle = common::dopri5(|s| f.h(s), 8.0, &CMatrix::identity(4, 4), &at, 1e-11);
    for ((&k, s), o) in idx.iter().zip(&at).zip(oracle) {
        let d = real.u[k].matrix() - o;
        assert!(d.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-6, "s = {s}");
    }
}

#[test]
fn constant_hamiltonian_matches_taylor_exponential() {
    let policy = NumericalPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = HermitianOperator::symmetrized(&random::hermitian(&mut rng, 5));
    let f = interpolating_family(&h, &h, linear_schedule()).unwrap();
    let real = evolve_real(&f, 7.0, &TimeGrid::uniform(64).unwrap(), &policy).unwrap();
    let oracle = common::expm_taylor(&(h.matrix() * C64::new(0.0, -7.0)));
    let d = real.last().matrix() - oracle;
    assert!(d.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
}

#[test]
fn intertwining_holds_on_random_family() {
    let policy = NumericalPolicy::default();
    let f = random_smooth_family(6, 1, 2).unwrap();
    let t = tracker(&f);
    let grid = TimeGrid::uniform(2048).unwrap();
    let ad = evolve_adiabatic(&t, 50.0, &grid, &policy).unwrap();
    let bundles = track_grid(&t, &grid).unwrap();
    let worst = intertwining_residuals(&ad, &bundles).unwrap().into_iter().fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn intertwining_is_tau_independent() {
    let policy = NumericalPolicy {
        max_steps: 1 << 24,
        ..NumericalPolicy::default()
    };
    let f = grover(3);
    let t = BandTracker::new(&f, &BandSelector::ground(), &policy).unwrap();
    let grid = TimeGrid::uniform(256).unwrap();
    let bundles = track_grid(&t, &grid).unwrap();
    for tau in [20.0, 1e4] {
        let ad = evolve_adiabatic(&t, tau, &grid, &policy).unwrap();
        let worst = intertwining_residuals(&ad, &bundles).unwrap().into_iter().fold(0.0, f64::max);
        assert!(worst <= 1e-6, "tau {tau}: {worst}");
    }
}

fn volterra_max(f: &HamiltonianFamily, tau: f64, points: usize, substeps: Substeps) -> f64 {
    let policy = NumericalPolicy::default();
    let t = tracker(f);
    let grid = TimeGrid::uniform(points).unwrap();
    let o = EvolveOptions { substeps };
    let real = evolve_real_with(f, tau, &grid, &policy, o).unwrap();
    let ad = evolve_adiabatic_with(&t, tau, &grid, &policy, o).unwrap();
    let w = wave_operator(&real, &ad).unwrap();
    let b = track_grid(&t, &grid).unwrap();
    volterra_residuals(&w, &ad, &t, &b).unwrap().into_iter().fold(0.0, f64::max)
}

#[test]
fn volterra_residual_is_small_and_second_order() {
    let f = grover(2);
    assert!(volterra_max(&f, 20.0, 1024, Substeps::Auto) <= 1e-5);
    let coarse = volterra_max(&f, 20.0, 1024, Substeps::Fixed(1));
    let fine = volterra_max(&f, 20.0, 2048, Substeps::Fixed(1));
    assert!(coarse <= 1e-5 && coarse >= 4.0 * fine * 0.95, "{coarse} -> {fine}");
}

#[test]
fn wave_operator_leakage_shrinks_with_tau() {
    let policy = NumericalPolicy::default();
    let f = grover(3);
    let t = tracker(&f);
    let grid = TimeGrid::uniform(512).unwrap();
    let p0 = t.bundle_at(0.0).unwrap();
    let leak = |tau: f64| {
        let real = evolve_real(&f, tau, &grid, &policy).unwrap();
        let ad = evolve_adiabatic(&t, tau, &grid, &policy).unwrap();
        let w = wave_operator(&real, &ad).unwrap();
        common::op_norm(&(&p0.q * w.omega.last().unwrap() * &p0.p))
    };
    assert!(leak(100.0) < leak(10.0));
}

#[test]
fn grover_diagnostics_are_consistent() {
    let policy = NumericalPolicy::default();
    let f = grover(3);
    let grid = TimeGrid::uniform(512).unwrap();
    let real = evolve_real(&f, 100.0, &grid, &policy).unwrap();
    let d = *adiabatic_diagnostics(&real, &track_grid(&tracker(&f), &grid).unwrap()).unwrap().last().unwrap();
    assert!(d.proj_distance > 0.0 && d.proj_distance < 1.0);
    assert!(d.transition_prob <= d.proj_distance * d.proj_distance + 1e-15);
}

#[test]
fn reduced_grover_reproduces_full_dynamics() {
    let grid = TimeGrid::uniform(128).unwrap();
    for (n, tau) in [(2u32, 30.0), (3, 100.0)] {
        let run = |rep| {
            let f = grover_family(n, linear_schedule(), rep).unwrap().0;
            let real = evolve_real(&f, tau, &grid, &NumericalPolicy::default()).unwrap();
            adiabatic_diagnostics(&real, &track_grid(&tracker(&f), &grid).unwrap()).unwrap()
        };
        let (full, reduced) = (run(GroverRepresentation::Full), run(GroverRepresentation::Reduced));
        for (a, b) in full.iter().zip(&reduced) {
            assert!((a.transition_prob - b.transition_prob).abs() < 1e-8, "n={n}");
            assert!((a.proj_distance - b.proj_distance).abs() < 1e-7, "n={n}");
        }
    }
}
