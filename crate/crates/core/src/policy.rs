//! Numerical tolerances, gathered in one record that is passed explicitly to
//! every operation that needs a threshold.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericalPolicy {
    /// Relative Hermiticity tolerance: `max |A_jk - conj(A_kj)| <= tol * (1 + ||A||)`.
    pub hermitian_tol: f64,
    /// `||U^dag U - I||` allowed for a unitary.
    pub unitarity_tol: f64,
    /// Eigenvalues closer than `cluster_rel_tol * max(||A||, 1e-300)` share a cluster.
    pub cluster_rel_tol: f64,
    /// Smallest admissible spectral gap.
    pub gap_floor: f64,
    /// Self-convergence tolerance of the propagator at s = 1 (operator norm).
    pub step_tol: f64,
    /// Hard cap on the number of propagation steps.
    pub max_steps: usize,
    /// Largest phase `tau * spread(H) * ds` allowed in a single step.
    pub max_step_phase: f64,
    /// Finite-difference step for derivative checks and finite-difference families.
    pub fd_step: f64,
    /// Step for the second-difference estimate of P''.
    pub fd_step_second: f64,
    /// Simpson refinement tolerance for bound quadratures.
    pub quadrature_rel_tol: f64,
    /// Iteration cap for the eigen-solver (0 = unbounded).
    pub eigen_max_iter: usize,
}

impl Default for NumericalPolicy {
    fn default() -> Self {
        Self {
            hermitian_tol: 1e-12,
            unitarity_tol: 1e-10,
            cluster_rel_tol: 1e-8,
            gap_floor: 1e-12,
            step_tol: 1e-6,
            max_steps: 1 << 20,
            max_step_phase: 0.5,
            fd_step: 1e-4,
            fd_step_second: 1e-3,
            quadrature_rel_tol: 1e-6,
            eigen_max_iter: 10_000,
        }
    }
}

impl NumericalPolicy {
    pub fn cluster_tol_for(&self, norm: f64) -> f64 {
        self.cluster_rel_tol * norm
    }
}
