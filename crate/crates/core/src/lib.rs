//! Quantitative adiabatic evolution: propagators, spectral-gap error
//! bounds and the operator identities behind them, for dense
//! finite-dimensional Hamiltonians.

pub mod bounds;
pub mod error;
pub mod family;
pub mod harness;
pub mod operator;
pub mod policy;
pub mod propagate;
pub mod quadrature;
pub mod schedule;
pub mod spectral;

pub use error::{Error, Result};
pub use policy::NumericalPolicy;
