//! Experiment plumbing: configs, runs, sweeps, fits and the verification
//! suite.

pub mod config;
pub mod fit;
pub mod run;
pub mod verify;

pub use config::{ProblemSpec, RunConfig, TauSpec};
pub use fit::{fit_power_law, fit_scaling, FitOptions, ScalingFit};
pub use run::{run_instance, run_single, sweep, write_run_csv, write_summary_csv, RunReport, SweepEntry};
pub use verify::{verify_suite, VerifyOptions, VerifyReport};
