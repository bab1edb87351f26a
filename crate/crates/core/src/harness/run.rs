//! Single runs and sweeps: build the family for each parameter point, evolve,
//! diagnose, evaluate the bounds and emit CSV.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::{ProblemSpec, RunConfig, TauSpec};
use crate::bounds::bound_profile;
use crate::error::{Error, Result};
use crate::family::{grover_family_for, interpolating_family, random_smooth_family, reparametrized_family, GroverProblem, HamiltonianFamily};
use crate::operator::{CMatrix, HermitianOperator, C64};
use crate::policy::NumericalPolicy;
use crate::propagate::{
    adiabatic_diagnostics, evolve_adiabatic_with, evolve_real_with, intertwining_residuals, track_grid, volterra_residuals,
    wave_operator, EvolveOptions, TimeGrid,
};
use crate::schedule::{linear_schedule, GapProfile, Schedule};
use crate::spectral::{BandSelector, BandTracker};

/// Environment variable overriding the sweep worker count.
pub const WORKERS_ENV: &str = "ADIABAND_WORKERS";

/// Normative per-grid-point CSV columns.
pub const RUN_COLUMNS: [&str; 18] = [
    "run_id",
    "problem",
    "n",
    "dim",
    "schedule",
    "p",
    "tau",
    "s",
    "gap",
    "m",
    "transition_prob",
    "proj_distance",
    "A_tight",
    "A_coarse",
    "A_theorem4",
    "intertwining_residual",
    "volterra_residual",
    "walltime_ms",
];

/// Sweep summary columns: the run identification, maxima over `s` under the
/// per-point names, bounds at `s = 1`, and run bookkeeping.
pub const SUMMARY_COLUMNS: [&str; 20] = [
    "run_id",
    "problem",
    "n",
    "dim",
    "schedule",
    "p",
    "tau",
    "g_min",
    "transition_prob",
    "proj_distance",
    "A_tight",
    "A_coarse",
    "A_theorem4",
    "fitted_c",
    "intertwining_residual",
    "volterra_residual",
    "final_transition_prob",
    "final_proj_distance",
    "walltime_ms",
    "status",
];

#[derive(Debug, Clone)]
enum ProblemInstance {
    Grover(GroverProblem),
    Random { dim: usize, seed: u64, harmonics: usize },
    Matrix { h0: HermitianOperator, h1: HermitianOperator },
}

/// One point of the parameter product.
#[derive(Debug, Clone)]
pub struct RunInstance {
    pub run_id: String,
    problem: ProblemInstance,
    pub schedule: String,
    tau: TauChoice,
}

#[derive(Debug, Clone, Copy)]
enum TauChoice {
    Fixed(f64),
    Scaled { constant: f64, gmin_exponent: f64 },
}

/// Identification columns shared by rows and summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLabel {
    pub run_id: String,
    pub problem: String,
    pub n: Option<u32>,
    pub dim: usize,
    pub schedule: String,
    pub p: Option<f64>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub s: f64,
    pub gap: f64,
    pub m: usize,
    pub transition_prob: f64,
    pub proj_distance: f64,
    pub a_tight: Option<f64>,
    pub a_coarse: Option<f64>,
    pub a_theorem4: Option<f64>,
    pub intertwining_residual: Option<f64>,
    pub volterra_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub g_min: f64,
    pub transition_prob: f64,
    pub proj_distance: f64,
    pub a_tight: Option<f64>,
    pub a_coarse: Option<f64>,
    pub a_theorem4: Option<f64>,
    pub fitted_c: Option<f64>,
    pub intertwining_residual: Option<f64>,
    pub volterra_residual: Option<f64>,
    pub final_transition_prob: f64,
    pub final_proj_distance: f64,
}

/// Per-grid-point diagnostics and bounds of one run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub label: RunLabel,
    pub rows: Vec<RunRow>,
    pub summary: RunSummary,
    pub walltime_ms: f64,
}

/// Outcome of one sweep point.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub run_id: String,
    pub outcome: std::result::Result<RunReport, String>,
}

fn read_matrix(v: &Value, path: &str) -> Result<CMatrix> {
    let rows = v.as_array().ok_or_else(|| Error::config(path, "expected a list of rows"))?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::config(path, "matrix is empty"));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let row = row.as_array().ok_or_else(|| Error::config(&rp, "expected a row"))?;
        if row.len() != n {
            return Err(Error::config(&rp, format!("row has {} entries, expected {n}", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            let ep = format!("{rp}[{j}]");
            m[(i, j)] = match x {
                Value::Number(_) => C64::new(x.as_f64().unwrap(), 0.0),
                Value::Array(pair) if pair.len() == 2 && pair.iter().all(Value::is_number) => {
                    C64::new(pair[0].as_f64().unwrap(), pair[1].as_f64().unwrap())
                }
                _ => return Err(Error::config(&ep, "expected a number or [re, im]")),
            };
        }
    }
    Ok(m)
}

fn load_matrix_file(path: &Path, policy: &NumericalPolicy) -> Result<(HermitianOperator, HermitianOperator)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("problem.matrix_file.path", format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::config("problem.matrix_file.path", format!("invalid JSON in {}: {e}", path.display())))?;
    let map = v
        .as_object()
        .ok_or_else(|| Error::config("problem.matrix_file", "file must hold {\"h0\": ..., \"h1\": ...}"))?;
    for k in map.keys() {
        if k != "h0" && k != "h1" {
            return Err(Error::config(format!("problem.matrix_file.{k}"), "unknown key (expected h0, h1)"));
        }
    }
    let get = |k: &str| -> Result<HermitianOperator> {
        let p = format!("problem.matrix_file.{k}");
        let m = read_matrix(map.get(k).ok_or_else(|| Error::config(&p, "missing required field"))?, &p)?;
        HermitianOperator::new(m, policy)
    };
    let (h0, h1) = (get("h0")?, get("h1")?);
    if h0.dim() != h1.dim() {
        return Err(Error::DimensionMismatch {
            expected: h0.dim(),
            found: h1.dim(),
        });
    }
    Ok((h0, h1))
}

impl RunConfig {
    /// The Cartesian product of problem sizes, schedules and `tau` values,
    /// in that nesting order.
    pub fn instances(&self) -> Result<Vec<RunInstance>> {
        let problems: Vec<ProblemInstance> = match &self.problem {
            ProblemSpec::Grover {
                n,
                representation,
                marked,
            } => n
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    GroverProblem::with_marked(n, *marked, *representation)
                        .map(ProblemInstance::Grover)
                        .map_err(|e| Error::config(format!("problem.grover.n[{i}]"), e.to_string()))
                })
                .collect::<Result<_>>()?,
            ProblemSpec::Random { dim, seed, harmonics } => vec![ProblemInstance::Random {
                dim: *dim,
                seed: *seed,
                harmonics: *harmonics,
            }],
            ProblemSpec::MatrixFile { path } => {
                let (h0, h1) = load_matrix_file(path, &self.policy)?;
                vec![ProblemInstance::Matrix { h0, h1 }]
            }
        };
        let taus: Vec<TauChoice> = match &self.tau {
            TauSpec::Values(v) => v.iter().map(|&t| TauChoice::Fixed(t)).collect(),
            TauSpec::Scaled {
                constant,
                gmin_exponent,
            } => vec![TauChoice::Scaled {
                constant: *constant,
                gmin_exponent: *gmin_exponent,
            }],
        };
        let mut out = Vec::new();
        for p in &problems {
            for s in &self.schedules {
                for t in &taus {
                    out.push(RunInstance {
                        run_id: format!("r{:04}", out.len()),
                        problem: p.clone(),
                        schedule: s.clone(),
                        tau: *t,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Gap of the band of `base` as a function of its parameter, for the
/// adaptive schedule of non-analytic problems.
fn numeric_gap_profile(base: &HamiltonianFamily, band: &BandSelector, policy: &NumericalPolicy) -> Result<GapProfile> {
    let tracker = BandTracker::new(base, band, policy)?;
    Ok(GapProfile::new(move |u| tracker.bundle_at(u).map(|b| b.gap).unwrap_or(f64::NAN)))
}

struct Experiment {
    family: HamiltonianFamily,
    tracker: BandTracker,
    label: RunLabel,
    analytic_gmin: Option<f64>,
}

fn build(config: &RunConfig, inst: &RunInstance) -> Result<Experiment> {
    let policy = &config.policy;
    let (family, problem_name, n, analytic_gmin, schedule) = match &inst.problem {
        ProblemInstance::Grover(p) => {
            let schedule = Schedule::parse(&inst.schedule, Some(&p.gap_profile()))?;
            let (family, _) = grover_family_for(p, schedule.clone())?;
            (family, "grover", Some(p.n), Some(p.min_gap()), schedule)
        }
        ProblemInstance::Random { dim, seed, harmonics } => {
            let base = random_smooth_family(*dim, *seed, *harmonics)?;
            let gap = if inst.schedule.starts_with("adaptive") {
                Some(numeric_gap_profile(&base, &config.band, policy)?)
            } else {
                None
            };
            let schedule = Schedule::parse(&inst.schedule, gap.as_ref())?;
            (reparametrized_family(&base, schedule.clone()), "random", None, None, schedule)
        }
        ProblemInstance::Matrix { h0, h1 } => {
            let gap = if inst.schedule.starts_with("adaptive") {
                let base = interpolating_family(h0, h1, linear_schedule())?;
                Some(numeric_gap_profile(&base, &config.band, policy)?)
            } else {
                None
            };
            let schedule = Schedule::parse(&inst.schedule, gap.as_ref())?;
            (interpolating_family(h0, h1, schedule.clone())?, "matrix", None, None, schedule)
        }
    };
    let tracker = BandTracker::new(&family, &config.band, policy)?;
    Ok(Experiment {
        label: RunLabel {
            run_id: inst.run_id.clone(),
            problem: problem_name.to_string(),
            n,
            dim: family.dim(),
            schedule: schedule.name(),
            p: schedule.exponent(),
            tau: f64::NAN,
        },
        family,
        tracker,
        analytic_gmin,
    })
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

/// Runs one parameter point.
pub fn run_instance(config: &RunConfig, inst: &RunInstance) -> Result<RunReport> {
    let start = Instant::now();
    let policy = &config.policy;
    let grid = TimeGrid::uniform(config.grid)?;
    let mut exp = build(config, inst)?;
    let bundles = track_grid(&exp.tracker, &grid)?;
    let g_min = exp
        .analytic_gmin
        .unwrap_or_else(|| bundles.iter().map(|b| b.gap).fold(f64::INFINITY, f64::min));
    let tau = match inst.tau {
        TauChoice::Fixed(t) => t,
        TauChoice::Scaled {
            constant,
            gmin_exponent,
        } => constant / g_min.powf(gmin_exponent),
    };
    exp.label.tau = tau;
    let options = EvolveOptions {
        substeps: config.substeps,
    };
    let real = evolve_real_with(&exp.family, tau, &grid, policy, options)?;
    let diag = adiabatic_diagnostics(&real, &bundles)?;

    let mut intertwining = None;
    let mut volterra = None;
    if config.checks.intertwining || config.checks.volterra {
        let ad = evolve_adiabatic_with(&exp.tracker, tau, &grid, policy, options)?;
        if config.checks.intertwining {
            intertwining = Some(intertwining_residuals(&ad, &bundles)?);
        }
        if config.checks.volterra {
            let wave = wave_operator(&real, &ad)?;
            volterra = Some(volterra_residuals(&wave, &ad, &exp.tracker, &bundles)?);
        }
    }

    let want_bounds = (config.bounds.theorem3 || config.bounds.theorem4) && tau > 0.0;
    let profile = if want_bounds {
        Some(bound_profile(&exp.tracker, tau, &grid)?)
    } else {
        None
    };
    let a4 = profile
        .as_ref()
        .filter(|_| config.bounds.theorem4)
        .map(|p| p.a_theorem4(config.theorem4_c));
    let fitted_c = match (&profile, config.bounds.theorem4) {
        (Some(p), true) => Some(p.fit_theorem4_c(&diag)?),
        _ => None,
    };
    let t3 = profile.as_ref().filter(|_| config.bounds.theorem3);

    let rows: Vec<RunRow> = (0..grid.points())
        .map(|k| RunRow {
            s: grid.s_values()[k],
            gap: bundles[k].gap,
            m: bundles[k].m,
            transition_prob: diag[k].transition_prob,
            proj_distance: diag[k].proj_distance,
            a_tight: t3.map(|p| p.a_tight[k]),
            a_coarse: t3.map(|p| p.a_coarse[k]),
            a_theorem4: a4.as_ref().map(|a| a[k]),
            intertwining_residual: intertwining.as_ref().map(|v| v[k]),
            volterra_residual: volterra.as_ref().map(|v| v[k]),
        })
        .collect();
    let last = rows.last().unwrap();
    let summary = RunSummary {
        g_min,
        transition_prob: max_of(&diag.iter().map(|d| d.transition_prob).collect::<Vec<_>>()),
        proj_distance: max_of(&diag.iter().map(|d| d.proj_distance).collect::<Vec<_>>()),
        a_tight: last.a_tight,
        a_coarse: last.a_coarse,
        a_theorem4: last.a_theorem4,
        fitted_c,
        intertwining_residual: intertwining.as_deref().map(max_of),
        volterra_residual: volterra.as_deref().map(max_of),
        final_transition_prob: last.transition_prob,
        final_proj_distance: last.proj_distance,
    };
    let walltime_ms = if config.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(RunReport {
        label: exp.label,
        rows,
        summary,
        walltime_ms,
    })
}

/// Runs every instance of the config in order and concatenates the rows.
pub fn run_single(config: &RunConfig) -> Result<Vec<RunReport>> {
    config.instances()?.iter().map(|i| run_instance(config, i)).collect()
}

/// Worker count: the environment override, then the config, then rayon's
/// default.
pub fn worker_count(config: &RunConfig) -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::config(WORKERS_ENV, format!("expected a positive integer, got {v:?}")))?;
            if n == 0 {
                return Err(Error::config(WORKERS_ENV, "must be at least 1"));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(config.workers),
    }
}

/// Runs all instances concurrently; entries come back in parameter order.
pub fn sweep(config: &RunConfig) -> Result<Vec<SweepEntry>> {
    let instances = config.instances()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(config)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        instances
            .par_iter()
            .map(|inst| SweepEntry {
                run_id: inst.run_id.clone(),
                outcome: run_instance(config, inst).map_err(|e| e.to_string()),
            })
            .collect()
    }))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn label_fields(l: &RunLabel) -> Vec<String> {
    vec![
        l.run_id.clone(),
        l.problem.clone(),
        l.n.map(|n| n.to_string()).unwrap_or_default(),
        l.dim.to_string(),
        l.schedule.clone(),
        opt(l.p),
        l.tau.to_string(),
    ]
}

/// Per-grid-point CSV for a set of runs.
pub fn write_run_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS)?;
    for r in reports {
        let head = label_fields(&r.label);
        for row in &r.rows {
            let mut rec = head.clone();
            rec.extend([
                row.s.to_string(),
                row.gap.to_string(),
                row.m.to_string(),
                row.transition_prob.to_string(),
                row.proj_distance.to_string(),
                opt(row.a_tight),
                opt(row.a_coarse),
                opt(row.a_theorem4),
                opt(row.intertwining_residual),
                opt(row.volterra_residual),
                r.walltime_ms.to_string(),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One summary line per sweep entry; failed runs keep their id and carry
/// the error in `status`.
pub fn write_summary_csv<W: Write>(out: W, entries: &[SweepEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for e in entries {
        let rec: Vec<String> = match &e.outcome {
            Ok(r) => {
                let s = &r.summary;
                let mut rec = label_fields(&r.label);
                rec.extend([
                    s.g_min.to_string(),
                    s.transition_prob.to_string(),
                    s.proj_distance.to_string(),
                    opt(s.a_tight),
                    opt(s.a_coarse),
                    opt(s.a_theorem4),
                    opt(s.fitted_c),
                    opt(s.intertwining_residual),
                    opt(s.volterra_residual),
                    s.final_transition_prob.to_string(),
                    s.final_proj_distance.to_string(),
                    r.walltime_ms.to_string(),
                    "ok".to_string(),
                ]);
                rec
            }
            Err(msg) => {
                let mut rec = vec![e.run_id.clone()];
                rec.extend(std::iter::repeat_n(String::new(), SUMMARY_COLUMNS.len() - 2));
                rec.push(format!("error: {msg}"));
                rec
            }
        };
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
