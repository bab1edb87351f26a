use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adiaband::harness::{self, FitOptions, RunConfig, VerifyOptions};

#[derive(Parser)]
#[command(name = "adiaband", version, about = "Adiabatic evolution, gap-dependent error bounds and identity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve every configured instance and write per-grid-point CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the parameter product concurrently and write one summary row per run.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the identity and inequality suite; prints a JSON report.
    Verify {
        /// Only checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Instances per property sweep.
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Log-log least-squares fit of one CSV column against another.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Drop this many smallest-x rows instead of the A_tight filter.
        #[arg(long)]
        discard: Option<usize>,
        /// Keep rows only while A_tight is below this value.
        #[arg(long, default_value_t = 0.5)]
        a_tight_below: f64,
        /// Use every row.
        #[arg(long, conflicts_with_all = ["discard"])]
        keep_all: bool,
    },
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(cli: Cli) -> adiaband::Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let reports = harness::run_single(&cfg)?;
            harness::write_run_csv(output(cfg.output.as_deref())?, &reports)?;
            Ok(true)
        }
        Command::Sweep { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let entries = harness::sweep(&cfg)?;
            harness::write_summary_csv(output(cfg.output.as_deref())?, &entries)?;
            let failed: Vec<_> = entries.iter().filter(|e| e.outcome.is_err()).collect();
            for e in &failed {
                if let Err(msg) = &e.outcome {
                    eprintln!("{}: {msg}", e.run_id);
                }
            }
            Ok(failed.is_empty())
        }
        Command::Verify { filter, instances } => {
            let report = harness::verify_suite(&VerifyOptions {
                filter,
                instances,
                ..Default::default()
            });
            let text = serde_json::to_string_pretty(&report).map_err(|e| adiaband::Error::Io(e.to_string()))?;
            println!("{text}");
            Ok(report.all_passed())
        }
        Command::Fit {
            input,
            x,
            y,
            discard,
            a_tight_below,
            keep_all,
        } => {
            let options = if keep_all {
                FitOptions::keep_all()
            } else {
                FitOptions {
                    discard_smallest: discard,
                    a_tight_below: Some(a_tight_below),
                }
            };
            let file = File::open(&input)?;
            let fit = harness::fit_scaling(file, &x, &y, options)?;
            let text = serde_json::to_string_pretty(&fit).map_err(|e| adiaband::Error::Io(e.to_string()))?;
            println!("{text}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
