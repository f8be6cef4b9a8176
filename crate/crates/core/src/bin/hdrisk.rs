//! Command-line front end. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hdrisk::harness::{
    estimate_model, fit_model, resolve_threads, run_experiment, write_rows, ExperimentConfig, ExperimentKind,
    FitSummary, ModelConfig,
};
use hdrisk::io::load_dataset;
use hdrisk::{selftest, Error};

#[derive(Parser)]
#[command(name = "hdrisk", version, about = "Risk estimates for penalized M-estimators in high dimensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a dataset file and write a JSON summary.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Fit, then estimate the out-of-sample error; writes fit summary and risk report as JSON.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for Monte Carlo factors (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a simulation study and write one CSV row per (replication, grid point).
    Experiment {
        /// Experiment config (JSON). Without it, `--preset` picks a built-in setup.
        #[arg(long, required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// huber_grid, nuclear_norm, ols_calibration or sigma_recovery
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Replace the scale (n, p, reps, grids) by the full-size reference setup.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Run the invariant suites and report one line per suite.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> hdrisk::Result<ExitCode> {
    match command {
        Command::Fit {
            data,
            config,
            out,
            threads,
        } => {
            init_threads(threads)?;
            let cfg = ModelConfig::load(&config)?;
            let data = read_data(&data)?;
            let f = fit_model(&data, &cfg)?;
            write_json(&FitSummary::new(&f, &cfg.loss, &cfg.penalty), out.as_deref())?;
        }
        Command::Estimate {
            data,
            config,
            out,
            seed,
            threads,
        } => {
            init_threads(threads)?;
            let mut cfg = ModelConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data = read_data(&data)?;
            write_json(&estimate_model(&data, &cfg)?, out.as_deref())?;
        }
        Command::Experiment {
            config,
            preset,
            out,
            seed,
            threads,
            paper_scale,
        } => {
            let mut cfg = match (&config, &preset) {
                (Some(path), _) => ExperimentConfig::load(path).map_err(|e| match e {
                    Error::Io(io) => Error::Config {
                        field: "config".into(),
                        reason: format!("{}: {io}", path.display()),
                    },
                    other => other,
                })?,
                (None, Some(kind)) => ExperimentConfig::desk(ExperimentKind::parse(kind)?),
                (None, None) => unreachable!("clap requires one of them"),
            };
            if paper_scale {
                let full = ExperimentConfig::full_scale(cfg.experiment)?;
                cfg = ExperimentConfig {
                    master_seed: cfg.master_seed,
                    threads: cfg.threads,
                    solver: cfg.solver,
                    record_wall_time: cfg.record_wall_time,
                    ..full
                };
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if threads.is_some() {
                cfg.threads = threads;
            }
            cfg.validate()?;
            let rows = run_experiment(&cfg)?;
            match out {
                Some(path) => write_rows(&rows, BufWriter::new(File::create(&path)?))?,
                None => write_rows(&rows, std::io::stdout().lock())?,
            }
            let flagged = rows.iter().filter(|r| r.degenerate).count();
            eprintln!("{} rows, {flagged} flagged degenerate", rows.len());
        }
        Command::Selftest { seed } => {
            let outcomes = selftest::run_all(seed);
            for o in &outcomes {
                println!("{o}");
            }
            if outcomes.iter().any(|o| !o.passed) {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn init_threads(explicit: Option<usize>) -> hdrisk::Result<()> {
    if explicit == Some(0) {
        return Err(Error::Config {
            field: "threads".into(),
            reason: "must be at least 1".into(),
        });
    }
    if let Some(t) = resolve_threads(explicit)? {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn read_data(path: &Path) -> hdrisk::Result<hdrisk::data::Dataset> {
    load_dataset(path).map_err(|e| match e {
        Error::Io(io) => Error::Config {
            field: "data".into(),
            reason: format!("{}: {io}", path.display()),
        },
        other => other,
    })
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> hdrisk::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}
