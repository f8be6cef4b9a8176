//! Low-rank matrix regression with a nuclear-norm penalty. There is no closed
//! form for the Jacobian traces here, so both come from the Monte Carlo
//! divergence with one warm-started refit per perturbation.
//!
//!     cargo run --release --example nuclear_norm -- [--paper-scale] [--reps 3]

use hdrisk::harness::{median, run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> hdrisk::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = if args.iter().any(|a| a == "--paper-scale") {
        ExperimentConfig::full_scale(ExperimentKind::NuclearNorm)?
    } else {
        ExperimentConfig::desk(ExperimentKind::NuclearNorm)
    };
    if let Some(i) = args.iter().position(|a| a == "--reps") {
        cfg.reps = args[i + 1].parse().expect("integer --reps");
    }
    println!("n = {}, p = {}, {} reps, jacobian {:?}", cfg.n, cfg.p, cfg.reps, cfg.jacobian);

    let rows = run_experiment(&cfg)?;
    println!("{:>9} {:>10} {:>10} {:>9} {:>9} {:>9}", "lambda", "med oos", "med R̂", "med df̂", "min tr", "max tr");
    for &lambda in &cfg.lambdas {
        let g: Vec<_> = rows.iter().filter(|r| r.lambda == lambda).collect();
        let tr = g.iter().map(|r| r.trace_dpsi);
        println!(
            "{:>9.4} {:>10.4} {:>10.4} {:>9.1} {:>9.1} {:>9.1}",
            lambda,
            median(g.iter().map(|r| r.oos_error)),
            median(g.iter().map(|r| r.r_hat)),
            median(g.iter().map(|r| r.df_hat)),
            tr.clone().fold(f64::INFINITY, f64::min),
            tr.fold(f64::NEG_INFINITY, f64::max),
        );
    }
    let flagged = rows.iter().filter(|r| r.degenerate).count();
    println!("{flagged} of {} rows flagged degenerate", rows.len());
    Ok(())
}
