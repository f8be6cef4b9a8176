//! Huber Lasso over a (λ, λ*) grid with heavy-tailed noise.
//!
//! Runs the desk-scale preset (or a smaller one with `--quick`), prints the
//! median relative error of R̂ per grid point and writes the rows to CSV.
//!
//! The grid exponents can be overridden: λ = 0.1·n^{-1/2}·1.5^k for each k in
//! `--lambda-k 2,4,6`, and likewise `--lambda-star-k` for λ*.
//!
//!     cargo run --release --example huber_grid -- [--quick] [--out rows.csv]

use std::fs::File;

use hdrisk::harness::{geometric, median, run_experiment, write_rows, ExperimentConfig, ExperimentKind};

fn main() -> hdrisk::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = ExperimentConfig::desk(ExperimentKind::HuberGrid);
    if args.iter().any(|a| a == "--quick") {
        cfg.reps = 5;
    }
    if let Some(ks) = flag_ints(&args, "--lambda-k") {
        cfg.lambdas = geometric(0.1 / (cfg.n as f64).sqrt(), 1.5, &ks);
    }
    if let Some(ks) = flag_ints(&args, "--lambda-star-k") {
        cfg.lambda_stars = geometric(0.1 / (cfg.n as f64).sqrt(), 1.5, &ks);
    }
    let rows = run_experiment(&cfg)?;

    println!("{:>10} {:>10} {:>12} {:>12} {:>12} {:>10}", "lambda", "lambda*", "med oos", "med R̂", "med relerr", "(|I|-|S|)/n");
    for point in cfg.grid() {
        let group: Vec<_> = rows
            .iter()
            .filter(|r| r.lambda == point.lambda && r.lambda_star == point.lambda_star)
            .collect();
        println!(
            "{:>10.4} {:>10.4} {:>12.4} {:>12.4} {:>12.3} {:>10.3}",
            point.lambda,
            point.lambda_star.unwrap_or(f64::NAN),
            median(group.iter().map(|r| r.oos_error)),
            median(group.iter().map(|r| r.r_hat)),
            median(group.iter().map(|r| r.relative_error())),
            median(group.iter().map(|r| r.inlier_factor(cfg.n))),
        );
    }

    if let Some(i) = args.iter().position(|a| a == "--out") {
        let path = args.get(i + 1).expect("--out needs a path");
        write_rows(&rows, File::create(path)?)?;
        println!("wrote {} rows to {path}", rows.len());
    }
    Ok(())
}

fn flag_ints(args: &[String], flag: &str) -> Option<Vec<i32>> {
    let i = args.iter().position(|a| a == flag)?;
    let list = args.get(i + 1).expect("flag needs a comma-separated list");
    Some(list.split(',').map(|k| k.trim().parse().expect("integer exponent")).collect())
}
