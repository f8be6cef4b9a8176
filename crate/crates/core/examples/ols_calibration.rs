//! Least squares with p < n, where R̂ reduces to `p‖ψ̂‖²/(n − p)²` and the
//! estimate is sharp. Compares R̂ with the true error over replications.
//!
//!     cargo run --release --example ols_calibration -- [--reps 100]

use hdrisk::harness::{median, run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> hdrisk::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = ExperimentConfig::desk(ExperimentKind::OlsCalibration);
    if let Some(i) = args.iter().position(|a| a == "--reps") {
        cfg.reps = args[i + 1].parse().expect("integer --reps");
    }
    let started = std::time::Instant::now();
    let rows = run_experiment(&cfg)?;
    let (n, p) = (cfg.n as f64, cfg.p as f64);

    let mean = |f: &dyn Fn(&hdrisk::harness::ResultRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    println!("n = {n}, p = {p}, {} reps in {:?}", cfg.reps, started.elapsed());
    println!("factors: df̂ = {}, tr = {}", rows[0].df_hat, rows[0].trace_dpsi);
    println!("mean oos error  {:.5}", mean(&|r| r.oos_error));
    println!("mean R̂          {:.5}", mean(&|r| r.r_hat));
    // E[R̂]/σ² = p/(n − p) for Gaussian noise
    println!("p/(n − p)       {:.5}", p / (n - p));
    println!("median |R̂/oos − 1| = {:.3}", median(rows.iter().map(|r| r.relative_error())));
    Ok(())
}
