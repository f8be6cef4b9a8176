//! Square-loss Elastic Net with a correlated design: recover the noise level
//! σ*² = ‖ε‖²/n and the generalization error ‖Σ^{1/2}(β̂ − β)‖² + σ*² without
//! knowing either.
//!
//!     cargo run --release --example noise_recovery -- [--lambda 0.1] [--mu 0.5] [--reps 50] [--amplitude 1] [--sigma 1]

use hdrisk::data::{NoiseSpec, SignalSpec};
use hdrisk::harness::{median, run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> hdrisk::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let flag = |name: &str| {
        args.iter()
            .position(|a| a == name)
            .map(|i| args[i + 1].parse::<f64>().expect("numeric flag value"))
    };
    let mut cfg = ExperimentConfig::desk(ExperimentKind::SigmaRecovery);
    if let Some(l) = flag("--lambda") {
        cfg.lambdas = vec![l];
    }
    if let Some(mu) = flag("--mu") {
        cfg.mu = mu;
    }
    if let Some(a) = flag("--amplitude") {
        if let SignalSpec::SparseFlat { amplitude, .. } = &mut cfg.signal {
            *amplitude = a;
        }
    }
    if let Some(sigma) = flag("--sigma") {
        cfg.noise = NoiseSpec::Gaussian { sigma };
    }
    if let Some(r) = flag("--reps") {
        cfg.reps = r as usize;
    }
    cfg.validate()?;

    let rows = run_experiment(&cfg)?;
    let sigma_err = median(rows.iter().map(|r| (r.sigma2_hat.unwrap_or(f64::NAN) - r.sigma2_star).abs() / r.sigma2_star));
    let tau_err = median(
        rows.iter()
            .map(|r| (r.tau2_hat.unwrap_or(f64::NAN) / (r.oos_error + r.sigma2_star) - 1.0).abs()),
    );
    let r_err = median(rows.iter().map(|r| r.relative_error()));
    println!(
        "n = {}, p = {}, λ = {}, μ = {}, {} reps",
        cfg.n, cfg.p, cfg.lambdas[0], cfg.mu, cfg.reps
    );
    println!("median df̂              {:.1}", median(rows.iter().map(|r| r.df_hat)));
    println!("median oos error        {:.4}", median(rows.iter().map(|r| r.oos_error)));
    println!("median |σ̂²/σ*² − 1|     {sigma_err:.4}");
    println!("median |τ̂²/τ² − 1|      {tau_err:.4}");
    println!("median |R̂/oos − 1|      {r_err:.4}");
    Ok(())
}
