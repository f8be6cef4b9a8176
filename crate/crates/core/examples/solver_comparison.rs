//! Every solver route on the same Huber Lasso problem. Coordinate descent on
//! the augmented Lasso and accelerated proximal gradient must land on the same
//! estimate, each certified by the KKT gap of the original problem.
//!
//!     cargo run --release --example solver_comparison

use hdrisk::data::{gen_dataset, gen_signal, replication_rng, NoiseSpec, SignalSpec};
use hdrisk::linalg::Covariance;
use hdrisk::losses::LossSpec;
use hdrisk::solvers::{fit, Algorithm, PenaltySpec, SolverConfig};

fn main() -> hdrisk::Result<()> {
    let (n, p) = (200, 300);
    let mut rng = replication_rng(3, 0);
    let beta = gen_signal(SignalSpec::SparseFlat { s: 15, amplitude: 1.0 }, p, &mut rng)?;
    let (data, _) = gen_dataset(n, &Covariance::identity(p), &beta, NoiseSpec::StudentT { dof: 2 }, &mut rng)?;
    let loss = LossSpec::Huber { scale: 1.5 };
    let penalty = PenaltySpec::L1 { lambda: 0.1 };

    let mut fits = Vec::new();
    for algorithm in [Algorithm::AugmentedLasso, Algorithm::Fista] {
        let cfg = SolverConfig::default().with_kkt_tol(1e-10).with_algorithm(algorithm);
        let started = std::time::Instant::now();
        let f = fit(&loss, &penalty, &data, &cfg)?;
        println!(
            "{algorithm:?}: {} iterations in {:?}, KKT gap {:.1e}, objective {:.12}, |Ŝ| = {}",
            f.iterations,
            started.elapsed(),
            f.kkt_gap,
            f.objective,
            f.n_active()
        );
        fits.push(f);
    }
    println!("max |Δβ̂| = {:.2e}", (&fits[0].beta_hat - &fits[1].beta_hat).amax());

    // square loss with an ℓ1 penalty: coordinate descent versus FISTA
    let sq = PenaltySpec::L1 { lambda: 0.2 };
    for algorithm in [Algorithm::CoordinateDescent, Algorithm::Fista] {
        let cfg = SolverConfig::default().with_algorithm(algorithm);
        let f = fit(&LossSpec::Square, &sq, &data, &cfg)?;
        println!("square/l1 {algorithm:?}: {} iterations, KKT gap {:.1e}", f.iterations, f.kkt_gap);
    }
    Ok(())
}
