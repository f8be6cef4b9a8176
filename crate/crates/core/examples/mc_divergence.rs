//! The Monte Carlo divergence on a map whose divergence is known: entrywise
//! soft-thresholding, whose divergence is the number of entries above the
//! threshold. Shows how the standard error shrinks with `m`.
//!
//!     cargo run --release --example mc_divergence

use hdrisk::data::replication_rng;
use hdrisk::jacobians::mc_divergence;
use hdrisk::linalg::soft_threshold;
use nalgebra::DVector;
use rand::Rng;

fn main() -> hdrisk::Result<()> {
    let n = 500;
    let t = 1.0;
    let mut rng = replication_rng(5, 0);
    let y: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let exact = y.iter().filter(|v| v.abs() > t).count();
    let field = |v: &DVector<f64>| Ok(v.map(|x| soft_threshold(x, t)));

    println!("exact divergence: {exact}");
    println!("{:>6} {:>12} {:>10}", "m", "estimate", "std err");
    for m in [10, 100, 1000] {
        let est = mc_divergence(field, &y, 0.01, m, &mut rng)?;
        println!("{m:>6} {:>12.3} {:>10.3}", est.estimate, est.std_err);
    }
    Ok(())
}
