//! Jacobian factors for the Elastic Net three ways: closed form, Monte Carlo
//! divergence, and a full finite-difference Jacobian.
//!
//! With a smoothed Huber loss the closed form involves `D = diag(ψ'(y − Xβ̂))`,
//! so this is not just a projection count.
//!
//!     cargo run --release --example elastic_net_factors

use hdrisk::data::{gen_dataset, gen_signal, replication_rng, NoiseSpec, SignalSpec};
use hdrisk::jacobians::{closed_form_factors, closed_form_jacobians, default_fd_step, fd_jacobian, mc_factors, response_map, FieldOutput};
use hdrisk::linalg::Covariance;
use hdrisk::losses::LossSpec;
use hdrisk::solvers::{fit, PenaltySpec, SolverConfig};

fn main() -> hdrisk::Result<()> {
    let (n, p) = (40, 60);
    let mut rng = replication_rng(11, 0);
    let beta = gen_signal(SignalSpec::SparseFlat { s: 5, amplitude: 1.0 }, p, &mut rng)?;
    let (data, _) = gen_dataset(n, &Covariance::identity(p), &beta, NoiseSpec::StudentT { dof: 3 }, &mut rng)?;

    let loss = LossSpec::SmoothHuber1 { scale: 1.0 };
    let penalty = PenaltySpec::ElasticNet { lambda: 0.1, mu: 0.3 };
    let cfg = SolverConfig::default().with_kkt_tol(1e-12);
    let f = fit(&loss, &penalty, &data, &cfg)?.ensure_converged()?;
    println!("{:?}: |Ŝ| = {}, |Î| = {}, KKT gap {:.1e}", f.algorithm, f.n_active(), f.n_inliers(), f.kkt_gap);

    let closed = closed_form_factors(&f, &loss, &penalty, &data)?;
    println!("closed form      df̂ = {:9.5}   tr[∂ψ̂/∂y] = {:9.5}", closed.df_hat, closed.trace_dpsi);

    let mc = mc_factors(&loss, &penalty, &data, &cfg, 0.01, 200, &mut rng)?;
    println!(
        "Monte Carlo      df̂ = {:9.5}   tr[∂ψ̂/∂y] = {:9.5}   (standard errors {:.3}, {:.3})",
        mc.df_hat,
        mc.trace_dpsi,
        mc.df_std_err.unwrap_or(f64::NAN),
        mc.trace_std_err.unwrap_or(f64::NAN)
    );

    let h = default_fd_step(&data.y);
    let warm = f.beta_hat.clone();
    let dfit = fd_jacobian(response_map(&loss, &penalty, &data, &cfg, Some(&warm), FieldOutput::Fitted), &data.y, h)?;
    let dpsi = fd_jacobian(response_map(&loss, &penalty, &data, &cfg, Some(&warm), FieldOutput::Score), &data.y, h)?;
    println!("finite diff.     df̂ = {:9.5}   tr[∂ψ̂/∂y] = {:9.5}", dfit.trace(), dpsi.trace());

    let (jfit, jpsi) = closed_form_jacobians(&f, &penalty, &data)?;
    println!(
        "max entrywise gap between closed-form and fd Jacobians: {:.1e}, {:.1e}",
        (&jfit - &dfit).amax(),
        (&jpsi - &dpsi).amax()
    );
    Ok(())
}
