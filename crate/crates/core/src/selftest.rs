//! Structural checks that any correct build must pass, runnable from the CLI
//! (`hdrisk selftest`) and from the test suite.
//!
//! Each suite draws its own small random instances from a seed and returns a
//! [`CheckOutcome`] with a one-line summary of the worst case it saw.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{gen_dataset, replication_rng, Dataset, NoiseSpec};
use crate::error::Result;
use crate::estimators::square_loss_estimates;
use crate::jacobians::{closed_form_factors, default_fd_step, fd_jacobian};
use crate::linalg::Covariance;
use crate::losses::LossSpec;
use crate::solvers::{fit, fit_warm, Algorithm, FitResult, PenaltySpec, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckOutcome { name, passed, detail }
    }

    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

/// Every suite, in a fixed order.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        psi_lipschitz_monotone(),
        kkt_on_random_fits(seed),
        tau_identity(seed),
        fd_jacobian_structure(seed),
        df_below_inliers(seed),
        augmented_matches_direct(seed),
        elastic_net_matches_fd(seed),
    ]
}

fn suite_rng(seed: u64, suite: u64) -> ChaCha8Rng {
    replication_rng(seed, 1_000 + suite)
}

/// Gaussian design, identity covariance, `s` unit coefficients.
fn instance<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, s: usize, noise: NoiseSpec) -> Result<Dataset> {
    let beta = DVector::from_fn(p, |j, _| if j < s { 1.0 } else { 0.0 });
    Ok(gen_dataset(n, &Covariance::identity(p), &beta, noise, rng)?.0)
}

fn tight(tol: f64) -> SolverConfig {
    SolverConfig::default().with_kkt_tol(tol)
}

/// ψ is nondecreasing and 1-Lipschitz, and ψ' ∈ [0, 1], on a fine grid and on random pairs.
pub fn psi_lipschitz_monotone() -> CheckOutcome {
    let losses = [
        LossSpec::Square,
        LossSpec::Huber { scale: 1.3 },
        LossSpec::SmoothHuber0 { scale: 0.7 },
        LossSpec::SmoothHuber1 { scale: 2.0 },
    ];
    let grid: Vec<f64> = (0..=10_000).map(|k| -10.0 + 20.0 * k as f64 / 10_000.0).collect();
    let mut rng = replication_rng(0, 999);
    let mut worst_slope = 0.0_f64;
    let mut violations = 0usize;
    for loss in &losses {
        let mut check = |u: f64, v: f64| {
            let slope = (loss.psi(u) - loss.psi(v)) / (u - v);
            worst_slope = worst_slope.max(slope);
            if !(-1e-12..=1.0 + 1e-12).contains(&slope) {
                violations += 1;
            }
        };
        for w in grid.windows(2) {
            check(w[0], w[1]);
        }
        for _ in 0..10_000 {
            let u = rng.random_range(-20.0..20.0);
            let v = rng.random_range(-20.0..20.0);
            if u != v {
                check(u, v);
            }
        }
        violations += grid
            .iter()
            .filter(|&&u| !(0.0..=1.0).contains(&loss.eval(u).psi_prime))
            .count();
    }
    CheckOutcome::new(
        "psi 1-Lipschitz and monotone",
        violations == 0,
        format!("{violations} violations over 4 losses, largest slope {worst_slope:.6}"),
    )
}

/// 50 fits across every supported loss/penalty pair certify KKT gap ≤ 1e-8.
pub fn kkt_on_random_fits(seed: u64) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = suite_rng(seed, 1);
        let cfg = SolverConfig::default();
        let mut worst = 0.0_f64;
        let mut failures = 0;
        for k in 0..50 {
            let lambda = rng.random_range(0.02..0.3);
            let mu = rng.random_range(0.05..1.0);
            let scale = rng.random_range(0.5..2.0);
            let (loss, penalty, n, p) = match k % 10 {
                0 => (LossSpec::Square, PenaltySpec::L1 { lambda }, 40, 60),
                1 => (LossSpec::Square, PenaltySpec::ElasticNet { lambda, mu }, 40, 60),
                2 => (LossSpec::Square, PenaltySpec::None, 60, 20),
                3 => (LossSpec::Huber { scale }, PenaltySpec::L1 { lambda }, 40, 60),
                4 => (LossSpec::Huber { scale }, PenaltySpec::ElasticNet { lambda, mu }, 40, 60),
                5 => (LossSpec::SmoothHuber0 { scale }, PenaltySpec::L1 { lambda }, 40, 60),
                6 => (LossSpec::SmoothHuber1 { scale }, PenaltySpec::ElasticNet { lambda, mu }, 40, 60),
                7 => (LossSpec::Huber { scale }, PenaltySpec::None, 60, 20),
                8 => (LossSpec::Square, PenaltySpec::Nuclear { lambda, rows: 6, cols: 5 }, 40, 30),
                _ => (LossSpec::Huber { scale }, PenaltySpec::Nuclear { lambda, rows: 5, cols: 6 }, 40, 30),
            };
            let data = instance(&mut rng, n, p, 5, NoiseSpec::StudentT { dof: 3 })?;
            let f = fit(&loss, &penalty, &data, &cfg)?;
            worst = worst.max(f.kkt_gap);
            if !(f.converged && f.kkt_gap <= cfg.kkt_tol) {
                failures += 1;
            }
        }
        Ok((failures == 0, format!("{failures}/50 above tolerance, worst gap {worst:.2e}")))
    };
    CheckOutcome::from_result("KKT gap on 50 random fits", run())
}

/// τ̂² = R̂ + σ̂² to 1e-10 relative on square-loss fits, with identity and correlated Σ.
pub fn tau_identity(seed: u64) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = suite_rng(seed, 2);
        let mut worst = 0.0_f64;
        for k in 0..20 {
            let (n, p) = (50, if k % 3 == 0 { 20 } else { 70 });
            let sigma = if k % 2 == 0 {
                Covariance::identity(p)
            } else {
                let g = DMatrix::from_fn(3 * p, p, |_, _| rng.random_range(-1.0..1.0));
                Covariance::new(g.tr_mul(&g) / (3 * p) as f64)?
            };
            let beta = DVector::from_fn(p, |j, _| if j < 4 { 1.0 } else { 0.0 });
            let (data, _) = gen_dataset(n, &sigma, &beta, NoiseSpec::Gaussian { sigma: 1.0 }, &mut rng)?;
            let penalty = match (k % 3, k % 2) {
                (0, _) => PenaltySpec::None,
                (_, 0) => PenaltySpec::L1 { lambda: 0.1 },
                _ => PenaltySpec::ElasticNet { lambda: 0.1, mu: 0.3 },
            };
            let f = fit(&LossSpec::Square, &penalty, &data, &SolverConfig::default())?;
            let factors = closed_form_factors(&f, &LossSpec::Square, &penalty, &data)?;
            let rep = square_loss_estimates(&f, &data, &sigma, &factors)?;
            let tau = rep.tau2_hat.unwrap_or(f64::NAN);
            let gap = (tau - rep.r_hat - rep.sigma2_hat.unwrap_or(f64::NAN)).abs() / tau.abs();
            worst = worst.max(gap);
        }
        Ok((worst <= 1e-10, format!("worst relative gap {worst:.2e} over 20 fits")))
    };
    CheckOutcome::from_result("tau2 = R + sigma2", run())
}

/// Finite-difference Jacobians of `y ↦ Xβ̂` and `y ↦ ψ̂` around a fit, or
/// `None` when `Ŝ` or `Î` changes inside the difference stencil.
pub fn stable_fd_jacobians(
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    cfg: &SolverConfig,
    base: &FitResult,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
    let unstable = AtomicBool::new(false);
    let refit = |y: &DVector<f64>| -> Result<FitResult> {
        let f = fit_warm(loss, penalty, &data.with_response(y.clone()), cfg, Some(&base.beta_hat))?;
        if f.active_set != base.active_set || f.inlier_set != base.inlier_set {
            unstable.store(true, Ordering::Relaxed);
        }
        Ok(f)
    };
    let h = default_fd_step(&data.y);
    let dfit = fd_jacobian(|y| refit(y).map(|f| &data.x * f.beta_hat), &data.y, h)?;
    let dpsi = fd_jacobian(|y| refit(y).map(|f| f.psi_hat), &data.y, h)?;
    Ok((!unstable.load(Ordering::Relaxed)).then_some((dfit, dpsi)))
}

/// The ψ̂ Jacobian is symmetric, PSD, with operator norm ≤ 1 on 10 instances
/// (square and Huber losses with ℓ1) where the active and inlier sets are locally constant.
pub fn fd_jacobian_structure(seed: u64) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = suite_rng(seed, 3);
        let cfg = tight(1e-13);
        let (mut found, mut attempts) = (0, 0);
        let (mut asym, mut min_eig, mut op, mut trace_err) = (0.0_f64, f64::INFINITY, 0.0_f64, 0.0_f64);
        while found < 10 && attempts < 200 {
            attempts += 1;
            let (loss, noise) = if found % 2 == 0 {
                (LossSpec::Square, NoiseSpec::Gaussian { sigma: 1.0 })
            } else {
                (LossSpec::Huber { scale: 1.0 }, NoiseSpec::StudentT { dof: 2 })
            };
            let penalty = PenaltySpec::L1 { lambda: 0.15 };
            let data = instance(&mut rng, 25, 35, 4, noise)?;
            let base = fit(&loss, &penalty, &data, &cfg)?.ensure_converged()?;
            let Some((_, j)) = stable_fd_jacobians(&loss, &penalty, &data, &cfg, &base)? else {
                continue;
            };
            found += 1;
            asym = asym.max((&j - j.transpose()).amax());
            let sym = (&j + j.transpose()) * 0.5;
            min_eig = min_eig.min(sym.symmetric_eigen().eigenvalues.min());
            op = op.max(j.singular_values().max());
            let closed = closed_form_factors(&base, &loss, &penalty, &data)?;
            trace_err = trace_err.max((j.trace() - closed.trace_dpsi).abs());
        }
        let passed = found == 10 && asym <= 1e-5 && min_eig >= -1e-6 && op <= 1.0 + 1e-6 && trace_err <= 1e-3;
        Ok((
            passed,
            format!(
                "{found} stable instances in {attempts} draws; asymmetry {asym:.1e}, min eigenvalue {min_eig:.1e}, op norm {op:.8}, trace error {trace_err:.1e}"
            ),
        ))
    };
    CheckOutcome::from_result("fd Jacobian of psi: symmetric, PSD, op norm <= 1", run())
}

/// `df̂ ≤ |Î|` and `tr[∂ψ̂/∂y] ∈ [0, n]` for closed-form factors with robust losses.
pub fn df_below_inliers(seed: u64) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = suite_rng(seed, 4);
        let cfg = SolverConfig::default();
        let mut worst_excess = f64::NEG_INFINITY;
        let mut range_ok = true;
        let mut count = 0;
        for k in 0..30 {
            let scale = rng.random_range(0.3..1.5);
            let loss = match k % 3 {
                0 => LossSpec::Huber { scale },
                1 => LossSpec::SmoothHuber0 { scale },
                _ => LossSpec::SmoothHuber1 { scale },
            };
            let lambda = rng.random_range(0.03..0.2);
            let penalty = if k % 2 == 0 {
                PenaltySpec::L1 { lambda }
            } else {
                PenaltySpec::ElasticNet { lambda, mu: 0.2 }
            };
            let data = instance(&mut rng, 40, 50, 5, NoiseSpec::StudentT { dof: 2 })?;
            let f = fit(&loss, &penalty, &data, &cfg)?.ensure_converged()?;
            if f.psi_hat.amax() == 0.0 {
                continue;
            }
            count += 1;
            let factors = closed_form_factors(&f, &loss, &penalty, &data)?;
            worst_excess = worst_excess.max(factors.df_hat - f.n_inliers() as f64);
            let n = data.n() as f64;
            range_ok &= factors.trace_dpsi >= -1e-9 && factors.trace_dpsi <= n + 1e-9;
        }
        Ok((
            worst_excess <= 1e-6 && range_ok,
            format!("{count} fits; max df̂ − |Î| = {worst_excess:.3}; trace within [0, n]: {range_ok}"),
        ))
    };
    CheckOutcome::from_result("df <= |I|", run())
}

/// The augmented-Lasso route and a direct proximal-gradient solve of the
/// Huber Lasso agree to 1e-6.
pub fn augmented_matches_direct(seed: u64) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = suite_rng(seed, 5);
        let cfg = tight(1e-11);
        let mut worst = 0.0_f64;
        for _ in 0..10 {
            let noise = NoiseSpec::Contaminated {
                sigma: 1.0,
                q: 0.1,
                outlier_scale: 10.0,
            };
            let data = instance(&mut rng, 60, 40, 5, noise)?;
            let loss = LossSpec::Huber {
                scale: rng.random_range(0.5..2.0),
            };
            let penalty = PenaltySpec::L1 {
                lambda: rng.random_range(0.02..0.2),
            };
            let aug = fit(&loss, &penalty, &data, &cfg.with_algorithm(Algorithm::AugmentedLasso))?.ensure_converged()?;
            let direct = fit(&loss, &penalty, &data, &cfg.with_algorithm(Algorithm::Fista))?.ensure_converged()?;
            worst = worst.max((&aug.beta_hat - &direct.beta_hat).amax());
        }
        Ok((worst <= 1e-6, format!("max |β̂_aug − β̂_direct| = {worst:.2e} over 10 instances")))
    };
    CheckOutcome::from_result("augmented Lasso = direct Huber solve", run())
}

/// Closed-form Elastic-Net traces agree with finite differences to 1e-3 on
/// 20 instances of size 30 × 40 with μ ≥ 0.1.
pub fn elastic_net_matches_fd(seed: u64) -> CheckOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = suite_rng(seed, 6);
        let cfg = tight(1e-12);
        let (mut found, mut attempts, mut worst) = (0, 0, 0.0_f64);
        while found < 20 && attempts < 200 {
            attempts += 1;
            let loss = match found % 3 {
                0 => LossSpec::Square,
                1 => LossSpec::SmoothHuber0 { scale: 1.0 },
                _ => LossSpec::Huber { scale: 1.2 },
            };
            let penalty = PenaltySpec::ElasticNet {
                lambda: rng.random_range(0.05..0.2),
                mu: rng.random_range(0.1..1.0),
            };
            let data = instance(&mut rng, 30, 40, 4, NoiseSpec::StudentT { dof: 3 })?;
            let base = fit(&loss, &penalty, &data, &cfg)?.ensure_converged()?;
            let Some((dfit, dpsi)) = stable_fd_jacobians(&loss, &penalty, &data, &cfg, &base)? else {
                continue;
            };
            found += 1;
            let closed = closed_form_factors(&base, &loss, &penalty, &data)?;
            worst = worst
                .max((dfit.trace() - closed.df_hat).abs())
                .max((dpsi.trace() - closed.trace_dpsi).abs());
        }
        Ok((
            found == 20 && worst <= 1e-3,
            format!("{found} stable instances in {attempts} draws; max trace difference {worst:.2e}"),
        ))
    };
    CheckOutcome::from_result("Elastic-Net closed form = fd traces", run())
}
