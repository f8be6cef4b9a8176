//! Penalized M-estimation: `β̂ = argmin (1/n)Σρ(yᵢ − xᵢᵀb) + g(b)`.
//!
//! Dispatch under [`Algorithm::Auto`]:
//! * square loss with a separable penalty: cyclic coordinate descent;
//! * Huber loss with an ℓ1 penalty: coordinate descent on the augmented Lasso;
//! * everything else: accelerated proximal gradient with step `n/‖X‖²_op`.
//!
//! Convergence is certified by the KKT residual of the original problem.

mod augmented;
mod cd;
mod fista;
mod kkt;
mod prox;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use augmented::{augment_huber, AugmentedLasso, HuberLassoParts};
pub use kkt::kkt_gap;
pub use prox::{prox_penalty, PenaltySpec};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use cd::CdProblem;
use fista::Fista;
use kkt::{gap_from_score, support_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Auto,
    CoordinateDescent,
    Fista,
    AugmentedLasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Iterations for FISTA, full-or-active sweeps for coordinate descent.
    pub max_iters: usize,
    pub kkt_tol: f64,
    /// Relative: coefficients with `|β̂ⱼ| ≤ support_tol·(1 + ‖β̂‖∞)` are inactive.
    pub support_tol: f64,
    pub algorithm: Algorithm,
    pub opnorm_iters: usize,
    pub opnorm_tol: f64,
    /// Keep the objective value after every iteration in `FitResult::objective_history`.
    pub record_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50_000,
            kkt_tol: 1e-8,
            support_tol: 1e-9,
            algorithm: Algorithm::Auto,
            opnorm_iters: 50,
            opnorm_tol: 1e-10,
            record_objective: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tol > 0.0) {
            return Err(Error::invalid("solver.kkt_tol", "must be positive"));
        }
        if !(self.support_tol > 0.0) {
            return Err(Error::invalid("solver.support_tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("solver.max_iters", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_kkt_tol(mut self, tol: f64) -> Self {
        self.kkt_tol = tol;
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    /// `ψ(y − Xβ̂)`
    pub psi_hat: DVector<f64>,
    pub psi_prime_hat: DVector<f64>,
    /// `Ŝ = {j : |β̂ⱼ| > support_threshold}`
    pub active_set: Vec<usize>,
    /// `Î = {i : ψ'(yᵢ − xᵢᵀβ̂) > 0}`
    pub inlier_set: Vec<usize>,
    pub kkt_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub support_threshold: f64,
    pub algorithm: Algorithm,
    /// Outlier coefficients `θ̂` when the augmented Lasso route was used.
    pub theta_hat: Option<DVector<f64>>,
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

impl FitResult {
    pub fn n_active(&self) -> usize {
        self.active_set.len()
    }

    pub fn n_inliers(&self) -> usize {
        self.inlier_set.len()
    }

    pub fn fitted(&self, data: &Dataset) -> DVector<f64> {
        &data.x * &self.beta_hat
    }

    /// Turn a non-converged fit into [`Error::NotConverged`].
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                kkt_gap: self.kkt_gap,
                iterations: self.iterations,
            })
        }
    }
}

/// Fit from a zero start.
pub fn fit(loss: &LossSpec, penalty: &PenaltySpec, data: &Dataset, cfg: &SolverConfig) -> Result<FitResult> {
    fit_warm(loss, penalty, data, cfg, None)
}

/// Fit, optionally warm-started at `init`.
pub fn fit_warm(
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    cfg: &SolverConfig,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    loss.validate()?;
    penalty.validate(data.p())?;
    cfg.validate()?;
    let p = data.p();
    let init = match init {
        Some(b) if b.len() != p => {
            return Err(Error::DimensionMismatch {
                context: "warm start length",
                expected: p,
                found: b.len(),
            })
        }
        Some(b) => b.clone(),
        None => DVector::zeros(p),
    };
    let algorithm = resolve_algorithm(loss, penalty, cfg.algorithm)?;
    let mut history = Vec::new();
    let hist = cfg.record_objective.then_some(&mut history);

    let (beta, iterations, theta) = match algorithm {
        Algorithm::CoordinateDescent => {
            let (lambda, mu) = penalty.separable().expect("checked by resolve");
            let out = CdProblem {
                design: &data.x,
                y: &data.y,
                lambda,
                mu,
            }
            .solve(init, cfg.max_iters, cfg.kkt_tol, hist);
            log::debug!("coordinate descent: {} sweeps, gap {:e}", out.sweeps, out.gap);
            (out.coef, out.sweeps, None)
        }
        Algorithm::AugmentedLasso => {
            let (lambda, scale) = match (penalty, loss) {
                (PenaltySpec::L1 { lambda }, LossSpec::Huber { scale }) => (*lambda, *scale),
                _ => unreachable!("checked by resolve"),
            };
            let n = data.n() as f64;
            let aug = augment_huber(data, lambda, scale / n.sqrt())?;
            solve_augmented(&aug, loss, penalty, data, cfg, init, hist)?
        }
        Algorithm::Fista => {
            let out = Fista {
                loss,
                penalty,
                data,
                support_tol: cfg.support_tol,
                opnorm_iters: cfg.opnorm_iters,
                opnorm_tol: cfg.opnorm_tol,
            }
            .solve(init, cfg.max_iters, cfg.kkt_tol, hist)?;
            log::debug!("fista: {} iterations, gap {:e}", out.iterations, out.gap);
            (out.beta, out.iterations, None)
        }
        Algorithm::Auto => unreachable!("resolved above"),
    };
    let mut result = finalize(loss, penalty, data, cfg, beta, iterations, algorithm)?;
    result.theta_hat = theta;
    result.objective_history = history;
    Ok(result)
}

fn resolve_algorithm(loss: &LossSpec, penalty: &PenaltySpec, requested: Algorithm) -> Result<Algorithm> {
    let cd_ok = matches!(loss, LossSpec::Square) && penalty.separable().is_some();
    let aug_ok = matches!(loss, LossSpec::Huber { .. })
        && matches!(penalty, PenaltySpec::L1 { lambda } if *lambda > 0.0);
    match requested {
        Algorithm::Auto if cd_ok => Ok(Algorithm::CoordinateDescent),
        Algorithm::Auto if aug_ok => Ok(Algorithm::AugmentedLasso),
        Algorithm::Auto | Algorithm::Fista => Ok(Algorithm::Fista),
        Algorithm::CoordinateDescent if cd_ok => Ok(requested),
        Algorithm::AugmentedLasso if aug_ok => Ok(requested),
        _ => Err(Error::UnsupportedPair(format!(
            "{:?} cannot fit {} loss with {} penalty",
            requested,
            loss.name(),
            penalty.name()
        ))),
    }
}

type Solved = (DVector<f64>, usize, Option<DVector<f64>>);

fn solve_augmented(
    aug: &AugmentedLasso<'_>,
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    cfg: &SolverConfig,
    init: DVector<f64>,
    mut hist: Option<&mut Vec<f64>>,
) -> Result<Solved> {
    let p = data.p();
    let theta0 = aug.theta_for(&init);
    let mut coef = aug.stack(&init, &theta0);
    let mut sweeps = 0;
    // The augmented residual only controls the Huber residual up to a factor of
    // scale/λ, so tighten until the original problem is certified.
    let mut tol = cfg.kkt_tol;
    for _ in 0..6 {
        let out = aug.solve(coef, cfg.max_iters.saturating_sub(sweeps).max(1), tol, hist.as_deref_mut());
        sweeps += out.sweeps;
        coef = out.coef;
        let beta = coef.rows(0, p).into_owned();
        let score = data.x.tr_mul(&loss.psi_vec(&(&data.y - &data.x * &beta))) / data.n().max(1) as f64;
        let gap = gap_from_score(&beta, &score, penalty, support_threshold(&beta, cfg.support_tol))?;
        if gap <= cfg.kkt_tol || sweeps >= cfg.max_iters {
            break;
        }
        tol /= 10.0;
    }
    let parts = aug.back_map(&coef)?;
    Ok((parts.beta_hat, sweeps, Some(parts.theta_hat)))
}

fn finalize(
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    cfg: &SolverConfig,
    beta: DVector<f64>,
    iterations: usize,
    algorithm: Algorithm,
) -> Result<FitResult> {
    let n = data.n().max(1) as f64;
    let resid = &data.y - &data.x * &beta;
    let lv = loss.eval_vec(&resid);
    let threshold = support_threshold(&beta, cfg.support_tol);
    let active_set = (0..beta.len()).filter(|&j| beta[j].abs() > threshold).collect();
    let inlier_set = (0..resid.len()).filter(|&i| lv.psi_prime[i] > 0.0).collect();
    let score = data.x.tr_mul(&lv.psi) / n;
    let gap = gap_from_score(&beta, &score, penalty, threshold)?;
    let objective = lv.rho.sum() / n + penalty.value(&beta);
    Ok(FitResult {
        beta_hat: beta,
        psi_hat: lv.psi,
        psi_prime_hat: lv.psi_prime,
        active_set,
        inlier_set,
        kkt_gap: gap,
        iterations,
        converged: gap <= cfg.kkt_tol,
        objective,
        support_threshold: threshold,
        algorithm,
        theta_hat: None,
        objective_history: Vec::new(),
    })
}
