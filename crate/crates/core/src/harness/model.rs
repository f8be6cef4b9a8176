use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::JacobianSpec;
use crate::data::{replication_rng, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{hat_r, square_loss_estimates, sure, RiskReport};
use crate::jacobians::{closed_form_factors, mc_factors_for_fit};
use crate::linalg::Covariance;
use crate::losses::LossSpec;
use crate::solvers::{fit, Algorithm, FitResult, PenaltySpec, SolverConfig};

/// What to fit on a user-supplied dataset, and how to estimate its risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub loss: LossSpec,
    pub penalty: PenaltySpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub jacobian: JacobianSpec,
    /// Row-major `p × p` covariance of the design rows; identity when absent.
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Known noise variance, enabling SURE for the square loss.
    #[serde(default)]
    pub sigma2: Option<f64>,
    /// Seed for the Monte Carlo perturbations.
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.loss.validate()?;
        cfg.solver.validate()?;
        if let Some(s2) = cfg.sigma2 {
            if !(s2 >= 0.0 && s2.is_finite()) {
                return Err(Error::config("sigma2", "must be finite and nonnegative"));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn covariance(&self, p: usize) -> Result<Covariance> {
        match &self.covariance {
            None => Ok(Covariance::identity(p)),
            Some(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::config("covariance", format!("must be {p} × {p}")));
                }
                Covariance::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
            }
        }
    }
}

/// JSON-friendly view of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub loss: &'static str,
    pub penalty: &'static str,
    pub algorithm: Algorithm,
    pub converged: bool,
    pub kkt_gap: f64,
    pub iterations: usize,
    pub objective: f64,
    pub n_active: usize,
    pub n_inliers: usize,
    pub active_set: Vec<usize>,
    pub beta_hat: Vec<f64>,
}

impl FitSummary {
    pub fn new(fit: &FitResult, loss: &LossSpec, penalty: &PenaltySpec) -> Self {
        FitSummary {
            loss: loss.name(),
            penalty: penalty.name(),
            algorithm: fit.algorithm,
            converged: fit.converged,
            kkt_gap: fit.kkt_gap,
            iterations: fit.iterations,
            objective: fit.objective,
            n_active: fit.n_active(),
            n_inliers: fit.n_inliers(),
            active_set: fit.active_set.clone(),
            beta_hat: fit.beta_hat.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateOutput {
    pub fit: FitSummary,
    pub report: RiskReport,
}

/// Fit the configured model; fails with `NotConverged` if the KKT gap is not certified.
pub fn fit_model(data: &Dataset, cfg: &ModelConfig) -> Result<FitResult> {
    fit(&cfg.loss, &cfg.penalty, data, &cfg.solver)?.ensure_converged()
}

/// Fit, compute the Jacobian factors, and build the risk report.
pub fn estimate_model(data: &Dataset, cfg: &ModelConfig) -> Result<EstimateOutput> {
    let sigma = cfg.covariance(data.p())?;
    let f = fit_model(data, cfg)?;
    let factors = match cfg.jacobian {
        JacobianSpec::ClosedForm => closed_form_factors(&f, &cfg.loss, &cfg.penalty, data)?,
        JacobianSpec::MonteCarlo { a, m } => {
            let mut rng = replication_rng(cfg.seed, 0);
            mc_factors_for_fit(&f, &cfg.loss, &cfg.penalty, data, &cfg.solver, a, m, &mut rng)?
        }
    };
    let mut report = match cfg.loss {
        LossSpec::Square => square_loss_estimates(&f, data, &sigma, &factors)?,
        _ => hat_r(&f, data, &sigma, &factors)?,
    };
    if let (LossSpec::Square, Some(s2)) = (cfg.loss, cfg.sigma2) {
        report.sure = Some(sure(&f, factors.df_hat, s2));
    }
    Ok(EstimateOutput {
        fit: FitSummary::new(&f, &cfg.loss, &cfg.penalty),
        report,
    })
}
