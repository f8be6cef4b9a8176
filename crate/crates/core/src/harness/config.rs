use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CovarianceSpec, NoiseSpec, SignalSpec};
use crate::error::{Error, Result};
use crate::jacobians::{DEFAULT_MC_SAMPLES, DEFAULT_MC_STEP};
use crate::losses::LossSpec;
use crate::solvers::{PenaltySpec, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Huber loss with an ℓ1 penalty over a `(λ, λ*)` grid.
    HuberGrid,
    /// Square loss with a nuclear-norm penalty on a low-rank matrix signal.
    NuclearNorm,
    /// Unpenalized least squares with `p < n`.
    OlsCalibration,
    /// Square loss with an Elastic-Net (or ℓ1 when `mu = 0`) penalty.
    SigmaRecovery,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            Error::config(
                "experiment",
                format!("unknown experiment `{s}` (expected huber_grid, nuclear_norm, ols_calibration or sigma_recovery)"),
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JacobianSpec {
    #[default]
    ClosedForm,
    MonteCarlo {
        #[serde(default = "default_mc_step")]
        a: f64,
        #[serde(default = "default_mc_samples")]
        m: usize,
    },
}

fn default_mc_step() -> f64 {
    DEFAULT_MC_STEP
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_true() -> bool {
    true
}

/// One simulation study. Serialized as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Penalty levels. `ols_calibration` accepts only `[0]` (the default when empty).
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Huber loss parameters; the loss scale is `√n·λ*`. Only for `huber_grid`.
    #[serde(default)]
    pub lambda_stars: Vec<f64>,
    /// Ridge weight of the Elastic-Net penalty `λ‖b‖₁ + μ‖b‖²/2`.
    #[serde(default)]
    pub mu: f64,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub covariance: CovarianceSpec,
    pub signal: SignalSpec,
    #[serde(default)]
    pub jacobian: JacobianSpec,
    /// Worker threads; `None` defers to `HDRISK_THREADS` or the machine.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Write measured `wall_ms`; when false the column is 0 so reruns are byte-identical.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
}

/// A point of the tuning grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lambda: f64,
    pub lambda_star: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::config(field, reason));
        if self.reps == 0 {
            return bad("reps", "must be at least 1");
        }
        if self.n == 0 {
            return bad("n", "must be at least 1");
        }
        if self.p == 0 {
            return bad("p", "must be at least 1");
        }
        if self.threads == Some(0) {
            return bad("threads", "must be at least 1");
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu", "must be finite and nonnegative");
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("lambdas", "entries must be finite and nonnegative");
        }
        if self.lambda_stars.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("lambda_stars", "entries must be finite and positive");
        }
        let sub = |field: &'static str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::config(name, reason),
                other => Error::config(field, other.to_string()),
            })
        };
        sub("noise", self.noise.validate())?;
        sub("covariance", self.covariance.validate())?;
        sub("signal", self.signal.validate(self.p))?;
        sub("solver", self.solver.validate())?;
        if let JacobianSpec::MonteCarlo { a, m } = self.jacobian {
            if !(a > 0.0 && a.is_finite()) {
                return bad("jacobian.a", "must be positive");
            }
            if m == 0 {
                return bad("jacobian.m", "must be at least 1");
            }
        }

        match self.experiment {
            ExperimentKind::HuberGrid => {
                if self.lambdas.is_empty() {
                    return bad("lambdas", "grid must be nonempty");
                }
                if self.lambda_stars.is_empty() {
                    return bad("lambda_stars", "huber_grid needs a nonempty λ* grid");
                }
                if self.lambdas.iter().any(|&l| l == 0.0) && self.mu == 0.0 {
                    return bad("lambdas", "huber_grid needs λ > 0");
                }
            }
            ExperimentKind::NuclearNorm => {
                if self.lambdas.is_empty() {
                    return bad("lambdas", "grid must be nonempty");
                }
                if !matches!(self.signal, SignalSpec::LowRank { .. }) {
                    return bad("signal", "nuclear_norm needs a low_rank signal giving the matrix shape");
                }
                if matches!(self.jacobian, JacobianSpec::ClosedForm) {
                    return bad("jacobian", "nuclear-norm factors have no closed form; use monte_carlo");
                }
            }
            ExperimentKind::OlsCalibration => {
                if self.lambdas.iter().any(|&l| l != 0.0) || self.lambdas.len() > 1 {
                    return bad("lambdas", "ols_calibration is unpenalized; omit lambdas or use [0]");
                }
                if self.p >= self.n && matches!(self.jacobian, JacobianSpec::ClosedForm) {
                    return bad("p", "least squares needs p < n");
                }
            }
            ExperimentKind::SigmaRecovery => {
                if self.lambdas.is_empty() {
                    return bad("lambdas", "grid must be nonempty");
                }
            }
        }
        if self.experiment != ExperimentKind::HuberGrid && !self.lambda_stars.is_empty() {
            return bad("lambda_stars", "only huber_grid uses a λ* grid");
        }
        Ok(())
    }

    /// Grid points in row order: λ outer, λ* inner.
    pub fn grid(&self) -> Vec<GridPoint> {
        match self.experiment {
            ExperimentKind::HuberGrid => self
                .lambdas
                .iter()
                .flat_map(|&lambda| {
                    self.lambda_stars.iter().map(move |&ls| GridPoint {
                        lambda,
                        lambda_star: Some(ls),
                    })
                })
                .collect(),
            ExperimentKind::OlsCalibration => vec![GridPoint {
                lambda: 0.0,
                lambda_star: None,
            }],
            _ => self
                .lambdas
                .iter()
                .map(|&lambda| GridPoint {
                    lambda,
                    lambda_star: None,
                })
                .collect(),
        }
    }

    pub fn loss_at(&self, point: &GridPoint) -> LossSpec {
        match point.lambda_star {
            Some(ls) => LossSpec::huber_lasso(self.n, ls),
            None => LossSpec::Square,
        }
    }

    pub fn penalty_at(&self, point: &GridPoint) -> PenaltySpec {
        let lambda = point.lambda;
        match (self.experiment, self.signal) {
            (ExperimentKind::OlsCalibration, _) => PenaltySpec::None,
            (ExperimentKind::NuclearNorm, SignalSpec::LowRank { rows, cols, .. }) => {
                PenaltySpec::Nuclear { lambda, rows, cols }
            }
            _ if self.mu > 0.0 => PenaltySpec::ElasticNet { lambda, mu: self.mu },
            _ => PenaltySpec::L1 { lambda },
        }
    }

    /// Desk-scale defaults for each experiment.
    pub fn desk(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::HuberGrid => {
                let (n, p) = (300, 300);
                ExperimentConfig {
                    lambdas: geometric(0.1 / (n as f64).sqrt(), 1.5, &[3, 5, 7, 9]),
                    lambda_stars: geometric(0.1 / (n as f64).sqrt(), 1.5, &[6, 8, 10]),
                    signal: SignalSpec::SparseFlat {
                        s: 30,
                        amplitude: 10.0 / (p as f64).sqrt(),
                    },
                    noise: NoiseSpec::StudentT { dof: 2 },
                    ..Self::base(kind, n, p, 30)
                }
            }
            ExperimentKind::NuclearNorm => {
                let (n, p) = (120, 150);
                ExperimentConfig {
                    lambdas: geometric(0.5 / (n as f64).sqrt(), 1.3, &[4, 7, 10]),
                    signal: SignalSpec::LowRank {
                        rows: 10,
                        cols: 15,
                        rank: 2,
                    },
                    covariance: CovarianceSpec::ScaledWishart { dof_multiplier: 5 },
                    noise: NoiseSpec::Gaussian {
                        sigma: std::f64::consts::SQRT_2,
                    },
                    jacobian: JacobianSpec::MonteCarlo { a: 0.01, m: 50 },
                    ..Self::base(kind, n, p, 5)
                }
            }
            ExperimentKind::OlsCalibration => ExperimentConfig {
                noise: NoiseSpec::Gaussian { sigma: 1.0 },
                signal: SignalSpec::SparseFlat { s: 10, amplitude: 1.0 },
                ..Self::base(kind, 200, 50, 100)
            },
            ExperimentKind::SigmaRecovery => ExperimentConfig {
                lambdas: vec![0.1],
                mu: 0.5,
                noise: NoiseSpec::Gaussian { sigma: 1.0 },
                covariance: CovarianceSpec::ScaledWishart { dof_multiplier: 5 },
                signal: SignalSpec::SparseFlat { s: 20, amplitude: 0.25 },
                ..Self::base(kind, 200, 250, 50)
            },
        }
    }

    /// Full-size setups of the reference simulations. Only the Huber grid and
    /// the nuclear-norm study have one.
    pub fn full_scale(kind: ExperimentKind) -> Result<Self> {
        match kind {
            ExperimentKind::HuberGrid => {
                let (n, p) = (1001, 1000);
                let base = 0.1 / (n as f64).sqrt();
                Ok(ExperimentConfig {
                    lambdas: geometric(base, 1.5, &(0..=15).collect::<Vec<_>>()),
                    lambda_stars: geometric(base, 1.5, &(0..=8).collect::<Vec<_>>()),
                    signal: SignalSpec::SparseFlat {
                        s: 100,
                        amplitude: 10.0 / (p as f64).sqrt(),
                    },
                    noise: NoiseSpec::StudentT { dof: 2 },
                    ..Self::base(kind, n, p, 100)
                })
            }
            ExperimentKind::NuclearNorm => {
                let (n, p) = (400, 500);
                Ok(ExperimentConfig {
                    lambdas: geometric(0.5 / (n as f64).sqrt(), 1.3, &(0..=14).collect::<Vec<_>>()),
                    signal: SignalSpec::LowRank {
                        rows: 20,
                        cols: 25,
                        rank: 3,
                    },
                    covariance: CovarianceSpec::ScaledWishart { dof_multiplier: 5 },
                    noise: NoiseSpec::Gaussian {
                        sigma: std::f64::consts::SQRT_2,
                    },
                    jacobian: JacobianSpec::MonteCarlo {
                        a: DEFAULT_MC_STEP,
                        m: DEFAULT_MC_SAMPLES,
                    },
                    ..Self::base(kind, n, p, 10)
                })
            }
            other => Err(Error::config(
                "experiment",
                format!("no paper-scale preset for {other:?}; only huber_grid and nuclear_norm"),
            )),
        }
    }

    fn base(experiment: ExperimentKind, n: usize, p: usize, reps: usize) -> Self {
        ExperimentConfig {
            experiment,
            n,
            p,
            reps,
            master_seed: 0,
            lambdas: Vec::new(),
            lambda_stars: Vec::new(),
            mu: 0.0,
            noise: NoiseSpec::Gaussian { sigma: 1.0 },
            covariance: CovarianceSpec::Identity,
            signal: SignalSpec::SparseFlat { s: 0, amplitude: 0.0 },
            jacobian: JacobianSpec::ClosedForm,
            threads: None,
            solver: SolverConfig::default(),
            record_wall_time: true,
        }
    }
}

/// `base·ratio^k` for each `k`.
pub fn geometric(base: f64, ratio: f64, ks: &[i32]) -> Vec<f64> {
    ks.iter().map(|&k| base * ratio.powi(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for kind in [
            ExperimentKind::HuberGrid,
            ExperimentKind::NuclearNorm,
            ExperimentKind::OlsCalibration,
            ExperimentKind::SigmaRecovery,
        ] {
            ExperimentConfig::desk(kind).validate().unwrap();
        }
        let huber = ExperimentConfig::full_scale(ExperimentKind::HuberGrid).unwrap();
        huber.validate().unwrap();
        assert_eq!(huber.grid().len(), 16 * 9);
        let nuc = ExperimentConfig::full_scale(ExperimentKind::NuclearNorm).unwrap();
        nuc.validate().unwrap();
        assert_eq!(nuc.lambdas.len(), 15);
        assert!(ExperimentConfig::full_scale(ExperimentKind::OlsCalibration).is_err());
    }

    #[test]
    fn json_round_trip_and_field_errors() {
        let cfg = ExperimentConfig::desk(ExperimentKind::HuberGrid);
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);

        let mut broken = cfg.clone();
        broken.reps = 0;
        let text = serde_json::to_string(&broken).unwrap();
        match ExperimentConfig::from_json(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "reps"),
            other => panic!("expected a config error, got {other:?}"),
        }

        let mut broken = cfg;
        broken.lambda_stars.clear();
        match broken.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "lambda_stars"),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_json() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "huber_grid", "n": 20, "p": 10, "reps": 2,
                "lambdas": [0.1, 0.2, 0.3], "lambda_stars": [0.1, 0.2],
                "noise": {"kind": "student_t", "dof": 2},
                "signal": {"kind": "sparse_flat", "s": 3, "amplitude": 1.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.grid().len(), 6);
        assert_eq!(cfg.jacobian, JacobianSpec::ClosedForm);
        assert!(cfg.record_wall_time);
        assert!(ExperimentConfig::from_json(r#"{"experiment": "huber_grid", "bogus": 1}"#).is_err());
    }
}
