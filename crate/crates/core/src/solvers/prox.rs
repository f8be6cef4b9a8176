use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::soft_threshold;

/// Convex penalty `g`. `ElasticNet` is `μ‖b‖²/2 + λ‖b‖₁`; `Nuclear` is
/// `λ‖mat(b)‖_nuc` with `mat` the column-major reshape to `rows × cols`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    None,
    L1 {
        lambda: f64,
    },
    ElasticNet {
        lambda: f64,
        mu: f64,
    },
    Nuclear {
        lambda: f64,
        rows: usize,
        cols: usize,
    },
}

impl PenaltySpec {
    pub fn validate(&self, p: usize) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be nonnegative and finite"))
            }
        };
        match *self {
            PenaltySpec::None => Ok(()),
            PenaltySpec::L1 { lambda } => check("penalty.lambda", lambda),
            PenaltySpec::ElasticNet { lambda, mu } => {
                check("penalty.lambda", lambda)?;
                check("penalty.mu", mu)
            }
            PenaltySpec::Nuclear { lambda, rows, cols } => {
                check("penalty.lambda", lambda)?;
                if rows * cols != p {
                    return Err(Error::invalid(
                        "penalty.rows",
                        format!("rows·cols = {} but p = {p}", rows * cols),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PenaltySpec::None => "none",
            PenaltySpec::L1 { .. } => "l1",
            PenaltySpec::ElasticNet { .. } => "elastic_net",
            PenaltySpec::Nuclear { .. } => "nuclear",
        }
    }

    /// `(λ, μ)` for the coordinate-separable penalties.
    pub fn separable(&self) -> Option<(f64, f64)> {
        match *self {
            PenaltySpec::None => Some((0.0, 0.0)),
            PenaltySpec::L1 { lambda } => Some((lambda, 0.0)),
            PenaltySpec::ElasticNet { lambda, mu } => Some((lambda, mu)),
            PenaltySpec::Nuclear { .. } => None,
        }
    }

    pub fn value(&self, b: &DVector<f64>) -> f64 {
        match *self {
            PenaltySpec::None => 0.0,
            PenaltySpec::L1 { lambda } => lambda * b.lp_norm(1),
            PenaltySpec::ElasticNet { lambda, mu } => {
                lambda * b.lp_norm(1) + 0.5 * mu * b.norm_squared()
            }
            PenaltySpec::Nuclear { lambda, rows, cols } => {
                lambda * reshape(b, rows, cols).singular_values().sum()
            }
        }
    }
}

pub(crate) fn reshape(b: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, b.as_slice())
}

/// `argmin_z ‖z − v‖²/(2·step) + g(z)`.
pub fn prox_penalty(penalty: &PenaltySpec, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", "must be positive and finite"));
    }
    Ok(match *penalty {
        PenaltySpec::None => v.clone(),
        PenaltySpec::L1 { lambda } => v.map(|vi| soft_threshold(vi, step * lambda)),
        PenaltySpec::ElasticNet { lambda, mu } => {
            let shrink = 1.0 / (1.0 + step * mu);
            v.map(|vi| soft_threshold(vi, step * lambda) * shrink)
        }
        PenaltySpec::Nuclear { lambda, rows, cols } => {
            if rows * cols != v.len() {
                return Err(Error::DimensionMismatch {
                    context: "nuclear prox reshape",
                    expected: rows * cols,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::SvdFailure("non-finite input to the nuclear prox".into()));
            }
            let mut svd = reshape(v, rows, cols)
                .try_svd(true, true, f64::EPSILON, 0)
                .ok_or_else(|| Error::SvdFailure("SVD did not converge".into()))?;
            let t = step * lambda;
            svd.singular_values.apply(|s| *s = (*s - t).max(0.0));
            let m = svd
                .recompose()
                .map_err(|e| Error::SvdFailure(e.to_string()))?;
            DVector::from_column_slice(m.as_slice())
        }
    })
}
