//! Optimality residual for `Xᵀψ̂/n ∈ ∂g(β̂)`.

use nalgebra::{DMatrix, DVector};

use super::prox::{reshape, PenaltySpec};
use super::FitResult;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossSpec;

/// KKT residual of a fit, in units of `Xᵀψ̂/n` (sup-norm for separable penalties,
/// operator-norm based for the nuclear norm). The score is recomputed from `β̂`
/// rather than trusted from the fit.
pub fn kkt_gap(fit: &FitResult, loss: &LossSpec, penalty: &PenaltySpec, data: &Dataset) -> Result<f64> {
    if fit.beta_hat.len() != data.p() {
        return Err(Error::DimensionMismatch {
            context: "kkt: coefficients vs design columns",
            expected: data.p(),
            found: fit.beta_hat.len(),
        });
    }
    let resid = &data.y - &data.x * &fit.beta_hat;
    let psi = loss.psi_vec(&resid);
    let grad = data.x.tr_mul(&psi) / data.n().max(1) as f64;
    gap_from_score(&fit.beta_hat, &grad, penalty, fit.support_threshold)
}

pub(crate) fn support_threshold(beta: &DVector<f64>, support_tol: f64) -> f64 {
    support_tol * (1.0 + beta.amax())
}

/// Gap given the score `Xᵀψ̂/n`.
pub(crate) fn gap_from_score(
    beta: &DVector<f64>,
    score: &DVector<f64>,
    penalty: &PenaltySpec,
    threshold: f64,
) -> Result<f64> {
    if score.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            context: "kkt: score vs coefficients",
            expected: beta.len(),
            found: score.len(),
        });
    }
    match *penalty {
        PenaltySpec::Nuclear { lambda, rows, cols } => {
            nuclear_gap(&reshape(beta, rows, cols), &reshape(score, rows, cols), lambda, threshold)
        }
        _ => {
            let (lambda, mu) = penalty.separable().expect("separable penalty");
            Ok(beta
                .iter()
                .zip(score.iter())
                .map(|(&b, &g)| {
                    let reduced = g - mu * b;
                    if b.abs() > threshold {
                        (reduced - lambda * b.signum()).abs()
                    } else {
                        (reduced.abs() - lambda).max(0.0)
                    }
                })
                .fold(0.0, f64::max))
        }
    }
}

fn nuclear_gap(b: &DMatrix<f64>, g: &DMatrix<f64>, lambda: f64, threshold: f64) -> Result<f64> {
    let svd = b
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::SvdFailure("kkt: SVD did not converge".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > threshold)
        .map(|(k, _)| k)
        .collect();
    let (rows, cols) = b.shape();
    if keep.is_empty() {
        return Ok((op_norm(g) - lambda).max(0.0));
    }
    let ur = DMatrix::from_fn(rows, keep.len(), |i, k| u[(i, keep[k])]);
    let vr = DMatrix::from_fn(cols, keep.len(), |j, k| vt[(keep[k], j)]);
    let pu = &ur * ur.transpose();
    let pv = &vr * vr.transpose();
    // subgradient is λ U Vᵀ + W with W orthogonal to both factor spaces, ‖W‖op ≤ λ
    let aligned = &pu * g + g * &pv - &pu * g * &pv;
    let alignment = (aligned - (&ur * vr.transpose()) * lambda).amax();
    let iu = DMatrix::identity(rows, rows) - pu;
    let iv = DMatrix::identity(cols, cols) - pv;
    let off = iu * g * iv;
    Ok(alignment.max((op_norm(&off) - lambda).max(0.0)))
}

fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}
