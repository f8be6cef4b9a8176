//! Data-driven estimates of the out-of-sample error `‖Σ^{1/2}(β̂ − β)‖²`.
//!
//! For any loss,
//!
//! ```text
//! R̂ = tr[∂ψ̂/∂y]⁻² · { ‖ψ̂‖²(2·df̂ − p) + ‖Σ^{-1/2}Xᵀψ̂‖² }
//! ```
//!
//! With the square loss, `tr[∂ψ̂/∂y] = n − df̂` and two more quantities come for
//! free: the generalization error `τ̂² = n‖ψ̂‖²/(n − df̂)²`, which needs no `Σ`,
//! and the noise level `σ̂² = τ̂² − R̂`.
//!
//! Small factors make the estimates unreliable. Reports whose `(tr/n)²` falls
//! below [`DEGENERACY_THRESHOLD`] are flagged but still returned.

use nalgebra::DVector;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jacobians::JacobianFactors;
use crate::linalg::Covariance;
use crate::solvers::FitResult;

pub const DEGENERACY_THRESHOLD: f64 = 1e-2;

/// `df̂` must stay below `n − √n·DF_MARGIN` for the square-loss estimates.
pub const DF_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub r_hat: f64,
    pub tau2_hat: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub sure: Option<f64>,
    /// `tr[∂ψ̂/∂y]/n`
    pub factor: f64,
    pub degenerate: bool,
    pub factors: JacobianFactors,
}

/// `Σ^{-1/2} v` through the cached eigendecomposition.
pub fn sigma_inv_sqrt_apply(sigma_cov: &Covariance, v: &DVector<f64>) -> Result<DVector<f64>> {
    sigma_cov.inv_sqrt_apply(v)
}

/// `(‖ψ̂‖², ‖Σ^{-1/2}Xᵀψ̂‖²)`
fn score_norms(fit: &FitResult, data: &Dataset, sigma_cov: &Covariance) -> Result<(f64, f64)> {
    if fit.psi_hat.len() != data.n() {
        return Err(Error::DimensionMismatch {
            context: "score length vs sample size",
            expected: data.n(),
            found: fit.psi_hat.len(),
        });
    }
    if sigma_cov.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            context: "covariance dimension vs p",
            expected: data.p(),
            found: sigma_cov.dim(),
        });
    }
    let xt_psi = data.x.tr_mul(&fit.psi_hat);
    let whitened = sigma_cov.inv_sqrt_apply(&xt_psi)?;
    Ok((fit.psi_hat.norm_squared(), whitened.norm_squared()))
}

fn check_factors(factors: &JacobianFactors) -> Result<()> {
    if !factors.df_hat.is_finite() || !factors.trace_dpsi.is_finite() {
        return Err(Error::NonFinite("jacobian factors"));
    }
    Ok(())
}

/// `R̂` for a general loss.
pub fn hat_r(
    fit: &FitResult,
    data: &Dataset,
    sigma_cov: &Covariance,
    factors: &JacobianFactors,
) -> Result<RiskReport> {
    check_factors(factors)?;
    let tr = factors.trace_dpsi;
    if tr == 0.0 {
        return Err(Error::DegenerateFactor(
            "tr[∂ψ̂/∂y] = 0: every observation is treated as an outlier".into(),
        ));
    }
    let (psi2, whitened2) = score_norms(fit, data, sigma_cov)?;
    let p = data.p() as f64;
    let factor = tr / data.n() as f64;
    Ok(RiskReport {
        r_hat: (psi2 * (2.0 * factors.df_hat - p) + whitened2) / (tr * tr),
        tau2_hat: None,
        sigma2_hat: None,
        sure: None,
        factor,
        degenerate: factor * factor < DEGENERACY_THRESHOLD,
        factors: *factors,
    })
}

/// `τ̂²`, `R̂` and `σ̂²` for a square-loss fit, all with denominator `(n − df̂)²`.
pub fn square_loss_estimates(
    fit: &FitResult,
    data: &Dataset,
    sigma_cov: &Covariance,
    factors: &JacobianFactors,
) -> Result<RiskReport> {
    check_factors(factors)?;
    let n = data.n() as f64;
    let df = factors.df_hat;
    if df >= n - n.sqrt() * DF_MARGIN {
        return Err(Error::DegenerateFactor(format!(
            "df̂ = {df} leaves no residual degrees of freedom (n = {n})"
        )));
    }
    let (psi2, whitened2) = score_norms(fit, data, sigma_cov)?;
    let p = data.p() as f64;
    let resid_df = n - df;
    let denom = resid_df * resid_df;
    let tau2 = n * psi2 / denom;
    let r_hat = (psi2 * (2.0 * df - p) + whitened2) / denom;
    let sigma2 = (psi2 * (n - (2.0 * df - p)) - whitened2) / denom;
    let factor = resid_df / n;
    Ok(RiskReport {
        r_hat,
        tau2_hat: Some(tau2),
        sigma2_hat: Some(sigma2),
        sure: None,
        factor,
        degenerate: factor * factor < DEGENERACY_THRESHOLD,
        factors: *factors,
    })
}

/// Stein's unbiased estimate of the in-sample risk `‖Xβ̂ − Xβ‖²` for the
/// square loss, with the noise variance supplied by the caller.
pub fn sure(fit: &FitResult, df_hat: f64, sigma2: f64) -> f64 {
    let n = fit.psi_hat.len() as f64;
    fit.psi_hat.norm_squared() + 2.0 * sigma2 * df_hat - sigma2 * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobians::FactorMethod;
    use crate::losses::LossSpec;
    use crate::solvers::{fit, PenaltySpec, SolverConfig};
    use nalgebra::DMatrix;

    fn factors(df: f64, tr: f64) -> JacobianFactors {
        JacobianFactors {
            df_hat: df,
            trace_dpsi: tr,
            method: FactorMethod::ClosedForm,
            df_std_err: None,
            trace_std_err: None,
        }
    }

    fn toy() -> Dataset {
        let x = DMatrix::from_fn(12, 4, |i, j| ((i * 7 + j * 5) % 11) as f64 / 5.0 - 1.0);
        let y = DVector::from_fn(12, |i, _| (i as f64).cos() * 2.0 + 0.3 * i as f64);
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn sigma_inv_sqrt_examples() {
        let v = DVector::from_vec(vec![2.0, 0.0]);
        let id = Covariance::identity(2);
        assert_eq!(sigma_inv_sqrt_apply(&id, &v).unwrap(), v);
        let four = Covariance::new(DMatrix::identity(2, 2) * 4.0).unwrap();
        let out = sigma_inv_sqrt_apply(&four, &v).unwrap();
        assert!((out - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn ols_closed_forms() {
        let data = toy();
        let cov = Covariance::identity(4);
        let f = fit(&LossSpec::Square, &PenaltySpec::None, &data, &SolverConfig::default()).unwrap();
        let rep = square_loss_estimates(&f, &data, &cov, &factors(4.0, 8.0)).unwrap();
        let rss = f.psi_hat.norm_squared();
        // Xᵀψ̂ ≈ 0 at the least-squares solution
        assert!((rep.r_hat - 4.0 * rss / 64.0).abs() < 1e-9);
        assert!((rep.sigma2_hat.unwrap() - rss / 8.0).abs() < 1e-9);
        let general = hat_r(&f, &data, &cov, &factors(4.0, 8.0)).unwrap();
        assert!((general.r_hat - rep.r_hat).abs() < 1e-12);
        assert!((sure(&f, 4.0, 1.5) - (rss + 1.5 * (8.0 - 12.0))).abs() < 1e-12);
    }

    #[test]
    fn zero_estimate_reduces_to_response() {
        let data = toy();
        let cov = Covariance::identity(4);
        let big = PenaltySpec::L1 { lambda: 1e6 };
        let f = fit(&LossSpec::Square, &big, &data, &SolverConfig::default()).unwrap();
        assert_eq!(f.n_active(), 0);
        let rep = square_loss_estimates(&f, &data, &cov, &factors(0.0, 12.0)).unwrap();
        let y2 = data.y.norm_squared();
        let xty2 = data.x.tr_mul(&data.y).norm_squared();
        assert!((rep.r_hat - (-4.0 * y2 + xty2) / 144.0).abs() < 1e-10);
        assert!((rep.tau2_hat.unwrap() - y2 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn tau_identity_and_degeneracy() {
        let data = toy();
        let cov = Covariance::identity(4);
        let f = fit(&LossSpec::Square, &PenaltySpec::L1 { lambda: 0.1 }, &data, &SolverConfig::default()).unwrap();
        let s = f.n_active() as f64;
        let rep = square_loss_estimates(&f, &data, &cov, &factors(s, 12.0 - s)).unwrap();
        let (t, r, sg) = (rep.tau2_hat.unwrap(), rep.r_hat, rep.sigma2_hat.unwrap());
        assert!((t - r - sg).abs() <= 1e-10 * t.abs());
        assert!(!rep.degenerate);

        assert!(matches!(
            hat_r(&f, &data, &cov, &factors(s, 0.0)),
            Err(Error::DegenerateFactor(_))
        ));
        assert!(hat_r(&f, &data, &cov, &factors(s, 0.5)).unwrap().degenerate);
        assert!(square_loss_estimates(&f, &data, &cov, &factors(12.0, 0.0)).is_err());
    }

    #[test]
    fn interpolating_sure() {
        let mut f = fit(&LossSpec::Square, &PenaltySpec::None, &toy(), &SolverConfig::default()).unwrap();
        f.psi_hat = DVector::zeros(12);
        assert_eq!(sure(&f, 12.0, 2.0), 24.0);
        assert_eq!(sure(&f, 3.0, 0.0), 0.0);
    }
}
