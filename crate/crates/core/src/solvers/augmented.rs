//! The Huber Lasso as a Lasso in `p + n` coordinates.
//!
//! With `c = √n·λ/λ*`, minimizing
//! `‖Xb + cθ − y‖²/(2n) + λ‖b‖₁ + λ‖θ‖₁` over `(b, θ)` gives the Huber Lasso
//! `b` for the loss of scale `√n·λ*`. Observation `i` is an outlier exactly when
//! `θ̂ᵢ ≠ 0`, and `y − Xβ̂ − cθ̂` is the clipped residual `ψ̂`.

use nalgebra::{DMatrix, DVector};

use super::cd::{CdOutcome, CdProblem, Design};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::soft_threshold;

/// `[X | c·I_n]`, stored as `X` and the scalar `c`.
pub struct AugmentedDesign<'a> {
    x: &'a DMatrix<f64>,
    c: f64,
}

impl Design for AugmentedDesign<'_> {
    fn nrows(&self) -> usize {
        self.x.nrows()
    }

    fn ncols(&self) -> usize {
        self.x.ncols() + self.x.nrows()
    }

    #[inline]
    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        let p = self.x.ncols();
        if j < p {
            self.x.col_dot(j, v)
        } else {
            self.c * v[j - p]
        }
    }

    #[inline]
    fn col_axpy(&self, j: usize, a: f64, v: &mut [f64]) {
        let p = self.x.ncols();
        if j < p {
            self.x.col_axpy(j, a, v)
        } else {
            v[j - p] += a * self.c;
        }
    }

    fn col_norm_sq(&self, j: usize) -> f64 {
        let p = self.x.ncols();
        if j < p {
            self.x.col_norm_sq(j)
        } else {
            self.c * self.c
        }
    }
}

/// Result of mapping an augmented solution back to the Huber Lasso.
#[derive(Debug, Clone, PartialEq)]
pub struct HuberLassoParts {
    pub beta_hat: DVector<f64>,
    pub theta_hat: DVector<f64>,
    /// `{i : θ̂ᵢ = 0}`
    pub inliers: Vec<usize>,
    /// `y − Xβ̂ − cθ̂`
    pub psi_hat: DVector<f64>,
}

/// A Huber Lasso instance rewritten as an augmented Lasso.
pub struct AugmentedLasso<'a> {
    data: &'a Dataset,
    lambda: f64,
    lambda_star: f64,
}

/// Build the augmented Lasso for the Huber Lasso with penalty level `lambda`
/// and loss parameter `lambda_star` (Huber scale `√n·lambda_star`).
pub fn augment_huber(data: &Dataset, lambda: f64, lambda_star: f64) -> Result<AugmentedLasso<'_>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be positive for the augmented form"));
    }
    if !(lambda_star > 0.0 && lambda_star.is_finite()) {
        return Err(Error::invalid("lambda_star", "must be positive"));
    }
    Ok(AugmentedLasso {
        data,
        lambda,
        lambda_star,
    })
}

impl<'a> AugmentedLasso<'a> {
    /// Identity-block multiplier `√n·λ/λ*`.
    pub fn outlier_column_scale(&self) -> f64 {
        (self.data.n() as f64).sqrt() * self.lambda / self.lambda_star
    }

    pub fn huber_scale(&self) -> f64 {
        (self.data.n() as f64).sqrt() * self.lambda_star
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.data.y
    }

    pub(crate) fn design(&self) -> AugmentedDesign<'a> {
        AugmentedDesign {
            x: &self.data.x,
            c: self.outlier_column_scale(),
        }
    }

    /// The `n × (p + n)` design `[X | cI]`, materialized.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let (n, p) = (self.data.n(), self.data.p());
        let c = self.outlier_column_scale();
        DMatrix::from_fn(n, p + n, |i, j| {
            if j < p {
                self.data.x[(i, j)]
            } else if j - p == i {
                c
            } else {
                0.0
            }
        })
    }

    /// Optimal `θ` for a fixed `b`: the part of each residual beyond the Huber scale.
    pub fn theta_for(&self, beta: &DVector<f64>) -> DVector<f64> {
        let c = self.outlier_column_scale();
        let scale = self.huber_scale();
        (&self.data.y - &self.data.x * beta).map(|r| soft_threshold(r, scale) / c)
    }

    /// Stack `(b, θ)` into one augmented coefficient vector.
    pub fn stack(&self, beta: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.data.p();
        DVector::from_fn(p + self.data.n(), |j, _| if j < p { beta[j] } else { theta[j - p] })
    }

    pub fn back_map(&self, coef: &DVector<f64>) -> Result<HuberLassoParts> {
        let (n, p) = (self.data.n(), self.data.p());
        if coef.len() != n + p {
            return Err(Error::DimensionMismatch {
                context: "augmented coefficients",
                expected: n + p,
                found: coef.len(),
            });
        }
        let beta_hat = coef.rows(0, p).into_owned();
        let theta_hat = coef.rows(p, n).into_owned();
        let c = self.outlier_column_scale();
        let psi_hat = &self.data.y - &self.data.x * &beta_hat - &theta_hat * c;
        let inliers = (0..n).filter(|&i| theta_hat[i] == 0.0).collect();
        Ok(HuberLassoParts {
            beta_hat,
            theta_hat,
            inliers,
            psi_hat,
        })
    }

    pub(crate) fn solve(
        &self,
        init: DVector<f64>,
        max_sweeps: usize,
        tol: f64,
        history: Option<&mut Vec<f64>>,
    ) -> CdOutcome {
        let design = self.design();
        CdProblem {
            design: &design,
            y: &self.data.y,
            lambda: self.lambda,
            mu: 0.0,
        }
        .solve(init, max_sweeps, tol, history)
    }
}
