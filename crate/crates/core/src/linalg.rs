//! Small dense linear-algebra helpers shared by the solvers and estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one make a covariance singular.
pub const SPD_RELATIVE_CUTOFF: f64 = 1e-12;

/// A symmetric positive-definite covariance together with its cached
/// eigendecomposition, so that `Σ^{1/2}` and `Σ^{-1/2}` can be applied cheaply.
///
/// The identity is special-cased and never decomposed.
#[derive(Debug, Clone)]
pub struct Covariance {
    matrix: DMatrix<f64>,
    eigvecs: Option<DMatrix<f64>>,
    eigvals: DVector<f64>,
}

impl Covariance {
    pub fn identity(p: usize) -> Self {
        Covariance {
            matrix: DMatrix::identity(p, p),
            eigvecs: None,
            eigvals: DVector::from_element(p, 1.0),
        }
    }

    /// Factor a symmetric matrix; fails unless every eigenvalue exceeds
    /// `SPD_RELATIVE_CUTOFF` times the largest one.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if matrix.ncols() != p {
            return Err(Error::DimensionMismatch {
                context: "covariance (square)",
                expected: p,
                found: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        if p == 0 {
            return Ok(Covariance::identity(0));
        }
        let asym = (0..p)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (matrix[(i, j)] - matrix[(j, i)]).abs())
            .fold(0.0_f64, f64::max);
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if asym > 1e-12 * scale {
            return Err(Error::invalid(
                "sigma_cov",
                format!("matrix is not symmetric (max asymmetry {asym:e})"),
            ));
        }
        if matrix == DMatrix::identity(p, p) {
            return Ok(Covariance::identity(p));
        }
        let eig = matrix.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || min <= SPD_RELATIVE_CUTOFF * max {
            return Err(Error::NonPositiveDefinite {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        Ok(Covariance {
            matrix,
            eigvecs: Some(eig.eigenvectors),
            eigvals: eig.eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.eigvecs.is_none()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    fn spectral_apply(&self, v: &DVector<f64>, f: impl Fn(f64) -> f64) -> DVector<f64> {
        match &self.eigvecs {
            None => v.clone(),
            Some(q) => {
                let mut coef = q.tr_mul(v);
                for (c, &l) in coef.iter_mut().zip(self.eigvals.iter()) {
                    *c *= f(l);
                }
                q * coef
            }
        }
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "covariance application",
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `Σ^{-1/2} v`.
    pub fn inv_sqrt_apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        Ok(self.spectral_apply(v, |l| 1.0 / l.sqrt()))
    }

    /// `Σ^{1/2} v`.
    pub fn sqrt_apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        Ok(self.spectral_apply(v, f64::sqrt))
    }

    /// `vᵀ Σ v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_len(v)?;
        if self.is_identity() {
            return Ok(v.norm_squared());
        }
        Ok(v.dot(&(&self.matrix * v)))
    }

    /// The symmetric square root `Σ^{1/2}` as a dense matrix.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        match &self.eigvecs {
            None => DMatrix::identity(self.dim(), self.dim()),
            Some(q) => {
                let mut scaled = q.clone();
                for (j, &l) in self.eigvals.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(l.sqrt());
                }
                scaled * q.transpose()
            }
        }
    }
}

const OPNORM_MARGIN: f64 = 1.02;

/// Upper estimate of the largest singular value of `x`, by power iteration on `xᵀx`.
pub fn operator_norm(x: &DMatrix<f64>, max_iters: usize, tol: f64) -> f64 {
    let p = x.ncols();
    if p == 0 || x.nrows() == 0 {
        return 0.0;
    }
    // deterministic start with no special alignment to any axis
    let mut v = DVector::from_fn(p, |j, _| 1.0 + ((j * 7919) % 13) as f64 / 13.0);
    v /= v.norm();
    let mut sigma2 = 0.0;
    for _ in 0..max_iters {
        let w = x.tr_mul(&(x * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - sigma2).abs() <= tol * next {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    // the Rayleigh quotient underestimates; the margin keeps 1/L a descent step
    sigma2.sqrt() * OPNORM_MARGIN
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Operator norm of a symmetric matrix via its eigenvalues.
pub fn symmetric_op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_leaves_vectors_alone() {
        let cov = Covariance::identity(3);
        let v = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(cov.inv_sqrt_apply(&v).unwrap(), v);
    }

    #[test]
    fn scalar_covariance_scales() {
        let cov = Covariance::new(DMatrix::identity(2, 2) * 4.0).unwrap();
        let v = DVector::from_vec(vec![2.0, 0.0]);
        let w = cov.inv_sqrt_apply(&v).unwrap();
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(w[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn inv_sqrt_matches_linear_solve() {
        let a = DMatrix::from_fn(5, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let sigma = a.transpose() * &a + DMatrix::identity(5, 5);
        let cov = Covariance::new(sigma.clone()).unwrap();
        let v = DVector::from_fn(5, |i, _| i as f64 - 1.5);
        let lhs = cov.inv_sqrt_apply(&v).unwrap().norm_squared();
        let solved = sigma.lu().solve(&v).unwrap();
        let rhs = v.dot(&solved);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut m = DMatrix::identity(3, 3);
        m[(2, 2)] = 0.0;
        assert!(matches!(
            Covariance::new(m),
            Err(Error::NonPositiveDefinite { .. })
        ));
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.5]));
        let est = operator_norm(&x, 50, 1e-10);
        assert!((3.0..=3.0 * 1.03).contains(&est), "{est}");
    }
}
