//! Cyclic coordinate descent for `‖y − Ab‖²/(2n) + λ‖b‖₁ + μ‖b‖²/2`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::soft_threshold;

/// Column access for coordinate descent. Lets the augmented Huber design be
/// used without materializing its identity block.
pub(crate) trait Design {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn col_dot(&self, j: usize, v: &[f64]) -> f64;
    fn col_axpy(&self, j: usize, a: f64, v: &mut [f64]);
    fn col_norm_sq(&self, j: usize) -> f64;

    fn apply(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = vec![0.0; self.nrows()];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                self.col_axpy(j, bj, &mut out);
            }
        }
        DVector::from_vec(out)
    }
}

impl Design for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    #[inline]
    fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        let n = self.nrows();
        let col = &self.as_slice()[j * n..(j + 1) * n];
        col.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    #[inline]
    fn col_axpy(&self, j: usize, a: f64, v: &mut [f64]) {
        let n = self.nrows();
        let col = &self.as_slice()[j * n..(j + 1) * n];
        for (vi, ci) in v.iter_mut().zip(col) {
            *vi += a * ci;
        }
    }

    fn col_norm_sq(&self, j: usize) -> f64 {
        let n = self.nrows();
        self.as_slice()[j * n..(j + 1) * n].iter().map(|c| c * c).sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CdOutcome {
    pub coef: DVector<f64>,
    pub sweeps: usize,
    pub gap: f64,
}

pub(crate) struct CdProblem<'a, D: Design> {
    pub design: &'a D,
    pub y: &'a DVector<f64>,
    pub lambda: f64,
    pub mu: f64,
}

impl<D: Design> CdProblem<'_, D> {
    fn objective(&self, coef: &DVector<f64>, resid: &[f64]) -> f64 {
        let n = self.design.nrows().max(1) as f64;
        resid.iter().map(|r| r * r).sum::<f64>() / (2.0 * n)
            + self.lambda * coef.lp_norm(1)
            + 0.5 * self.mu * coef.norm_squared()
    }

    /// Sup-norm KKT residual at `coef`, given the residual `y − A coef`.
    fn gap(&self, coef: &DVector<f64>, resid: &[f64]) -> f64 {
        let n = self.design.nrows().max(1) as f64;
        (0..coef.len())
            .map(|j| {
                let g = self.design.col_dot(j, resid) / n - self.mu * coef[j];
                if coef[j] != 0.0 {
                    (g - self.lambda * coef[j].signum()).abs()
                } else {
                    (g.abs() - self.lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Run until the KKT residual is at most `tol` or `max_sweeps` passes have been made.
    pub fn solve(
        &self,
        init: DVector<f64>,
        max_sweeps: usize,
        tol: f64,
        mut history: Option<&mut Vec<f64>>,
    ) -> CdOutcome {
        let n = self.design.nrows();
        let p = self.design.ncols();
        let nf = n.max(1) as f64;
        let mut coef = init;
        let mut resid: Vec<f64> = (self.y - self.design.apply(&coef)).iter().copied().collect();
        let curv: Vec<f64> = (0..p).map(|j| self.design.col_norm_sq(j) / nf).collect();

        let update = |j: usize, coef: &mut DVector<f64>, resid: &mut Vec<f64>| -> f64 {
            let denom = curv[j] + self.mu;
            if denom <= 0.0 {
                // empty column with no ridge term: any value is optimal when λ = 0
                let old = coef[j];
                if old != 0.0 {
                    self.design.col_axpy(j, old, resid);
                    coef[j] = 0.0;
                }
                return 0.0;
            }
            let old = coef[j];
            let z = self.design.col_dot(j, resid) / nf + curv[j] * old;
            let new = soft_threshold(z, self.lambda) / denom;
            let delta = new - old;
            if delta != 0.0 {
                self.design.col_axpy(j, -delta, resid);
                coef[j] = new;
            }
            denom * delta.abs()
        };

        let mut sweeps = 0;
        let mut gap = f64::INFINITY;
        if let Some(h) = history.as_deref_mut() {
            h.push(self.objective(&coef, &resid));
        }
        while sweeps < max_sweeps {
            for j in 0..p {
                update(j, &mut coef, &mut resid);
            }
            sweeps += 1;
            if let Some(h) = history.as_deref_mut() {
                h.push(self.objective(&coef, &resid));
            }
            gap = self.gap(&coef, &resid);
            if gap <= tol {
                break;
            }
            // settle the current support before the next full pass
            let active: Vec<usize> = (0..p).filter(|&j| coef[j] != 0.0).collect();
            while sweeps < max_sweeps && !active.is_empty() {
                let mut max_change = 0.0_f64;
                for &j in &active {
                    max_change = max_change.max(update(j, &mut coef, &mut resid));
                }
                sweeps += 1;
                if let Some(h) = history.as_deref_mut() {
                    h.push(self.objective(&coef, &resid));
                }
                if max_change <= 0.1 * tol {
                    break;
                }
            }
        }
        if sweeps >= max_sweeps {
            gap = self.gap(&coef, &resid);
        }
        CdOutcome { coef, sweeps, gap }
    }
}
