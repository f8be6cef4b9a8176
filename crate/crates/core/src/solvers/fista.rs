//! Accelerated proximal gradient on `(1/n)Σρ(yᵢ − xᵢᵀb) + g(b)`.
//!
//! Momentum is reset whenever the objective would increase, and the rejected
//! step is replaced by a plain proximal-gradient step from the last iterate, so
//! the recorded objective sequence is nonincreasing up to rounding. Momentum is
//! also reset when it points against the latest step.

use nalgebra::DVector;

use super::kkt::{gap_from_score, support_threshold};
use super::prox::{prox_penalty, PenaltySpec};
use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::operator_norm;
use crate::losses::LossSpec;

const CHECK_EVERY: usize = 10;
/// Near the optimum, objective decreases fall below the rounding of the
/// objective itself; comparisons use this relative slack.
const ROUNDING_SLACK: f64 = 1e-13;

pub(crate) struct FistaOutcome {
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub gap: f64,
}

pub(crate) struct Fista<'a> {
    pub loss: &'a LossSpec,
    pub penalty: &'a PenaltySpec,
    pub data: &'a Dataset,
    pub support_tol: f64,
    pub opnorm_iters: usize,
    pub opnorm_tol: f64,
}

impl Fista<'_> {
    fn smooth_value(&self, xb: &DVector<f64>) -> f64 {
        let n = self.data.n().max(1) as f64;
        (&self.data.y - xb).iter().map(|&r| self.loss.rho(r)).sum::<f64>() / n
    }

    /// `Xᵀψ(y − Xb)/n`, the negative gradient of the smooth part.
    fn score(&self, xb: &DVector<f64>) -> DVector<f64> {
        let n = self.data.n().max(1) as f64;
        let psi = self.loss.psi_vec(&(&self.data.y - xb));
        self.data.x.tr_mul(&psi) / n
    }

    fn prox_step(&self, b: &DVector<f64>, xb: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        let v = b + self.score(xb) * step;
        prox_penalty(self.penalty, &v, step)
    }

    /// Gap of the prox-gradient image of `b`; returns `(candidate, gap)`.
    fn polished(&self, b: &DVector<f64>, xb: &DVector<f64>, step: f64) -> Result<(DVector<f64>, f64)> {
        let cand = self.prox_step(b, xb, step)?;
        let xc = &self.data.x * &cand;
        let gap = gap_from_score(
            &cand,
            &self.score(&xc),
            self.penalty,
            support_threshold(&cand, self.support_tol),
        )?;
        Ok((cand, gap))
    }

    pub fn solve(
        &self,
        init: DVector<f64>,
        max_iters: usize,
        tol: f64,
        mut history: Option<&mut Vec<f64>>,
    ) -> Result<FistaOutcome> {
        let n = self.data.n().max(1) as f64;
        let lip = operator_norm(&self.data.x, self.opnorm_iters, self.opnorm_tol).powi(2) / n;
        let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };

        let mut x = init;
        let mut xx = &self.data.x * &x;
        let mut f_x = self.smooth_value(&xx) + self.penalty.value(&x);
        let mut z = x.clone();
        let mut xz = xx.clone();
        let mut t = 1.0_f64;
        if let Some(h) = history.as_deref_mut() {
            h.push(f_x);
        }

        let mut gap = f64::INFINITY;
        for iter in 1..=max_iters {
            let mut x_new = self.prox_step(&z, &xz, step)?;
            let mut xx_new = &self.data.x * &x_new;
            let mut f_new = self.smooth_value(&xx_new) + self.penalty.value(&x_new);
            if f_new > f_x + ROUNDING_SLACK * (1.0 + f_x.abs()) {
                // restart from the last iterate with a plain proximal-gradient
                // step, which cannot increase the objective in exact arithmetic
                t = 1.0;
                x_new = self.prox_step(&x, &xx, step)?;
                xx_new = &self.data.x * &x_new;
                f_new = self.smooth_value(&xx_new) + self.penalty.value(&x_new);
            } else if (&z - &x_new).dot(&(&x_new - &x)) > 0.0 {
                // momentum points against the latest step
                t = 1.0;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            z = &x_new + (&x_new - &x) * momentum;
            xz = &xx_new + (&xx_new - &xx) * momentum;
            t = t_next;
            x = x_new;
            xx = xx_new;
            f_x = f_new;
            if let Some(h) = history.as_deref_mut() {
                h.push(f_x);
            }

            if iter % CHECK_EVERY == 0 || iter == max_iters {
                let (cand, cand_gap) = self.polished(&x, &xx, step)?;
                gap = cand_gap;
                if cand_gap <= tol || iter == max_iters {
                    return Ok(FistaOutcome {
                        beta: cand,
                        iterations: iter,
                        gap,
                    });
                }
            }
        }
        let (cand, cand_gap) = self.polished(&x, &xx, step)?;
        gap = gap.min(cand_gap);
        Ok(FistaOutcome {
            beta: cand,
            iterations: max_iters,
            gap,
        })
    }
}
