//! The two multiplicative factors of the risk estimate: `df̂ = tr[∂(Xβ̂)/∂y]`
//! and `tr[∂ψ̂/∂y]`.
//!
//! Closed forms cover the ℓ1 and Elastic-Net penalties (with any loss), where
//! the Jacobians only involve the active columns `X_Ŝ` and `D = diag(ψ'(y − Xβ̂))`:
//!
//! ```text
//! ∂(Xβ̂)/∂y = X_Ŝ (X_ŜᵀDX_Ŝ + nμI)⁻¹ X_ŜᵀD
//! ∂ψ̂/∂y    = D − D X_Ŝ (X_ŜᵀDX_Ŝ + nμI)⁻¹ X_ŜᵀD
//! ```
//!
//! Any other penalty goes through the Monte Carlo divergence
//! `(1/m) Σₖ a⁻¹ zₖᵀ[F(y + a zₖ) − F(y)]`, refitting at each perturbed response
//! from a warm start. [`fd_jacobian`] is the central-difference oracle used in tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::solvers::{fit, fit_warm, FitResult, PenaltySpec, SolverConfig};

/// Perturbation size used for the nuclear-norm simulations.
pub const DEFAULT_MC_STEP: f64 = 0.01;
pub const DEFAULT_MC_SAMPLES: usize = 100;
/// KKT tolerance for refits at perturbed responses.
pub const PERTURBED_KKT_TOL: f64 = 1e-10;
/// Relative singular-value cutoff for the μ = 0 pseudo-inverse.
const PINV_RELATIVE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorMethod {
    ClosedForm,
    MonteCarlo { a: f64, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobianFactors {
    pub df_hat: f64,
    pub trace_dpsi: f64,
    pub method: FactorMethod,
    /// Monte Carlo standard error of `df_hat`.
    pub df_std_err: Option<f64>,
    /// Monte Carlo standard error of `trace_dpsi`.
    pub trace_std_err: Option<f64>,
}

impl JacobianFactors {
    fn closed(df_hat: f64, trace_dpsi: f64) -> Self {
        JacobianFactors {
            df_hat,
            trace_dpsi,
            method: FactorMethod::ClosedForm,
            df_std_err: None,
            trace_std_err: None,
        }
    }
}

/// Closed-form factors for a converged fit.
///
/// Square or Huber loss with ℓ1 give integer counts (`|Ŝ|` and `n − |Ŝ|` or
/// `|Î| − |Ŝ|`); OLS with `p < n` gives `(p, n − p)`. Elastic-Net and ℓ1 with
/// smoothed losses use the matrix formulas. Nuclear-norm fits have no closed form.
pub fn closed_form_factors(
    fit: &FitResult,
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
) -> Result<JacobianFactors> {
    check_fit(fit, data)?;
    let n = data.n();
    let s = fit.n_active() as f64;
    match (loss, penalty) {
        (LossSpec::Square, PenaltySpec::None) => {
            if data.p() < n {
                Ok(JacobianFactors::closed(data.p() as f64, (n - data.p()) as f64))
            } else {
                Err(Error::NoClosedForm(
                    "unpenalized least squares with p ≥ n".into(),
                ))
            }
        }
        (LossSpec::Square, PenaltySpec::L1 { .. })
        | (LossSpec::Square, PenaltySpec::ElasticNet { mu: 0.0, .. }) => {
            Ok(JacobianFactors::closed(s, n as f64 - s))
        }
        (LossSpec::Huber { .. }, PenaltySpec::L1 { .. })
        | (LossSpec::Huber { .. }, PenaltySpec::ElasticNet { mu: 0.0, .. }) => {
            Ok(JacobianFactors::closed(s, fit.n_inliers() as f64 - s))
        }
        (_, PenaltySpec::Nuclear { .. }) => Err(Error::NoClosedForm(format!(
            "{} loss with nuclear-norm penalty",
            loss.name()
        ))),
        (_, PenaltySpec::None | PenaltySpec::L1 { .. } | PenaltySpec::ElasticNet { .. }) => {
            let mu = penalty.separable().map(|(_, mu)| mu).unwrap_or(0.0);
            let columns = match penalty {
                PenaltySpec::None => (0..data.p()).collect(),
                _ => fit.active_set.clone(),
            };
            let traces = ActiveSetSystem::new(fit, data, &columns, mu)?.traces();
            Ok(JacobianFactors::closed(traces.0, traces.1))
        }
    }
}

/// Full Jacobian matrices `(∂(Xβ̂)/∂y, ∂ψ̂/∂y)` from the active-set formulas.
/// Valid for separable penalties; `μ` is taken from the penalty.
pub fn closed_form_jacobians(
    fit: &FitResult,
    penalty: &PenaltySpec,
    data: &Dataset,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_fit(fit, data)?;
    let (columns, mu) = match penalty {
        PenaltySpec::None => ((0..data.p()).collect::<Vec<_>>(), 0.0),
        PenaltySpec::L1 { .. } => (fit.active_set.clone(), 0.0),
        PenaltySpec::ElasticNet { mu, .. } => (fit.active_set.clone(), *mu),
        PenaltySpec::Nuclear { .. } => {
            return Err(Error::NoClosedForm("nuclear-norm penalty".into()))
        }
    };
    Ok(ActiveSetSystem::new(fit, data, &columns, mu)?.jacobians())
}

fn check_fit(fit: &FitResult, data: &Dataset) -> Result<()> {
    if fit.beta_hat.len() != data.p() || fit.psi_prime_hat.len() != data.n() {
        return Err(Error::DimensionMismatch {
            context: "fit vs dataset",
            expected: data.p(),
            found: fit.beta_hat.len(),
        });
    }
    Ok(())
}

/// `X_Ŝ`, `D` and the inverse of `X_ŜᵀDX_Ŝ + nμI`.
struct ActiveSetSystem {
    xs: DMatrix<f64>,
    d: DVector<f64>,
    inv: DMatrix<f64>,
}

impl ActiveSetSystem {
    fn new(fit: &FitResult, data: &Dataset, columns: &[usize], mu: f64) -> Result<Self> {
        let n = data.n();
        let xs = data.x.select_columns(columns.iter());
        let d = fit.psi_prime_hat.clone();
        let mut dxs = xs.clone();
        for (i, &di) in d.iter().enumerate() {
            dxs.row_mut(i).scale_mut(di);
        }
        let mut m = xs.tr_mul(&dxs);
        let k = columns.len();
        if k == 0 {
            return Ok(ActiveSetSystem {
                xs,
                d,
                inv: DMatrix::zeros(0, 0),
            });
        }
        let inv = if mu > 0.0 {
            for j in 0..k {
                m[(j, j)] += n as f64 * mu;
            }
            m.cholesky()
                .ok_or_else(|| Error::NonPositiveDefinite {
                    min_eigenvalue: f64::NAN,
                    max_eigenvalue: f64::NAN,
                })?
                .inverse()
        } else {
            let smax = m.clone().singular_values().max();
            m.pseudo_inverse(PINV_RELATIVE_CUTOFF * smax.max(f64::MIN_POSITIVE))
                .map_err(|e| Error::SvdFailure(e.to_string()))?
        };
        Ok(ActiveSetSystem { xs, d, inv })
    }

    /// `(df̂, tr[∂ψ̂/∂y])` without forming n × n matrices.
    fn traces(&self) -> (f64, f64) {
        let trace_d = self.d.sum();
        if self.inv.is_empty() {
            return (0.0, trace_d);
        }
        let mut dxs = self.xs.clone();
        let mut d2xs = self.xs.clone();
        for (i, &di) in self.d.iter().enumerate() {
            dxs.row_mut(i).scale_mut(di);
            d2xs.row_mut(i).scale_mut(di * di);
        }
        let a = self.xs.tr_mul(&dxs);
        let b = self.xs.tr_mul(&d2xs);
        // tr(M⁻¹A) = Σ (M⁻¹)ᵢⱼ Aⱼᵢ
        let df = self.inv.component_mul(&a.transpose()).sum();
        let quad = self.inv.component_mul(&b.transpose()).sum();
        (df, trace_d - quad)
    }

    fn jacobians(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.d.len();
        let dmat = DMatrix::from_diagonal(&self.d);
        if self.inv.is_empty() {
            return (DMatrix::zeros(n, n), dmat);
        }
        let mut xtd = self.xs.transpose();
        for (i, &di) in self.d.iter().enumerate() {
            xtd.column_mut(i).scale_mut(di);
        }
        let dfit = &self.xs * &self.inv * &xtd;
        let dpsi = &dmat - &dmat * &dfit;
        (dfit, dpsi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    pub estimate: f64,
    /// Standard error of the mean of the `m` terms; NaN when `m = 1`.
    pub std_err: f64,
}

/// Monte Carlo estimate of `tr[∂F/∂y]` at `y`.
///
/// The `m` perturbations are drawn up front from `rng`, then the field calls run
/// in parallel; the result depends only on the RNG state.
pub fn mc_divergence<F, R>(field: F, y: &DVector<f64>, a: f64, m: usize, rng: &mut R) -> Result<DivergenceEstimate>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
    R: Rng + ?Sized,
{
    let terms = divergence_terms(|y| field(y).map(|v| vec![v]), y, a, m, 1, rng)?;
    Ok(summarize(&terms[0]))
}

/// Per-sample divergence terms for a field with several outputs sharing each perturbation.
fn divergence_terms<F, R>(
    field: F,
    y: &DVector<f64>,
    a: f64,
    m: usize,
    outputs: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&DVector<f64>) -> Result<Vec<DVector<f64>>> + Sync,
    R: Rng + ?Sized,
{
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid("a", "perturbation size must be positive"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "need at least one Monte Carlo sample"));
    }
    let n = y.len();
    let directions: Vec<DVector<f64>> = (0..m)
        .map(|_| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let base = field(y)?;
    check_outputs(&base, outputs, n)?;
    let per_sample: Vec<Vec<f64>> = directions
        .par_iter()
        .map(|z| {
            let out = field(&(y + z * a))?;
            check_outputs(&out, outputs, n)?;
            Ok(out
                .iter()
                .zip(&base)
                .map(|(f, f0)| z.dot(&(f - f0)) / a)
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..outputs)
        .map(|k| per_sample.iter().map(|s| s[k]).collect())
        .collect())
}

fn check_outputs(out: &[DVector<f64>], outputs: usize, n: usize) -> Result<()> {
    if out.len() != outputs || out.iter().any(|v| v.len() != n) {
        return Err(Error::FieldEvaluation(format!(
            "field must return {outputs} vector(s) of length {n}"
        )));
    }
    Ok(())
}

fn summarize(terms: &[f64]) -> DivergenceEstimate {
    let m = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / m;
    let std_err = if terms.len() > 1 {
        let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        f64::NAN
    };
    DivergenceEstimate {
        estimate: mean,
        std_err,
    }
}

/// Which output of a refit a response map returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOutput {
    /// `y ↦ Xβ̂(y)`
    Fitted,
    /// `y ↦ ψ̂(y)`
    Score,
}

/// Refit at a new response and return `[Xβ̂, ψ̂]`. Fails if the refit misses
/// the base KKT tolerance.
fn refit_outputs(
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    cfg: &SolverConfig,
    warm: Option<&DVector<f64>>,
    y: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let perturbed = data.with_response(y.clone());
    let tight = cfg.with_kkt_tol(cfg.kkt_tol.min(PERTURBED_KKT_TOL));
    let f = fit_warm(loss, penalty, &perturbed, &tight, warm)
        .map_err(|e| Error::FieldEvaluation(e.to_string()))?;
    if f.kkt_gap > cfg.kkt_tol {
        return Err(Error::FieldEvaluation(format!(
            "refit at perturbed response stopped with KKT gap {:e}",
            f.kkt_gap
        )));
    }
    Ok(vec![f.fitted(&perturbed), f.psi_hat])
}

/// The map `y ↦ Xβ̂(y)` or `y ↦ ψ̂(y)` for a fixed design, refitting from `warm`.
pub fn response_map<'a>(
    loss: &'a LossSpec,
    penalty: &'a PenaltySpec,
    data: &'a Dataset,
    cfg: &'a SolverConfig,
    warm: Option<&'a DVector<f64>>,
    output: FieldOutput,
) -> impl Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync + 'a {
    move |y| {
        let mut outs = refit_outputs(loss, penalty, data, cfg, warm, y)?;
        Ok(match output {
            FieldOutput::Fitted => outs.swap_remove(0),
            FieldOutput::Score => outs.swap_remove(1),
        })
    }
}

/// Monte Carlo factors, fitting the base estimator first.
pub fn mc_factors<R: Rng + ?Sized>(
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    cfg: &SolverConfig,
    a: f64,
    m: usize,
    rng: &mut R,
) -> Result<JacobianFactors> {
    let base = fit(loss, penalty, data, cfg)?.ensure_converged()?;
    mc_factors_for_fit(&base, loss, penalty, data, cfg, a, m, rng)
}

/// Monte Carlo factors around an existing converged fit. Both divergences
/// share the same perturbations, one refit per sample.
#[allow(clippy::too_many_arguments)]
pub fn mc_factors_for_fit<R: Rng + ?Sized>(
    base: &FitResult,
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    cfg: &SolverConfig,
    a: f64,
    m: usize,
    rng: &mut R,
) -> Result<JacobianFactors> {
    check_fit(base, data)?;
    if !base.converged {
        return Err(Error::NotConverged {
            kkt_gap: base.kkt_gap,
            iterations: base.iterations,
        });
    }
    let warm = &base.beta_hat;
    let terms = divergence_terms(
        |y| refit_outputs(loss, penalty, data, cfg, Some(warm), y),
        &data.y,
        a,
        m,
        2,
        rng,
    )?;
    let df = summarize(&terms[0]);
    let tr = summarize(&terms[1]);
    Ok(JacobianFactors {
        df_hat: df.estimate,
        trace_dpsi: tr.estimate,
        method: FactorMethod::MonteCarlo { a, m },
        df_std_err: Some(df.std_err),
        trace_std_err: Some(tr.std_err),
    })
}

/// Central-difference Jacobian of `field` at `y`; column `l` is
/// `[F(y + h eₗ) − F(y − h eₗ)] / (2h)`.
pub fn fd_jacobian<F>(field: F, y: &DVector<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "step must be positive"));
    }
    let n = y.len();
    let columns: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let mut up = y.clone();
            up[l] += h;
            let mut down = y.clone();
            down[l] -= h;
            let (fu, fd) = (field(&up)?, field(&down)?);
            if fu.len() != n || fd.len() != n {
                return Err(Error::FieldEvaluation(format!(
                    "field output has length {} instead of {n}",
                    fu.len()
                )));
            }
            Ok((fu - fd) / (2.0 * h))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&columns))
}

/// Default finite-difference step `1e-5·(1 + ‖y‖∞)`.
pub fn default_fd_step(y: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + y.amax())
}
