//! Replicated simulation studies.
//!
//! Each replication draws its own dataset from the RNG stream `(master_seed, rep)`
//! and then walks the tuning grid, warm-starting each fit from the previous
//! grid point. The covariance and any random signal are drawn once from a
//! shared stream, so every replication estimates the same target. Replications
//! run in parallel and rows are sorted by `(rep, grid index)`, which makes the
//! output independent of the thread count.
//!
//! A grid point that fails (solver error, no convergence, zero factor) still
//! yields a row, flagged `degenerate`, with the failure logged as a warning.

mod config;
mod model;

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{geometric, ExperimentConfig, ExperimentKind, GridPoint, JacobianSpec};
pub use model::{estimate_model, fit_model, EstimateOutput, FitSummary, ModelConfig};

use crate::data::{gen_covariance, gen_dataset, gen_signal, oos_error, replication_rng, Dataset, GroundTruth, SHARED_STREAM};
use crate::error::{Error, Result};
use crate::estimators::{hat_r, square_loss_estimates, RiskReport};
use crate::jacobians::{closed_form_factors, mc_factors_for_fit, JacobianFactors};
use crate::linalg::Covariance;
use crate::losses::LossSpec;
use crate::solvers::{fit_warm, FitResult, PenaltySpec, SolverConfig};

pub const THREADS_ENV: &str = "HDRISK_THREADS";

pub const CSV_HEADER: [&str; 15] = [
    "rep",
    "lambda",
    "lambda_star",
    "oos_error",
    "r_hat",
    "tau2_hat",
    "sigma2_hat",
    "sigma2_star",
    "df_hat",
    "trace_dpsi",
    "n_active",
    "n_inliers",
    "kkt_gap",
    "degenerate",
    "wall_ms",
];

/// One `(rep, grid point)` outcome. Optional fields are empty in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub rep: usize,
    pub lambda: f64,
    pub lambda_star: Option<f64>,
    pub oos_error: f64,
    pub r_hat: f64,
    pub tau2_hat: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub sigma2_star: f64,
    pub df_hat: f64,
    pub trace_dpsi: f64,
    pub n_active: usize,
    pub n_inliers: usize,
    pub kkt_gap: f64,
    pub degenerate: bool,
    pub wall_ms: u64,
    #[serde(skip)]
    pub grid_index: usize,
}

impl ResultRow {
    /// `|1 − R̂/oos_error|`
    pub fn relative_error(&self) -> f64 {
        (1.0 - self.r_hat / self.oos_error).abs()
    }

    /// `(|Î| − |Ŝ|)/n`, the Huber Lasso multiplicative factor.
    pub fn inlier_factor(&self, n: usize) -> f64 {
        (self.n_inliers as f64 - self.n_active as f64) / n as f64
    }
}

/// Thread count: explicit value, then `HDRISK_THREADS`, then rayon's default.
pub fn resolve_threads(explicit: Option<usize>) -> Result<Option<usize>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::config(THREADS_ENV, format!("`{v}` is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Draw the quantities shared by all replications.
fn shared_draws(cfg: &ExperimentConfig) -> Result<(Covariance, DVector<f64>)> {
    let mut rng = replication_rng(cfg.master_seed, SHARED_STREAM);
    let sigma = match cfg.covariance {
        crate::data::CovarianceSpec::Identity => Covariance::identity(cfg.p),
        spec => Covariance::new(gen_covariance(spec, cfg.p, &mut rng)?)?,
    };
    let beta = gen_signal(cfg.signal, cfg.p, &mut rng)?;
    Ok((sigma, beta))
}

/// Run every replication and return rows sorted by `(rep, grid index)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let threads = resolve_threads(cfg.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let (sigma, beta) = shared_draws(cfg)?;
    let grid = cfg.grid();
    let mut rows: Vec<ResultRow> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_replication(cfg, &grid, &sigma, &beta, rep))
            .collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    rows.sort_by_key(|r| (r.rep, r.grid_index));
    Ok(rows)
}

fn run_replication(
    cfg: &ExperimentConfig,
    grid: &[GridPoint],
    sigma: &Covariance,
    beta: &DVector<f64>,
    rep: usize,
) -> Result<Vec<ResultRow>> {
    let mut rng = replication_rng(cfg.master_seed, rep as u64);
    let (data, truth) = gen_dataset(cfg.n, sigma, beta, cfg.noise, &mut rng)?;
    let mut warm: Option<DVector<f64>> = None;
    let mut rows = Vec::with_capacity(grid.len());
    for (grid_index, point) in grid.iter().enumerate() {
        let started = Instant::now();
        let loss = cfg.loss_at(point);
        let penalty = cfg.penalty_at(point);
        let outcome = evaluate_point(cfg, &loss, &penalty, &data, &truth, warm.as_ref(), &mut rng);
        let wall_ms = if cfg.record_wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        let row = match outcome {
            Ok((fit, factors, report)) => {
                let oos = oos_error(&fit.beta_hat, &truth)?;
                if !fit.converged {
                    log::warn!(
                        "rep {rep}, λ = {:e}: stopped with KKT gap {:e}",
                        point.lambda,
                        fit.kkt_gap
                    );
                }
                let row = ResultRow {
                    rep,
                    lambda: point.lambda,
                    lambda_star: point.lambda_star,
                    oos_error: oos,
                    r_hat: report.as_ref().map_or(f64::NAN, |r| r.r_hat),
                    tau2_hat: report.as_ref().and_then(|r| r.tau2_hat),
                    sigma2_hat: report.as_ref().and_then(|r| r.sigma2_hat),
                    sigma2_star: truth.sigma2_star,
                    df_hat: factors.df_hat,
                    trace_dpsi: factors.trace_dpsi,
                    n_active: fit.n_active(),
                    n_inliers: fit.n_inliers(),
                    kkt_gap: fit.kkt_gap,
                    degenerate: !fit.converged || report.as_ref().is_none_or(|r| r.degenerate),
                    wall_ms,
                    grid_index,
                };
                warm = Some(fit.beta_hat);
                row
            }
            Err(e) => {
                log::warn!("rep {rep}, λ = {:e}: {e}", point.lambda);
                failed_row(rep, grid_index, point, &truth, wall_ms)
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

type PointOutcome = (FitResult, JacobianFactors, Option<RiskReport>);

fn evaluate_point<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    loss: &LossSpec,
    penalty: &PenaltySpec,
    data: &Dataset,
    truth: &GroundTruth,
    warm: Option<&DVector<f64>>,
    rng: &mut R,
) -> Result<PointOutcome> {
    let solver: &SolverConfig = &cfg.solver;
    let fit = fit_warm(loss, penalty, data, solver, warm)?;
    let factors = match cfg.jacobian {
        JacobianSpec::ClosedForm => closed_form_factors(&fit, loss, penalty, data)?,
        JacobianSpec::MonteCarlo { a, m } => {
            mc_factors_for_fit(&fit, loss, penalty, data, solver, a, m, rng)?
        }
    };
    let report = match loss {
        LossSpec::Square => square_loss_estimates(&fit, data, &truth.sigma_cov, &factors),
        _ => hat_r(&fit, data, &truth.sigma_cov, &factors),
    };
    let report = match report {
        Ok(r) => Some(r),
        Err(Error::DegenerateFactor(msg)) => {
            log::warn!("degenerate factor at λ = {:e}: {msg}", penalty_lambda(penalty));
            None
        }
        Err(e) => return Err(e),
    };
    Ok((fit, factors, report))
}

fn penalty_lambda(penalty: &PenaltySpec) -> f64 {
    match *penalty {
        PenaltySpec::None => 0.0,
        PenaltySpec::L1 { lambda } | PenaltySpec::ElasticNet { lambda, .. } | PenaltySpec::Nuclear { lambda, .. } => {
            lambda
        }
    }
}

fn failed_row(rep: usize, grid_index: usize, point: &GridPoint, truth: &GroundTruth, wall_ms: u64) -> ResultRow {
    ResultRow {
        rep,
        lambda: point.lambda,
        lambda_star: point.lambda_star,
        oos_error: f64::NAN,
        r_hat: f64::NAN,
        tau2_hat: None,
        sigma2_hat: None,
        sigma2_star: truth.sigma2_star,
        df_hat: f64::NAN,
        trace_dpsi: f64::NAN,
        n_active: 0,
        n_inliers: 0,
        kkt_gap: f64::NAN,
        degenerate: true,
        wall_ms,
        grid_index,
    }
}

/// Write rows as CSV with the fixed header and LF line endings.
pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Median of the finite entries; NaN when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
