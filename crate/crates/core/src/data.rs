//! Datasets, ground truth, and the synthetic generators used by the simulations.
//!
//! Designs have iid `N(0, Σ)` rows, built as `X = G Σ^{1/2}` with `G` standard
//! normal. Noise is independent of the design. Every generator takes an explicit
//! RNG stream; [`replication_rng`] derives one stream per replication from a
//! master seed so serial and parallel runs draw identical data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Covariance;

/// Stream reserved for draws shared by every replication (Σ, a random β).
pub const SHARED_STREAM: u64 = u64::MAX;

/// Counter-based RNG for replication `stream` of the run seeded by `master_seed`.
pub fn replication_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// A design matrix and response, `n` rows and `p` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows vs response length",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Same design, different response.
    pub fn with_response(&self, y: DVector<f64>) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub beta: DVector<f64>,
    pub sigma_cov: Covariance,
    pub eps: DVector<f64>,
    /// `‖ε‖²/n`
    pub sigma2_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian {
        sigma: f64,
    },
    StudentT {
        dof: u32,
    },
    /// Huber's gross-error model with a scaled Gaussian as the contaminating
    /// distribution: each entry is `N(0, σ²)` with probability `1 - q` and
    /// `N(0, (outlier_scale·σ)²)` otherwise.
    Contaminated {
        sigma: f64,
        q: f64,
        outlier_scale: f64,
    },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::invalid("noise.sigma", "must be positive"))
            }
            NoiseSpec::StudentT { dof: 0 } => {
                Err(Error::invalid("noise.dof", "must be a positive integer"))
            }
            NoiseSpec::Contaminated {
                sigma,
                q,
                outlier_scale,
            } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    Err(Error::invalid("noise.sigma", "must be positive"))
                } else if !(0.0..=1.0).contains(&q) {
                    Err(Error::invalid("noise.q", "must lie in [0, 1]"))
                } else if !(outlier_scale > 0.0 && outlier_scale.is_finite()) {
                    Err(Error::invalid("noise.outlier_scale", "must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        match *self {
            NoiseSpec::Gaussian { sigma } => {
                DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
            }
            NoiseSpec::StudentT { dof } => {
                let t = StudentT::new(dof as f64).expect("validated dof");
                DVector::from_fn(n, |_, _| t.sample(rng))
            }
            NoiseSpec::Contaminated {
                sigma,
                q,
                outlier_scale,
            } => DVector::from_fn(n, |_, _| {
                let outlier = rng.random::<f64>() < q;
                let z: f64 = rng.sample(StandardNormal);
                if outlier {
                    outlier_scale * sigma * z
                } else {
                    sigma * z
                }
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceSpec {
    #[default]
    Identity,
    /// `W / (dof_multiplier · p)` with `W ~ Wishart(I_p, dof_multiplier · p)`.
    ScaledWishart {
        #[serde(default = "default_dof_multiplier")]
        dof_multiplier: usize,
    },
}

fn default_dof_multiplier() -> usize {
    5
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceSpec::ScaledWishart { dof_multiplier: 0 } => Err(Error::invalid(
                "covariance.dof_multiplier",
                "must be a positive integer",
            )),
            _ => Ok(()),
        }
    }
}

/// Draw a covariance matrix.
pub fn gen_covariance<R: Rng + ?Sized>(
    spec: CovarianceSpec,
    p: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if p == 0 {
        return Err(Error::invalid("p", "must be at least 1"));
    }
    match spec {
        CovarianceSpec::Identity => Ok(DMatrix::identity(p, p)),
        CovarianceSpec::ScaledWishart { dof_multiplier } => {
            let dof = dof_multiplier * p;
            let g = DMatrix::from_fn(dof, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut w = g.tr_mul(&g) / dof as f64;
            // gram products are symmetric up to rounding; make it exact
            for i in 0..p {
                for j in 0..i {
                    let avg = 0.5 * (w[(i, j)] + w[(j, i)]);
                    w[(i, j)] = avg;
                    w[(j, i)] = avg;
                }
            }
            Ok(w)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    /// The first `s` coordinates equal `amplitude`, the rest are zero.
    SparseFlat { s: usize, amplitude: f64 },
    /// `mat(β)` is `rows × cols` (column-major vectorization) with iid standard
    /// normal entries in its first `rank` columns and zeros elsewhere.
    LowRank {
        rows: usize,
        cols: usize,
        rank: usize,
    },
}

impl SignalSpec {
    pub fn validate(&self, p: usize) -> Result<()> {
        match *self {
            SignalSpec::SparseFlat { s, amplitude } => {
                if s > p {
                    return Err(Error::invalid("signal.s", format!("{s} exceeds p = {p}")));
                }
                if !amplitude.is_finite() {
                    return Err(Error::NonFinite("signal.amplitude"));
                }
                Ok(())
            }
            SignalSpec::LowRank { rows, cols, rank } => {
                if rows * cols != p {
                    return Err(Error::invalid(
                        "signal.rows",
                        format!("rows·cols = {} but p = {p}", rows * cols),
                    ));
                }
                if rank > rows.min(cols) {
                    return Err(Error::invalid(
                        "signal.rank",
                        format!("{rank} exceeds min(rows, cols)"),
                    ));
                }
                Ok(())
            }
        }
    }
}

pub fn gen_signal<R: Rng + ?Sized>(
    spec: SignalSpec,
    p: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    spec.validate(p)?;
    Ok(match spec {
        SignalSpec::SparseFlat { s, amplitude } => {
            DVector::from_fn(p, |j, _| if j < s { amplitude } else { 0.0 })
        }
        SignalSpec::LowRank { rows, rank, .. } => {
            DVector::from_fn(p, |j, _| {
                if j / rows < rank {
                    rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                }
            })
        }
    })
}

/// Draw `(X, y)` from the linear model `y = Xβ + ε`.
pub fn gen_dataset<R: Rng + ?Sized>(
    n: usize,
    sigma_cov: &Covariance,
    beta: &DVector<f64>,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<(Dataset, GroundTruth)> {
    noise.validate()?;
    let p = sigma_cov.dim();
    if beta.len() != p {
        return Err(Error::DimensionMismatch {
            context: "signal length vs covariance dimension",
            expected: p,
            found: beta.len(),
        });
    }
    let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = if sigma_cov.is_identity() {
        g
    } else {
        g * sigma_cov.sqrt_matrix()
    };
    let eps = noise.sample(n, rng);
    let y = &x * beta + &eps;
    let sigma2_star = if n == 0 {
        0.0
    } else {
        eps.norm_squared() / n as f64
    };
    let data = Dataset::new(x, y)?;
    Ok((
        data,
        GroundTruth {
            beta: beta.clone(),
            sigma_cov: sigma_cov.clone(),
            eps,
            sigma2_star,
        },
    ))
}

/// `‖Σ^{1/2}(β̂ − β)‖²`.
pub fn oos_error(beta_hat: &DVector<f64>, truth: &GroundTruth) -> Result<f64> {
    if beta_hat.len() != truth.beta.len() {
        return Err(Error::DimensionMismatch {
            context: "estimate vs true signal",
            expected: truth.beta.len(),
            found: beta_hat.len(),
        });
    }
    truth.sigma_cov.quad_form(&(beta_hat - &truth.beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth_with(cov: Covariance, beta: Vec<f64>) -> GroundTruth {
        GroundTruth {
            beta: DVector::from_vec(beta),
            sigma_cov: cov,
            eps: DVector::zeros(0),
            sigma2_star: 0.0,
        }
    }

    #[test]
    fn identity_covariance_is_exact() {
        let mut rng = replication_rng(1, 0);
        let s = gen_covariance(CovarianceSpec::Identity, 3, &mut rng).unwrap();
        assert_eq!(s, DMatrix::identity(3, 3));
    }

    #[test]
    fn wishart_draw_is_spd_and_symmetric() {
        let mut rng = replication_rng(7, 0);
        let s = gen_covariance(
            CovarianceSpec::ScaledWishart { dof_multiplier: 5 },
            50,
            &mut rng,
        )
        .unwrap();
        assert_eq!(s, s.transpose());
        let eig = s.clone().symmetric_eigen();
        assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn wishart_diagonal_mean_is_one() {
        // E[W/(5p)]_ii = 1 and Var = 2/(5p) per entry; average over p entries
        // and 40 seeds.
        let p = 50;
        let reps = 40;
        let means: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = replication_rng(11, r);
                let s = gen_covariance(CovarianceSpec::ScaledWishart { dof_multiplier: 5 }, p, &mut rng)
                    .unwrap();
                s.diagonal().mean()
            })
            .collect();
        let mean = means.iter().sum::<f64>() / reps as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn zero_signal_response_is_noise() {
        let cov = Covariance::identity(2);
        let mut rng = replication_rng(3, 0);
        let (data, truth) = gen_dataset(
            50,
            &cov,
            &DVector::zeros(2),
            NoiseSpec::Gaussian { sigma: 1.0 },
            &mut rng,
        )
        .unwrap();
        assert_eq!(&data.y - &truth.eps, DVector::zeros(50));
        let s2 = truth.eps.norm_squared() / 50.0;
        assert_eq!(truth.sigma2_star, s2);
    }

    #[test]
    fn sample_covariance_converges() {
        let cov = Covariance::identity(2);
        let mut rng = replication_rng(5, 0);
        let (data, _) = gen_dataset(
            1000,
            &cov,
            &DVector::zeros(2),
            NoiseSpec::Gaussian { sigma: 1.0 },
            &mut rng,
        )
        .unwrap();
        let s = data.x.tr_mul(&data.x) / 1000.0;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s[(i, j)] - target).abs() < 0.15);
            }
        }
    }

    #[test]
    fn full_size_huber_setup_has_hundred_nonzeros() {
        let p = 1000;
        let spec = SignalSpec::SparseFlat {
            s: 100,
            amplitude: 10.0 / (p as f64).sqrt(),
        };
        let mut rng = replication_rng(0, 0);
        let beta = gen_signal(spec, p, &mut rng).unwrap();
        let (data, truth) = gen_dataset(
            1001,
            &Covariance::identity(p),
            &beta,
            NoiseSpec::StudentT { dof: 2 },
            &mut rng,
        )
        .unwrap();
        assert_eq!(beta.iter().filter(|b| **b != 0.0).count(), 100);
        assert_eq!((data.n(), data.p()), (1001, 1000));
        assert!(truth.eps.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn low_rank_signal_has_requested_rank() {
        let spec = SignalSpec::LowRank {
            rows: 20,
            cols: 25,
            rank: 3,
        };
        let mut rng = replication_rng(2, 0);
        let beta = gen_signal(spec, 500, &mut rng).unwrap();
        let m = DMatrix::from_column_slice(20, 25, beta.as_slice());
        let sv = m.singular_values();
        assert_eq!(sv.iter().filter(|s| **s > 1e-10).count(), 3);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cov = Covariance::identity(4);
        let beta = DVector::from_element(4, 0.5);
        let draw = || {
            let mut rng = replication_rng(99, 3);
            gen_dataset(20, &cov, &beta, NoiseSpec::StudentT { dof: 2 }, &mut rng).unwrap().0
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn oos_error_examples() {
        let t = truth_with(Covariance::identity(2), vec![1.0, 2.0]);
        assert_eq!(oos_error(&DVector::from_vec(vec![1.0, 2.0]), &t).unwrap(), 0.0);
        assert_eq!(oos_error(&DVector::from_vec(vec![2.0, 2.0]), &t).unwrap(), 1.0);
        let t2 = truth_with(
            Covariance::new(DMatrix::identity(2, 2) * 2.0).unwrap(),
            vec![0.0, 0.0],
        );
        assert_eq!(oos_error(&DVector::from_vec(vec![1.0, 1.0]), &t2).unwrap(), 4.0);
        assert!(matches!(
            oos_error(&DVector::zeros(3), &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(NoiseSpec::StudentT { dof: 0 }.validate().is_err());
        assert!(NoiseSpec::Contaminated {
            sigma: 1.0,
            q: 1.5,
            outlier_scale: 10.0
        }
        .validate()
        .is_err());
    }
}
