use hdrisk::data::{gen_dataset, replication_rng, Dataset, NoiseSpec};
use hdrisk::linalg::Covariance;
use hdrisk::losses::LossSpec;
use hdrisk::solvers::{augment_huber, fit, fit_warm, kkt_gap, Algorithm, PenaltySpec, SolverConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn gaussian_instance(seed: u64, n: usize, p: usize, noise: NoiseSpec) -> Dataset {
    let mut rng = replication_rng(seed, 0);
    let beta = DVector::from_fn(p, |j, _| if j < 5 { 1.0 } else { 0.0 });
    gen_dataset(n, &Covariance::identity(p), &beta, noise, &mut rng).unwrap().0
}

fn tight() -> SolverConfig {
    SolverConfig::default().with_kkt_tol(1e-12)
}

#[test]
fn scaled_design_rescales_the_estimate() {
    // With X* = X/√c, λ* = λ/√c and μ* = μ/c, the fit on X* is √c times the fit on X.
    let c: f64 = 4.0;
    let data = gaussian_instance(1, 50, 70, NoiseSpec::Gaussian { sigma: 1.0 });
    let scaled = Dataset::new(&data.x / c.sqrt(), data.y.clone()).unwrap();
    let cases = [
        (PenaltySpec::L1 { lambda: 0.1 }, PenaltySpec::L1 { lambda: 0.1 / c.sqrt() }),
        (
            PenaltySpec::ElasticNet { lambda: 0.1, mu: 0.4 },
            PenaltySpec::ElasticNet {
                lambda: 0.1 / c.sqrt(),
                mu: 0.4 / c,
            },
        ),
    ];
    for loss in [LossSpec::Square, LossSpec::Huber { scale: 1.0 }] {
        for (pen, pen_star) in &cases {
            let b = fit(&loss, pen, &data, &tight()).unwrap().ensure_converged().unwrap();
            let b_star = fit(&loss, pen_star, &scaled, &tight()).unwrap().ensure_converged().unwrap();
            let diff = (&b_star.beta_hat - &b.beta_hat * c.sqrt()).amax();
            assert!(diff < 1e-7, "{} {}: {diff}", loss.name(), pen.name());
            assert_eq!(b.active_set, b_star.active_set);
        }
    }
}

#[test]
fn huge_huber_scale_is_the_lasso() {
    let data = gaussian_instance(2, 60, 80, NoiseSpec::Gaussian { sigma: 1.0 });
    let pen = PenaltySpec::L1 { lambda: 0.1 };
    let lasso = fit(&LossSpec::Square, &pen, &data, &tight()).unwrap();
    let huber_loss = LossSpec::huber_lasso(data.n(), 1e6);
    let huber = fit(&huber_loss, &pen, &data, &tight()).unwrap();
    assert_eq!(huber.algorithm, Algorithm::AugmentedLasso);
    assert_eq!(huber.n_inliers(), data.n());
    assert!((&lasso.beta_hat - &huber.beta_hat).amax() < 1e-8);
}

#[test]
fn moving_an_outlier_further_out_changes_nothing() {
    let data = gaussian_instance(3, 60, 40, NoiseSpec::Gaussian { sigma: 1.0 });
    let loss = LossSpec::Huber { scale: 1.0 };
    let pen = PenaltySpec::L1 { lambda: 0.05 };
    let base = fit(&loss, &pen, &data, &tight()).unwrap();
    let outlier = (0..data.n()).find(|i| !base.inlier_set.contains(i)).expect("some outlier");
    let resid = data.y[outlier] - (data.x.row(outlier) * &base.beta_hat)[0];
    let mut y = data.y.clone();
    y[outlier] += 100.0 * resid.signum();
    let moved = fit(&loss, &pen, &data.with_response(y), &tight()).unwrap();
    assert_eq!(moved.inlier_set, base.inlier_set);
    assert!((&moved.beta_hat - &base.beta_hat).amax() < 1e-8);
}

#[test]
fn augmented_back_map_recovers_huber_quantities() {
    let data = gaussian_instance(4, 40, 30, NoiseSpec::StudentT { dof: 2 });
    let (lambda, lambda_star) = (0.05, 0.1);
    let loss = LossSpec::huber_lasso(data.n(), lambda_star);
    let pen = PenaltySpec::L1 { lambda };
    let f = fit(&loss, &pen, &data, &tight()).unwrap();
    let aug = augment_huber(&data, lambda, lambda_star).unwrap();
    let theta = f.theta_hat.clone().expect("augmented route keeps θ̂");
    let parts = aug.back_map(&aug.stack(&f.beta_hat, &theta)).unwrap();
    assert!((&parts.psi_hat - &f.psi_hat).amax() < 1e-9);
    assert_eq!(parts.inliers, f.inlier_set);
    assert!((aug.huber_scale() - loss.scale().unwrap()).abs() < 1e-12);
    // materialized design agrees with the implicit one
    let full = aug.design_matrix();
    assert_eq!(full.ncols(), data.p() + data.n());
    let coef = aug.stack(&f.beta_hat, &theta);
    let resid = &data.y - &full * &coef;
    assert!((&resid - &parts.psi_hat).amax() < 1e-9);
}

#[test]
fn warm_start_reaches_the_same_solution() {
    let data = gaussian_instance(5, 50, 60, NoiseSpec::Gaussian { sigma: 1.0 });
    for (loss, pen) in [
        (LossSpec::Square, PenaltySpec::ElasticNet { lambda: 0.1, mu: 0.5 }),
        (LossSpec::SmoothHuber0 { scale: 1.0 }, PenaltySpec::ElasticNet { lambda: 0.1, mu: 0.5 }),
    ] {
        let cold = fit(&loss, &pen, &data, &tight()).unwrap();
        let init = DVector::from_element(60, 0.3);
        let warm = fit_warm(&loss, &pen, &data, &tight(), Some(&init)).unwrap();
        assert!((&cold.beta_hat - &warm.beta_hat).amax() < 1e-9);
    }
}

#[test]
fn unsupported_requests_are_rejected() {
    let data = gaussian_instance(6, 20, 10, NoiseSpec::Gaussian { sigma: 1.0 });
    let cd = SolverConfig::default().with_algorithm(Algorithm::CoordinateDescent);
    let err = fit(&LossSpec::Huber { scale: 1.0 }, &PenaltySpec::L1 { lambda: 0.1 }, &data, &cd).unwrap_err();
    assert!(matches!(err, hdrisk::Error::UnsupportedPair(_)));
    let bad_shape = PenaltySpec::Nuclear {
        lambda: 0.1,
        rows: 3,
        cols: 4,
    };
    assert!(fit(&LossSpec::Square, &bad_shape, &data, &SolverConfig::default()).is_err());
    let short = DVector::zeros(3);
    assert!(fit_warm(&LossSpec::Square, &PenaltySpec::None, &data, &SolverConfig::default(), Some(&short)).is_err());
}

#[test]
fn non_convergence_is_reported() {
    let data = gaussian_instance(7, 50, 60, NoiseSpec::Gaussian { sigma: 1.0 });
    let mut cfg = SolverConfig::default().with_algorithm(Algorithm::Fista);
    cfg.max_iters = 2;
    cfg.kkt_tol = 1e-14;
    let f = fit(&LossSpec::SmoothHuber1 { scale: 0.5 }, &PenaltySpec::L1 { lambda: 0.01 }, &data, &cfg).unwrap();
    assert!(!f.converged);
    assert!(matches!(f.ensure_converged(), Err(hdrisk::Error::NotConverged { .. })));
}

#[test]
fn nuclear_fit_is_low_rank_and_certified() {
    let (rows, cols) = (6, 5);
    let mut rng = replication_rng(8, 0);
    let u = DMatrix::from_fn(rows, 1, |i, _| 1.0 + i as f64 * 0.2);
    let v = DMatrix::from_fn(1, cols, |_, j| 1.0 - j as f64 * 0.3);
    let beta = DVector::from_column_slice((u * v).as_slice());
    let (data, _) = gen_dataset(80, &Covariance::identity(30), &beta, NoiseSpec::Gaussian { sigma: 0.5 }, &mut rng).unwrap();
    let pen = PenaltySpec::Nuclear { lambda: 0.1, rows, cols };
    let f = fit(&LossSpec::Square, &pen, &data, &tight()).unwrap();
    assert!(f.converged, "gap {}", f.kkt_gap);
    let mat = DMatrix::from_column_slice(rows, cols, f.beta_hat.as_slice());
    let sv = mat.singular_values();
    let rank = sv.iter().filter(|s| **s > 1e-8 * sv.max()).count();
    assert!(rank < 5, "rank {rank}, singular values {sv}");
    assert!((kkt_gap(&f, &LossSpec::Square, &pen, &data).unwrap() - f.kkt_gap).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_fit_is_certified(seed in 0u64..10_000, pair in 0usize..6, lambda in 0.02f64..0.5, mu in 0.05f64..2.0) {
        let data = gaussian_instance(seed, 30, 40, NoiseSpec::StudentT { dof: 3 });
        let (loss, pen) = match pair {
            0 => (LossSpec::Square, PenaltySpec::L1 { lambda }),
            1 => (LossSpec::Square, PenaltySpec::ElasticNet { lambda, mu }),
            2 => (LossSpec::Huber { scale: 1.0 }, PenaltySpec::L1 { lambda }),
            3 => (LossSpec::SmoothHuber0 { scale: 0.8 }, PenaltySpec::ElasticNet { lambda, mu }),
            4 => (LossSpec::SmoothHuber1 { scale: 1.2 }, PenaltySpec::L1 { lambda }),
            _ => (LossSpec::Square, PenaltySpec::Nuclear { lambda, rows: 8, cols: 5 }),
        };
        let cfg = SolverConfig::default();
        let f = fit(&loss, &pen, &data, &cfg).unwrap();
        prop_assert!(f.converged && f.kkt_gap <= cfg.kkt_tol, "gap {}", f.kkt_gap);
        // the objective at the solution beats small perturbations of it
        let n = data.n() as f64;
        let obj = |b: &DVector<f64>| {
            (&data.y - &data.x * b).iter().map(|r| loss.rho(*r)).sum::<f64>() / n + pen.value(b)
        };
        for j in 0..5 {
            let mut b = f.beta_hat.clone();
            b[j] += 1e-3;
            prop_assert!(obj(&b) >= f.objective - 1e-9);
        }
    }

    #[test]
    fn objective_history_is_monotone(seed in 0u64..10_000, lambda in 0.02f64..0.3) {
        let data = gaussian_instance(seed, 30, 40, NoiseSpec::Gaussian { sigma: 1.0 });
        let mut cfg = SolverConfig::default().with_algorithm(Algorithm::Fista);
        cfg.record_objective = true;
        let f = fit(&LossSpec::SmoothHuber0 { scale: 1.0 }, &PenaltySpec::L1 { lambda }, &data, &cfg).unwrap();
        prop_assert!(f.objective_history.len() > 1);
        for w in f.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
    }
}
