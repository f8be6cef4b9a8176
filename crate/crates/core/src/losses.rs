//! Convex losses with a 1-Lipschitz derivative.
//!
//! Each robust loss is a unit-scale profile `ρ₁` evaluated at scale `Λ`:
//! `ρ(u) = Λ² ρ₁(u/Λ)`, hence `ψ(u) = Λ ψ₁(u/Λ)` and `ψ'(u) = ψ₁'(u/Λ)`.
//! Scaling never changes the Lipschitz constant of `ψ`.
//!
//! The smoothed profiles replace Huber's step `ψ'` by a linear (`smooth_huber0`)
//! or cubic smoothstep (`smooth_huber1`) ramp on `[1, 2]`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    Square,
    Huber { scale: f64 },
    SmoothHuber0 { scale: f64 },
    SmoothHuber1 { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub rho: f64,
    pub psi: f64,
    pub psi_prime: f64,
}

/// Componentwise `(ρ, ψ, ψ')` for a vector of residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVectors {
    pub rho: DVector<f64>,
    pub psi: DVector<f64>,
    pub psi_prime: DVector<f64>,
}

impl LossSpec {
    /// Huber loss for the Huber Lasso parametrization `n λ*² ρ_H(u / (√n λ*))`,
    /// i.e. scale `√n λ*`.
    pub fn huber_lasso(n: usize, lambda_star: f64) -> LossSpec {
        LossSpec::Huber {
            scale: (n as f64).sqrt() * lambda_star,
        }
    }

    pub fn scale(&self) -> Option<f64> {
        match *self {
            LossSpec::Square => None,
            LossSpec::Huber { scale }
            | LossSpec::SmoothHuber0 { scale }
            | LossSpec::SmoothHuber1 { scale } => Some(scale),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.scale() {
            Some(s) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::invalid("loss.scale", "must be positive and finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Square => "square",
            LossSpec::Huber { .. } => "huber",
            LossSpec::SmoothHuber0 { .. } => "smooth_huber0",
            LossSpec::SmoothHuber1 { .. } => "smooth_huber1",
        }
    }

    pub fn eval(&self, u: f64) -> LossValue {
        let (profile, scale): (fn(f64) -> LossValue, f64) = match *self {
            LossSpec::Square => {
                return LossValue {
                    rho: 0.5 * u * u,
                    psi: u,
                    psi_prime: 1.0,
                }
            }
            LossSpec::Huber { scale } => (huber_unit, scale),
            LossSpec::SmoothHuber0 { scale } => (smooth0_unit, scale),
            LossSpec::SmoothHuber1 { scale } => (smooth1_unit, scale),
        };
        let t = u / scale;
        if t.abs() <= 1.0 {
            // every profile is quadratic on the unit interval; avoid the rescaling round trip
            return LossValue {
                rho: 0.5 * u * u,
                psi: u,
                psi_prime: 1.0,
            };
        }
        let v = profile(t.abs());
        LossValue {
            rho: scale * scale * v.rho,
            psi: scale * v.psi.copysign(t),
            psi_prime: v.psi_prime,
        }
    }

    #[inline]
    pub fn psi(&self, u: f64) -> f64 {
        match *self {
            LossSpec::Square => u,
            LossSpec::Huber { scale } => {
                if (u / scale).abs() <= 1.0 {
                    u
                } else {
                    scale.copysign(u)
                }
            }
            _ => self.eval(u).psi,
        }
    }

    #[inline]
    pub fn rho(&self, u: f64) -> f64 {
        self.eval(u).rho
    }

    pub fn eval_vec(&self, u: &DVector<f64>) -> LossVectors {
        let n = u.len();
        let mut out = LossVectors {
            rho: DVector::zeros(n),
            psi: DVector::zeros(n),
            psi_prime: DVector::zeros(n),
        };
        for (i, &ui) in u.iter().enumerate() {
            let v = self.eval(ui);
            out.rho[i] = v.rho;
            out.psi[i] = v.psi;
            out.psi_prime[i] = v.psi_prime;
        }
        out
    }

    pub fn psi_vec(&self, u: &DVector<f64>) -> DVector<f64> {
        u.map(|ui| self.psi(ui))
    }

    /// `ψ'` takes only the values 0 and 1, so inliers are exactly where it is 1.
    pub fn has_binary_psi_prime(&self) -> bool {
        matches!(self, LossSpec::Square | LossSpec::Huber { .. })
    }
}

// Unit profiles on t = |u| / scale >= 0. At the Huber elbow t = 1 the closed
// branch (ψ' = 1) is used.

fn huber_unit(t: f64) -> LossValue {
    if t <= 1.0 {
        LossValue {
            rho: 0.5 * t * t,
            psi: t,
            psi_prime: 1.0,
        }
    } else {
        LossValue {
            rho: t - 0.5,
            psi: 1.0,
            psi_prime: 0.0,
        }
    }
}

fn smooth0_unit(t: f64) -> LossValue {
    if t <= 1.0 {
        LossValue {
            rho: 0.5 * t * t,
            psi: t,
            psi_prime: 1.0,
        }
    } else if t <= 2.0 {
        LossValue {
            rho: 1.0 / 6.0 - t / 2.0 + t * t - t * t * t / 6.0,
            psi: -0.5 + 2.0 * t - 0.5 * t * t,
            psi_prime: 2.0 - t,
        }
    } else {
        LossValue {
            rho: -7.0 / 6.0 + 1.5 * t,
            psi: 1.5,
            psi_prime: 0.0,
        }
    }
}

fn smooth1_unit(t: f64) -> LossValue {
    if t <= 1.0 {
        LossValue {
            rho: 0.5 * t * t,
            psi: t,
            psi_prime: 1.0,
        }
    } else if t <= 2.0 {
        let t2 = t * t;
        let t3 = t2 * t;
        LossValue {
            rho: t3 * t2 / 10.0 - 0.75 * t2 * t2 + 2.0 * t3 - 2.0 * t2 + 1.5 * t - 7.0 / 20.0,
            psi: 1.5 + (t - 2.0).powi(3) * t / 2.0,
            psi_prime: 2.0 * t3 - 9.0 * t2 + 12.0 * t - 4.0,
        }
    } else {
        LossValue {
            rho: 37.0 / 20.0 + 1.5 * (t - 2.0),
            psi: 1.5,
            psi_prime: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const ALL_UNIT: [LossSpec; 4] = [
        LossSpec::Square,
        LossSpec::Huber { scale: 1.0 },
        LossSpec::SmoothHuber0 { scale: 1.0 },
        LossSpec::SmoothHuber1 { scale: 1.0 },
    ];

    #[test]
    fn table_values() {
        let v = LossSpec::Square.eval(3.5);
        assert_eq!((v.rho, v.psi, v.psi_prime), (6.125, 3.5, 1.0));

        let v = LossSpec::Huber { scale: 1.0 }.eval(2.0);
        assert_eq!((v.rho, v.psi, v.psi_prime), (1.5, 1.0, 0.0));

        let v = LossSpec::SmoothHuber0 { scale: 1.0 }.eval(2.0);
        assert_relative_eq!(v.rho, 11.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(v.psi, 1.5, epsilon = 1e-15);
        assert_eq!(v.psi_prime, 0.0);

        let v = LossSpec::SmoothHuber1 { scale: 1.0 }.eval(1.5);
        assert_relative_eq!(v.psi_prime, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn vector_evaluation() {
        let u = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(LossSpec::Square.eval_vec(&u).psi, u);

        let u = DVector::from_vec(vec![0.5, -3.0]);
        assert_eq!(
            LossSpec::Huber { scale: 1.0 }.eval_vec(&u).psi,
            DVector::from_vec(vec![0.5, -1.0])
        );

        for loss in ALL_UNIT {
            let out = loss.eval_vec(&DVector::zeros(0));
            assert_eq!(out.psi.len(), 0);
        }
    }

    #[test]
    fn huber_elbow_counts_as_inlier() {
        let v = LossSpec::Huber { scale: 2.0 }.eval(-2.0);
        assert_eq!(v.psi_prime, 1.0);
        assert_eq!(v.psi, -2.0);
    }

    #[test]
    fn profiles_are_continuous_at_breakpoints() {
        for loss in ALL_UNIT {
            for &b in &[1.0, 2.0] {
                let lo = loss.eval(b - 1e-12);
                let hi = loss.eval(b + 1e-12);
                assert!((lo.rho - hi.rho).abs() < 1e-10, "{loss:?} rho at {b}");
                assert!((lo.psi - hi.psi).abs() < 1e-10, "{loss:?} psi at {b}");
            }
        }
    }

    #[test]
    fn lipschitz_and_monotone_on_grid() {
        for scale in [0.3, 1.0, 4.0] {
            let losses = [
                LossSpec::Square,
                LossSpec::Huber { scale },
                LossSpec::SmoothHuber0 { scale },
                LossSpec::SmoothHuber1 { scale },
            ];
            for loss in losses {
                let grid: Vec<f64> = (0..10_000)
                    .map(|k| -10.0 * scale + 20.0 * scale * k as f64 / 9_999.0)
                    .collect();
                for w in grid.windows(2) {
                    let (a, b) = (loss.eval(w[0]), loss.eval(w[1]));
                    assert!(b.psi >= a.psi, "{loss:?} not monotone");
                    assert!(b.psi - a.psi <= (w[1] - w[0]) * (1.0 + 1e-12));
                    assert!((0.0..=1.0).contains(&a.psi_prime));
                }
            }
        }
    }

    #[test]
    fn finite_differences_match_derivatives() {
        let h = 1e-4;
        for loss in ALL_UNIT {
            for k in 0..400 {
                let u = -4.0 + 8.0 * (k as f64 + 0.37) / 400.0;
                let near_kink = [1.0_f64, 2.0].iter().any(|b| (u.abs() - b).abs() < 2.0 * h);
                if near_kink {
                    continue;
                }
                let v = loss.eval(u);
                let drho = (loss.rho(u + h) - loss.rho(u - h)) / (2.0 * h);
                assert!((drho - v.psi).abs() < 1e-7, "{loss:?} ψ at {u}");
                if !matches!(loss, LossSpec::Huber { .. }) {
                    let dpsi = (loss.psi(u + h) - loss.psi(u - h)) / (2.0 * h);
                    assert!((dpsi - v.psi_prime).abs() < 1e-6, "{loss:?} ψ' at {u}");
                }
            }
        }
    }

    #[test]
    fn smoothed_psi_prime_is_continuous() {
        // smoothed losses are C¹ in ψ, so the fd check also holds across breakpoints
        let h = 1e-6;
        for loss in [LossSpec::SmoothHuber0 { scale: 1.0 }, LossSpec::SmoothHuber1 { scale: 1.0 }] {
            for b in [1.0, 2.0] {
                let dpsi = (loss.psi(b + h) - loss.psi(b - h)) / (2.0 * h);
                assert!((dpsi - loss.eval(b).psi_prime).abs() < 1e-5);
            }
        }
    }

    proptest! {
        #[test]
        fn scaling_is_exact(u in -50.0f64..50.0, scale in 0.01f64..20.0) {
            for unit in &ALL_UNIT[1..] {
                let scaled = match unit {
                    LossSpec::Huber { .. } => LossSpec::Huber { scale },
                    LossSpec::SmoothHuber0 { .. } => LossSpec::SmoothHuber0 { scale },
                    LossSpec::SmoothHuber1 { .. } => LossSpec::SmoothHuber1 { scale },
                    LossSpec::Square => unreachable!(),
                };
                let lhs = scaled.psi(u);
                let rhs = scale * unit.psi(u / scale);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
        }

        #[test]
        fn symmetric_and_zero_at_origin(u in -30.0f64..30.0) {
            for loss in ALL_UNIT {
                let (a, b) = (loss.eval(u), loss.eval(-u));
                prop_assert_eq!(a.rho, b.rho);
                prop_assert_eq!(a.psi, -b.psi);
                prop_assert_eq!(a.psi_prime, b.psi_prime);
                let z = loss.eval(0.0);
                prop_assert_eq!((z.rho, z.psi), (0.0, 0.0));
            }
        }
    }
}
