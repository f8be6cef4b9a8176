//! Fit convex-penalized M-estimators for high-dimensional linear regression and
//! estimate their out-of-sample error from the data alone.
//!
//! The estimate of `‖Σ^{1/2}(β̂ − β)‖²` combines the score `ψ̂ = ψ(y − Xβ̂)`,
//! `Xᵀψ̂`, and two Jacobian traces: the degrees of freedom
//! `df̂ = tr[∂(Xβ̂)/∂y]` and `tr[∂ψ̂/∂y]`. The traces come in closed form for the
//! ℓ1 and Elastic-Net penalties, and from a Monte Carlo divergence otherwise.
//!
//! Modules, bottom-up:
//! * [`data`]: synthetic designs, noise, signals, ground-truth error.
//! * [`losses`]: square, Huber and smoothed Huber losses.
//! * [`solvers`]: coordinate descent, augmented Lasso and FISTA fits.
//! * [`jacobians`]: closed-form, Monte Carlo and finite-difference traces.
//! * [`estimators`]: `R̂`, `τ̂²`, `σ̂²` and SURE.
//! * [`harness`]: replicated simulation studies streamed to CSV.
//! * [`io`]: the dataset CSV format.
//! * [`selftest`]: invariant suites shared by the CLI and the tests.

pub mod data;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod jacobians;
pub mod linalg;
pub mod losses;
pub mod selftest;
pub mod solvers;

pub use error::{Error, Result};
