//! Covariance estimation from per-sample random low-dimensional projections.
//!
//! Each sample `x_t ∈ R^d` is observed only through `A_t^T x_t ∈ R^m`, where
//! `A_t` is an independent Haar-random orthonormal `d x m` basis. The
//! [`estimator`] module turns the back-projections into an unbiased
//! estimate of the covariance; [`baselines`] holds the comparison methods
//! and [`theory`] the closed-form bounds and Monte Carlo verifiers.

mod error;

pub mod baselines;
pub mod estimator;
pub mod experiments;
pub mod linalg;
pub mod sampling;
pub mod simnet;
pub mod theory;

pub use error::{Error, Result};
