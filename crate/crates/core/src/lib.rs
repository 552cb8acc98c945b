//! Adaptively weighted regression for heteroscedastic linear models.
//!
//! The crate fits `E[Y | X] = β₁ + β₂ᵀX` by weighted M-estimation and
//! estimates the variance-minimizing weight function from a constant-weight
//! first step, either parametrically, by Nadaraya-Watson smoothing over the
//! covariates, or by smoothing over a single estimated index. A Monte Carlo
//! harness compares the routes against the first step and the oracle.
//!
//! Weight routes are [`weights::WeightStrategy`] trait objects looked up by
//! name in a [`weights::WeightRegistry`].

pub mod bandwidth;
pub mod data;
pub mod error;
pub mod estimate;
pub mod kernel;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod pipeline;
pub mod simulation;
pub mod smoothing;
pub mod stats;
pub mod weights;

pub use data::Dataset;
pub use error::{Error, Result};
pub use estimate::{fit_weighted_m, fit_wls, sandwich_covariance, FitResult, MOptions};
pub use kernel::{Kernel, KernelFamily};
pub use loss::Loss;
pub use model::SigmaModel;
