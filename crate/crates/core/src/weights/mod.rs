//! Estimation of the variance-minimizing weight function.
//!
//! With `ρ'(0) = 0` the optimal weight is `w₀(x) = E[g₂ | x] / E[g₁ | x]`,
//! evaluated at the true coefficients. All adaptive routes plug in the
//! constant-weight fit [`FirstStepFit`] and estimate this ratio:
//!
//! - [`parametric_weights`]: a known family evaluated at `β̂⁽⁰⁾`.
//! - [`np_weights`]: Nadaraya-Watson smoothing over raw covariates.
//! - [`sp_index_weights`]: smoothing over the scalar index `β̂₂⁽⁰⁾ᵀx`.
//! - [`sp_projected_weights`]: smoothing over `Â x` with
//!   `Â = P̂₂ + εI`, `P̂₂` the projector onto `β̂₂⁽⁰⁾`.
//!
//! [`oracle_weights`] evaluates a known `w₀` directly.

mod strategy;

pub use strategy::{
    BandwidthChoice, BandwidthReport, EpsilonChoice, StrategyConfig, WeightOutcome, WeightProblem,
    WeightRegistry, WeightStrategy,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{fit_weighted_m, fit_wls, MOptions};
use crate::kernel::Kernel;
use crate::linalg::{inverse_symmetric, rcond_symmetric, symmetrize, RCOND_THRESHOLD};
use crate::loss::Loss;
use crate::smoothing::{nw_ratio_at, nw_ratio_at_samples, Embedding};

/// Clamp band for parametric and oracle weights, relative to their median.
pub const CLAMP_LOW: f64 = 1e-6;
pub const CLAMP_HIGH: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct FirstStepFit {
    pub beta0_hat: DVector<f64>,
    pub residuals: Vec<f64>,
}

impl FirstStepFit {
    pub fn slope(&self) -> DVector<f64> {
        self.beta0_hat.rows(1, self.beta0_hat.len() - 1).into_owned()
    }
}

/// Constant-weight fit under `loss` and its residuals.
pub fn first_step(data: &Dataset, loss: &Loss) -> Result<FirstStepFit> {
    let ones = vec![1.0; data.n()];
    let fit = if loss.is_square() {
        fit_wls(data, &ones)?
    } else {
        fit_weighted_m(data, loss, &ones, &MOptions::default())?
    };
    let residuals = data.residuals(&fit.beta);
    Ok(FirstStepFit {
        beta0_hat: fit.beta,
        residuals,
    })
}

fn scores(loss: &Loss, fs: &FirstStepFit) -> (Vec<f64>, Vec<f64>) {
    let g2 = fs.residuals.iter().map(|e| loss.g2(*e)).collect();
    let g1 = fs.residuals.iter().map(|e| loss.g1(*e)).collect();
    (g2, g1)
}

fn check_first_step(data: &Dataset, fs: &FirstStepFit) -> Result<()> {
    if fs.beta0_hat.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: fs.beta0_hat.len(),
        });
    }
    if fs.residuals.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: fs.residuals.len(),
        });
    }
    Ok(())
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")))
    }
}

/// `ŵ(Xⱼ) = N̂(Xⱼ) / D̂(Xⱼ)` with `N̂`, `D̂` kernel smooths of `g₂`, `g₁` over
/// the raw covariates.
pub fn np_weights(
    data: &Dataset,
    loss: &Loss,
    fs: &FirstStepFit,
    kernel: &Kernel,
    h: f64,
) -> Result<Vec<f64>> {
    check_first_step(data, fs)?;
    check_bandwidth(h)?;
    if kernel.dim() != data.q() {
        return Err(Error::DimensionMismatch {
            expected: data.q(),
            got: kernel.dim(),
        });
    }
    let (g2, g1) = scores(loss, fs);
    nw_ratio_at_samples(&Embedding::raw(data), kernel, h, &g2, &g1)
}

/// Nonparametric weight estimate at an arbitrary point `x`, without floors.
pub fn np_weight_at(
    data: &Dataset,
    loss: &Loss,
    fs: &FirstStepFit,
    kernel: &Kernel,
    h: f64,
    x: &[f64],
) -> Result<Option<f64>> {
    check_first_step(data, fs)?;
    check_bandwidth(h)?;
    if x.len() != data.q() || kernel.dim() != data.q() {
        return Err(Error::DimensionMismatch {
            expected: data.q(),
            got: x.len(),
        });
    }
    let (g2, g1) = scores(loss, fs);
    Ok(nw_ratio_at(&Embedding::raw(data), kernel, h, &g2, &g1, x))
}

fn nonzero_slope(fs: &FirstStepFit) -> Result<DVector<f64>> {
    let b2 = fs.slope();
    if b2.iter().all(|v| *v == 0.0) {
        return Err(Error::IndexDegenerate);
    }
    Ok(b2)
}

/// Same ratio as [`np_weights`] but smoothed over `tᵢ = β̂₂⁽⁰⁾ᵀXᵢ` with a
/// one-dimensional kernel.
pub fn sp_index_weights(
    data: &Dataset,
    loss: &Loss,
    fs: &FirstStepFit,
    kernel: &Kernel,
    h: f64,
) -> Result<Vec<f64>> {
    check_first_step(data, fs)?;
    check_bandwidth(h)?;
    if kernel.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: kernel.dim(),
        });
    }
    let b2 = nonzero_slope(fs)?;
    let (g2, g1) = scores(loss, fs);
    nw_ratio_at_samples(&Embedding::index(data, &b2)?, kernel, h, &g2, &g1)
}

/// Orthogonal projector `b bᵀ / |b|²` onto the span of `b`.
pub fn projector(beta2: &DVector<f64>) -> Result<DMatrix<f64>> {
    let norm2 = beta2.norm_squared();
    if !(norm2 > 0.0) {
        return Err(Error::IndexDegenerate);
    }
    Ok(beta2 * beta2.transpose() / norm2)
}

/// `Â = P̂₂ + εI`.
pub fn perturbed_projector(beta2: &DVector<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let q = beta2.len();
    Ok(projector(beta2)? + DMatrix::identity(q, q) * eps)
}

/// Which coefficient norm divides the perturbation size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeNorm {
    /// `|β̂₂⁽⁰⁾|²`
    #[default]
    Slope,
    /// `|β̂⁽⁰⁾|²`, intercept included.
    Full,
}

/// Root-mean-square residual, in units of `f64::EPSILON · max|yᵢ|`, below
/// which the first step is treated as an exact fit.
pub const EXACT_FIT_ULPS: f64 = 64.0;

/// Size of the diagonal perturbation,
/// `ε = sqrt(2σ̂² Σₖ λ̂ₖ² / (n q |β̂|²))`, where `λ̂ₖ` are the eigenvalues of
/// `(I - P̂₂) Σ̂₂⁻¹ (I - P̂₂)`, `Σ̂₂⁻¹` is the slope block of the inverse
/// moment matrix and `σ̂²` the mean squared first-step residual.
pub fn epsilon_perturbation(data: &Dataset, fs: &FirstStepFit) -> Result<f64> {
    epsilon_perturbation_with(data, fs, SlopeNorm::Slope)
}

pub fn epsilon_perturbation_with(data: &Dataset, fs: &FirstStepFit, norm: SlopeNorm) -> Result<f64> {
    check_first_step(data, fs)?;
    let n = data.n() as f64;
    let q = data.q();
    let b2 = nonzero_slope(fs)?;
    let moment = data.weighted_moment(|_| 1.0) / n;
    let rcond = rcond_symmetric(&moment);
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::DegenerateDesign { rcond });
    }
    let inv = inverse_symmetric(&moment).ok_or(Error::DegenerateDesign { rcond })?;
    let block = inv.view((1, 1), (q, q)).into_owned();
    let complement = DMatrix::identity(q, q) - projector(&b2)?;
    let m = symmetrize(&(&complement * block * &complement));
    let lambda_sq: f64 = SymmetricEigen::new(m).eigenvalues.iter().map(|l| l * l).sum();
    let mut sigma2 = fs.residuals.iter().map(|e| e * e).sum::<f64>() / n;
    let scale = data.y().iter().fold(0.0f64, |m, y| m.max(y.abs()));
    // residuals at round-off level mean an exact fit
    if sigma2.sqrt() <= EXACT_FIT_ULPS * f64::EPSILON * scale {
        sigma2 = 0.0;
    }
    let beta_norm2 = match norm {
        SlopeNorm::Slope => b2.norm_squared(),
        SlopeNorm::Full => fs.beta0_hat.norm_squared(),
    };
    Ok((2.0 * sigma2 * lambda_sq / (n * q as f64 * beta_norm2)).sqrt())
}

/// Ratio of `g₂` and `g₁` smooths over `Â Xᵢ`, i.e. kernel argument
/// `Â(Xᵢ - x)/h`, with the `q`-dimensional kernel.
pub fn sp_projected_weights(
    data: &Dataset,
    loss: &Loss,
    fs: &FirstStepFit,
    kernel: &Kernel,
    h: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    check_first_step(data, fs)?;
    check_bandwidth(h)?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {eps}")));
    }
    if kernel.dim() != data.q() {
        return Err(Error::DimensionMismatch {
            expected: data.q(),
            got: kernel.dim(),
        });
    }
    let a = perturbed_projector(&nonzero_slope(fs)?, eps)?;
    let (g2, g1) = scores(loss, fs);
    nw_ratio_at_samples(&Embedding::linear(data, &a)?, kernel, h, &g2, &g1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClampedWeights {
    pub weights: Vec<f64>,
    pub clamp_count: usize,
}

/// Clamps into `[CLAMP_LOW, CLAMP_HIGH] · median`. `+∞` and `0` are limits of
/// an unbounded family and get clamped; NaN or negative values are errors.
fn clamp_to_median(raw: Vec<f64>) -> Result<ClampedWeights> {
    if let Some((row, &value)) = raw.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
        return Err(Error::WeightFamily { row, value });
    }
    let mut sorted = raw.clone();
    sorted.sort_by(f64::total_cmp);
    let median = crate::stats::quantile_sorted(&sorted, 0.5);
    if !(median.is_finite() && median > 0.0) {
        let row = raw.iter().position(|v| !v.is_finite() || *v == 0.0).unwrap_or(0);
        return Err(Error::WeightFamily { row, value: raw[row] });
    }
    let (lo, hi) = (CLAMP_LOW * median, CLAMP_HIGH * median);
    let mut clamp_count = 0;
    let weights = raw
        .into_iter()
        .map(|w| {
            if w < lo {
                clamp_count += 1;
                lo
            } else if w > hi {
                clamp_count += 1;
                hi
            } else {
                w
            }
        })
        .collect();
    Ok(ClampedWeights { weights, clamp_count })
}

/// `wᵢ = family(Xᵢ, β̂⁽⁰⁾)`, clamped relative to the median.
pub fn parametric_weights<F>(family: F, fs: &FirstStepFit, data: &Dataset) -> Result<ClampedWeights>
where
    F: Fn(&[f64], &DVector<f64>) -> f64,
{
    check_first_step(data, fs)?;
    clamp_to_median(data.rows().map(|x| family(x, &fs.beta0_hat)).collect())
}

/// `wᵢ = w₀(Xᵢ)` for a known optimal weight, same clamping as
/// [`parametric_weights`].
pub fn oracle_weights<F>(w0: F, data: &Dataset) -> Result<ClampedWeights>
where
    F: Fn(&[f64]) -> f64,
{
    clamp_to_median(data.rows().map(w0).collect())
}
