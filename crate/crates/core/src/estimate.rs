//! Weighted coefficient estimation.
//!
//! [`fit_wls`] is the closed-form weighted least-squares solution
//! `β̂(w) = Σ̂(w)⁻¹ γ̂(w)`. [`fit_weighted_m`] minimizes
//! `n⁻¹ Σ ρ(|yᵢ - x̃ᵢᵀβ|) wᵢ` for any admissible [`Loss`] by damped Newton
//! steps on the estimating equation, falling back to an IRLS step when the
//! curvature matrix is singular. [`sandwich_covariance`] is the plug-in
//! `Ĉ⁻¹ M̂ Ĉ⁻¹ / n` covariance of the resulting estimator.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{inverse_symmetric, rcond_symmetric, solve_symmetric, symmetrize, RCOND_THRESHOLD};
use crate::loss::Loss;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Intercept first, then slopes.
    pub beta: DVector<f64>,
    pub weights: Vec<f64>,
    /// Zero for the closed form.
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the weighted estimating equation at `beta`.
    pub gradient_norm: f64,
    pub covariance: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; the unweighted square-loss fit when absent.
    pub init: Option<DVector<f64>>,
}

impl Default for MOptions {
    fn default() -> Self {
        MOptions {
            tol: 1e-10,
            max_iter: 100,
            init: None,
        }
    }
}

pub(crate) fn validate_weights(data: &Dataset, weights: &[f64]) -> Result<()> {
    if weights.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeights(format!(
            "weight {} at row {i} is not a finite nonnegative number",
            weights[i]
        )));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    Ok(())
}

/// Closed-form weighted least squares.
pub fn fit_wls(data: &Dataset, weights: &[f64]) -> Result<FitResult> {
    validate_weights(data, weights)?;
    let n = data.n() as f64;
    let y = data.y();
    let sigma = data.weighted_moment(|i| weights[i]) / n;
    let gamma = data.weighted_sum(|i| weights[i] * y[i]) / n;
    let rcond = rcond_symmetric(&sigma);
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::DegenerateDesign { rcond });
    }
    let beta = solve_symmetric(&sigma, &gamma).ok_or(Error::DegenerateDesign { rcond })?;
    let gradient_norm = max_norm(&estimating_equation(data, &Loss::Square, weights, &beta));
    Ok(FitResult {
        beta,
        weights: weights.to_vec(),
        iterations: 0,
        converged: true,
        gradient_norm,
        covariance: None,
    })
}

/// `n⁻¹ Σ wᵢ ρ'(|eᵢ|) sign(eᵢ) x̃ᵢ`, the estimating-equation map at `beta`.
pub fn estimating_equation(
    data: &Dataset,
    loss: &Loss,
    weights: &[f64],
    beta: &DVector<f64>,
) -> DVector<f64> {
    let e = data.residuals(beta);
    data.weighted_sum(|i| weights[i] * loss.psi(e[i])) / data.n() as f64
}

pub fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn objective(data: &Dataset, loss: &Loss, weights: &[f64], beta: &DVector<f64>) -> f64 {
    let e = data.residuals(beta);
    e.iter()
        .zip(weights)
        .map(|(ei, wi)| wi * loss.rho_abs(*ei))
        .sum::<f64>()
        / data.n() as f64
}

const MAX_HALVINGS: usize = 60;
const FLAT_ULPS: f64 = 16.0;

/// Weighted M-estimation by damped Newton on the estimating equation.
///
/// Each iteration tries the Newton direction `Ĉ⁻¹ ψ(β)` where
/// `Ĉ = n⁻¹ Σ wᵢ ρ''(|eᵢ|) x̃ᵢ x̃ᵢᵀ`; if `Ĉ` is singular the step is the IRLS
/// update with working weights `wᵢ ρ'(|eᵢ|)/|eᵢ|`. Steps are halved until
/// the weighted objective does not increase; once it is flat to round-off,
/// a step must shrink the gradient norm instead.
pub fn fit_weighted_m(
    data: &Dataset,
    loss: &Loss,
    weights: &[f64],
    options: &MOptions,
) -> Result<FitResult> {
    loss.validate()?;
    validate_weights(data, weights)?;
    if let Some(init) = &options.init {
        if init.len() != data.p() {
            return Err(Error::DimensionMismatch {
                expected: data.p(),
                got: init.len(),
            });
        }
    }
    let n = data.n() as f64;
    let design = data.weighted_moment(|i| weights[i]) / n;
    let rcond = rcond_symmetric(&design);
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::DegenerateDesign { rcond });
    }
    let mut beta = match &options.init {
        Some(b) => b.clone(),
        None => fit_wls(data, &vec![1.0; data.n()])?.beta,
    };

    let y = data.y();
    let mut f_cur = objective(data, loss, weights, &beta);
    let mut grad = estimating_equation(data, loss, weights, &beta);
    let mut gnorm = max_norm(&grad);
    let mut iterations = 0;

    while gnorm > options.tol && iterations < options.max_iter {
        let e = data.residuals(&beta);
        let curvature = data.weighted_moment(|i| weights[i] * loss.g2(e[i])) / n;
        let newton = if rcond_symmetric(&curvature) >= RCOND_THRESHOLD {
            solve_symmetric(&curvature, &grad)
        } else {
            None
        };
        let direction = match newton {
            Some(d) => d,
            None => {
                let r: Vec<f64> = e.iter().zip(weights).map(|(ei, wi)| wi * loss.irls_ratio(*ei)).collect();
                let m = data.weighted_moment(|i| r[i]) / n;
                let rc = rcond_symmetric(&m);
                if !(rc >= RCOND_THRESHOLD) {
                    return Err(Error::DegenerateCurvature { rcond: rc });
                }
                let rhs = data.weighted_sum(|i| r[i] * y[i]) / n;
                let target = solve_symmetric(&m, &rhs).ok_or(Error::DegenerateCurvature { rcond: rc })?;
                target - &beta
            }
        };

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + &direction * step;
            let f_new = objective(data, loss, weights, &candidate);
            // within round-off of f_cur the objective cannot rank steps; the
            // gradient norm decides instead
            let flat = f_new <= f_cur + FLAT_ULPS * f64::EPSILON * f_cur.abs();
            if flat {
                let g_new = estimating_equation(data, loss, weights, &candidate);
                let gn = max_norm(&g_new);
                if f_new < f_cur || gn < gnorm {
                    accepted = Some((candidate, f_new, g_new, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((b, f, g, gn)) => {
                beta = b;
                f_cur = f;
                grad = g;
                gnorm = gn;
            }
            // no descent left at working precision
            None => break,
        }
    }

    Ok(FitResult {
        beta,
        weights: weights.to_vec(),
        iterations,
        converged: gnorm <= options.tol,
        gradient_norm: gnorm,
        covariance: None,
    })
}

/// Plug-in covariance `Ĉ⁻¹ M̂ Ĉ⁻¹ / n` with
/// `Ĉ = n⁻¹ Σ wᵢ g₂(eᵢ) x̃ᵢx̃ᵢᵀ` and `M̂ = n⁻¹ Σ wᵢ² g₁(eᵢ) x̃ᵢx̃ᵢᵀ`.
pub fn sandwich_covariance(
    data: &Dataset,
    loss: &Loss,
    weights: &[f64],
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    validate_weights(data, weights)?;
    if beta.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: beta.len(),
        });
    }
    let n = data.n() as f64;
    let e = data.residuals(beta);
    let c = data.weighted_moment(|i| weights[i] * loss.g2(e[i])) / n;
    let m = data.weighted_moment(|i| weights[i] * weights[i] * loss.g1(e[i])) / n;
    let rcond = rcond_symmetric(&c);
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::DegenerateCurvature { rcond });
    }
    let c_inv = inverse_symmetric(&c).ok_or(Error::DegenerateCurvature { rcond })?;
    Ok(symmetrize(&(&c_inv * m * &c_inv)) / n)
}
