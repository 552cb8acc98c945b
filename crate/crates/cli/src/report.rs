use serde::Serialize;

use awreg::pipeline::AdaptiveFit;
use awreg::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightsSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub clamp_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthInfo {
    pub value: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverInfo {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

/// Output of `awreg fit`. Every key is always present; `bandwidth` and
/// `epsilon` are null for routes that do not use them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub q: usize,
    pub loss: String,
    pub weights: String,
    pub beta: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub weights_summary: WeightsSummary,
    pub bandwidth: Option<BandwidthInfo>,
    pub epsilon: Option<f64>,
    pub solver: SolverInfo,
}

impl FitReport {
    pub fn new(
        n: usize,
        q: usize,
        loss: String,
        strategy: &str,
        fit: &AdaptiveFit,
        covariance_diag: &[f64],
    ) -> Self {
        let w = &fit.fit.weights;
        FitReport {
            n,
            q,
            loss,
            weights: strategy.to_string(),
            beta: fit.fit.beta.iter().copied().collect(),
            // clip round-off negatives on the diagonal
            standard_errors: covariance_diag.iter().map(|v| v.max(0.0).sqrt()).collect(),
            weights_summary: WeightsSummary {
                min: w.iter().copied().fold(f64::INFINITY, f64::min),
                median: median(w),
                max: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                clamp_count: fit.outcome.clamp_count,
            },
            bandwidth: fit.outcome.bandwidth.as_ref().map(|b| BandwidthInfo {
                value: b.value,
                method: b.method.to_string(),
            }),
            epsilon: fit.outcome.epsilon,
            solver: SolverInfo {
                iterations: fit.fit.iterations,
                converged: fit.fit.converged,
                gradient_norm: fit.fit.gradient_norm,
            },
        }
    }
}
