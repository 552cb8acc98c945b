//! Leave-one-out cross-validation of the smoothing bandwidth.
//!
//! For a candidate `h` the criterion is the mean, over evaluable `i`, of
//! `(eᵢ² - σ̂²⁽⁻ⁱ⁾(Xᵢ))²`, where `σ̂²⁽⁻ⁱ⁾` smooths the squared first-step
//! residuals without observation `i`. An `i` is not evaluable when its
//! leave-one-out kernel window is empty. Candidates where fewer than
//! [`MIN_VALID_FRACTION`] of the terms are evaluable are disqualified.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::smoothing::Embedding;
use crate::weights::{perturbed_projector, FirstStepFit};

pub const MIN_VALID_FRACTION: f64 = 0.8;
pub const DEFAULT_GRID_SIZE: usize = 20;

/// Geometry in which residuals are smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingMode {
    Np,
    SpProjected,
    SpIndex,
}

impl SmoothingMode {
    /// Embedded covariates; `eps` is only used by [`SmoothingMode::SpProjected`].
    pub fn embedding(&self, data: &Dataset, fs: &FirstStepFit, eps: f64) -> Result<Embedding> {
        match self {
            SmoothingMode::Np => Ok(Embedding::raw(data)),
            SmoothingMode::SpProjected => {
                let b2 = fs.slope();
                Embedding::linear(data, &perturbed_projector(&b2, eps)?)
            }
            SmoothingMode::SpIndex => {
                let b2 = fs.slope();
                if b2.iter().all(|v| *v == 0.0) {
                    return Err(Error::IndexDegenerate);
                }
                Embedding::index(data, &b2)
            }
        }
    }
}

impl fmt::Display for SmoothingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmoothingMode::Np => "np",
            SmoothingMode::SpProjected => "sp-proj",
            SmoothingMode::SpIndex => "sp-index",
        })
    }
}

impl FromStr for SmoothingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "np" => Ok(SmoothingMode::Np),
            "sp-proj" | "sp" => Ok(SmoothingMode::SpProjected),
            "sp-index" => Ok(SmoothingMode::SpIndex),
            other => Err(Error::InvalidParameter(format!("unknown smoothing mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub h_cv: f64,
    pub grid: Vec<f64>,
    /// `None` where no leave-one-out term was evaluable.
    pub scores: Vec<Option<f64>>,
    pub valid_fraction: Vec<f64>,
}

/// Leave-one-out smooth of `sq_resid` at point `i`; `None` when the window
/// around point `i` holds no other observation.
pub fn loo_sigma2(emb: &Embedding, kernel: &Kernel, h: f64, sq_resid: &[f64], i: usize) -> Option<f64> {
    let inv_h2 = 1.0 / (h * h);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..emb.len() {
        if j == i {
            continue;
        }
        let k = kernel.eval_sq_norm(emb.sq_dist(i, j) * inv_h2);
        num += sq_resid[j] * k;
        den += k;
    }
    (den > 0.0).then(|| num / den)
}

/// Geometric grid of `count` points from `min` to `max`.
pub fn geometric_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth grid needs 0 < min <= max and count >= 1, got {min}:{max}:{count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let ratio = (max / min).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|k| {
            if k + 1 == count {
                max
            } else {
                min * (ratio * k as f64).exp()
            }
        })
        .collect())
}

/// Pilot `h₀ = spread · n^{-1/(d+4)}` with `spread` the root total variance of
/// the embedded points.
pub fn pilot_bandwidth(emb: &Embedding) -> f64 {
    let spread = emb.spread();
    let spread = if spread > 0.0 && spread.is_finite() { spread } else { 1.0 };
    spread * (emb.len() as f64).powf(-1.0 / (emb.dim() as f64 + 4.0))
}

/// [`DEFAULT_GRID_SIZE`] geometric points spanning `[h₀/4, 4h₀]`.
pub fn default_grid(emb: &Embedding) -> Vec<f64> {
    let h0 = pilot_bandwidth(emb);
    geometric_grid(h0 / 4.0, 4.0 * h0, DEFAULT_GRID_SIZE).expect("pilot is positive")
}

/// Per-candidate `(score, valid_fraction)`, evaluating every candidate in a
/// single pass over point pairs.
pub fn cv_scores(emb: &Embedding, sq_resid: &[f64], grid: &[f64]) -> Vec<(Option<f64>, f64)> {
    let n = emb.len();
    let m = grid.len();
    // candidates by decreasing h: a pair outside one window is outside all smaller ones
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| grid[*b].total_cmp(&grid[*a]));
    let inv_h2: Vec<f64> = order.iter().map(|&k| 1.0 / (grid[k] * grid[k])).collect();
    let mut num = vec![0.0; m * n];
    let mut den = vec![0.0; m * n];
    for j in 0..n {
        for i in (j + 1)..n {
            let d2 = emb.sq_dist(i, j);
            for (slot, &k) in order.iter().enumerate() {
                let r2 = d2 * inv_h2[slot];
                if r2 >= 1.0 {
                    break;
                }
                // constant kernel factors cancel in the ratio
                let w = 1.0 - r2;
                num[k * n + i] += sq_resid[j] * w;
                den[k * n + i] += w;
                num[k * n + j] += sq_resid[i] * w;
                den[k * n + j] += w;
            }
        }
    }
    (0..m)
        .map(|k| {
            let (mut total, mut count) = (0.0, 0usize);
            for i in 0..n {
                let d = den[k * n + i];
                if d > 0.0 {
                    let r = sq_resid[i] - num[k * n + i] / d;
                    total += r * r;
                    count += 1;
                }
            }
            let score = (count > 0).then(|| total / count as f64);
            (score, count as f64 / n as f64)
        })
        .collect()
}

/// Selects the qualified candidate with the smallest score, ties going to the
/// smaller bandwidth.
pub fn cv_bandwidth(emb: &Embedding, fs: &FirstStepFit, kernel: &Kernel, grid: &[f64]) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("bandwidth grid is empty".into()));
    }
    if let Some(h) = grid.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(Error::InvalidParameter(format!("bandwidth candidates must be positive, got {h}")));
    }
    if kernel.dim() != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb.dim(),
            got: kernel.dim(),
        });
    }
    if fs.residuals.len() != emb.len() {
        return Err(Error::DimensionMismatch {
            expected: emb.len(),
            got: fs.residuals.len(),
        });
    }
    let sq: Vec<f64> = fs.residuals.iter().map(|e| e * e).collect();
    let evaluated = cv_scores(emb, &sq, grid);
    let mut best: Option<(f64, f64)> = None;
    for (&h, &(score, frac)) in grid.iter().zip(&evaluated) {
        let Some(s) = score else { continue };
        if frac < MIN_VALID_FRACTION {
            continue;
        }
        best = match best {
            Some((bs, bh)) if bs < s || (bs == s && bh <= h) => Some((bs, bh)),
            _ => Some((s, h)),
        };
    }
    let (_, h_cv) = best.ok_or(Error::BandwidthGrid { candidates: grid.len() })?;
    Ok(CvResult {
        h_cv,
        grid: grid.to_vec(),
        scores: evaluated.iter().map(|(s, _)| *s).collect(),
        valid_fraction: evaluated.iter().map(|(_, f)| *f).collect(),
    })
}
