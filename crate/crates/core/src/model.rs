//! Heteroscedastic linear design `Y = β₀₁ + β₀₂ᵀX + σ(X) ε` used by the
//! simulation harness and by the parametric/oracle weight families.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaModel {
    /// `σ(x) = β₂ᵀx / |β₂|`
    Smooth,
    /// `σ(x) = 1/2 + 2·1{β₂ᵀx > 0}`
    Discontinuous,
    /// `σ(x) = 1`; a diagnostic mode.
    Homoscedastic,
}

impl SigmaModel {
    /// Noise scale at `x` for slope vector `beta2`.
    pub fn sigma(&self, x: &[f64], beta2: &[f64]) -> f64 {
        let index: f64 = x.iter().zip(beta2).map(|(a, b)| a * b).sum();
        match self {
            SigmaModel::Smooth => {
                let norm = beta2.iter().map(|b| b * b).sum::<f64>().sqrt();
                index / norm
            }
            SigmaModel::Discontinuous => {
                if index > 0.0 {
                    2.5
                } else {
                    0.5
                }
            }
            SigmaModel::Homoscedastic => 1.0,
        }
    }

    /// `1/σ(x)²`, unclamped; infinite on the zero set of a smooth `σ`.
    pub fn inverse_variance(&self, x: &[f64], beta2: &[f64]) -> f64 {
        let s = self.sigma(x, beta2);
        1.0 / (s * s)
    }
}

impl fmt::Display for SigmaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaModel::Smooth => "smooth",
            SigmaModel::Discontinuous => "disc",
            SigmaModel::Homoscedastic => "homo",
        })
    }
}

impl FromStr for SigmaModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smooth" => Ok(SigmaModel::Smooth),
            "disc" | "discontinuous" => Ok(SigmaModel::Discontinuous),
            "homo" | "homoscedastic" | "constant" => Ok(SigmaModel::Homoscedastic),
            other => Err(Error::InvalidParameter(format!(
                "unknown sigma model `{other}` (expected smooth, disc or homo)"
            ))),
        }
    }
}

/// `(β₀₁, β₀₂) = (1, …, 1)/√(q+1)`.
pub fn true_beta(q: usize) -> DVector<f64> {
    DVector::from_element(q + 1, 1.0 / ((q + 1) as f64).sqrt())
}
