//! Multivariate Epanechnikov kernel `K(u) = c_q (1 - |u|²)₊` with its exact
//! normalizing constant.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Epanechnikov,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Epanechnikov => f.write_str("epanechnikov"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel `{other}` (only epanechnikov is available)"
            ))),
        }
    }
}

/// Volume of the unit ball in `R^q`, via `V_q = 2π/q · V_{q-2}`.
pub fn unit_ball_volume(q: usize) -> f64 {
    let (mut v, start) = if q % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= q {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// `c_q = (q + 2) / (2 V_q)`, making `c_q (1 - |u|²)₊` integrate to one.
pub fn kernel_norm_const(q: usize) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidParameter("kernel dimension must be >= 1".into()));
    }
    Ok((q as f64 + 2.0) / (2.0 * unit_ball_volume(q)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    dim: usize,
    norm_const: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        Ok(Kernel {
            family,
            dim,
            norm_const: kernel_norm_const(dim)?,
        })
    }

    pub fn epanechnikov(dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: u.len(),
            });
        }
        Ok(self.eval_sq_norm(u.iter().map(|v| v * v).sum()))
    }

    /// Kernel value as a function of `|u|²`.
    #[inline]
    pub fn eval_sq_norm(&self, r2: f64) -> f64 {
        if r2 < 1.0 {
            self.norm_const * (1.0 - r2)
        } else {
            0.0
        }
    }

    /// `h^{-q}` factor of the scaled kernel `K_h(v) = h^{-q} K(v/h)`.
    pub fn bandwidth_scale(&self, h: f64) -> f64 {
        h.powi(-(self.dim as i32))
    }
}
