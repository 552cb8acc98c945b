//! Convex losses `ρ` on residual magnitudes and the score transforms used by
//! the weight estimators:
//!
//! - `g1(e) = ρ'(|e|)^2`
//! - `g2(e) = ρ''(|e|)`
//!
//! Every admissible family satisfies `ρ(0) = 0` and `ρ'(0) = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the curvature of a power loss with `p < 2` is
/// evaluated at the floor instead of at `|e|` (where it diverges).
const POWER_CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Loss {
    /// `ρ(t) = t²`
    Square,
    /// `ρ(t) = t²/2` for `t ≤ c`, `c(t - c/2)` beyond.
    Huber { cutoff: f64 },
    /// `ρ(t) = t^p`, `p > 1`.
    Power { exponent: f64 },
}

impl Loss {
    pub fn huber(cutoff: f64) -> Result<Self> {
        let loss = Loss::Huber { cutoff };
        loss.validate()?;
        Ok(loss)
    }

    pub fn power(exponent: f64) -> Result<Self> {
        let loss = Loss::Power { exponent };
        loss.validate()?;
        Ok(loss)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::Square => Ok(()),
            Loss::Huber { cutoff } if cutoff.is_finite() && cutoff > 0.0 => Ok(()),
            Loss::Huber { cutoff } => Err(Error::InvalidParameter(format!(
                "huber cutoff must be positive and finite, got {cutoff}"
            ))),
            Loss::Power { exponent } if exponent.is_finite() && exponent > 1.0 => Ok(()),
            Loss::Power { exponent } => Err(Error::InvalidParameter(format!(
                "power exponent must exceed 1, got {exponent}"
            ))),
        }
    }

    pub fn is_square(&self) -> bool {
        matches!(self, Loss::Square)
    }

    /// `ρ(t)` for `t ≥ 0`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("loss argument must be >= 0, got {t}")));
        }
        Ok(match *self {
            Loss::Square => t * t,
            Loss::Huber { cutoff: c } => {
                if t <= c {
                    0.5 * t * t
                } else {
                    c * (t - 0.5 * c)
                }
            }
            Loss::Power { exponent: p } => t.powf(p),
        })
    }

    /// `ρ(|e|)`; never fails.
    pub(crate) fn rho_abs(&self, e: f64) -> f64 {
        let t = e.abs();
        match *self {
            Loss::Square => t * t,
            Loss::Huber { cutoff: c } => {
                if t <= c {
                    0.5 * t * t
                } else {
                    c * (t - 0.5 * c)
                }
            }
            Loss::Power { exponent: p } => t.powf(p),
        }
    }

    /// `ρ'(t)` for `t ≥ 0`.
    pub fn rho_prime(&self, t: f64) -> f64 {
        match *self {
            Loss::Square => 2.0 * t,
            Loss::Huber { cutoff: c } => t.min(c),
            Loss::Power { exponent: p } => {
                if t == 0.0 {
                    0.0
                } else {
                    p * t.powf(p - 1.0)
                }
            }
        }
    }

    /// `ρ''(t)` for `t ≥ 0`. Huber is left-continuous at the cutoff.
    pub fn rho_second(&self, t: f64) -> f64 {
        match *self {
            Loss::Square => 2.0,
            Loss::Huber { cutoff: c } => {
                if t <= c {
                    1.0
                } else {
                    0.0
                }
            }
            Loss::Power { exponent: p } => {
                if p == 2.0 {
                    2.0
                } else if p < 2.0 {
                    p * (p - 1.0) * t.max(POWER_CURVATURE_FLOOR).powf(p - 2.0)
                } else {
                    p * (p - 1.0) * t.powf(p - 2.0)
                }
            }
        }
    }

    /// `ρ'(|e|)²`.
    pub fn g1(&self, e: f64) -> f64 {
        let d = self.rho_prime(e.abs());
        d * d
    }

    /// `ρ''(|e|)`.
    pub fn g2(&self, e: f64) -> f64 {
        self.rho_second(e.abs())
    }

    /// Signed score `ρ'(|e|)·sign(e)`.
    pub fn psi(&self, e: f64) -> f64 {
        let d = self.rho_prime(e.abs());
        if e < 0.0 {
            -d
        } else {
            d
        }
    }

    /// IRLS weight `ρ'(|e|)/|e|`, replaced by its limit `ρ''(0)` at zero.
    pub fn irls_ratio(&self, e: f64) -> f64 {
        let t = e.abs();
        if t == 0.0 {
            self.rho_second(0.0)
        } else {
            self.rho_prime(t) / t
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::Square => write!(f, "square"),
            Loss::Huber { cutoff } => write!(f, "huber:{cutoff}"),
            Loss::Power { exponent } => write!(f, "power:{exponent}"),
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    /// Parses `square`, `huber:<c>` or `power:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        let number = |arg: Option<&str>| -> Result<f64> {
            let arg = arg.ok_or_else(|| {
                Error::InvalidParameter(format!("loss `{name}` needs a numeric argument"))
            })?;
            arg.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad loss argument `{arg}`")))
        };
        match name.to_ascii_lowercase().as_str() {
            "square" if arg.is_none() => Ok(Loss::Square),
            "huber" => Loss::huber(number(arg)?),
            "power" => Loss::power(number(arg)?),
            _ => Err(Error::InvalidParameter(format!(
                "unknown loss `{s}` (expected square, huber:<c> or power:<p>)"
            ))),
        }
    }
}
