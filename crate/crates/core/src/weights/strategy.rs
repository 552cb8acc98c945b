//! Weight routes as interchangeable strategies, selectable by name.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::Serialize;

use super::{
    epsilon_perturbation_with, oracle_weights, parametric_weights, ClampedWeights, FirstStepFit, SlopeNorm,
};
use crate::bandwidth::{cv_bandwidth, default_grid, CvResult, SmoothingMode};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::loss::Loss;
use crate::model::{true_beta, SigmaModel};
use crate::smoothing::{nw_ratio_at_samples, Embedding};

#[derive(Debug, Clone, PartialEq, Default)]
pub enum BandwidthChoice {
    /// Cross-validated over the default grid around the pilot bandwidth.
    #[default]
    Cv,
    /// Cross-validated over an explicit grid.
    CvGrid(Vec<f64>),
    Fixed(f64),
}

impl FromStr for BandwidthChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("cv") {
            return Ok(BandwidthChoice::Cv);
        }
        match s.parse::<f64>() {
            Ok(h) if h.is_finite() && h > 0.0 => Ok(BandwidthChoice::Fixed(h)),
            _ => Err(Error::InvalidParameter(format!(
                "bandwidth must be `cv` or a positive number, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EpsilonChoice {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for EpsilonChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(EpsilonChoice::Auto);
        }
        match s.parse::<f64>() {
            Ok(e) if e.is_finite() && e >= 0.0 => Ok(EpsilonChoice::Fixed(e)),
            _ => Err(Error::InvalidParameter(format!(
                "epsilon must be `auto` or a nonnegative number, got `{s}`"
            ))),
        }
    }
}

/// Everything a strategy factory may need.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kernel: KernelFamily,
    pub bandwidth: BandwidthChoice,
    pub epsilon: EpsilonChoice,
    pub slope_norm: SlopeNorm,
    /// Variance model behind the parametric family and the oracle.
    pub sigma_model: SigmaModel,
    /// True coefficients for the oracle; the simulation design's when absent.
    pub truth: Option<DVector<f64>>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            kernel: KernelFamily::Epanechnikov,
            bandwidth: BandwidthChoice::Cv,
            epsilon: EpsilonChoice::Auto,
            slope_norm: SlopeNorm::Slope,
            sigma_model: SigmaModel::Smooth,
            truth: None,
        }
    }
}

pub struct WeightProblem<'a> {
    pub data: &'a Dataset,
    pub loss: &'a Loss,
    pub first_step: &'a FirstStepFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub value: f64,
    /// `cv` or `fixed`.
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightOutcome {
    pub weights: Vec<f64>,
    pub clamp_count: usize,
    pub bandwidth: Option<BandwidthReport>,
    pub epsilon: Option<f64>,
}

impl WeightOutcome {
    fn plain(weights: Vec<f64>) -> Self {
        WeightOutcome {
            weights,
            clamp_count: 0,
            bandwidth: None,
            epsilon: None,
        }
    }
}

impl From<ClampedWeights> for WeightOutcome {
    fn from(c: ClampedWeights) -> Self {
        WeightOutcome {
            weights: c.weights,
            clamp_count: c.clamp_count,
            bandwidth: None,
            epsilon: None,
        }
    }
}

pub trait WeightStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn estimate(&self, problem: &WeightProblem<'_>) -> Result<WeightOutcome>;
}

struct ConstantWeights;

impl WeightStrategy for ConstantWeights {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn estimate(&self, p: &WeightProblem<'_>) -> Result<WeightOutcome> {
        Ok(WeightOutcome::plain(vec![1.0; p.data.n()]))
    }
}

struct ParametricWeights {
    model: SigmaModel,
}

impl WeightStrategy for ParametricWeights {
    fn name(&self) -> &'static str {
        "parametric"
    }

    fn estimate(&self, p: &WeightProblem<'_>) -> Result<WeightOutcome> {
        let model = self.model;
        let family = move |x: &[f64], beta: &DVector<f64>| model.inverse_variance(x, &beta.as_slice()[1..]);
        Ok(parametric_weights(family, p.first_step, p.data)?.into())
    }
}

struct OracleWeights {
    model: SigmaModel,
    truth: Option<DVector<f64>>,
}

impl WeightStrategy for OracleWeights {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn estimate(&self, p: &WeightProblem<'_>) -> Result<WeightOutcome> {
        let truth = self.truth.clone().unwrap_or_else(|| true_beta(p.data.q()));
        if truth.len() != p.data.p() {
            return Err(Error::DimensionMismatch {
                expected: p.data.p(),
                got: truth.len(),
            });
        }
        let slope = &truth.as_slice()[1..];
        Ok(oracle_weights(|x| self.model.inverse_variance(x, slope), p.data)?.into())
    }
}

/// Kernel smoothing of `g₂` over `g₁` in one of the three geometries.
struct SmoothedWeights {
    mode: SmoothingMode,
    kernel: KernelFamily,
    bandwidth: BandwidthChoice,
    epsilon: EpsilonChoice,
    slope_norm: SlopeNorm,
}

impl WeightStrategy for SmoothedWeights {
    fn name(&self) -> &'static str {
        match self.mode {
            SmoothingMode::Np => "np",
            SmoothingMode::SpIndex => "sp-index",
            SmoothingMode::SpProjected => "sp-proj",
        }
    }

    fn estimate(&self, p: &WeightProblem<'_>) -> Result<WeightOutcome> {
        let eps = match (self.mode, self.epsilon) {
            (SmoothingMode::SpProjected, EpsilonChoice::Auto) => {
                Some(epsilon_perturbation_with(p.data, p.first_step, self.slope_norm)?)
            }
            (SmoothingMode::SpProjected, EpsilonChoice::Fixed(e)) => Some(e),
            _ => None,
        };
        let emb = self.mode.embedding(p.data, p.first_step, eps.unwrap_or(0.0))?;
        let kernel = Kernel::new(self.kernel, emb.dim())?;
        let report = self.select_bandwidth(&emb, p.first_step, &kernel)?;
        let weights = smooth_scores(&emb, &kernel, report.value, p)?;
        Ok(WeightOutcome {
            weights,
            clamp_count: 0,
            bandwidth: Some(report),
            epsilon: eps,
        })
    }
}

impl SmoothedWeights {
    fn select_bandwidth(&self, emb: &Embedding, fs: &FirstStepFit, kernel: &Kernel) -> Result<BandwidthReport> {
        let grid = match &self.bandwidth {
            BandwidthChoice::Fixed(h) => {
                return Ok(BandwidthReport {
                    value: *h,
                    method: "fixed",
                    cv: None,
                })
            }
            BandwidthChoice::Cv => default_grid(emb),
            BandwidthChoice::CvGrid(g) => g.clone(),
        };
        let cv = cv_bandwidth(emb, fs, kernel, &grid)?;
        Ok(BandwidthReport {
            value: cv.h_cv,
            method: "cv",
            cv: Some(cv),
        })
    }
}

fn smooth_scores(emb: &Embedding, kernel: &Kernel, h: f64, p: &WeightProblem<'_>) -> Result<Vec<f64>> {
    let g2: Vec<f64> = p.first_step.residuals.iter().map(|e| p.loss.g2(*e)).collect();
    let g1: Vec<f64> = p.first_step.residuals.iter().map(|e| p.loss.g1(*e)).collect();
    nw_ratio_at_samples(emb, kernel, h, &g2, &g1)
}

pub type StrategyFactory = Box<dyn Fn(&StrategyConfig) -> Box<dyn WeightStrategy> + Send + Sync>;

/// Name → factory table for weight strategies.
pub struct WeightRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl fmt::Debug for WeightRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightRegistry").field("names", &self.names()).finish()
    }
}

impl WeightRegistry {
    pub fn empty() -> Self {
        WeightRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// `constant`, `parametric`, `np`, `sp-index`, `sp-proj` and `oracle`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("constant", |_| Box::new(ConstantWeights));
        r.register("parametric", |c| {
            Box::new(ParametricWeights {
                model: c.sigma_model,
            })
        });
        r.register("oracle", |c| {
            Box::new(OracleWeights {
                model: c.sigma_model,
                truth: c.truth.clone(),
            })
        });
        for (name, mode) in [
            ("np", SmoothingMode::Np),
            ("sp-index", SmoothingMode::SpIndex),
            ("sp-proj", SmoothingMode::SpProjected),
        ] {
            r.register(name, move |c| {
                Box::new(SmoothedWeights {
                    mode,
                    kernel: c.kernel,
                    bandwidth: c.bandwidth.clone(),
                    epsilon: c.epsilon,
                    slope_norm: c.slope_norm,
                })
            });
        }
        r
    }

    /// Adds or replaces a factory.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StrategyConfig) -> Box<dyn WeightStrategy> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, config: &StrategyConfig) -> Result<Box<dyn WeightStrategy>> {
        self.factories
            .get(name)
            .map(|f| f(config))
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }
}

impl Default for WeightRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
