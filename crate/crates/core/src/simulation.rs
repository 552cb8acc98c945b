//! Monte Carlo comparison of the weighting methods on the heteroscedastic
//! design of [`crate::model`].
//!
//! Replication `r` draws from its own ChaCha stream `(seed, r)`, so results do
//! not depend on scheduling or worker count. All methods in a replication
//! share one sample and one first-step fit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::MOptions;
use crate::loss::Loss;
use crate::model::{true_beta, SigmaModel};
use crate::pipeline::fit_with_first_step;
use crate::stats::BoxStats;
use crate::weights::{first_step, BandwidthChoice, EpsilonChoice, StrategyConfig, WeightRegistry};

/// Largest tolerated share of failed replications per method.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Method {
    #[serde(rename = "first-step")]
    FirstStep,
    #[serde(rename = "parametric")]
    Parametric,
    #[serde(rename = "np")]
    Np,
    #[serde(rename = "sp")]
    Sp,
    #[serde(rename = "sp-index")]
    SpIndex,
    #[serde(rename = "oracle")]
    Oracle,
}

impl Method {
    pub const DEFAULT: [Method; 5] = [
        Method::FirstStep,
        Method::Parametric,
        Method::Np,
        Method::Sp,
        Method::Oracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::FirstStep => "first-step",
            Method::Parametric => "parametric",
            Method::Np => "np",
            Method::Sp => "sp",
            Method::SpIndex => "sp-index",
            Method::Oracle => "oracle",
        }
    }

    /// Registry name of the weight strategy behind the method.
    pub fn strategy(&self) -> &'static str {
        match self {
            Method::FirstStep => "constant",
            Method::Parametric => "parametric",
            Method::Np => "np",
            Method::Sp => "sp-proj",
            Method::SpIndex => "sp-index",
            Method::Oracle => "oracle",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Method = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("method list is empty".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "first-step" | "first_step" | "ols" => Ok(Method::FirstStep),
            "parametric" => Ok(Method::Parametric),
            "np" => Ok(Method::Np),
            "sp" | "sp-proj" => Ok(Method::Sp),
            "sp-index" => Ok(Method::SpIndex),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected first-step, parametric, np, sp, sp-index, oracle)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub q: usize,
    pub sigma: SigmaModel,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    pub bandwidth: BandwidthChoice,
    pub epsilon: EpsilonChoice,
    pub loss: Loss,
    /// Thread cap; results are identical for every value.
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 500,
            q: 4,
            sigma: SigmaModel::Smooth,
            methods: Method::DEFAULT.to_vec(),
            replications: 200,
            seed: 7,
            bandwidth: BandwidthChoice::Cv,
            epsilon: EpsilonChoice::Auto,
            loss: Loss::Square,
            workers: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidParameter("q must be >= 1".into()));
        }
        if self.n < self.q + 2 {
            return Err(Error::InvalidParameter(format!(
                "n = {} is below q + 2 = {}",
                self.n,
                self.q + 2
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods requested".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("workers must be >= 1".into()));
        }
        self.loss.validate()
    }

    fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            bandwidth: self.bandwidth.clone(),
            epsilon: self.epsilon,
            sigma_model: self.sigma,
            truth: Some(true_beta(self.q)),
            ..StrategyConfig::default()
        }
    }
}

/// Generator for replication `r`: the seed picks the key, `r` the stream.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Draws `n` rows of `Y = β₀₁ + β₀₂ᵀX + σ(X)ε` with `X`, `ε` standard normal;
/// each row consumes `q` covariates then one noise draw.
pub fn generate_sample<R: Rng + ?Sized>(n: usize, q: usize, sigma: SigmaModel, rng: &mut R) -> Dataset {
    let beta = true_beta(q);
    let slope = &beta.as_slice()[1..];
    let mut x = Vec::with_capacity(n * q);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        for _ in 0..q {
            x.push(rng.sample::<f64, _>(StandardNormal));
        }
        let row = &x[start..];
        let noise: f64 = rng.sample(StandardNormal);
        let mean = beta[0] + row.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>();
        y.push(mean + sigma.sigma(row, slope) * noise);
    }
    Dataset::from_row_major(y, x, q).expect("generated data is finite")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    #[serde(skip)]
    pub beta: Option<DVector<f64>>,
    pub sq_error: Option<f64>,
    /// `ok`, or the failure reason.
    pub status: String,
}

impl MethodOutcome {
    fn ok(beta: DVector<f64>, truth: &DVector<f64>) -> Self {
        let sq_error = (&beta - truth).norm_squared();
        MethodOutcome {
            beta: Some(beta),
            sq_error: Some(sq_error),
            status: "ok".into(),
        }
    }

    fn failed(err: &Error) -> Self {
        MethodOutcome {
            beta: None,
            sq_error: None,
            status: format!("failed: {}", err.category()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.sq_error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub outcomes: BTreeMap<Method, MethodOutcome>,
}

/// Runs every configured method on replication `index`'s sample.
pub fn run_replication(config: &SimConfig, index: usize) -> Replication {
    let registry = WeightRegistry::builtin();
    run_replication_with(config, index, &registry)
}

fn run_replication_with(config: &SimConfig, index: usize, registry: &WeightRegistry) -> Replication {
    let mut rng = replication_rng(config.seed, index as u64);
    let data = generate_sample(config.n, config.q, config.sigma, &mut rng);
    let truth = true_beta(config.q);
    let mut outcomes = BTreeMap::new();
    let fs = match first_step(&data, &config.loss) {
        Ok(fs) => fs,
        Err(e) => {
            for m in &config.methods {
                outcomes.insert(*m, MethodOutcome::failed(&e));
            }
            return Replication { index, outcomes };
        }
    };
    let scfg = config.strategy_config();
    for &m in &config.methods {
        let outcome = if m == Method::FirstStep {
            MethodOutcome::ok(fs.beta0_hat.clone(), &truth)
        } else {
            let result = registry
                .create(m.strategy(), &scfg)
                .and_then(|s| fit_with_first_step(&data, &config.loss, &fs, s.as_ref(), &MOptions::default()));
            match result {
                Ok((_, fit)) => MethodOutcome::ok(fit.beta, &truth),
                Err(e) => MethodOutcome::failed(&e),
            }
        };
        outcomes.insert(m, outcome);
    }
    Replication { index, outcomes }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub failures: usize,
    #[serde(flatten)]
    pub stats: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub n: usize,
    pub q: usize,
    pub sigma: SigmaModel,
    pub loss: String,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
    #[serde(skip)]
    pub raw: Vec<Replication>,
}

impl SimSummary {
    /// Aggregates per-replication outcomes; errors when a method failed in
    /// more than [`MAX_FAILURE_FRACTION`] of the replications.
    pub fn from_replications(config: &SimConfig, mut raw: Vec<Replication>) -> Result<Self> {
        raw.sort_by_key(|r| r.index);
        let total = raw.len();
        let mut methods = Vec::with_capacity(config.methods.len());
        for &m in &config.methods {
            let errors: Vec<f64> = raw
                .iter()
                .filter_map(|r| r.outcomes.get(&m).and_then(|o| o.sq_error))
                .collect();
            let failures = total - errors.len();
            if failures as f64 > MAX_FAILURE_FRACTION * total as f64 {
                return Err(Error::StudyFailed {
                    method: m.to_string(),
                    failed: failures,
                    total,
                });
            }
            methods.push(MethodSummary {
                method: m,
                failures,
                stats: BoxStats::from_values(&errors),
            });
        }
        Ok(SimSummary {
            n: config.n,
            q: config.q,
            sigma: config.sigma,
            loss: config.loss.to_string(),
            replications: total,
            seed: config.seed,
            methods,
            raw,
        })
    }

    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn median(&self, m: Method) -> Option<f64> {
        self.method(m).and_then(|s| s.stats.map(|b| b.median))
    }

    /// Per-replication squared errors of `m`, `None` where it failed.
    pub fn errors(&self, m: Method) -> Vec<Option<f64>> {
        self.raw
            .iter()
            .map(|r| r.outcomes.get(&m).and_then(|o| o.sq_error))
            .collect()
    }
}

/// Runs all replications, in parallel when more than one worker is allowed.
pub fn run_replications(config: &SimConfig) -> Result<Vec<Replication>> {
    config.validate()?;
    let registry = WeightRegistry::builtin();
    let work = || -> Vec<Replication> {
        (0..config.replications)
            .into_par_iter()
            .map(|r| run_replication_with(config, r, &registry))
            .collect()
    };
    match config.workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {k} workers: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

pub fn run_study(config: &SimConfig) -> Result<SimSummary> {
    let raw = run_replications(config)?;
    SimSummary::from_replications(config, raw)
}
