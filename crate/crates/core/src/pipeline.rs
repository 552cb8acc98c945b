//! First step, weights, final weighted fit.

use crate::data::Dataset;
use crate::error::Result;
use crate::estimate::{fit_weighted_m, fit_wls, FitResult, MOptions};
use crate::loss::Loss;
use crate::weights::{first_step, FirstStepFit, WeightOutcome, WeightProblem, WeightStrategy};

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveFit {
    pub first_step: FirstStepFit,
    pub outcome: WeightOutcome,
    pub fit: FitResult,
}

/// Weighted fit with the weights chosen by `strategy`. The square loss uses
/// the closed form; other losses start the solver at the first-step fit.
pub fn fit_with_first_step(
    data: &Dataset,
    loss: &Loss,
    fs: &FirstStepFit,
    strategy: &dyn WeightStrategy,
    options: &MOptions,
) -> Result<(WeightOutcome, FitResult)> {
    let outcome = strategy.estimate(&WeightProblem {
        data,
        loss,
        first_step: fs,
    })?;
    let fit = if loss.is_square() {
        fit_wls(data, &outcome.weights)?
    } else {
        let opts = MOptions {
            init: Some(options.init.clone().unwrap_or_else(|| fs.beta0_hat.clone())),
            ..options.clone()
        };
        fit_weighted_m(data, loss, &outcome.weights, &opts)?
    };
    Ok((outcome, fit))
}

pub fn fit_adaptive(
    data: &Dataset,
    loss: &Loss,
    strategy: &dyn WeightStrategy,
    options: &MOptions,
) -> Result<AdaptiveFit> {
    let fs = first_step(data, loss)?;
    let (outcome, fit) = fit_with_first_step(data, loss, &fs, strategy, options)?;
    Ok(AdaptiveFit {
        first_step: fs,
        outcome,
        fit,
    })
}
