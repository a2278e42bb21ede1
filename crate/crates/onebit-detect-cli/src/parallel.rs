//! Parallel trial batches.
//!
//! Trials are embarrassingly parallel: each worker derives its own
//! observation seed from the (seed, hypothesis, trial index) triple and
//! writes into its own slot, so the result is bit-identical to the
//! sequential path regardless of worker count or scheduling.

use rayon::prelude::*;

use onebit_detect::detector::detector_coeffs;
use onebit_detect::model::GenerationMode;
use onebit_detect::sim::{trial_statistic, SimError, TrialBatch};
use onebit_detect::{Hypothesis, ModelParams};

use crate::error::CliError;

/// Parallel counterpart of `sim::run_trials_at`; bit-identical output.
///
/// # Errors
///
/// Propagates per-trial model or detector failures.
pub fn parallel_trials_at(
    params: &ModelParams,
    mode: GenerationMode,
    trials: usize,
    seed: u64,
    hypothesis: Hypothesis,
) -> Result<TrialBatch, CliError> {
    let coeffs = detector_coeffs(params);
    let t: Result<Vec<f64>, SimError> = (0..trials)
        .into_par_iter()
        .map(|k| trial_statistic(params, mode, &coeffs, seed, hypothesis, k))
        .collect();
    Ok(TrialBatch {
        params: *params,
        mode,
        seed,
        hypothesis,
        t: t?,
    })
}
