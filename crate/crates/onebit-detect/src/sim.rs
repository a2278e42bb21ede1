//! Seeded Monte-Carlo experiment engine.
//!
//! Reproduces the four standard experiments (ROC families over correlation,
//! power over SNR, parameter-sensitivity ROCs, and theory-validation runs)
//! and provides the brute-force oracles the analysis layer is tested
//! against. Everything is deterministic: trial `k` under a hypothesis draws
//! its observation from a counter-derived sub-seed, so a batch is
//! reproducible trial-by-trial regardless of execution order, and the same
//! configuration always yields byte-identical results.
//!
//! The per-trial worker [`trial_statistic`] is pure and shared-state-free on
//! purpose: parallel front ends fan trials out by index and write into
//! disjoint slots, then aggregate single-threaded.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::{
    alt_moments, null_moments, pd_theoretical, pfa_theoretical, threshold_for_pfa,
    AnalysisError, PairJointProbs,
};
use crate::detector::{
    agreement_sequence, detector_coeffs, proportion_se, statistic, DetectorCoeffs,
    DetectorError,
};
use crate::model::{
    noise_std_for_snr, observe, state_prob_sequence, GenerationMode, Hypothesis,
    ModelError, ModelParams,
};
use crate::num::{cholesky_small, sub_seed};

/// Number of pooled-quantile operating thresholds in an empirical ROC.
pub const ROC_THRESHOLD_COUNT: usize = 49;

/// Errors from experiment configuration and execution.
#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    /// A configuration invariant failed.
    InvalidConfig {
        /// What was violated.
        reason: &'static str,
    },
    /// Observation generation failed.
    Model(ModelError),
    /// Statistic evaluation failed.
    Detector(DetectorError),
    /// A theory computation failed.
    Analysis(AnalysisError),
}

impl From<ModelError> for SimError {
    fn from(e: ModelError) -> Self {
        SimError::Model(e)
    }
}

impl From<DetectorError> for SimError {
    fn from(e: DetectorError) -> Self {
        SimError::Detector(e)
    }
}

impl From<AnalysisError> for SimError {
    fn from(e: AnalysisError) -> Self {
        SimError::Analysis(e)
    }
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::InvalidConfig { reason } => write!(f, "invalid config: {reason}"),
            SimError::Model(e) => write!(f, "model error: {e}"),
            SimError::Detector(e) => write!(f, "detector error: {e}"),
            SimError::Analysis(e) => write!(f, "analysis error: {e}"),
        }
    }
}

impl core::error::Error for SimError {}

/// Which parameter axis an experiment sweeps.
#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    /// ROC family over adjacent-active correlation values.
    CorrGrid(Vec<f64>),
    /// Power function over SNR values in dB.
    SnrGridDb(Vec<f64>),
    /// Sensitivity: one ROC per perturbed detector on shared data.
    ParamPerturbations(Vec<Perturbation>),
}

/// Target false-alarm specification.
#[derive(Clone, Debug, PartialEq)]
pub enum PfaSpec {
    /// A single operating false-alarm probability (power experiments).
    Fixed(f64),
    /// Several probabilities of interest (reported theory points).
    Grid(Vec<f64>),
}

/// Multiplicative detector perturbation: the detector runs with
/// `p_hat * p_hat_factor` and `a_i * a_factor` while the data keep the true
/// parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    /// Factor on the adjacent-agreement probability `p_hat`.
    pub p_hat_factor: f64,
    /// Factor on every chain coefficient `a_i`.
    pub a_factor: f64,
    /// Name used in output files.
    pub label: String,
}

impl Perturbation {
    /// The identity perturbation.
    pub fn baseline() -> Self {
        Perturbation {
            p_hat_factor: 1.0,
            a_factor: 1.0,
            label: String::from("baseline"),
        }
    }
}

/// A full experiment description; validated at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    params: ModelParams,
    mode: GenerationMode,
    trials_per_point: usize,
    seed: u64,
    sweep: Sweep,
    pfa: PfaSpec,
    output_path: Option<String>,
}

impl ExperimentConfig {
    /// Builds a validated configuration.
    ///
    /// # Errors
    ///
    /// `InvalidConfig` when `trials_per_point` is zero, a sweep grid is
    /// empty or out of domain (correlations must lie in [0,1), SNRs must be
    /// finite, perturbation factors must be positive and finite), or a
    /// false-alarm probability is not strictly inside (0, 1).
    pub fn new(
        params: ModelParams,
        mode: GenerationMode,
        trials_per_point: usize,
        seed: u64,
        sweep: Sweep,
        pfa: PfaSpec,
        output_path: Option<String>,
    ) -> Result<Self, SimError> {
        if trials_per_point == 0 {
            return Err(SimError::InvalidConfig {
                reason: "trials_per_point must be at least 1",
            });
        }
        match &sweep {
            Sweep::CorrGrid(g) => {
                if g.is_empty() {
                    return Err(SimError::InvalidConfig {
                        reason: "corr grid must be non-empty",
                    });
                }
                if g.iter().any(|&c| !(0.0..1.0).contains(&c)) {
                    return Err(SimError::InvalidConfig {
                        reason: "corr grid values must lie in [0, 1)",
                    });
                }
            }
            Sweep::SnrGridDb(g) => {
                if g.is_empty() {
                    return Err(SimError::InvalidConfig {
                        reason: "snr grid must be non-empty",
                    });
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(SimError::InvalidConfig {
                        reason: "snr grid values must be finite",
                    });
                }
            }
            Sweep::ParamPerturbations(p) => {
                if p.is_empty() {
                    return Err(SimError::InvalidConfig {
                        reason: "perturbation list must be non-empty",
                    });
                }
                if p.iter().any(|q| {
                    !(q.p_hat_factor > 0.0
                        && q.p_hat_factor.is_finite()
                        && q.a_factor > 0.0
                        && q.a_factor.is_finite())
                }) {
                    return Err(SimError::InvalidConfig {
                        reason: "perturbation factors must be positive and finite",
                    });
                }
            }
        }
        let pfa_ok = match &pfa {
            PfaSpec::Fixed(v) => *v > 0.0 && *v < 1.0,
            PfaSpec::Grid(g) => !g.is_empty() && g.iter().all(|&v| v > 0.0 && v < 1.0),
        };
        if !pfa_ok {
            return Err(SimError::InvalidConfig {
                reason: "false-alarm probabilities must lie strictly inside (0, 1)",
            });
        }
        Ok(Self {
            params,
            mode,
            trials_per_point,
            seed,
            sweep,
            pfa,
            output_path,
        })
    }

    /// Base model parameters.
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Signal generation mode, recorded in output metadata.
    pub fn mode(&self) -> GenerationMode {
        self.mode
    }

    /// Monte-Carlo trials per sweep point.
    pub fn trials_per_point(&self) -> usize {
        self.trials_per_point
    }

    /// Master seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The sweep axis.
    pub fn sweep(&self) -> &Sweep {
        &self.sweep
    }

    /// The false-alarm specification.
    pub fn pfa(&self) -> &PfaSpec {
        &self.pfa
    }

    /// Where the front end should write results, if anywhere.
    pub fn output_path(&self) -> Option<&str> {
        self.output_path.as_deref()
    }
}

/// Statistic values of one Monte-Carlo batch under one hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialBatch {
    /// Parameters the batch was generated under.
    pub params: ModelParams,
    /// Generation mode of the signal.
    pub mode: GenerationMode,
    /// Master seed of the batch.
    pub seed: u64,
    /// Hypothesis the observations were drawn from.
    pub hypothesis: Hypothesis,
    /// Statistic values, one per trial.
    pub t: Vec<f64>,
}

/// One empirical ROC row at a fixed operating threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocRow {
    /// Operating threshold.
    pub threshold: f64,
    /// Fraction of null statistics above the threshold.
    pub pfa_emp: f64,
    /// Binomial std error of `pfa_emp`.
    pub pfa_emp_se: f64,
    /// Fraction of alternative statistics above the threshold.
    pub pd_emp: f64,
    /// Binomial std error of `pd_emp`.
    pub pd_emp_se: f64,
    /// Gaussian-approximation false-alarm probability at this threshold.
    pub pfa_theory: f64,
    /// Gaussian-approximation detection probability; NaN when the closed
    /// form does not exist (non-positive-definite analysis window).
    pub pd_theory: f64,
}

/// Empirical ROC: rows sorted by threshold, plus the trapezoidal AUC.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// Rows in increasing threshold order.
    pub rows: Vec<RocRow>,
    /// Trapezoidal area under the empirical (pfa, pd) curve, anchored at
    /// (0,0) and (1,1).
    pub auc: f64,
}

/// One power-function row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerRow {
    /// Sweep point SNR in dB.
    pub snr_db: f64,
    /// Empirical detection probability at the operating threshold.
    pub pd_emp: f64,
    /// Binomial std error of `pd_emp`.
    pub pd_emp_se: f64,
    /// Gaussian-approximation detection probability at the theoretical
    /// threshold for the target false-alarm rate; NaN when unavailable.
    pub pd_theory: f64,
}

/// Power function at fixed false-alarm probability.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerCurve {
    /// The target false-alarm probability.
    pub fixed_pfa: f64,
    /// Rows in sweep order.
    pub rows: Vec<PowerRow>,
}

/// One sensitivity-sweep entry: a perturbed detector's ROC on shared data.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityCurve {
    /// The perturbation the detector ran with.
    pub perturbation: Perturbation,
    /// Its empirical ROC.
    pub curve: RocCurve,
}

/// Monte-Carlo estimate of one pair's joint agreement distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct JointEstimate {
    /// First pair index.
    pub i: usize,
    /// Second pair index.
    pub j: usize,
    /// Trial count.
    pub trials: usize,
    /// Cell counts in (e_i, e_j) order: (0,0), (0,1), (1,0), (1,1). The four
    /// counts always sum to `trials` exactly.
    pub counts: [u64; 4],
    /// Cell frequencies.
    pub probs: PairJointProbs,
    /// Binomial std error per cell, same order as `counts`.
    pub ses: [f64; 4],
}

fn hypothesis_tag(h: Hypothesis) -> u64 {
    match h {
        Hypothesis::H0 => 0,
        Hypothesis::H1 => 1,
    }
}

/// The statistic of trial `k` under `hypothesis`; the pure per-trial worker.
///
/// The observation seed is `sub_seed(sub_seed(seed, tag(hypothesis)), k)`,
/// so any subset of trials can be computed in any order, on any number of
/// workers, with identical results.
///
/// # Errors
///
/// Propagates model errors (e.g. rejected covariance in exact-tridiagonal
/// mode) and detector errors.
pub fn trial_statistic(
    params: &ModelParams,
    mode: GenerationMode,
    coeffs: &DetectorCoeffs,
    seed: u64,
    hypothesis: Hypothesis,
    k: usize,
) -> Result<f64, SimError> {
    let trial_seed = sub_seed(sub_seed(seed, hypothesis_tag(hypothesis)), k as u64);
    let r = observe(params, hypothesis, mode, trial_seed)?;
    let e = agreement_sequence(&r)?;
    Ok(statistic(&e, coeffs)?)
}

/// Runs `trials` Monte-Carlo trials at explicit parameters.
///
/// # Errors
///
/// As [`trial_statistic`].
pub fn run_trials_at(
    params: &ModelParams,
    mode: GenerationMode,
    trials: usize,
    seed: u64,
    hypothesis: Hypothesis,
) -> Result<TrialBatch, SimError> {
    let coeffs = detector_coeffs(params);
    let mut t = Vec::with_capacity(trials);
    for k in 0..trials {
        t.push(trial_statistic(params, mode, &coeffs, seed, hypothesis, k)?);
    }
    Ok(TrialBatch {
        params: *params,
        mode,
        seed,
        hypothesis,
        t,
    })
}

/// Runs one batch of the configured size under `hypothesis` at the
/// configuration's base parameters.
///
/// # Errors
///
/// As [`trial_statistic`].
pub fn run_trials(
    config: &ExperimentConfig,
    hypothesis: Hypothesis,
) -> Result<TrialBatch, SimError> {
    run_trials_at(
        &config.params,
        config.mode,
        config.trials_per_point,
        config.seed,
        hypothesis,
    )
}

/// Type-7 (linear interpolation) quantile of a sorted sample.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    debug_assert!(m > 0);
    let pos = q * (m - 1) as f64;
    let lo = pos as usize;
    if lo + 1 >= m {
        return sorted[m - 1];
    }
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
}

/// Operating thresholds as `count` pooled quantiles of both batches'
/// statistics, at levels `k / (count + 1)` (2%..98% for the default 49).
/// Quantiles, unlike a fixed grid, stay well-placed as the statistic's scale
/// moves with the parameters.
pub fn pooled_thresholds(h0: &TrialBatch, h1: &TrialBatch, count: usize) -> Vec<f64> {
    pooled_thresholds_of(&h0.t, &h1.t, count)
}

fn pooled_thresholds_of(h0_t: &[f64], h1_t: &[f64], count: usize) -> Vec<f64> {
    let mut pool: Vec<f64> = h0_t.iter().chain(h1_t.iter()).copied().collect();
    pool.sort_unstable_by(f64::total_cmp);
    (1..=count)
        .map(|k| quantile_sorted(&pool, k as f64 / (count + 1) as f64))
        .collect()
}

fn exceed_fraction(t: &[f64], th: f64) -> f64 {
    t.iter().filter(|&&v| v > th).count() as f64 / t.len() as f64
}

fn roc_from_parts(
    h0_t: &[f64],
    h1_t: &[f64],
    thresholds: &[f64],
    nm: &crate::analysis::NullMoments,
    am: Option<&crate::analysis::AltMoments>,
) -> RocCurve {
    let mut ths = thresholds.to_vec();
    ths.sort_unstable_by(f64::total_cmp);
    let rows: Vec<RocRow> = ths
        .iter()
        .map(|&th| {
            let pfa_emp = exceed_fraction(h0_t, th);
            let pd_emp = exceed_fraction(h1_t, th);
            RocRow {
                threshold: th,
                pfa_emp,
                pfa_emp_se: proportion_se(pfa_emp, h0_t.len()),
                pd_emp,
                pd_emp_se: proportion_se(pd_emp, h1_t.len()),
                pfa_theory: pfa_theoretical(th, nm),
                pd_theory: am.map_or(f64::NAN, |m| pd_theoretical(th, m)),
            }
        })
        .collect();
    let auc = trapezoid_auc(rows.iter().map(|r| (r.pfa_emp, r.pd_emp)));
    RocCurve { rows, auc }
}

/// Empirical ROC of two batches over the given operating thresholds, with
/// Gaussian-approximation theory columns (computed under the lag-one
/// analysis model regardless of the batches' generation mode; the detection
/// column is NaN where that analysis does not exist).
pub fn empirical_roc(h0: &TrialBatch, h1: &TrialBatch, thresholds: &[f64]) -> RocCurve {
    let coeffs = detector_coeffs(&h1.params);
    let nm = null_moments(&coeffs);
    let am = alt_moments(&h1.params, &coeffs).ok();
    roc_from_parts(&h0.t, &h1.t, thresholds, &nm, am.as_ref())
}

/// Trapezoidal area under a (pfa, pd) point set, anchored at (0,0) and
/// (1,1).
pub fn trapezoid_auc(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut auc = 0.0;
    for w in pts.windows(2) {
        auc += (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5;
    }
    auc
}

/// Linear interpolation of a ROC's detection probability at a false-alarm
/// level, anchored at (0,0) and (1,1).
fn interp_pd(points: &[(f64, f64)], x: f64) -> f64 {
    let idx = points.partition_point(|p| p.0 < x);
    if idx == 0 {
        let (x2, y2) = points[0];
        if x2 <= 0.0 {
            return y2;
        }
        return y2 * x / x2;
    }
    if idx == points.len() {
        let (x1, y1) = points[idx - 1];
        if x1 >= 1.0 {
            return y1;
        }
        return y1 + (1.0 - y1) * (x - x1) / (1.0 - x1);
    }
    let (x1, y1) = points[idx - 1];
    let (x2, y2) = points[idx];
    if x2 == x1 {
        (y1 + y2) * 0.5
    } else {
        y1 + (y2 - y1) * (x - x1) / (x2 - x1)
    }
}

fn roc_points_by_pfa(curve: &RocCurve) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = curve.rows.iter().map(|r| (r.pfa_emp, r.pd_emp)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts
}

/// Largest vertical gap `|pd_base(pfa) - pd_other(pfa)|` over the base
/// curve's operating points, interpolating the other curve in pfa.
pub fn max_vertical_deviation(base: &RocCurve, other: &RocCurve) -> f64 {
    let pts = roc_points_by_pfa(other);
    let mut max_dev = 0.0f64;
    for r in &base.rows {
        let dev = (r.pd_emp - interp_pd(&pts, r.pfa_emp)).abs();
        max_dev = max_dev.max(dev);
    }
    max_dev
}

/// Largest margin of a ROC over the chance diagonal, `max(pd - pfa)`.
pub fn diagonal_margin(curve: &RocCurve) -> f64 {
    curve
        .rows
        .iter()
        .map(|r| r.pd_emp - r.pfa_emp)
        .fold(0.0f64, f64::max)
}

/// Power function over the configured SNR grid at the fixed false-alarm
/// probability.
///
/// Each sweep point rescales the noise std to hit its SNR, draws fresh null
/// and alternative batches from a point-derived sub-seed, takes the
/// empirical `(1 - pfa)` quantile of the null statistics as the operating
/// threshold, and estimates detection on the alternative batch. The theory
/// column evaluates the Gaussian approximation at its own threshold
/// (`threshold_for_pfa`), independent of the Monte-Carlo draw, and is NaN
/// where the closed form is unavailable.
///
/// # Errors
///
/// `InvalidConfig` unless the sweep is an SNR grid with a fixed pfa;
/// propagates model and detector errors.
pub fn power_function(config: &ExperimentConfig) -> Result<PowerCurve, SimError> {
    let Sweep::SnrGridDb(grid) = &config.sweep else {
        return Err(SimError::InvalidConfig {
            reason: "power_function needs an SNR grid sweep",
        });
    };
    let PfaSpec::Fixed(fixed_pfa) = config.pfa else {
        return Err(SimError::InvalidConfig {
            reason: "power_function needs a fixed pfa",
        });
    };
    let mut rows = Vec::with_capacity(grid.len());
    for (point, &snr) in grid.iter().enumerate() {
        let params = config
            .params
            .with_noise_std(noise_std_for_snr(&config.params, snr))?;
        let seed = sub_seed(config.seed, point as u64);
        let h0 = run_trials_at(&params, config.mode, config.trials_per_point, seed, Hypothesis::H0)?;
        let h1 = run_trials_at(&params, config.mode, config.trials_per_point, seed, Hypothesis::H1)?;
        let mut sorted = h0.t.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        let th = quantile_sorted(&sorted, 1.0 - fixed_pfa);
        let pd_emp = exceed_fraction(&h1.t, th);
        let coeffs = detector_coeffs(&params);
        let nm = null_moments(&coeffs);
        let pd_theory = threshold_for_pfa(fixed_pfa, &nm)
            .ok()
            .and_then(|th_theory| {
                alt_moments(&params, &coeffs)
                    .ok()
                    .map(|am| pd_theoretical(th_theory, &am))
            })
            .unwrap_or(f64::NAN);
        rows.push(PowerRow {
            snr_db: snr,
            pd_emp,
            pd_emp_se: proportion_se(pd_emp, h1.t.len()),
            pd_theory,
        });
    }
    Ok(PowerCurve { fixed_pfa, rows })
}

/// One ROC per configured perturbation, all on the same observations.
///
/// Observations are regenerated from the same sub-seeds for every
/// perturbation (bit-identical data); only the detector coefficients change,
/// via multiplicative factors on `p_hat` and the `a_i`. Each entry's
/// operating thresholds are the pooled quantiles of its own statistic
/// batches: a perturbation can shift the statistic's location wholesale, so
/// only a sweep over the perturbed detector's own range traces that
/// detector's ROC, and curves are then compared as (pfa, pd) graphs. Theory
/// columns use each entry's own coefficients (exact for the null; under the
/// alternative the agreement probabilities stay those of the true model, so
/// for perturbed entries the detection column is a reference approximation).
///
/// # Errors
///
/// `InvalidConfig` unless the sweep is a perturbation list; propagates model
/// and detector errors.
pub fn sensitivity_sweep(config: &ExperimentConfig) -> Result<Vec<SensitivityCurve>, SimError> {
    let Sweep::ParamPerturbations(perts) = &config.sweep else {
        return Err(SimError::InvalidConfig {
            reason: "sensitivity_sweep needs a perturbation sweep",
        });
    };
    let params = &config.params;
    let base_coeffs = detector_coeffs(params);
    let h0 = run_trials(config, Hypothesis::H0)?;
    let h1 = run_trials(config, Hypothesis::H1)?;
    let mut out = Vec::with_capacity(perts.len());
    for pert in perts {
        let coeffs = DetectorCoeffs::from_parts(
            base_coeffs.p_hat() * pert.p_hat_factor,
            base_coeffs
                .a()
                .iter()
                .map(|&a| a * pert.a_factor)
                .collect(),
        );
        let (h0_t, h1_t) = if coeffs == base_coeffs {
            (h0.t.clone(), h1.t.clone())
        } else {
            let mut h0_t = Vec::with_capacity(config.trials_per_point);
            let mut h1_t = Vec::with_capacity(config.trials_per_point);
            for k in 0..config.trials_per_point {
                h0_t.push(trial_statistic(
                    params,
                    config.mode,
                    &coeffs,
                    config.seed,
                    Hypothesis::H0,
                    k,
                )?);
                h1_t.push(trial_statistic(
                    params,
                    config.mode,
                    &coeffs,
                    config.seed,
                    Hypothesis::H1,
                    k,
                )?);
            }
            (h0_t, h1_t)
        };
        let thresholds = pooled_thresholds_of(&h0_t, &h1_t, ROC_THRESHOLD_COUNT);
        let nm = null_moments(&coeffs);
        let am = alt_moments(params, &coeffs).ok();
        out.push(SensitivityCurve {
            perturbation: pert.clone(),
            curve: roc_from_parts(&h0_t, &h1_t, &thresholds, &nm, am.as_ref()),
        });
    }
    Ok(out)
}

/// Brute-force Monte-Carlo estimate of pair joint agreement probabilities
/// under the alternative, independent of the analysis layer's enumeration.
///
/// Each trial simulates the activity chain step by step across the span
/// covering both pairs (the start state from the exact marginal, then
/// one-step transitions only; no matrix powers), then draws observations at
/// the four relevant positions: groups of adjacent active observed samples
/// get a joint Gaussian with the lag-one covariance, everything else is
/// independent. This samples exactly the law the closed-form analysis
/// integrates, so agreement frequencies validate its chain weighting,
/// bridging and orthant evaluation end to end.
///
/// # Errors
///
/// `InvalidConfig` for fewer than 1e5 trials (estimates too noisy to be an
/// oracle) or malformed pairs; `Model(RejectedCovariance)` when an active
/// group's covariance is not positive definite.
pub fn mc_joint_event_oracle(
    params: &ModelParams,
    pairs: &[(usize, usize)],
    trials: usize,
    seed: u64,
) -> Result<Vec<JointEstimate>, SimError> {
    if trials < 100_000 {
        return Err(SimError::InvalidConfig {
            reason: "oracle needs at least 100000 trials",
        });
    }
    let max = params.n() - 2;
    if pairs.iter().any(|&(i, j)| i > max || j > max || i == j) {
        return Err(SimError::InvalidConfig {
            reason: "pair indices must be distinct and at most n - 2",
        });
    }
    let p0 = state_prob_sequence(params);
    let s1 = params.sigma1() * params.sigma1();
    let s0 = params.sigma0() * params.sigma0();
    let noise_var = params.noise_std() * params.noise_std();
    let off = params.corr() * s1;
    let t_rows = crate::model::TransitionMatrix::from_params(params);
    let t_rows = *t_rows.rows();
    // Lower Cholesky factors of the active-group covariance, by group size.
    let mut chol: [Option<[[f64; 4]; 4]>; 5] = [None; 5];
    let mut group_chol = |len: usize| -> Result<[[f64; 4]; 4], SimError> {
        if let Some(l) = chol[len] {
            return Ok(l);
        }
        let mut cov = [[0.0f64; 4]; 4];
        for a in 0..len {
            cov[a][a] = s1 + noise_var;
            if a + 1 < len {
                cov[a][a + 1] = off;
                cov[a + 1][a] = off;
            }
        }
        let l = cholesky_small(&cov, len)
            .ok_or(SimError::Model(ModelError::RejectedCovariance { run_len: len }))?;
        chol[len] = Some(l);
        Ok(l)
    };
    let mut out = Vec::with_capacity(pairs.len());
    for (pair_idx, &(i, j)) in pairs.iter().enumerate() {
        let lo = i.min(j);
        let d = i.max(j) - lo;
        // Observed offsets relative to lo; the whole span is state-simulated
        // but only these positions produce observations.
        let observed: Vec<usize> = match d {
            1 => alloc::vec![0, 1, 2],
            2 => alloc::vec![0, 1, 2, 3],
            _ => alloc::vec![0, 1, d, d + 1],
        };
        let span = d + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, pair_idx as u64));
        let mut counts = [0u64; 4];
        let mut states = alloc::vec![false; span];
        let mut signs = alloc::vec![false; observed.len()];
        for _ in 0..trials {
            let mut active = rng.gen_bool(1.0 - p0[lo]);
            states[0] = active;
            for s in states.iter_mut().skip(1) {
                let p_active = t_rows[usize::from(active)][1];
                active = rng.gen_bool(p_active);
                *s = active;
            }
            let mut k = 0;
            while k < observed.len() {
                if !states[observed[k]] {
                    let z: f64 = rng.sample(StandardNormal);
                    signs[k] = libm::sqrt(s0 + noise_var) * z > 0.0;
                    k += 1;
                    continue;
                }
                let start = k;
                while k + 1 < observed.len()
                    && observed[k + 1] == observed[k] + 1
                    && states[observed[k + 1]]
                {
                    k += 1;
                }
                let len = k - start + 1;
                let l = group_chol(len)?;
                let mut z = [0.0f64; 4];
                for zi in z.iter_mut().take(len) {
                    *zi = rng.sample(StandardNormal);
                }
                for (gi, sign) in signs.iter_mut().skip(start).take(len).enumerate() {
                    let x: f64 = (0..=gi).map(|c| l[gi][c] * z[c]).sum();
                    *sign = x > 0.0;
                }
                k += 1;
            }
            let (e_first, e_second) = match d {
                1 => (signs[0] == signs[1], signs[1] == signs[2]),
                _ => (signs[0] == signs[1], signs[2] == signs[3]),
            };
            // Map back to (e_i, e_j) even when the caller gave j < i.
            let (e_i, e_j) = if i < j {
                (e_first, e_second)
            } else {
                (e_second, e_first)
            };
            counts[(usize::from(e_i) << 1) | usize::from(e_j)] += 1;
        }
        let freq = |c: u64| c as f64 / trials as f64;
        let probs = PairJointProbs {
            p00: freq(counts[0]),
            p01: freq(counts[1]),
            p10: freq(counts[2]),
            p11: freq(counts[3]),
        };
        let ses = [
            proportion_se(probs.p00, trials),
            proportion_se(probs.p01, trials),
            proportion_se(probs.p10, trials),
            proportion_se(probs.p11, trials),
        ];
        out.push(JointEstimate {
            i,
            j,
            trials,
            counts,
            probs,
            ses,
        });
    }
    Ok(out)
}

/// Naive comparison detector: decide the alternative iff the agreement
/// count `sum e_i` exceeds `k_threshold`. Serves as the labeled baseline in
/// comparison plots.
///
/// # Errors
///
/// `LengthTooShort` for observations with fewer than two samples.
pub fn agreement_count_baseline(
    r: &crate::model::BitVector,
    k_threshold: usize,
) -> Result<Hypothesis, DetectorError> {
    let e = agreement_sequence(r)?;
    Ok(if e.count_ones() > k_threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BitVector;

    fn sv_config(corr: f64, n: usize, trials: usize, seed: u64, sweep: Sweep) -> ExperimentConfig {
        let params = ModelParams::new(0.95, 0.01 / 0.9, 0.1, 0.01, 1.0, corr, 0.3, n).unwrap();
        ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            trials,
            seed,
            sweep,
            PfaSpec::Fixed(0.3),
            None,
        )
        .unwrap()
    }

    fn snr_params(corr: f64, snr_db: f64, n: usize) -> ModelParams {
        let p = ModelParams::new(0.95, 0.01 / 0.9, 0.1, 0.01, 1.0, corr, 0.3, n).unwrap();
        let noise = noise_std_for_snr(&p, snr_db);
        p.with_noise_std(noise).unwrap()
    }

    #[test]
    fn config_validation() {
        let params = ModelParams::new(0.95, 0.01, 0.1, 0.01, 1.0, 0.5, 0.3, 10).unwrap();
        let bad = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            0,
            1,
            Sweep::CorrGrid(alloc::vec![0.5]),
            PfaSpec::Fixed(0.3),
            None,
        );
        assert!(matches!(bad, Err(SimError::InvalidConfig { .. })));
        let bad = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            1,
            1,
            Sweep::CorrGrid(alloc::vec![]),
            PfaSpec::Fixed(0.3),
            None,
        );
        assert!(matches!(bad, Err(SimError::InvalidConfig { .. })));
        let bad = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            1,
            1,
            Sweep::CorrGrid(alloc::vec![1.0]),
            PfaSpec::Fixed(0.3),
            None,
        );
        assert!(matches!(bad, Err(SimError::InvalidConfig { .. })));
        let bad = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            1,
            1,
            Sweep::SnrGridDb(alloc::vec![-5.0]),
            PfaSpec::Fixed(1.0),
            None,
        );
        assert!(matches!(bad, Err(SimError::InvalidConfig { .. })));
    }

    #[test]
    fn corr_zero_statistics_are_constant() {
        let config = sv_config(0.0, 200, 40, 7, Sweep::CorrGrid(alloc::vec![0.0]));
        let expect = -199.0 * core::f64::consts::LN_2;
        for hyp in [Hypothesis::H0, Hypothesis::H1] {
            let batch = run_trials(&config, hyp).unwrap();
            assert_eq!(batch.t.len(), 40);
            assert!(batch.t.iter().all(|&t| t == expect));
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let config = sv_config(0.6, 150, 25, 99, Sweep::CorrGrid(alloc::vec![0.6]));
        let a = run_trials(&config, Hypothesis::H1).unwrap();
        let b = run_trials(&config, Hypothesis::H1).unwrap();
        assert_eq!(a, b);
        // And a different seed actually changes something.
        let config2 = sv_config(0.6, 150, 25, 100, Sweep::CorrGrid(alloc::vec![0.6]));
        let c = run_trials(&config2, Hypothesis::H1).unwrap();
        assert_ne!(a.t, c.t);
    }

    #[test]
    fn h0_sample_mean_matches_theory() {
        let params = snr_params(0.7, -5.0, 400);
        let trials = 3000;
        let batch =
            run_trials_at(&params, GenerationMode::Ar, trials, 11, Hypothesis::H0).unwrap();
        let coeffs = detector_coeffs(&params);
        let nm = null_moments(&coeffs);
        let mean = batch.t.iter().sum::<f64>() / trials as f64;
        let se = (nm.var0 / trials as f64).sqrt();
        assert!(
            (mean - nm.mu0).abs() < 3.0 * se,
            "mean {mean} vs mu0 {} (se {se})",
            nm.mu0
        );
    }

    #[test]
    fn roc_endpoints_and_monotonicity() {
        let params = snr_params(0.6, -5.0, 120);
        let h0 = run_trials_at(&params, GenerationMode::Ar, 400, 5, Hypothesis::H0).unwrap();
        let h1 = run_trials_at(&params, GenerationMode::Ar, 400, 5, Hypothesis::H1).unwrap();
        let mut ths = pooled_thresholds(&h0, &h1, ROC_THRESHOLD_COUNT);
        ths.push(f64::NEG_INFINITY);
        ths.push(f64::INFINITY);
        let curve = empirical_roc(&h0, &h1, &ths);
        assert_eq!(curve.rows.len(), 51);
        let first = curve.rows.first().unwrap();
        assert_eq!((first.pfa_emp, first.pd_emp), (1.0, 1.0));
        let last = curve.rows.last().unwrap();
        assert_eq!((last.pfa_emp, last.pd_emp), (0.0, 0.0));
        for w in curve.rows.windows(2) {
            assert!(w[0].threshold <= w[1].threshold);
            assert!(w[1].pfa_emp <= w[0].pfa_emp);
            assert!(w[1].pd_emp <= w[0].pd_emp);
        }
        for r in &curve.rows {
            assert!((0.0..=1.0).contains(&r.pfa_emp) && (0.0..=1.0).contains(&r.pd_emp));
            assert!(r.pfa_theory.is_finite());
        }
    }

    #[test]
    fn identical_batches_sit_on_the_diagonal() {
        let params = snr_params(0.6, -5.0, 80);
        let h0 = run_trials_at(&params, GenerationMode::Ar, 300, 3, Hypothesis::H0).unwrap();
        let curve = empirical_roc(&h0, &h0, &pooled_thresholds(&h0, &h0, 25));
        for r in &curve.rows {
            assert_eq!(r.pfa_emp, r.pd_emp);
        }
        assert!((curve.auc - 0.5).abs() < 0.05);
    }

    #[test]
    fn auc_orders_with_correlation() {
        let weak = snr_params(0.2, -5.0, 300);
        let strong = snr_params(0.55, -5.0, 300);
        let mut aucs = Vec::new();
        for params in [weak, strong] {
            let h0 = run_trials_at(&params, GenerationMode::Ar, 600, 21, Hypothesis::H0).unwrap();
            let h1 = run_trials_at(&params, GenerationMode::Ar, 600, 21, Hypothesis::H1).unwrap();
            let curve = empirical_roc(&h0, &h1, &pooled_thresholds(&h0, &h1, ROC_THRESHOLD_COUNT));
            aucs.push(curve.auc);
        }
        assert!(
            aucs[1] > aucs[0] + 0.02,
            "auc(corr 0.55) {} vs auc(corr 0.2) {}",
            aucs[1],
            aucs[0]
        );
    }

    #[test]
    fn trapezoid_auc_known_values() {
        assert!((trapezoid_auc([(0.5, 0.5)]) - 0.5).abs() < 1e-15);
        assert!((trapezoid_auc([(0.5, 1.0)]) - 0.75).abs() < 1e-15);
        assert!((trapezoid_auc(core::iter::empty()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_approaches_pfa_at_low_snr() {
        let params = ModelParams::new(0.95, 0.01 / 0.9, 0.1, 0.01, 1.0, 0.7, 0.3, 150).unwrap();
        let config = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            1500,
            13,
            Sweep::SnrGridDb(alloc::vec![-40.0]),
            PfaSpec::Fixed(0.3),
            None,
        )
        .unwrap();
        let curve = power_function(&config).unwrap();
        let row = &curve.rows[0];
        // Hypotheses nearly merge, so detection collapses to the false-alarm
        // rate within Monte-Carlo noise.
        assert!(
            (row.pd_emp - 0.3).abs() < 4.0 * proportion_se(0.3, 1500) + 0.01,
            "pd {} at -40 dB",
            row.pd_emp
        );
    }

    #[test]
    fn power_with_zero_correlation_is_trivial() {
        let params = ModelParams::new(0.95, 0.01 / 0.9, 0.1, 0.01, 1.0, 0.0, 0.3, 100).unwrap();
        let config = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            500,
            17,
            Sweep::SnrGridDb(alloc::vec![-5.0, 0.0]),
            PfaSpec::Fixed(0.3),
            None,
        )
        .unwrap();
        let curve = power_function(&config).unwrap();
        for row in &curve.rows {
            // Every statistic is the same constant, so nothing exceeds the
            // quantile threshold under either hypothesis.
            assert_eq!(row.pd_emp, 0.0);
            assert!(row.pd_theory.is_nan());
        }
    }

    #[test]
    fn power_requires_matching_sweep() {
        let config = sv_config(0.5, 50, 10, 1, Sweep::CorrGrid(alloc::vec![0.5]));
        assert!(matches!(
            power_function(&config),
            Err(SimError::InvalidConfig { .. })
        ));
        assert!(matches!(
            sensitivity_sweep(&config),
            Err(SimError::InvalidConfig { .. })
        ));
    }

    #[test]
    fn zero_perturbation_reproduces_baseline() {
        let params = snr_params(0.6, -5.0, 100);
        let config = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            300,
            41,
            Sweep::ParamPerturbations(alloc::vec![
                Perturbation::baseline(),
                Perturbation {
                    p_hat_factor: 1.1,
                    a_factor: 1.0,
                    label: String::from("p_hat +10%"),
                },
            ]),
            PfaSpec::Fixed(0.3),
            None,
        )
        .unwrap();
        let curves = sensitivity_sweep(&config).unwrap();
        assert_eq!(curves.len(), 2);
        let h0 = run_trials(&config, Hypothesis::H0).unwrap();
        let h1 = run_trials(&config, Hypothesis::H1).unwrap();
        let base = empirical_roc(&h0, &h1, &pooled_thresholds(&h0, &h1, ROC_THRESHOLD_COUNT));
        // Bit-level equality so NaN theory columns would still compare equal.
        let bits = |r: &RocRow| {
            [
                r.threshold,
                r.pfa_emp,
                r.pfa_emp_se,
                r.pd_emp,
                r.pd_emp_se,
                r.pfa_theory,
                r.pd_theory,
            ]
            .map(f64::to_bits)
        };
        assert_eq!(curves[0].curve.rows.len(), base.rows.len());
        for (a, b) in curves[0].curve.rows.iter().zip(&base.rows) {
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(curves[0].curve.auc.to_bits(), base.auc.to_bits());
        // The perturbed entry really differs somewhere, and it sweeps its
        // own statistic's quantiles rather than the baseline's.
        assert!(curves[1]
            .curve
            .rows
            .iter()
            .zip(&base.rows)
            .any(|(a, b)| bits(a) != bits(b)));
        assert!(curves[1]
            .curve
            .rows
            .iter()
            .zip(&base.rows)
            .any(|(a, b)| a.threshold != b.threshold));
    }

    #[test]
    fn a_factor_across_one_half_mirrors_the_curve() {
        // At corr 0.7 and SNR -5 dB the stationary chain puts every a_i near
        // 0.455, so a factor of 1.1 lifts them all across 1/2. Past that point
        // every c_i = a_i + (1 - 2 a_i) p_hat drops below 1/2, every agreement
        // weight ln(c_i / (1 - c_i)) turns negative, and the statistic's
        // ordering reverses: the curve mirrors below the diagonal. Scaling
        // p_hat by 1.1 or the a_i by 0.9 keeps the weights positive and the
        // curve within a small fraction of its margin.
        let params = snr_params(0.7, -5.0, 400);
        let coeffs = detector_coeffs(&params);
        assert!(coeffs.a().iter().all(|&a| 0.5 / 1.1 < a && a < 0.5));
        let lifted = DetectorCoeffs::from_parts(
            coeffs.p_hat(),
            coeffs.a().iter().map(|&a| a * 1.1).collect(),
        );
        assert!(lifted.c().iter().all(|&c| c < 0.5));

        let mk = |p_hat_factor: f64, a_factor: f64, label: &str| Perturbation {
            p_hat_factor,
            a_factor,
            label: String::from(label),
        };
        let config = ExperimentConfig::new(
            params,
            GenerationMode::Ar,
            1000,
            173,
            Sweep::ParamPerturbations(alloc::vec![
                Perturbation::baseline(),
                mk(1.1, 1.0, "p_hat x1.1"),
                mk(0.9, 1.0, "p_hat x0.9"),
                mk(1.0, 0.9, "a x0.9"),
                mk(1.0, 1.1, "a x1.1"),
            ]),
            PfaSpec::Fixed(0.3),
            None,
        )
        .unwrap();
        let curves = sensitivity_sweep(&config).unwrap();
        let base = &curves[0].curve;
        let margin = diagonal_margin(base);
        assert!(margin > 0.1);
        for entry in &curves[1..4] {
            let dev = max_vertical_deviation(base, &entry.curve);
            assert!(
                dev < 0.25 * margin,
                "{}: deviation {dev} vs margin {margin}",
                entry.perturbation.label
            );
        }
        let mirrored = &curves[4].curve;
        assert!(mirrored.auc < 0.48, "auc {}", mirrored.auc);
        assert!(max_vertical_deviation(base, mirrored) > 0.25 * margin);
    }

    #[test]
    fn oracle_rejects_thin_trials_and_bad_pairs() {
        let params = snr_params(0.5, -5.0, 60);
        assert!(matches!(
            mc_joint_event_oracle(&params, &[(0, 1)], 10, 1),
            Err(SimError::InvalidConfig { .. })
        ));
        assert!(matches!(
            mc_joint_event_oracle(&params, &[(0, 59)], 100_000, 1),
            Err(SimError::InvalidConfig { .. })
        ));
        assert!(matches!(
            mc_joint_event_oracle(&params, &[(4, 4)], 100_000, 1),
            Err(SimError::InvalidConfig { .. })
        ));
    }

    #[test]
    fn oracle_quarter_cells_at_zero_corr() {
        let params = ModelParams::new(0.95, 0.01 / 0.9, 0.1, 0.01, 1.0, 0.0, 0.3, 60).unwrap();
        let estimates = mc_joint_event_oracle(&params, &[(5, 6), (5, 50)], 100_000, 23).unwrap();
        for est in &estimates {
            assert_eq!(est.counts.iter().sum::<u64>(), 100_000);
            for (cell, se) in [est.probs.p00, est.probs.p01, est.probs.p10, est.probs.p11]
                .iter()
                .zip(&est.ses)
            {
                assert!(
                    (cell - 0.25).abs() < 3.0 * se,
                    "pair ({}, {}): cell {cell}",
                    est.i,
                    est.j
                );
            }
        }
    }

    #[test]
    fn oracle_marginals_match_coefficients() {
        let params = snr_params(0.6, -5.0, 60);
        let coeffs = detector_coeffs(&params);
        let estimates =
            mc_joint_event_oracle(&params, &[(5, 6), (10, 13), (30, 20)], 150_000, 29).unwrap();
        for est in &estimates {
            let pi = est.probs.p11 + est.probs.p10;
            let se = proportion_se(pi, est.trials);
            let ci = coeffs.c()[est.i];
            assert!(
                (pi - ci).abs() < 3.0 * se,
                "pair ({}, {}): marginal {pi} vs c {ci}",
                est.i,
                est.j
            );
            let pj = est.probs.p11 + est.probs.p01;
            let se = proportion_se(pj, est.trials);
            let cj = coeffs.c()[est.j];
            assert!((pj - cj).abs() < 3.0 * se);
        }
    }

    #[test]
    fn baseline_detector_examples() {
        // Ten agreeing signs carry nine agreement events, so any k below
        // n - 1 accepts and k = n - 1 rejects.
        let all_agree = BitVector::from_signs(alloc::vec![1; 10]).unwrap();
        assert_eq!(
            agreement_count_baseline(&all_agree, 8).unwrap(),
            Hypothesis::H1
        );
        assert_eq!(
            agreement_count_baseline(&all_agree, 9).unwrap(),
            Hypothesis::H0
        );
        let alternating =
            BitVector::from_signs((0..10).map(|k| if k % 2 == 0 { 1 } else { -1 }).collect())
                .unwrap();
        for k in 0..5 {
            assert_eq!(
                agreement_count_baseline(&alternating, k).unwrap(),
                Hypothesis::H0
            );
        }
    }

    #[test]
    fn interp_and_deviation_helpers() {
        let mk_row = |th: f64, pfa: f64, pd: f64| RocRow {
            threshold: th,
            pfa_emp: pfa,
            pfa_emp_se: 0.0,
            pd_emp: pd,
            pd_emp_se: 0.0,
            pfa_theory: pfa,
            pd_theory: pd,
        };
        let base = RocCurve {
            rows: alloc::vec![mk_row(0.0, 0.8, 0.9), mk_row(1.0, 0.4, 0.7)],
            auc: 0.0,
        };
        assert!(max_vertical_deviation(&base, &base).abs() < 1e-12);
        let shifted = RocCurve {
            rows: alloc::vec![mk_row(0.0, 0.8, 0.8), mk_row(1.0, 0.4, 0.6)],
            auc: 0.0,
        };
        let dev = max_vertical_deviation(&base, &shifted);
        assert!((dev - 0.1).abs() < 1e-12, "dev {dev}");
        assert!((diagonal_margin(&base) - 0.3).abs() < 1e-12);
    }
}
