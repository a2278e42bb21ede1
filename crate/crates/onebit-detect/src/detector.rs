//! The one-bit likelihood-ratio detector.
//!
//! The detector never sees observation amplitudes, only the signs, and its
//! sufficient data is the agreement sequence `e_i = 1{r_i = r_{i+1}}`. Under
//! the alternative, adjacent signs agree with probability
//! `c_i = a_i + (1 - 2 a_i) p_hat`, where `a_i` collects the chain's chance
//! of at least one inactive sample in the pair and `p_hat` is twice the
//! positive-quadrant probability of the active-pair observation covariance.
//! Under the null every agreement is a fair coin, which is what makes the
//! log-likelihood ratio a sum of `ln c_i` and `ln(1 - c_i)` terms against a
//! `-(N-1) ln 2` baseline absorbed into the threshold.
//!
//! Coefficients depend only on parameters, so one [`DetectorCoeffs`] is
//! computed per parameter set and shared across Monte-Carlo trials.

use alloc::vec::Vec;

use libm::{log, sqrt};

use crate::model::{BitVector, Hypothesis, ModelParams};
use crate::orthant::{orthant2, pair_correlation};

/// Floor/ceiling applied to each `c_i` before logging, guarding parameter
/// corners where the raw coefficient hits 0 or 1 exactly.
const C_CLIP: f64 = 1e-12;

/// Errors from detector construction and evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DetectorError {
    /// The bit vector has fewer than two entries, so no pair exists.
    LengthTooShort {
        /// Observed length.
        got: usize,
    },
    /// Agreement sequence and coefficient lengths disagree.
    LengthMismatch {
        /// Coefficient count.
        expected: usize,
        /// Agreement count.
        got: usize,
    },
    /// A per-term probability was not strictly positive; cannot occur for
    /// coefficients built by this crate, guarded anyway.
    DegenerateLog,
    /// The prior must lie strictly between 0 and 1.
    PriorOutOfRange,
}

impl core::fmt::Display for DetectorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DetectorError::LengthTooShort { got } => {
                write!(f, "need at least 2 observations, got {got}")
            }
            DetectorError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} agreement terms, got {got}")
            }
            DetectorError::DegenerateLog => {
                write!(f, "per-term probability not strictly positive")
            }
            DetectorError::PriorOutOfRange => {
                write!(f, "prior must satisfy 0 < prior < 1")
            }
        }
    }
}

impl core::error::Error for DetectorError {}

/// Adjacent-sign agreement indicators: `e_i = 1` iff `r_i = r_{i+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgreementSequence(Vec<u8>);

impl AgreementSequence {
    /// Indicator values, length `n - 1`.
    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    /// Number of indicators.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Whether the sequence is empty (never true for validated input).
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of agreements.
    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }
}

/// Per-pair detector coefficients for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorCoeffs {
    p_hat: f64,
    a: Vec<f64>,
    c: Vec<f64>,
}

impl DetectorCoeffs {
    /// Twice the positive-quadrant probability of the active-pair
    /// observation covariance.
    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    /// The chain mixing coefficients `a_i`, length `n - 1`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Agreement probabilities under the alternative, `c_i`, length `n - 1`,
    /// clipped into `[1e-12, 1 - 1e-12]`.
    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Builds coefficients directly from raw `a_i` values and `p_hat`;
    /// entry point for sensitivity experiments that perturb either factor.
    pub fn from_parts(p_hat: f64, a: Vec<f64>) -> Self {
        let c = a
            .iter()
            .map(|&ai| (ai + (1.0 - 2.0 * ai) * p_hat).clamp(C_CLIP, 1.0 - C_CLIP))
            .collect();
        Self { p_hat, a, c }
    }
}

/// Computes the agreement sequence of a sign vector.
///
/// # Errors
///
/// `LengthTooShort` if fewer than two bits are present.
pub fn agreement_sequence(r: &BitVector) -> Result<AgreementSequence, DetectorError> {
    let bits = r.as_slice();
    if bits.len() < 2 {
        return Err(DetectorError::LengthTooShort { got: bits.len() });
    }
    let e = bits
        .windows(2)
        .map(|w| u8::from(w[0] == w[1]))
        .collect();
    Ok(AgreementSequence(e))
}

/// Computes `p_hat`, the `a_i`, and the `c_i` for one parameter set.
///
/// `a_i = p_{i,0}/2 + p10 (1 - p_{i,0})/2` uses the inactive-state marginal
/// at the pair's first sample, and `c_i = a_i + (1 - 2 a_i) p_hat`.
pub fn detector_coeffs(params: &ModelParams) -> DetectorCoeffs {
    let p_hat = 2.0 * orthant2(pair_correlation(params));
    let p0 = crate::model::state_prob_sequence(params);
    let a: Vec<f64> = p0[..params.n() - 1]
        .iter()
        .map(|&pi0| pi0 / 2.0 + params.p10() * (1.0 - pi0) / 2.0)
        .collect();
    DetectorCoeffs::from_parts(p_hat, a)
}

/// The log-likelihood statistic `t = sum_i e_i ln c_i + (1 - e_i) ln(1 - c_i)`.
///
/// The `e_i = 0` branch uses the identity
/// `a_i + (1 - 2 a_i)(1 - p_hat) = 1 - c_i`. Terms are accumulated in the
/// centered form `sum(ln term + ln 2) - (n - 1) ln 2`, algebraically the
/// same sum, so the degenerate `corr = 0` detector (every term 1/2) lands
/// bitwise on the symmetric-prior threshold instead of a rounding hair away.
///
/// # Errors
///
/// - `LengthMismatch` if the agreement and coefficient lengths differ.
/// - `DegenerateLog` if a per-term probability is not strictly positive.
pub fn statistic(e: &AgreementSequence, coeffs: &DetectorCoeffs) -> Result<f64, DetectorError> {
    if e.len() != coeffs.c.len() {
        return Err(DetectorError::LengthMismatch {
            expected: coeffs.c.len(),
            got: e.len(),
        });
    }
    let mut centered = 0.0;
    for (&ei, &ci) in e.0.iter().zip(&coeffs.c) {
        let term = if ei == 1 { ci } else { 1.0 - ci };
        if term <= 0.0 {
            return Err(DetectorError::DegenerateLog);
        }
        centered += log(term) + core::f64::consts::LN_2;
    }
    Ok(centered - e.len() as f64 * core::f64::consts::LN_2)
}

/// The decision threshold `th = ln(prior / (1 - prior)) - (n - 1) ln 2`.
///
/// # Errors
///
/// `PriorOutOfRange` unless `0 < prior_h0 < 1`.
pub fn threshold(prior_h0: f64, n: usize) -> Result<f64, DetectorError> {
    if !(prior_h0 > 0.0 && prior_h0 < 1.0) {
        return Err(DetectorError::PriorOutOfRange);
    }
    Ok(log(prior_h0 / (1.0 - prior_h0)) - (n as f64 - 1.0) * core::f64::consts::LN_2)
}

/// Outcome of one detection: the statistic, the threshold it was compared
/// against, and the decision `H1` iff `statistic > threshold` (strict).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionResult {
    /// Log-likelihood statistic t.
    pub statistic: f64,
    /// Decision threshold th.
    pub threshold: f64,
    /// `H1` iff `statistic > threshold`.
    pub decision: Hypothesis,
}

/// Runs the full detector on one sign vector.
///
/// Ties decide `H0`: the rule is strict `t > th`, which only matters on the
/// measure-zero boundary (and identically when `corr = 0`, where `t = th`
/// for a symmetric prior).
///
/// # Errors
///
/// Propagates [`agreement_sequence`], [`statistic`], and [`threshold`]
/// errors, plus `LengthMismatch` if `r` is not `params.n()` long.
pub fn detect(r: &BitVector, params: &ModelParams) -> Result<DetectionResult, DetectorError> {
    if r.len() != params.n() {
        return Err(DetectorError::LengthMismatch {
            expected: params.n(),
            got: r.len(),
        });
    }
    let coeffs = detector_coeffs(params);
    detect_with_coeffs(r, &coeffs, params.prior_h0(), params.n())
}

/// [`detect`] with precomputed coefficients, for trial loops that share one
/// coefficient set.
///
/// # Errors
///
/// As [`detect`].
pub fn detect_with_coeffs(
    r: &BitVector,
    coeffs: &DetectorCoeffs,
    prior_h0: f64,
    n: usize,
) -> Result<DetectionResult, DetectorError> {
    let e = agreement_sequence(r)?;
    let t = statistic(&e, coeffs)?;
    let th = threshold(prior_h0, n)?;
    Ok(DetectionResult {
        statistic: t,
        threshold: th,
        decision: if t > th { Hypothesis::H1 } else { Hypothesis::H0 },
    })
}

/// Standard error of an empirical proportion, `sqrt(p(1-p)/trials)`.
pub fn proportion_se(p: f64, trials: usize) -> f64 {
    sqrt(p * (1.0 - p) / trials as f64)
}
