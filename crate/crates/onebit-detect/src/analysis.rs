//! Closed-form performance analysis of the one-bit detector.
//!
//! Under the null every agreement indicator is an independent fair coin, so
//! the statistic's mean and variance have simple sums. Under the alternative
//! the indicators are neither independent nor identically distributed; the
//! statistic is treated as Gaussian (central limit approximation) with mean
//! `mu1 = sum(c ln c + (1-c) ln(1-c))` and a variance whose cross terms need
//! the joint probabilities `P(e_i = a, e_j = b | H1)` for every index pair.
//!
//! Those joints are computed by an exact enumeration over the hidden-state
//! patterns of a small window: positions `{i, i+1, i+2}` when `j = i+1`,
//! `{i, .., i+3}` when `j = i+2`, and `{i, i+1, j, j+1}` with a
//! transition-matrix power bridging the gap otherwise. Given the states, the
//! sign-pattern probability factorizes over maximal groups of correlated
//! samples; each group is a small Gaussian orthant probability (the
//! classical three- and four-sample window integrals are exactly such group
//! terms), and inactive samples contribute independent halves. Orthant
//! values are memoized, so a full length-1000 analysis costs a few dozen
//! distinct orthant evaluations.
//!
//! Two covariance conventions are supported, selected by [`GenerationMode`]:
//! the analysis model proper, where active neighbours correlate only at lag
//! one, and the autoregressive convention matching [`GenerationMode::Ar`]
//! data, where an active run has geometric covariance decay `r^k`. The
//! default entry points use the analysis model; the `_for_mode` variants
//! exist to quantify, exactly, how far an autoregressive ground truth sits
//! from the lag-one analysis (they differ only through windows containing
//! active runs of length three or more).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use libm::{fabs, log, pow, sqrt};

use crate::detector::DetectorCoeffs;
use crate::model::{
    state_prob_sequence, GenerationMode, ModelParams, TransitionMatrix,
};
use crate::num::{norm_quantile, norm_sf};
use crate::orthant::{orthant, OrthantError, OrthantSpec, Sign};

/// Marginal convergence tolerance: pair joints are cached by distance once
/// the window-start inactive probability has settled to this accuracy.
const MARGINAL_TOL: f64 = 1e-12;
/// Transition-power convergence tolerance: once the rows of `T^k` agree to
/// this accuracy, states `k` apart are treated as independent.
const MIXING_TOL: f64 = 1e-12;
/// Autoregressive bridge cutoff: an unbroken active stretch between distant
/// pairs is tracked only while `(1-p10)^(d-1) * |r|^(d-1)` (its probability
/// times its correlation effect) exceeds this.
const BRIDGE_TOL: f64 = 1e-14;

/// Errors from the analysis layer.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalysisError {
    /// A pair index is outside `0 ..= n - 2`.
    IndexOutOfRange {
        /// Offending index.
        index: usize,
        /// Largest valid index.
        max: usize,
    },
    /// The two pair indices are equal; joints are defined for distinct pairs.
    EqualPairIndices {
        /// The repeated index.
        index: usize,
    },
    /// Coefficients were built for a different length than the parameters.
    CoeffsMismatch {
        /// `params.n() - 1`.
        expected: usize,
        /// `coeffs.c().len()`.
        got: usize,
    },
    /// The assembled variance came out below `-1e-9`, which indicates an
    /// implementation bug rather than round-off.
    NegativeVariance {
        /// The offending value.
        var1: f64,
    },
    /// Threshold inversion requires strictly positive null variance.
    DegenerateVariance,
    /// Threshold inversion requires a target strictly inside (0, 1).
    TargetOutOfRange {
        /// The rejected target.
        target: f64,
    },
    /// An orthant evaluation failed (for example a non-positive-definite
    /// window covariance).
    Orthant(OrthantError),
}

impl From<OrthantError> for AnalysisError {
    fn from(e: OrthantError) -> Self {
        AnalysisError::Orthant(e)
    }
}

impl core::fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AnalysisError::IndexOutOfRange { index, max } => {
                write!(f, "pair index {index} out of range 0..={max}")
            }
            AnalysisError::EqualPairIndices { index } => {
                write!(f, "pair indices must differ, both were {index}")
            }
            AnalysisError::CoeffsMismatch { expected, got } => {
                write!(f, "expected {expected} coefficients, got {got}")
            }
            AnalysisError::NegativeVariance { var1 } => {
                write!(f, "variance assembled to {var1}, below round-off floor")
            }
            AnalysisError::DegenerateVariance => {
                write!(f, "null variance is zero; threshold not invertible")
            }
            AnalysisError::TargetOutOfRange { target } => {
                write!(f, "target probability {target} not strictly inside (0, 1)")
            }
            AnalysisError::Orthant(e) => write!(f, "orthant evaluation failed: {e}"),
        }
    }
}

impl core::error::Error for AnalysisError {}

/// Upper-tail standard normal probability `Q(x) = P(Z > x)`, accurate to
/// better than 1e-12 relative for `|x| <= 8`.
pub fn q_function(x: f64) -> f64 {
    norm_sf(x)
}

/// Inverse of [`q_function`] on (0, 1): `q_inverse(q_function(x)) = x`.
///
/// Callers must keep `p` strictly inside (0, 1); the fallible wrapper for
/// user-supplied targets is [`threshold_for_pfa`].
pub fn q_inverse(p: f64) -> f64 {
    -norm_quantile(p)
}

/// Mean and variance of the statistic under the null.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullMoments {
    /// `mu0 = 1/2 sum(ln c_i + ln(1 - c_i))`.
    pub mu0: f64,
    /// `var0 = 1/4 sum((ln c_i - ln(1 - c_i))^2)`; zero iff every `c_i` is 1/2.
    pub var0: f64,
}

/// Mean and variance of the statistic under the alternative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AltMoments {
    /// `mu1 = sum(c_i ln c_i + (1 - c_i) ln(1 - c_i))`.
    pub mu1: f64,
    /// `var1 = E{t^2 | H1} - mu1^2`, assembled in covariance form.
    pub var1: f64,
}

/// Joint distribution of one agreement pair `(e_i, e_j)` under the
/// alternative; `p01` is `P(e_i = 0, e_j = 1)` and so on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairJointProbs {
    /// `P(e_i = 0, e_j = 0 | H1)`.
    pub p00: f64,
    /// `P(e_i = 0, e_j = 1 | H1)`.
    pub p01: f64,
    /// `P(e_i = 1, e_j = 0 | H1)`.
    pub p10: f64,
    /// `P(e_i = 1, e_j = 1 | H1)`.
    pub p11: f64,
}

impl PairJointProbs {
    /// Sum of the four cells; 1 up to orthant tolerance.
    pub fn sum(&self) -> f64 {
        self.p00 + self.p01 + self.p10 + self.p11
    }

    /// The cell `P(e_i = a, e_j = b)`.
    pub fn cell(&self, a: u8, b: u8) -> f64 {
        match (a, b) {
            (0, 0) => self.p00,
            (0, 1) => self.p01,
            (1, 0) => self.p10,
            _ => self.p11,
        }
    }
}

/// Null-hypothesis moments of the statistic.
///
/// Every agreement is a fair coin under the null, hence
/// `mu0 = 1/2 sum(ln c_i + ln(1 - c_i))` and
/// `var0 = 1/4 sum((ln c_i - ln(1 - c_i))^2)`.
pub fn null_moments(coeffs: &DetectorCoeffs) -> NullMoments {
    let mut mu0 = 0.0;
    let mut var0 = 0.0;
    for &c in coeffs.c() {
        let l1 = log(c);
        let l0 = log(1.0 - c);
        mu0 += 0.5 * (l1 + l0);
        var0 += 0.25 * (l1 - l0) * (l1 - l0);
    }
    NullMoments { mu0, var0 }
}

/// Theoretical false-alarm probability `Q((th - mu0) / sigma0)`.
///
/// With zero null variance the statistic is a constant, so the probability
/// degenerates to a step: 1 when `th < mu0`, else 0 (ties decide the null).
pub fn pfa_theoretical(th: f64, m: &NullMoments) -> f64 {
    step_or_q(th, m.mu0, m.var0)
}

/// Theoretical detection probability `Q((th - mu1) / sigma1)`, with the same
/// zero-variance step convention as [`pfa_theoretical`].
pub fn pd_theoretical(th: f64, m: &AltMoments) -> f64 {
    step_or_q(th, m.mu1, m.var1)
}

fn step_or_q(th: f64, mu: f64, var: f64) -> f64 {
    if var <= 0.0 {
        if th < mu {
            1.0
        } else {
            0.0
        }
    } else {
        q_function((th - mu) / sqrt(var))
    }
}

/// The threshold whose theoretical false-alarm probability is `target`:
/// `th = mu0 + sigma0 * Qinv(target)`.
///
/// # Errors
///
/// - `TargetOutOfRange` unless `0 < target < 1`.
/// - `DegenerateVariance` when `var0 = 0` (no threshold attains a
///   non-trivial false-alarm probability).
pub fn threshold_for_pfa(target: f64, m: &NullMoments) -> Result<f64, AnalysisError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(AnalysisError::TargetOutOfRange { target });
    }
    if m.var0 <= 0.0 {
        return Err(AnalysisError::DegenerateVariance);
    }
    Ok(m.mu0 + sqrt(m.var0) * q_inverse(target))
}

/// Joint agreement probabilities for the pair `(i, j)` under the
/// lag-one analysis model.
///
/// Indices are zero-based pair indices: `e_i` compares samples `i` and
/// `i + 1`, so valid indices run `0 ..= n - 2`. The `j < i` case is handled
/// by symmetry (swap the off-diagonal cells of the transposed pair).
///
/// # Errors
///
/// - `IndexOutOfRange` / `EqualPairIndices` / `CoeffsMismatch` on malformed
///   inputs.
/// - Propagates orthant failures (non-positive-definite window covariance).
pub fn pair_joint_probs(
    i: usize,
    j: usize,
    params: &ModelParams,
    coeffs: &DetectorCoeffs,
) -> Result<PairJointProbs, AnalysisError> {
    pair_joint_probs_for_mode(i, j, params, coeffs, GenerationMode::ExactTridiagonal)
}

/// [`pair_joint_probs`] under a chosen covariance convention: the lag-one
/// analysis model (`ExactTridiagonal`) or autoregressive run covariances
/// (`Ar`).
///
/// # Errors
///
/// As [`pair_joint_probs`].
pub fn pair_joint_probs_for_mode(
    i: usize,
    j: usize,
    params: &ModelParams,
    coeffs: &DetectorCoeffs,
    mode: GenerationMode,
) -> Result<PairJointProbs, AnalysisError> {
    let max = check_coeffs(params, coeffs)?;
    for index in [i, j] {
        if index > max {
            return Err(AnalysisError::IndexOutOfRange { index, max });
        }
    }
    if i == j {
        return Err(AnalysisError::EqualPairIndices { index: i });
    }
    let mut engine = PairEngine::new(params, mode);
    if j > i {
        let q = engine.joint(i, j - i)?;
        Ok(quad_to_probs(q))
    } else {
        let q = engine.joint(j, i - j)?;
        // P(e_i = a, e_j = b) with i > j is the transposed cell.
        Ok(PairJointProbs {
            p00: q[0],
            p01: q[2],
            p10: q[1],
            p11: q[3],
        })
    }
}

/// Alternative-hypothesis moments under the lag-one analysis model.
///
/// # Errors
///
/// - `CoeffsMismatch` on malformed inputs.
/// - `NegativeVariance` if the assembled variance falls below `-1e-9`
///   (tiny negative round-off above that floor clamps to zero).
/// - Propagates orthant failures: with strong correlation and weak noise the
///   four-sample window covariance of the lag-one model stops being positive
///   definite, and no moments exist.
pub fn alt_moments(
    params: &ModelParams,
    coeffs: &DetectorCoeffs,
) -> Result<AltMoments, AnalysisError> {
    alt_moments_for_mode(params, coeffs, GenerationMode::ExactTridiagonal)
}

/// [`alt_moments`] under a chosen covariance convention; see
/// [`pair_joint_probs_for_mode`].
///
/// # Errors
///
/// As [`alt_moments`].
pub fn alt_moments_for_mode(
    params: &ModelParams,
    coeffs: &DetectorCoeffs,
    mode: GenerationMode,
) -> Result<AltMoments, AnalysisError> {
    check_coeffs(params, coeffs)?;
    let c = coeffs.c();
    let m = c.len();
    let mut l0 = Vec::with_capacity(m);
    let mut l1 = Vec::with_capacity(m);
    let mut g = Vec::with_capacity(m);
    let mut mu1 = 0.0;
    let mut var1 = 0.0;
    for &ci in c {
        let a1 = log(ci);
        let a0 = log(1.0 - ci);
        l1.push(a1);
        l0.push(a0);
        let gi = ci * a1 + (1.0 - ci) * a0;
        g.push(gi);
        mu1 += gi;
        // Bernoulli variance of the per-pair contribution.
        var1 += ci * (1.0 - ci) * (a1 - a0) * (a1 - a0);
    }

    // Cross terms: var1 += 2 sum_{i<j} Cov(term_i, term_j). Joints repeat
    // once the start marginal converges (cache row min(i, i_cap)) and the
    // covariance vanishes once both the bridging power has mixed and any
    // unbroken-stretch effect has decayed (skip d > d_max), so the double
    // sum needs only a small table of distinct windows. Accumulating
    // covariances directly, instead of E{t^2} - mu1^2, avoids cancellation
    // between two ~mu1^2-sized quantities.
    let mut engine = PairEngine::new(params, mode);
    let i_cap = engine.i_cap.min(m.saturating_sub(1));
    let d_max = engine
        .d_star
        .max(engine.intact_reach)
        .min(m.saturating_sub(1));
    let mut table: BTreeMap<(usize, usize), [f64; 4]> = BTreeMap::new();
    for i in 0..m {
        let row = i.min(i_cap);
        for d in 1..=d_max.min(m - 1 - i) {
            let q = match table.get(&(row, d)) {
                Some(&q) => q,
                None => {
                    let q = engine.joint(row, d)?;
                    table.insert((row, d), q);
                    q
                }
            };
            let j = i + d;
            let e_tt = q[0] * l0[i] * l0[j]
                + q[1] * l0[i] * l1[j]
                + q[2] * l1[i] * l0[j]
                + q[3] * l1[i] * l1[j];
            var1 += 2.0 * (e_tt - g[i] * g[j]);
        }
    }
    if var1 < -1e-9 {
        return Err(AnalysisError::NegativeVariance { var1 });
    }
    Ok(AltMoments {
        mu1,
        var1: var1.max(0.0),
    })
}

fn check_coeffs(params: &ModelParams, coeffs: &DetectorCoeffs) -> Result<usize, AnalysisError> {
    let expected = params.n() - 1;
    if coeffs.c().len() != expected {
        return Err(AnalysisError::CoeffsMismatch {
            expected,
            got: coeffs.c().len(),
        });
    }
    Ok(expected - 1)
}

fn quad_to_probs(q: [f64; 4]) -> PairJointProbs {
    PairJointProbs {
        p00: q[0],
        p01: q[1],
        p10: q[2],
        p11: q[3],
    }
}

/// Exact window enumerator behind [`pair_joint_probs`] and [`alt_moments`].
///
/// State patterns over the window positions are weighted by the chain
/// (start marginal, one-step transitions, and a matrix power across the gap
/// of a split window); sign patterns are weighted by products of orthant
/// probabilities over correlated groups. Orthant values are memoized by
/// (offsets, canonical signs), since every window reuses a handful of group
/// covariances.
struct PairEngine<'a> {
    params: &'a ModelParams,
    mode: GenerationMode,
    p0: Vec<f64>,
    t: TransitionMatrix,
    powers: Vec<TransitionMatrix>,
    /// Smallest k with the rows of `T^k` equal within tolerance (states k
    /// apart independent); `usize::MAX` when the chain never mixes.
    d_star: usize,
    /// `T^k` constant (or period-2) beyond the stored powers.
    power_cycle: Option<usize>,
    /// Smallest i with the start marginal converged within tolerance.
    i_cap: usize,
    /// Largest pair distance whose unbroken-stretch effect
    /// `((1 - p10) |r|)^(d-1)` still exceeds tolerance (AR mode only; zero
    /// under the lag-one analysis model).
    intact_reach: usize,
    memo: BTreeMap<u128, f64>,
    marginals: Vec<Option<[f64; 2]>>,
}

impl<'a> PairEngine<'a> {
    fn new(params: &'a ModelParams, mode: GenerationMode) -> Self {
        let n = params.n();
        let p0 = state_prob_sequence(params);
        let i_cap = {
            let last = p0[n - 1];
            let mut cap = n.saturating_sub(2);
            for (i, &v) in p0.iter().enumerate().take(n - 1) {
                if fabs(v - last) <= MARGINAL_TOL {
                    cap = i;
                    break;
                }
            }
            cap
        };
        let t = TransitionMatrix::from_params(params);
        let mut powers = alloc::vec![TransitionMatrix::identity(), t];
        let mut d_star = usize::MAX;
        let mut power_cycle = None;
        let max_k = n.saturating_sub(2).max(1);
        for k in 1..=max_k {
            let cur = powers[k];
            let rows = cur.rows();
            if fabs(rows[0][0] - rows[1][0]) <= MIXING_TOL
                && fabs(rows[0][1] - rows[1][1]) <= MIXING_TOL
            {
                d_star = k;
                powers.truncate(k + 1);
                break;
            }
            if k >= 2 && matrices_equal(&powers[k], &powers[k - 2]) {
                // Period-2 chain (both transitions certain flips).
                power_cycle = Some(2);
                powers.truncate(k + 1);
                break;
            }
            if matrices_equal(&powers[k], &powers[k - 1]) {
                // Fixed point without row mixing (identity chain).
                power_cycle = Some(1);
                powers.truncate(k + 1);
                break;
            }
            if k < max_k {
                powers.push(cur.mul(&t));
            }
        }
        let intact_reach = if mode == GenerationMode::Ar {
            let q = (1.0 - params.p10()) * fabs(params.corr());
            if q <= 0.0 {
                0
            } else {
                1 + (log(BRIDGE_TOL) / log(q)) as usize
            }
        } else {
            0
        };
        let marginals = alloc::vec![None; n.saturating_sub(1)];
        Self {
            params,
            mode,
            p0,
            t,
            powers,
            d_star,
            power_cycle,
            i_cap,
            intact_reach,
            memo: BTreeMap::new(),
            marginals,
        }
    }

    fn power(&self, k: usize) -> &TransitionMatrix {
        if k < self.powers.len() {
            return &self.powers[k];
        }
        match self.power_cycle {
            Some(cycle) => {
                let base = self.powers.len() - cycle;
                &self.powers[base + (k - base) % cycle]
            }
            // Beyond d_star every row equals the stationary distribution.
            None => &self.powers[self.powers.len() - 1],
        }
    }

    fn marg(&self, i: usize, state: usize) -> f64 {
        if state == 0 {
            self.p0[i]
        } else {
            1.0 - self.p0[i]
        }
    }

    /// The quadruple `[p00, p01, p10, p11]` for the pair `(i, i + d)`.
    fn joint(&mut self, i: usize, d: usize) -> Result<[f64; 4], AnalysisError> {
        match d {
            1 => self.contiguous(i, 3),
            2 => self.contiguous(i, 4),
            _ => self.split(i, d),
        }
    }

    /// Contiguous window of `w` samples starting at `i` (`w` = 3 covers the
    /// pair distance 1, `w` = 4 distance 2).
    fn contiguous(&mut self, i: usize, w: usize) -> Result<[f64; 4], AnalysisError> {
        let offsets: [u32; 4] = [0, 1, 2, 3];
        let mut out = [0.0; 4];
        for states in 0..1u8 << w {
            let mut weight = self.marg(i, (states & 1) as usize);
            for k in 0..w - 1 {
                weight *=
                    self.t.rows()[(states >> k & 1) as usize][(states >> (k + 1) & 1) as usize];
            }
            if weight == 0.0 {
                continue;
            }
            for half in 0..1u8 << (w - 1) {
                // Global sign flips have equal probability; fix the first
                // sign and double.
                let signs = half << 1;
                let p = self.sign_prob(&offsets[..w], states, signs, None)?;
                let e_i = usize::from(signs & 1 == (signs >> 1) & 1);
                let e_j = usize::from((signs >> (w - 2)) & 1 == (signs >> (w - 1)) & 1);
                out[(e_i << 1) | e_j] += 2.0 * weight * p;
            }
        }
        Ok(out)
    }

    /// Split window `{i, i+1, i+d, i+d+1}` for pair distance `d >= 3`.
    fn split(&mut self, i: usize, d: usize) -> Result<[f64; 4], AnalysisError> {
        // Probability that the whole stretch between the pairs stays active,
        // which under AR covariances keeps the two pairs correlated. Ignored
        // once its weighted correlation effect drops below tolerance.
        let track_intact = d <= self.intact_reach;
        if !track_intact && self.d_star != usize::MAX && d - 1 >= self.d_star {
            // States across the gap are independent, so the pairs are too.
            let mi = self.pair_marginal(i)?;
            let mj = self.pair_marginal(i + d)?;
            return Ok([
                mi[0] * mj[0],
                mi[0] * mj[1],
                mi[1] * mj[0],
                mi[1] * mj[1],
            ]);
        }
        let offsets: [u32; 4] = [0, 1, d as u32, d as u32 + 1];
        let bridge = *self.power(d - 1);
        let intact = pow(1.0 - self.params.p10(), (d - 1) as f64);
        let mut out = [0.0; 4];
        for states in 0..16u8 {
            let (s0, s1) = ((states & 1) as usize, (states >> 1 & 1) as usize);
            let (s2, s3) = ((states >> 2 & 1) as usize, (states >> 3 & 1) as usize);
            let rows = self.t.rows();
            let base = self.marg(i, s0) * rows[s0][s1] * rows[s2][s3];
            if base == 0.0 {
                continue;
            }
            let across = bridge.rows()[s1][s2];
            let mut parts: [(f64, Option<usize>); 2] = [(0.0, None); 2];
            let part_count = if track_intact && s1 == 1 && s2 == 1 {
                parts[0] = (base * intact, Some(1));
                parts[1] = (base * (across - intact), None);
                2
            } else {
                parts[0] = (base * across, None);
                1
            };
            for &(weight, bridge_edge) in parts.iter().take(part_count) {
                if weight == 0.0 {
                    continue;
                }
                for half in 0..8u8 {
                    let signs = half << 1;
                    let p = self.sign_prob(&offsets, states, signs, bridge_edge)?;
                    let e_i = usize::from(signs & 1 == (signs >> 1) & 1);
                    let e_j = usize::from((signs >> 2) & 1 == (signs >> 3) & 1);
                    out[(e_i << 1) | e_j] += 2.0 * weight * p;
                }
            }
        }
        Ok(out)
    }

    /// Engine marginal `[P(e_i = 0), P(e_i = 1)]` from the two-sample window.
    fn pair_marginal(&mut self, i: usize) -> Result<[f64; 2], AnalysisError> {
        if let Some(m) = self.marginals[i] {
            return Ok(m);
        }
        let offsets: [u32; 2] = [0, 1];
        let mut agree = 0.0;
        let mut disagree = 0.0;
        for states in 0..4u8 {
            let (s0, s1) = ((states & 1) as usize, (states >> 1 & 1) as usize);
            let weight = self.marg(i, s0) * self.t.rows()[s0][s1];
            if weight == 0.0 {
                continue;
            }
            agree += 2.0 * weight * self.sign_prob(&offsets, states, 0b00, None)?;
            disagree += 2.0 * weight * self.sign_prob(&offsets, states, 0b10, None)?;
        }
        let m = [disagree, agree];
        self.marginals[i] = Some(m);
        Ok(m)
    }

    /// `P(sign pattern | state pattern)` for a window: inactive samples are
    /// independent halves, and runs of correlated actives contribute one
    /// orthant probability each. `bridge_edge` links list positions k, k+1
    /// across a gap (the unbroken-stretch case of AR split windows).
    fn sign_prob(
        &mut self,
        offsets: &[u32],
        states: u8,
        signs: u8,
        bridge_edge: Option<usize>,
    ) -> Result<f64, AnalysisError> {
        let m = offsets.len();
        let mut prob = 1.0;
        let mut k = 0;
        while k < m {
            if states >> k & 1 == 0 {
                prob *= 0.5;
                k += 1;
                continue;
            }
            // Extend the correlated group while consecutive positions stay
            // active and connected.
            let start = k;
            while k + 1 < m && states >> (k + 1) & 1 == 1 && self.connected(offsets, k, bridge_edge)
            {
                k += 1;
            }
            let len = k - start + 1;
            if len == 1 {
                prob *= 0.5;
            } else {
                let mut group = [0u32; 4];
                let mut gsigns = 0u8;
                for (gi, pos) in (start..=k).enumerate() {
                    group[gi] = offsets[pos] - offsets[start];
                    gsigns |= (signs >> pos & 1) << gi;
                }
                prob *= self.group_orthant(&group[..len], gsigns)?;
            }
            k += 1;
        }
        Ok(prob)
    }

    fn connected(&self, offsets: &[u32], k: usize, bridge_edge: Option<usize>) -> bool {
        let gap = offsets[k + 1] - offsets[k];
        if gap == 1 {
            return true;
        }
        // Lag-one analysis covariances vanish across any larger gap; AR
        // covariances survive only through an unbroken active stretch.
        self.mode == GenerationMode::Ar && bridge_edge == Some(k)
    }

    /// Memoized orthant probability of one correlated active group.
    fn group_orthant(&mut self, group: &[u32], signs: u8) -> Result<f64, AnalysisError> {
        let m = group.len();
        // Central symmetry: canonicalize so the first sign is negative.
        let mask = (1u8 << m) - 1;
        let canon = if signs & 1 == 1 { !signs & mask } else { signs };
        let mut key = (self.mode as u128) << 120 | (canon as u128) << 112;
        for (idx, &o) in group.iter().enumerate().skip(1) {
            key |= (o as u128) << (32 * (idx - 1));
        }
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let s1 = self.params.sigma1() * self.params.sigma1();
        let diag = s1 + self.params.noise_std() * self.params.noise_std();
        let r = self.params.corr();
        let mut cov = alloc::vec![0.0; m * m];
        let mut all_zero = true;
        for a in 0..m {
            cov[a * m + a] = diag;
            for b in a + 1..m {
                let gap = group[b] - group[a];
                let off = match self.mode {
                    GenerationMode::ExactTridiagonal => {
                        if gap == 1 {
                            r * s1
                        } else {
                            0.0
                        }
                    }
                    GenerationMode::Ar => s1 * pow(r, gap as f64),
                };
                all_zero &= off == 0.0;
                cov[a * m + b] = off;
                cov[b * m + a] = off;
            }
        }
        if all_zero {
            // Uncorrelated group: exact product of marginal halves.
            return Ok(pow(0.5, m as f64));
        }
        let sign_vec: Vec<Sign> = (0..m)
            .map(|b| if canon >> b & 1 == 1 { Sign::Pos } else { Sign::Neg })
            .collect();
        let v = orthant(&OrthantSpec::new(&cov, &sign_vec)?)?;
        self.memo.insert(key, v);
        Ok(v)
    }
}

fn matrices_equal(a: &TransitionMatrix, b: &TransitionMatrix) -> bool {
    let (ra, rb) = (a.rows(), b.rows());
    (0..2).all(|i| (0..2).all(|j| fabs(ra[i][j] - rb[i][j]) <= 1e-15))
}
