//! The Markovian Bernoulli-Gaussian signal model.
//!
//! A length-N signal `s` is sparse in blocks: each sample is either inactive
//! (zero-mean Gaussian with small std `sigma0`) or active (zero-mean Gaussian
//! with std `sigma1`), and the activity labels follow a two-state first-order
//! Markov chain with transition probabilities `p01` (inactive to active) and
//! `p10` (active to inactive). Adjacent samples that are both active have
//! correlation coefficient `corr`; all other pairs are uncorrelated, so
//! activity arrives as internally correlated bursts.
//!
//! The receiver sees only signs: under hypothesis `H0` the observation is
//! `sign(n_i)` for white Gaussian noise `n` with std `noise_std`, and under
//! `H1` it is `sign(s_i + n_i)`. Every sampling operation takes an explicit
//! seed and is bit-reproducible; independent random streams are derived with
//! [`crate::num::sub_seed`].

use alloc::vec::Vec;

use libm::{log10, pow, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::num::{cholesky_tridiag, sub_seed};

/// The binary decision space: signal absent (`H0`) or present (`H1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Signal absent: observations are signs of pure noise.
    H0,
    /// Signal present: observations are signs of signal plus noise.
    H1,
}

/// Activity label of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum State {
    /// Low-variance (background) sample.
    Inactive,
    /// High-variance (burst) sample.
    Active,
}

/// How correlated active runs are sampled.
///
/// The model pins down only the adjacent-pair moment
/// `E[s_i s_{i+1}] = corr * sigma1^2` inside an active run; it does not name a
/// full joint distribution for runs longer than two. The two modes below are
/// the two natural completions, and they genuinely differ at lag 2 and
/// beyond.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GenerationMode {
    /// First-order autoregression within each run: coefficient `corr`,
    /// innovation std `sigma1 * sqrt(1 - corr^2)`. Reproduces the stated
    /// lag-1 moment exactly, has lag-k correlation `corr^k`, and is valid
    /// for every `corr` in [0,1). The default.
    #[default]
    Ar,
    /// Sample each run from the tridiagonal covariance (diagonal `sigma1^2`,
    /// off-diagonal `corr * sigma1^2`, zero beyond lag 1) via Cholesky
    /// factorization. Matches the closed-form analysis exactly, but that
    /// covariance stops being positive definite for runs of length `m` when
    /// `corr >= 1/(2 cos(pi/(m+1)))`, so sampling fails on long runs at high
    /// correlation.
    ExactTridiagonal,
}

/// Errors from model construction and sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelError {
    /// A parameter failed validation.
    InvalidParam {
        /// Field name as spelled in [`ModelParams`].
        name: &'static str,
        /// What the constraint is.
        reason: &'static str,
    },
    /// Exact-tridiagonal generation hit an active run whose covariance is
    /// not positive definite.
    RejectedCovariance {
        /// Length of the offending run.
        run_len: usize,
    },
    /// A sequence argument does not have the expected length.
    LengthMismatch {
        /// Required length.
        expected: usize,
        /// Actual length.
        got: usize,
    },
    /// A bit vector entry was not -1 or +1.
    InvalidBit,
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::InvalidParam { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            ModelError::RejectedCovariance { run_len } => write!(
                f,
                "rejected covariance: active run of length {run_len} is not positive definite in exact-tridiagonal mode"
            ),
            ModelError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            ModelError::InvalidBit => write!(f, "bit vector entries must be -1 or +1"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Validated model parameters; the single record every operation consumes.
///
/// Immutable after construction. Use the `with_*` methods to derive modified
/// copies (each re-validates).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    p10_init: f64,
    p01: f64,
    p10: f64,
    sigma0: f64,
    sigma1: f64,
    corr: f64,
    noise_std: f64,
    n: usize,
    prior_h0: f64,
}

impl ModelParams {
    /// Builds a validated parameter set with the default equal prior
    /// `prior_h0 = 0.5`.
    ///
    /// # Errors
    ///
    /// `InvalidParam` if any probability is outside [0,1], any std is not
    /// strictly positive and finite, `corr` is outside [0,1), or `n < 2`
    /// (the detector statistic needs at least one adjacent pair).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p10_init: f64,
        p01: f64,
        p10: f64,
        sigma0: f64,
        sigma1: f64,
        corr: f64,
        noise_std: f64,
        n: usize,
    ) -> Result<Self, ModelError> {
        let p = Self {
            p10_init,
            p01,
            p10,
            sigma0,
            sigma1,
            corr,
            noise_std,
            n,
            prior_h0: 0.5,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ModelError> {
        fn probability(name: &'static str, v: f64) -> Result<(), ModelError> {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::InvalidParam {
                    name,
                    reason: "must be a probability in [0, 1]",
                });
            }
            Ok(())
        }
        fn positive(name: &'static str, v: f64) -> Result<(), ModelError> {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParam {
                    name,
                    reason: "must be strictly positive and finite",
                });
            }
            Ok(())
        }
        probability("p10_init", self.p10_init)?;
        probability("p01", self.p01)?;
        probability("p10", self.p10)?;
        positive("sigma0", self.sigma0)?;
        positive("sigma1", self.sigma1)?;
        positive("noise_std", self.noise_std)?;
        if !(0.0..1.0).contains(&self.corr) {
            return Err(ModelError::InvalidParam {
                name: "corr",
                reason: "must lie in [0, 1)",
            });
        }
        if self.n < 2 {
            return Err(ModelError::InvalidParam {
                name: "n",
                reason: "must be at least 2",
            });
        }
        if !(self.prior_h0 > 0.0 && self.prior_h0 < 1.0) {
            return Err(ModelError::InvalidParam {
                name: "prior_h0",
                reason: "must lie strictly inside (0, 1)",
            });
        }
        Ok(())
    }

    /// Copy with a different prior `P(H0)`.
    pub fn with_prior_h0(mut self, prior_h0: f64) -> Result<Self, ModelError> {
        self.prior_h0 = prior_h0;
        self.validate()?;
        Ok(self)
    }

    /// Copy with a different noise std.
    pub fn with_noise_std(mut self, noise_std: f64) -> Result<Self, ModelError> {
        self.noise_std = noise_std;
        self.validate()?;
        Ok(self)
    }

    /// Copy with a different adjacent-active correlation coefficient.
    pub fn with_corr(mut self, corr: f64) -> Result<Self, ModelError> {
        self.corr = corr;
        self.validate()?;
        Ok(self)
    }

    /// Copy with a different signal length.
    pub fn with_n(mut self, n: usize) -> Result<Self, ModelError> {
        self.n = n;
        self.validate()?;
        Ok(self)
    }

    /// Copy with a different initial inactive probability; setting it to the
    /// chain's stationary value makes the state marginals constant in i.
    pub fn with_p10_init(mut self, p10_init: f64) -> Result<Self, ModelError> {
        self.p10_init = p10_init;
        self.validate()?;
        Ok(self)
    }

    /// Probability that the first sample is inactive.
    pub fn p10_init(&self) -> f64 {
        self.p10_init
    }

    /// Inactive-to-active transition probability.
    pub fn p01(&self) -> f64 {
        self.p01
    }

    /// Active-to-inactive transition probability.
    pub fn p10(&self) -> f64 {
        self.p10
    }

    /// Std of inactive samples.
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Std of active samples.
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    /// Correlation coefficient of adjacent active samples.
    pub fn corr(&self) -> f64 {
        self.corr
    }

    /// Noise std.
    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Signal length N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Prior probability of `H0`.
    pub fn prior_h0(&self) -> f64 {
        self.prior_h0
    }
}

/// Row-stochastic 2x2 transition matrix of the activity chain, row/column
/// order (inactive, active): `[[1-p01, p01], [p10, 1-p10]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionMatrix {
    rows: [[f64; 2]; 2],
}

impl TransitionMatrix {
    /// The chain's one-step matrix for a parameter set.
    pub fn from_params(params: &ModelParams) -> Self {
        Self {
            rows: [
                [1.0 - params.p01, params.p01],
                [params.p10, 1.0 - params.p10],
            ],
        }
    }

    /// The identity (zero-step) matrix.
    pub fn identity() -> Self {
        Self {
            rows: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &TransitionMatrix) -> Self {
        let a = &self.rows;
        let b = &rhs.rows;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { rows: out }
    }

    /// Raw rows, `rows()[from][to]` with 0 = inactive, 1 = active.
    pub fn rows(&self) -> &[[f64; 2]; 2] {
        &self.rows
    }

    /// Transition probability from `from` to `to`.
    pub fn prob(&self, from: State, to: State) -> f64 {
        self.rows[state_index(from)][state_index(to)]
    }
}

pub(crate) fn state_index(s: State) -> usize {
    match s {
        State::Inactive => 0,
        State::Active => 1,
    }
}

/// Activity labels of one sampled sequence, length N.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSequence(Vec<State>);

impl StateSequence {
    /// The labels.
    pub fn as_slice(&self) -> &[State] {
        &self.0
    }

    /// Sequence length.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Whether the sequence is empty.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Real-valued signal samples, length N, all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalVector(Vec<f64>);

impl SignalVector {
    /// The samples.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sequence length.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Whether the vector is empty.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Observed one-bit sequence with entries in {-1, +1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVector(Vec<i8>);

impl BitVector {
    /// Wraps a sign vector, checking every entry is -1 or +1.
    ///
    /// # Errors
    ///
    /// `InvalidBit` on any other value.
    pub fn from_signs(bits: Vec<i8>) -> Result<Self, ModelError> {
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(ModelError::InvalidBit);
        }
        Ok(Self(bits))
    }

    /// The signs.
    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Sequence length.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Whether the vector is empty.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Marginal probabilities that sample i is inactive, for i = 0..N-1.
///
/// Element 0 is `p10_init`; each successor applies one chain step, so element
/// i equals the first entry of `[p10_init, 1-p10_init] * T^i`.
pub fn state_prob_sequence(params: &ModelParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.n);
    let mut p = params.p10_init;
    out.push(p);
    for _ in 1..params.n {
        p = p * (1.0 - params.p01) + (1.0 - p) * params.p10;
        out.push(p);
    }
    out
}

/// k-step transition matrix `T^k`, by repeated multiplication.
///
/// Rows stay stochastic to within accumulated round-off (far below 1e-12 for
/// any practical k).
pub fn transition_matrix_power(params: &ModelParams, k: usize) -> TransitionMatrix {
    let t = TransitionMatrix::from_params(params);
    let mut acc = TransitionMatrix::identity();
    for _ in 0..k {
        acc = acc.mul(&t);
    }
    acc
}

/// Samples an activity sequence from the chain. Deterministic given `seed`.
pub fn sample_states(params: &ModelParams, seed: u64) -> StateSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(params.n);
    let first = if rng.gen::<f64>() < params.p10_init {
        State::Inactive
    } else {
        State::Active
    };
    states.push(first);
    for i in 1..params.n {
        let stay_inactive = 1.0 - params.p01;
        let u = rng.gen::<f64>();
        let next = match states[i - 1] {
            State::Inactive => {
                if u < stay_inactive {
                    State::Inactive
                } else {
                    State::Active
                }
            }
            State::Active => {
                if u < params.p10 {
                    State::Inactive
                } else {
                    State::Active
                }
            }
        };
        states.push(next);
    }
    StateSequence(states)
}

/// Samples signal values given an activity sequence. Deterministic given
/// `seed`; exactly one standard-normal draw is consumed per position in both
/// modes, so the two modes coincide bit-for-bit at `corr = 0`.
///
/// Inactive samples are i.i.d. with std `sigma0`. Each maximal active run is
/// zero-mean Gaussian with std `sigma1` and adjacent correlation `corr`,
/// generated per `mode`.
///
/// # Errors
///
/// - `LengthMismatch` if `states` does not have length `n`.
/// - `RejectedCovariance` in exact-tridiagonal mode when a run's covariance
///   is not positive definite.
pub fn sample_signal(
    params: &ModelParams,
    states: &StateSequence,
    mode: GenerationMode,
    seed: u64,
) -> Result<SignalVector, ModelError> {
    if states.len() != params.n {
        return Err(ModelError::LengthMismatch {
            expected: params.n,
            got: states.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n;
    let s1 = params.sigma1;
    let r = params.corr;
    let mut out = Vec::with_capacity(n);
    match mode {
        GenerationMode::Ar => {
            let innov = s1 * sqrt(1.0 - r * r);
            for i in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let v = match states.as_slice()[i] {
                    State::Inactive => params.sigma0 * z,
                    State::Active => {
                        if i > 0 && states.as_slice()[i - 1] == State::Active {
                            r * out[i - 1] + innov * z
                        } else {
                            s1 * z
                        }
                    }
                };
                out.push(v);
            }
        }
        GenerationMode::ExactTridiagonal => {
            let mut i = 0;
            while i < n {
                if states.as_slice()[i] == State::Inactive {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(params.sigma0 * z);
                    i += 1;
                    continue;
                }
                let mut m = 1;
                while i + m < n && states.as_slice()[i + m] == State::Active {
                    m += 1;
                }
                let diag: Vec<f64> = (0..m).map(|_| s1 * s1).collect();
                let off: Vec<f64> = (0..m.saturating_sub(1)).map(|_| r * s1 * s1).collect();
                let (d, e) = cholesky_tridiag(&diag, &off)
                    .ok_or(ModelError::RejectedCovariance { run_len: m })?;
                // Bidiagonal lower factor: s_k = e_{k-1} z_{k-1} + d_k z_k.
                let mut prev_z = 0.0;
                for k in 0..m {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = if k == 0 { d[0] * z } else { e[k - 1] * prev_z + d[k] * z };
                    out.push(v);
                    prev_z = z;
                }
                i += m;
            }
        }
    }
    Ok(SignalVector(out))
}

/// Samples a one-bit observation under the given hypothesis. Deterministic
/// given `seed`.
///
/// Under `H0` the result is `sign(n_i)`; under `H1` it is `sign(s_i + n_i)`
/// with states and signal drawn first. Sign of exact zero resolves to +1
/// (a measure-zero event, so the convention is analysis-neutral). States,
/// signal, and noise use independent sub-seeds (indices 0, 1, 2 of `seed`),
/// so the noise stream is identical across hypotheses and generation modes.
///
/// # Errors
///
/// Propagates `RejectedCovariance` from exact-tridiagonal signal generation.
pub fn observe(
    params: &ModelParams,
    hypothesis: Hypothesis,
    mode: GenerationMode,
    seed: u64,
) -> Result<BitVector, ModelError> {
    let mut noise_rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 2));
    let n = params.n;
    let mut bits = Vec::with_capacity(n);
    match hypothesis {
        Hypothesis::H0 => {
            for _ in 0..n {
                let z: f64 = noise_rng.sample(StandardNormal);
                bits.push(if params.noise_std * z >= 0.0 { 1 } else { -1 });
            }
        }
        Hypothesis::H1 => {
            let states = sample_states(params, sub_seed(seed, 0));
            let signal = sample_signal(params, &states, mode, sub_seed(seed, 1))?;
            for i in 0..n {
                let z: f64 = noise_rng.sample(StandardNormal);
                let v = signal.as_slice()[i] + params.noise_std * z;
                bits.push(if v >= 0.0 { 1 } else { -1 });
            }
        }
    }
    Ok(BitVector(bits))
}

/// Mean signal power over the sequence, `sigma1^2 + (sigma0^2 - sigma1^2) *
/// mean(p_inactive)`.
fn mean_signal_power(params: &ModelParams) -> f64 {
    let p0 = state_prob_sequence(params);
    let mean_p0 = p0.iter().sum::<f64>() / params.n as f64;
    let s0 = params.sigma0 * params.sigma0;
    let s1 = params.sigma1 * params.sigma1;
    s1 + (s0 - s1) * mean_p0
}

/// Signal-to-noise ratio in dB:
/// `10 log10((sigma1^2 + ((sigma0^2 - sigma1^2)/N) * sum_i p_{i,inactive}) / noise_std^2)`.
pub fn snr_db(params: &ModelParams) -> f64 {
    10.0 * log10(mean_signal_power(params) / (params.noise_std * params.noise_std))
}

/// The noise std that makes [`snr_db`] hit `target_snr_db`, holding every
/// other parameter fixed (&params.noise_std is ignored).
pub fn noise_std_for_snr(params: &ModelParams, target_snr_db: f64) -> f64 {
    sqrt(mean_signal_power(params) / pow(10.0, target_snr_db / 10.0))
}
