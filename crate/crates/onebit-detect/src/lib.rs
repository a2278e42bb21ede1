//! Detection of Markovian Bernoulli-Gaussian (block-sparse) signals from
//! one-bit sign measurements.
//!
//! A sparse signal is modeled as a two-state hidden Markov chain: each sample
//! is either inactive (Gaussian, small variance) or active (Gaussian, large
//! variance), and adjacent active samples are correlated so activity arrives
//! in blocks. The receiver observes only the sign of each noisy sample and
//! must decide whether a signal is present at all.
//!
//! The crate provides:
//!
//! - [`model`]: the signal/noise model; parameter validation, state-chain
//!   marginals, seeded sampling of states, signals, and sign observations.
//! - [`orthant`]: zero-mean multivariate normal orthant probabilities for
//!   dimensions 2-4, the numerical kernel behind every closed-form result.
//! - [`detector`]: the likelihood-ratio detector built on adjacent sign
//!   agreements; coefficients, log-likelihood statistic, threshold, decision.
//! - [`analysis`]: closed-form performance; moments of the statistic under
//!   both hypotheses, pairwise joint agreement probabilities, false-alarm and
//!   detection probabilities via the Gaussian Q function.
//! - [`sim`]: a seeded Monte-Carlo engine; trial batches, empirical ROC /
//!   power / sensitivity experiments, and the brute-force oracles used to
//!   validate the closed-form path.
//!
//! All randomness is explicit: every sampling operation takes a seed and is
//! bit-reproducible. The crate is `no_std` (requires `alloc`); file output,
//! parallel orchestration, and the command-line front end live in the
//! companion `onebit-detect-cli` crate.

#![no_std]
#![deny(missing_docs)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod detector;
pub mod model;
pub mod num;
pub mod orthant;
pub mod sim;

pub use model::{BitVector, Hypothesis, ModelParams};
