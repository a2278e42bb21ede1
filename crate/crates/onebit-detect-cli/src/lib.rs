//! Command-line front end for the `onebit-detect` library.
//!
//! The core crate is `no_std` and carries the model, detector, closed-form
//! analysis, and the sequential Monte-Carlo engine; this crate adds
//! everything that needs an operating system: JSON configuration files with
//! dotted-path overrides, rayon-parallel trial batches, deterministic CSV
//! and SVG output, sha256-digested run manifests, and the `onebit-detect`
//! binary with its six subcommands (`theory`, `detect`, `roc`, `power`,
//! `sensitivity`, `validate`).
//!
//! Every run is reproducible: all randomness flows from the single seed in
//! the configuration, file bytes are platform-independent, and each
//! file-emitting run writes one manifest recording the resolved
//! configuration and the sha256 digest of every output.

#![deny(missing_docs)]

pub mod config;
pub mod csvio;
pub mod error;
pub mod manifest;
pub mod parallel;
pub mod runner;
pub mod svg;
pub mod validate;

pub use error::CliError;
pub use runner::run;
