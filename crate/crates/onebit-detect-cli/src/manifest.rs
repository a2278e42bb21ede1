//! Run manifests.
//!
//! Every file-emitting run writes exactly one manifest after its data files:
//! a deterministic run id, the resolved configuration (which re-parses to an
//! equivalent config), the seed and generation mode, the tool version, and a
//! SHA-256 digest per emitted file. Stdout-only subcommands (`theory`,
//! `detect`, `validate`) emit no files and therefore no manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ModeConfig, RunConfig};
use crate::csvio::write_text;
use crate::error::CliError;

/// Digest record for one emitted file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    /// File name relative to the output directory.
    pub path: String,
    /// SHA-256 of the file contents, lowercase hex.
    pub sha256: String,
}

/// The manifest document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    /// Deterministic run id: first 16 hex digits of the SHA-256 of the
    /// subcommand name and canonical configuration.
    pub run_id: String,
    /// Crate version that produced the run.
    pub tool_version: String,
    /// The subcommand that ran.
    pub subcommand: String,
    /// Master seed; all randomness in the run flows from it.
    pub seed: u64,
    /// Signal generation mode.
    pub mode: ModeConfig,
    /// The resolved configuration; re-parses to an equivalent config.
    pub resolved_config: RunConfig,
    /// One digest per emitted file, in emission order.
    pub outputs: Vec<OutputDigest>,
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl ResultManifest {
    /// Starts a manifest for a run with no outputs yet.
    pub fn new(subcommand: &str, config: &RunConfig) -> Self {
        let canonical = serde_json::to_string(config).expect("config serializes");
        let run_id = sha256_hex(format!("{subcommand}\n{canonical}").as_bytes())[..16].to_string();
        ResultManifest {
            run_id,
            tool_version: String::from(env!("CARGO_PKG_VERSION")),
            subcommand: String::from(subcommand),
            seed: config.seed,
            mode: config.mode,
            resolved_config: config.clone(),
            outputs: Vec::new(),
        }
    }

    /// Records one emitted file.
    pub fn record(&mut self, name: &str, contents: &str) {
        self.outputs.push(OutputDigest {
            path: String::from(name),
            sha256: sha256_hex(contents.as_bytes()),
        });
    }

    /// Writes the manifest file (the single manifest write of a run) and
    /// returns its path.
    ///
    /// # Errors
    ///
    /// `Validation` with the path in the message on IO failure.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{stem}_manifest.json"));
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_text(&path, &text)?;
        Ok(path)
    }
}
