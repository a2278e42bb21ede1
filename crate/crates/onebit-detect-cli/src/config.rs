//! Run configuration: a JSON document mirroring the library's parameter and
//! experiment types, plus dotted-path command-line overrides.
//!
//! Parsing is strict: unknown keys are rejected with a diagnostic naming the
//! key, at every nesting level. Overrides are applied to the raw JSON tree
//! before deserialization, so a misspelled override path fails the same way
//! a misspelled file key does.
//!
//! Every field has a default (the benchmark chain of the experiments:
//! `p10_init = 0.95`, `p01 = 1/90`, `p10 = 0.1`, `sigma0 = 0.01`,
//! `sigma1 = 1`, `corr = 0.7`, `n = 1000`, SNR −5 dB), so a config document
//! only needs to spell out what it changes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use onebit_detect::model::{noise_std_for_snr, GenerationMode};
use onebit_detect::sim::{Perturbation, PfaSpec, Sweep};
use onebit_detect::{Hypothesis, ModelParams};

use crate::error::CliError;

/// Signal generation mode, as spelled in config files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    /// Autoregressive active runs (the generation default).
    #[default]
    Ar,
    /// Exact tridiagonal run covariances (rejection sampled).
    ExactTridiagonal,
}

impl From<ModeConfig> for GenerationMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Ar => GenerationMode::Ar,
            ModeConfig::ExactTridiagonal => GenerationMode::ExactTridiagonal,
        }
    }
}

/// Hypothesis label, as spelled in config files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisConfig {
    /// Noise only.
    H0,
    /// Signal present.
    #[default]
    H1,
}

impl From<HypothesisConfig> for Hypothesis {
    fn from(h: HypothesisConfig) -> Self {
        match h {
            HypothesisConfig::H0 => Hypothesis::H0,
            HypothesisConfig::H1 => Hypothesis::H1,
        }
    }
}

/// Model parameters. `noise_std` and `snr_db` are alternatives: set at most
/// one; when neither is set the noise level is derived from SNR −5 dB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    /// Initial inactivity probability p_{1,0}.
    pub p10_init: f64,
    /// Transition probability inactive → active.
    pub p01: f64,
    /// Transition probability active → inactive.
    pub p10: f64,
    /// Inactive-sample standard deviation.
    pub sigma0: f64,
    /// Active-sample standard deviation.
    pub sigma1: f64,
    /// Adjacent active-sample correlation coefficient, in [0, 1).
    pub corr: f64,
    /// Sequence length N.
    pub n: usize,
    /// Prior probability of the noise-only hypothesis.
    pub prior_h0: f64,
    /// Explicit noise standard deviation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    /// Noise level expressed as a target SNR in dB.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            p10_init: 0.95,
            p01: 0.01 / 0.9,
            p10: 0.1,
            sigma0: 0.01,
            sigma1: 1.0,
            corr: 0.7,
            n: 1000,
            prior_h0: 0.5,
            noise_std: None,
            snr_db: None,
        }
    }
}

impl ParamsConfig {
    /// Builds validated model parameters, deriving the noise level from
    /// `snr_db` when no explicit `noise_std` is given.
    ///
    /// # Errors
    ///
    /// `Validation` when both noise fields are set or any parameter is out
    /// of domain.
    pub fn resolve(&self) -> Result<ModelParams, CliError> {
        if self.noise_std.is_some() && self.snr_db.is_some() {
            return Err(CliError::validation(
                "config: set at most one of `params.noise_std` and `params.snr_db`",
            ));
        }
        let base = ModelParams::new(
            self.p10_init,
            self.p01,
            self.p10,
            self.sigma0,
            self.sigma1,
            self.corr,
            self.noise_std.unwrap_or(1.0),
            self.n,
        )?
        .with_prior_h0(self.prior_h0)?;
        match self.noise_std {
            Some(_) => Ok(base),
            None => {
                let snr_db = self.snr_db.unwrap_or(-5.0);
                if !snr_db.is_finite() {
                    return Err(CliError::validation("config: `params.snr_db` must be finite"));
                }
                Ok(base.with_noise_std(noise_std_for_snr(&base, snr_db))?)
            }
        }
    }

    /// The same parameters with `noise_std` made explicit and `snr_db`
    /// cleared, so the document re-resolves to an identical model.
    fn canonical(&self, resolved: &ModelParams) -> ParamsConfig {
        let mut out = self.clone();
        out.noise_std = Some(resolved.noise_std());
        out.snr_db = None;
        out
    }
}

/// One detector-coefficient perturbation for sensitivity runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    /// Multiplier on the pair agreement probability.
    pub p_hat_factor: f64,
    /// Multiplier on every inactivity coefficient.
    pub a_factor: f64,
    /// Label used in file names and plot legends; derived when empty.
    pub label: String,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            p_hat_factor: 1.0,
            a_factor: 1.0,
            label: String::new(),
        }
    }
}

impl PerturbationConfig {
    fn resolve(&self) -> Perturbation {
        let label = if self.label.is_empty() {
            format!("p_hat x{}, a x{}", self.p_hat_factor, self.a_factor)
        } else {
            self.label.clone()
        };
        Perturbation {
            p_hat_factor: self.p_hat_factor,
            a_factor: self.a_factor,
            label,
        }
    }
}

/// Inputs specific to the `detect` subcommand.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    /// Hypothesis to simulate when no explicit signs are given.
    pub hypothesis: HypothesisConfig,
    /// Explicit ±1 observation; when present nothing is simulated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
}

/// The full configuration document. At most one sweep axis
/// (`corr_grid` / `snr_grid_db` / `perturbations`) and at most one
/// false-alarm specification (`fixed_pfa` / `pfa_grid`) may be set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Base model parameters.
    pub params: ParamsConfig,
    /// Signal generation mode.
    pub mode: ModeConfig,
    /// Monte-Carlo trials per sweep point.
    pub trials_per_point: usize,
    /// Master seed; all randomness in a run flows from it.
    pub seed: u64,
    /// Correlation sweep for `roc`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr_grid: Option<Vec<f64>>,
    /// SNR sweep (dB) for `roc` or `power`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_grid_db: Option<Vec<f64>>,
    /// Coefficient perturbations for `sensitivity`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<Vec<PerturbationConfig>>,
    /// Single operating false-alarm probability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_pfa: Option<f64>,
    /// Several operating false-alarm probabilities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pfa_grid: Option<Vec<f64>>,
    /// File-name stem for emitted outputs; defaults to the subcommand name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    /// `detect`-only inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detect: Option<DetectConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ParamsConfig::default(),
            mode: ModeConfig::default(),
            trials_per_point: 10_000,
            seed: 7,
            corr_grid: None,
            snr_grid_db: None,
            perturbations: None,
            fixed_pfa: None,
            pfa_grid: None,
            output_path: None,
            detect: None,
        }
    }
}

/// A configuration resolved against the model layer: validated parameters
/// plus a canonical echo of the document that reproduces them.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    /// The canonical document (noise level explicit).
    pub config: RunConfig,
    /// Validated model parameters.
    pub params: ModelParams,
    /// Generation mode as a library value.
    pub mode: GenerationMode,
}

impl RunConfig {
    /// Validates the document against the model layer.
    ///
    /// # Errors
    ///
    /// `Validation` for any out-of-domain field or conflicting alternatives.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let params = self.params.resolve()?;
        let sweep_axes = usize::from(self.corr_grid.is_some())
            + usize::from(self.snr_grid_db.is_some())
            + usize::from(self.perturbations.is_some());
        if sweep_axes > 1 {
            return Err(CliError::validation(
                "config: set at most one of `corr_grid`, `snr_grid_db`, `perturbations`",
            ));
        }
        if self.fixed_pfa.is_some() && self.pfa_grid.is_some() {
            return Err(CliError::validation(
                "config: set at most one of `fixed_pfa` and `pfa_grid`",
            ));
        }
        let mut config = self.clone();
        config.params = self.params.canonical(&params);
        Ok(Resolved {
            config,
            params,
            mode: self.mode.into(),
        })
    }

    /// The sweep axis, if any, as a library value.
    pub fn sweep(&self) -> Option<Sweep> {
        if let Some(g) = &self.corr_grid {
            Some(Sweep::CorrGrid(g.clone()))
        } else if let Some(g) = &self.snr_grid_db {
            Some(Sweep::SnrGridDb(g.clone()))
        } else {
            self.perturbations.as_ref().map(|p| {
                Sweep::ParamPerturbations(p.iter().map(PerturbationConfig::resolve).collect())
            })
        }
    }

    /// The false-alarm specification; defaults to a fixed 0.3.
    pub fn pfa_spec(&self) -> PfaSpec {
        if let Some(g) = &self.pfa_grid {
            PfaSpec::Grid(g.clone())
        } else {
            PfaSpec::Fixed(self.fixed_pfa.unwrap_or(0.3))
        }
    }
}

/// Loads a config document and applies `key=value` overrides, then parses
/// strictly.
///
/// # Errors
///
/// `Validation` on unreadable files, malformed JSON, malformed overrides, or
/// unknown keys (the diagnostic names the key).
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut value: serde_json::Value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                CliError::validation(format!("cannot read config {}: {e}", p.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("config {}: {e}", p.display())))?
        }
        None => serde_json::Value::Object(serde_json::Map::new()),
    };
    if !value.is_object() {
        return Err(CliError::validation(
            "config: the document root must be a JSON object",
        ));
    }
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::validation(format!("config: {e}")))
}

/// Applies one `dotted.path=value` override to the raw JSON tree. The value
/// is parsed as JSON when possible and taken as a bare string otherwise.
fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("override `{spec}` must look like key=value")))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(CliError::validation(format!(
            "override `{spec}` has an empty key segment"
        )));
    }
    let leaf = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for segment in &segments[..segments.len() - 1] {
        let map = node.as_object_mut().ok_or_else(|| {
            CliError::validation(format!("override `{spec}`: `{segment}` is not an object"))
        })?;
        node = map
            .entry((*segment).to_string())
            .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new()));
    }
    let last = segments[segments.len() - 1];
    let map = node.as_object_mut().ok_or_else(|| {
        CliError::validation(format!("override `{spec}`: parent of `{last}` is not an object"))
    })?;
    map.insert(last.to_string(), leaf);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_benchmark_chain() {
        let config = RunConfig::default();
        let resolved = config.resolve().unwrap();
        assert_eq!(resolved.params.n(), 1000);
        assert!((resolved.params.corr() - 0.7).abs() < 1e-15);
        // SNR -5 dB on the benchmark chain.
        let snr = onebit_detect::model::snr_db(&resolved.params);
        assert!((snr - (-5.0)).abs() < 1e-9, "snr {snr}");
        assert_eq!(resolved.mode, GenerationMode::Ar);
        // The canonical echo re-resolves to the identical model.
        let again = resolved.config.resolve().unwrap();
        assert_eq!(again.params, resolved.params);
        assert_eq!(again.config, resolved.config);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = serde_json::from_str::<RunConfig>(r#"{"trails_per_point": 3}"#).unwrap_err();
        assert!(err.to_string().contains("trails_per_point"), "{err}");
        let err =
            serde_json::from_str::<RunConfig>(r#"{"params": {"sigma2": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("sigma2"), "{err}");
    }

    #[test]
    fn overrides_apply_and_reject_bad_paths() {
        let mut value = serde_json::json!({"params": {"corr": 0.4}});
        apply_override(&mut value, "params.corr=0.55").unwrap();
        apply_override(&mut value, "seed=11").unwrap();
        apply_override(&mut value, "corr_grid=[0.4,0.7]").unwrap();
        apply_override(&mut value, "output_path=fig2").unwrap();
        let config: RunConfig = serde_json::from_value(value).unwrap();
        assert!((config.params.corr - 0.55).abs() < 1e-15);
        assert_eq!(config.seed, 11);
        assert_eq!(config.corr_grid.as_deref(), Some(&[0.4, 0.7][..]));
        assert_eq!(config.output_path.as_deref(), Some("fig2"));

        let mut value = serde_json::json!({"seed": 3});
        assert!(apply_override(&mut value, "seed.deeper=1").is_err());
        assert!(apply_override(&mut value, "=1").is_err());
        assert!(apply_override(&mut value, "no_equals").is_err());
    }

    #[test]
    fn conflicting_alternatives_are_rejected() {
        let config = RunConfig {
            params: ParamsConfig {
                noise_std: Some(0.3),
                snr_db: Some(-5.0),
                ..ParamsConfig::default()
            },
            ..RunConfig::default()
        };
        assert!(config.resolve().is_err());

        let config = RunConfig {
            corr_grid: Some(vec![0.4]),
            snr_grid_db: Some(vec![-5.0]),
            ..RunConfig::default()
        };
        assert!(config.resolve().is_err());

        let config = RunConfig {
            fixed_pfa: Some(0.3),
            pfa_grid: Some(vec![0.1]),
            ..RunConfig::default()
        };
        assert!(config.resolve().is_err());
    }

    #[test]
    fn explicit_noise_std_wins_and_round_trips() {
        let config = RunConfig {
            params: ParamsConfig {
                noise_std: Some(0.25),
                ..ParamsConfig::default()
            },
            ..RunConfig::default()
        };
        let resolved = config.resolve().unwrap();
        assert!((resolved.params.noise_std() - 0.25).abs() < 1e-15);
        let text = serde_json::to_string(&resolved.config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, resolved.config);
    }

    #[test]
    fn perturbation_labels_are_derived_when_empty() {
        let p = PerturbationConfig {
            p_hat_factor: 1.1,
            a_factor: 0.9,
            label: String::new(),
        }
        .resolve();
        assert_eq!(p.label, "p_hat x1.1, a x0.9");
    }
}
