//! Argument parsing and subcommand orchestration.
//!
//! `theory`, `detect`, and `validate` print to standard output and emit no
//! files. `roc`, `power`, and `sensitivity` write CSV results (plus an SVG
//! plot on request) into the output directory and finish with the run's
//! single manifest. Exit codes: 0 success, 1 validation or IO error, 2
//! numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use onebit_detect::analysis::{alt_moments, null_moments, pd_theoretical, pfa_theoretical};
use onebit_detect::detector::{detect, detector_coeffs, threshold};
use onebit_detect::model::{noise_std_for_snr, observe};
use onebit_detect::num::sub_seed;
use onebit_detect::sim::{
    empirical_roc, pooled_thresholds, power_function, sensitivity_sweep, ExperimentConfig,
    PowerCurve, RocCurve, Sweep, ROC_THRESHOLD_COUNT,
};
use onebit_detect::{Hypothesis, ModelParams};

use crate::config::{load_config, Resolved};
use crate::csvio::{power_csv, roc_csv, write_text};
use crate::error::CliError;
use crate::manifest::ResultManifest;
use crate::parallel::parallel_trials_at;
use crate::svg::{render_svg, SvgPlot, SvgSeries};
use crate::validate::run_checks;

/// One-bit likelihood-ratio detection of Markovian Bernoulli-Gaussian
/// signals: closed-form theory and seeded Monte-Carlo experiments.
#[derive(Parser)]
#[command(name = "onebit-detect", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form moments and operating-point probabilities as JSON.
    Theory(CommonArgs),
    /// Run the detector on one observation and print the decision as JSON.
    Detect(CommonArgs),
    /// Empirical ROC curves over a corr or SNR sweep, one CSV per value.
    Roc(CommonArgs),
    /// Detection probability over an SNR grid at a fixed false-alarm rate.
    Power(CommonArgs),
    /// ROC stability under detector-coefficient perturbations.
    Sensitivity(CommonArgs),
    /// Monte-Carlo cross-checks of the closed-form machinery.
    Validate(CommonArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Path to a JSON configuration document.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dotted-path override applied after the file, e.g. --set params.corr=0.55
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Directory for emitted files.
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,

    /// Also write an SVG plot next to the CSV outputs.
    #[arg(long)]
    emit_svg: bool,
}

/// Parses `argv`, runs the selected subcommand, and returns the process exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Theory(args) => theory_cmd(args),
        Command::Detect(args) => detect_cmd(args),
        Command::Roc(args) => roc_cmd(args),
        Command::Power(args) => power_cmd(args),
        Command::Sensitivity(args) => sensitivity_cmd(args),
        Command::Validate(args) => validate_cmd(args),
    }
}

/// Loads and resolves the configuration; `validate` is the only subcommand
/// that runs without a config file (on the built-in defaults).
fn load(args: &CommonArgs, subcommand: &str) -> Result<Resolved, CliError> {
    if args.config.is_none() && subcommand != "validate" {
        return Err(CliError::validation(format!(
            "{subcommand} requires --config <file>"
        )));
    }
    load_config(args.config.as_deref(), &args.set)?.resolve()
}

fn hypothesis_name(h: Hypothesis) -> &'static str {
    match h {
        Hypothesis::H0 => "h0",
        Hypothesis::H1 => "h1",
    }
}

fn theory_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = load(args, "theory")?;
    let params = &resolved.params;
    let coeffs = detector_coeffs(params);
    let nm = null_moments(&coeffs);
    let am = alt_moments(params, &coeffs)?;
    let th = threshold(params.prior_h0(), params.n())?;
    let report = serde_json::json!({
        "mu0": nm.mu0,
        "sigma0": nm.var0.sqrt(),
        "mu1": am.mu1,
        "sigma1": am.var1.sqrt(),
        "pfa": pfa_theoretical(th, &nm),
        "pd": pd_theoretical(th, &am),
    });
    println!("{report}");
    Ok(())
}

fn detect_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = load(args, "detect")?;
    let detect_config = resolved.config.detect.clone().unwrap_or_default();
    let r = match &detect_config.signs {
        Some(signs) => onebit_detect::BitVector::from_signs(signs.clone())?,
        None => observe(
            &resolved.params,
            detect_config.hypothesis.into(),
            resolved.mode,
            sub_seed(resolved.config.seed, 0),
        )?,
    };
    let result = detect(&r, &resolved.params)?;
    let report = serde_json::json!({
        "statistic": result.statistic,
        "threshold": result.threshold,
        "decision": hypothesis_name(result.decision),
    });
    println!("{report}");
    Ok(())
}

/// Collects the per-run file emissions and writes the single manifest last.
struct Emitter {
    dir: PathBuf,
    stem: String,
    manifest: ResultManifest,
}

impl Emitter {
    fn new(args: &CommonArgs, subcommand: &str, resolved: &Resolved) -> Result<Self, CliError> {
        std::fs::create_dir_all(&args.output_dir).map_err(|e| {
            CliError::validation(format!(
                "cannot create output directory {}: {e}",
                args.output_dir.display()
            ))
        })?;
        let stem = resolved
            .config
            .output_path
            .clone()
            .unwrap_or_else(|| String::from(subcommand));
        Ok(Emitter {
            dir: args.output_dir.clone(),
            stem,
            manifest: ResultManifest::new(subcommand, &resolved.config),
        })
    }

    fn emit(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_text(&self.dir.join(name), contents)?;
        self.manifest.record(name, contents);
        println!("wrote {name}");
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        let path = self.manifest.write(&self.dir, &self.stem)?;
        println!("wrote {}", path.file_name().unwrap_or_default().to_string_lossy());
        Ok(())
    }
}

/// File-name fragment for a sweep value: `Display` output with `.`
/// preserved (`0.4`, `-7.5`).
fn value_tag(v: f64) -> String {
    format!("{v}")
}

fn slug(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() || ch == '.' || ch == '-' {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// The empirical (pfa, pd) polyline of a curve, corner-anchored and ordered
/// left to right.
fn roc_series(label: String, curve: &RocCurve) -> SvgSeries {
    let mut points = vec![(0.0, 0.0)];
    points.extend(curve.rows.iter().rev().map(|r| (r.pfa_emp, r.pd_emp)));
    points.push((1.0, 1.0));
    SvgSeries { label, points }
}

fn roc_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = load(args, "roc")?;
    let config = &resolved.config;
    let sweep = config.sweep().ok_or_else(|| {
        CliError::validation("roc requires a `corr_grid` or `snr_grid_db` sweep")
    })?;
    // Full domain validation of grids and pfa before any work.
    ExperimentConfig::new(
        resolved.params,
        resolved.mode,
        config.trials_per_point,
        config.seed,
        sweep.clone(),
        config.pfa_spec(),
        config.output_path.clone(),
    )?;
    let mut emitter = Emitter::new(args, "roc", &resolved)?;
    let stem = emitter.stem.clone();
    let points: Vec<(String, String, ModelParams)> = match &sweep {
        Sweep::CorrGrid(grid) => grid
            .iter()
            .map(|&corr| {
                Ok((
                    format!("corr = {corr}"),
                    format!("{stem}_corr_{}.csv", value_tag(corr)),
                    resolved.params.with_corr(corr)?,
                ))
            })
            .collect::<Result<_, CliError>>()?,
        Sweep::SnrGridDb(grid) => grid
            .iter()
            .map(|&snr| {
                Ok((
                    format!("snr = {snr} dB"),
                    format!("{stem}_snr_{}db.csv", value_tag(snr)),
                    resolved
                        .params
                        .with_noise_std(noise_std_for_snr(&resolved.params, snr))?,
                ))
            })
            .collect::<Result<_, CliError>>()?,
        Sweep::ParamPerturbations(_) => {
            return Err(CliError::validation(
                "roc takes a `corr_grid` or `snr_grid_db` sweep; use the sensitivity subcommand for perturbations",
            ))
        }
    };
    let mut series = Vec::with_capacity(points.len());
    for (index, (label, name, params)) in points.iter().enumerate() {
        let point_seed = sub_seed(config.seed, index as u64);
        let batch = |hypothesis| {
            parallel_trials_at(
                params,
                resolved.mode,
                config.trials_per_point,
                point_seed,
                hypothesis,
            )
        };
        let h0 = batch(Hypothesis::H0)?;
        let h1 = batch(Hypothesis::H1)?;
        let thresholds = pooled_thresholds(&h0, &h1, ROC_THRESHOLD_COUNT);
        let curve = empirical_roc(&h0, &h1, &thresholds);
        emitter.emit(name, &roc_csv(&curve))?;
        println!("{label}: auc {:.4}", curve.auc);
        series.push(roc_series(label.clone(), &curve));
    }
    if args.emit_svg {
        let plot = SvgPlot {
            title: String::from("Empirical ROC"),
            x_label: String::from("false-alarm probability"),
            y_label: String::from("detection probability"),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            series,
        };
        emitter.emit(&format!("{stem}.svg"), &render_svg(&plot))?;
    }
    emitter.finish()
}

fn power_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = load(args, "power")?;
    let config = &resolved.config;
    let sweep = config
        .sweep()
        .ok_or_else(|| CliError::validation("power requires a `snr_grid_db` sweep"))?;
    let experiment = ExperimentConfig::new(
        resolved.params,
        resolved.mode,
        config.trials_per_point,
        config.seed,
        sweep,
        config.pfa_spec(),
        config.output_path.clone(),
    )?;
    let curve = power_function(&experiment)?;
    let mut emitter = Emitter::new(args, "power", &resolved)?;
    let stem = emitter.stem.clone();
    emitter.emit(&format!("{stem}.csv"), &power_csv(&curve))?;
    if args.emit_svg {
        emitter.emit(
            &format!("{stem}.svg"),
            &render_svg(&power_plot(&curve)),
        )?;
    }
    emitter.finish()
}

fn power_plot(curve: &PowerCurve) -> SvgPlot {
    let snr_min = curve.rows.iter().map(|r| r.snr_db).fold(f64::INFINITY, f64::min);
    let snr_max = curve
        .rows
        .iter()
        .map(|r| r.snr_db)
        .fold(f64::NEG_INFINITY, f64::max);
    SvgPlot {
        title: String::from("Detection probability vs SNR"),
        x_label: String::from("SNR (dB)"),
        y_label: String::from("detection probability"),
        x_range: (snr_min, snr_max),
        y_range: (0.0, 1.0),
        series: vec![SvgSeries {
            label: format!("pfa = {}", curve.fixed_pfa),
            points: curve.rows.iter().map(|r| (r.snr_db, r.pd_emp)).collect(),
        }],
    }
}

fn sensitivity_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = load(args, "sensitivity")?;
    let config = &resolved.config;
    let sweep = config
        .sweep()
        .ok_or_else(|| CliError::validation("sensitivity requires a `perturbations` sweep"))?;
    let experiment = ExperimentConfig::new(
        resolved.params,
        resolved.mode,
        config.trials_per_point,
        config.seed,
        sweep,
        config.pfa_spec(),
        config.output_path.clone(),
    )?;
    let curves = sensitivity_sweep(&experiment)?;
    let mut emitter = Emitter::new(args, "sensitivity", &resolved)?;
    let stem = emitter.stem.clone();
    let names: Vec<String> = curves
        .iter()
        .map(|e| format!("{stem}_{}.csv", slug(&e.perturbation.label)))
        .collect();
    for (k, name) in names.iter().enumerate() {
        if names[..k].contains(name) {
            return Err(CliError::validation(format!(
                "perturbation labels collide on output file {name}"
            )));
        }
    }
    let mut series = Vec::with_capacity(curves.len());
    for (entry, name) in curves.iter().zip(&names) {
        emitter.emit(name, &roc_csv(&entry.curve))?;
        series.push(roc_series(entry.perturbation.label.clone(), &entry.curve));
    }
    if args.emit_svg {
        let plot = SvgPlot {
            title: String::from("ROC under coefficient perturbations"),
            x_label: String::from("false-alarm probability"),
            y_label: String::from("detection probability"),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            series,
        };
        emitter.emit(&format!("{stem}.svg"), &render_svg(&plot))?;
    }
    emitter.finish()
}

fn validate_cmd(args: &CommonArgs) -> Result<(), CliError> {
    let resolved = load(args, "validate")?;
    let results = run_checks(&resolved)?;
    for result in &results {
        println!("{}", result.line());
    }
    let failures = results.iter().filter(|r| r.failure.is_some()).count();
    if failures > 0 {
        return Err(CliError::numerical(format!(
            "{failures} of {} validation checks failed",
            results.len()
        )));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slug_examples() {
        assert_eq!(slug("baseline"), "baseline");
        assert_eq!(slug("p_hat +10%"), "p_hat_10");
        assert_eq!(slug("a -10%"), "a_-10");
        assert_eq!(slug("corr = 0.4"), "corr_0.4");
    }

    #[test]
    fn value_tags_are_minimal() {
        assert_eq!(value_tag(0.4), "0.4");
        assert_eq!(value_tag(-7.5), "-7.5");
        assert_eq!(value_tag(-5.0), "-5");
    }

    #[test]
    fn help_and_bad_args_exit_codes() {
        assert_eq!(run(["onebit-detect", "--help"]), 0);
        assert_eq!(run(["onebit-detect", "--version"]), 0);
        assert_eq!(run(["onebit-detect", "no-such-command"]), 1);
        assert_eq!(run(["onebit-detect"]), 1);
    }
}
