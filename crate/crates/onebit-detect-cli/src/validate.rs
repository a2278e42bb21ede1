//! Monte-Carlo cross-checks of the closed-form machinery.
//!
//! Three suites, each comparing an exact quantity against a seeded sampling
//! estimate at a three-standard-error band:
//!
//! 1. orthant probabilities of tridiagonal covariances in dimensions 2-4
//!    against direct Gaussian sampling;
//! 2. the noise-only independence property: joint agreement frequencies at
//!    scattered index pairs sit at 1/4;
//! 3. closed-form pair joint probabilities against the windowed joint-event
//!    oracle.
//!
//! Each check prints one `pass`/`FAIL` line; any failure is a numerical
//! error (exit code 2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use onebit_detect::analysis::pair_joint_probs_for_mode;
use onebit_detect::detector::{detector_coeffs, proportion_se};
use onebit_detect::model::{observe, GenerationMode};
use onebit_detect::num::sub_seed;
use onebit_detect::orthant::{orthant, OrthantSpec, Sign};
use onebit_detect::sim::mc_joint_event_oracle;
use onebit_detect::{Hypothesis, ModelParams};

use crate::config::Resolved;
use crate::error::CliError;

const ORTHANT_SAMPLES: usize = 200_000;
const INDEPENDENCE_TRIALS: usize = 100_000;
const PAIR_ORACLE_TRIALS: usize = 200_000;

/// One check's outcome.
#[derive(Clone, Debug)]
pub struct CheckResult {
    /// Stable check name.
    pub name: String,
    /// Empty when the check passed; the failure detail otherwise.
    pub failure: Option<String>,
}

impl CheckResult {
    fn pass(name: String) -> Self {
        CheckResult {
            name,
            failure: None,
        }
    }

    fn fail(name: String, detail: String) -> Self {
        CheckResult {
            name,
            failure: Some(detail),
        }
    }

    /// The report line printed for this check.
    pub fn line(&self) -> String {
        match &self.failure {
            None => format!("check {}: pass", self.name),
            Some(detail) => format!("check {}: FAIL ({detail})", self.name),
        }
    }
}

/// Runs all suites and returns the per-check outcomes.
///
/// # Errors
///
/// `Numerical` when an exact quantity cannot be computed at all (the checks
/// themselves report disagreements through their result lines instead).
pub fn run_checks(resolved: &Resolved) -> Result<Vec<CheckResult>, CliError> {
    let seed = resolved.config.seed;
    let mut results = orthant_checks(sub_seed(seed, 1))?;
    results.extend(independence_checks(&resolved.params, sub_seed(seed, 2))?);
    results.extend(pair_oracle_checks(&resolved.params, sub_seed(seed, 3))?);
    Ok(results)
}

/// Lower-triangular Cholesky factor of a small dense covariance.
fn cholesky(cov: &[f64], dim: usize) -> Option<[[f64; 4]; 4]> {
    let mut l = [[0.0f64; 4]; 4];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = cov[i * dim + j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

fn tridiagonal(dim: usize, rho: f64) -> Vec<f64> {
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        cov[i * dim + i] = 1.0;
        if i + 1 < dim {
            cov[i * dim + i + 1] = rho;
            cov[(i + 1) * dim + i] = rho;
        }
    }
    cov
}

fn orthant_checks(seed: u64) -> Result<Vec<CheckResult>, CliError> {
    let cases: [(usize, f64, &[Sign]); 6] = [
        (2, 0.5, &[Sign::Pos, Sign::Pos]),
        (2, -0.4, &[Sign::Pos, Sign::Neg]),
        (3, 0.5, &[Sign::Pos, Sign::Pos, Sign::Pos]),
        (3, -0.4, &[Sign::Neg, Sign::Pos, Sign::Neg]),
        (4, 0.5, &[Sign::Pos, Sign::Pos, Sign::Pos, Sign::Pos]),
        (4, -0.4, &[Sign::Pos, Sign::Neg, Sign::Neg, Sign::Pos]),
    ];
    let mut results = Vec::new();
    for (case_index, (dim, rho, signs)) in cases.iter().enumerate() {
        let name = format!("orthant-mc dim {dim} rho {rho}");
        let cov = tridiagonal(*dim, *rho);
        let spec = OrthantSpec::new(&cov, signs).map_err(CliError::from_orthant)?;
        let exact = orthant(&spec).map_err(CliError::from_orthant)?;
        let l = cholesky(&cov, *dim)
            .ok_or_else(|| CliError::numerical("validate: non-PD check covariance"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, case_index as u64));
        let mut hits = 0usize;
        let mut z = [0.0f64; 4];
        for _ in 0..ORTHANT_SAMPLES {
            for entry in z.iter_mut().take(*dim) {
                *entry = rng.sample(StandardNormal);
            }
            let ok = (0..*dim).all(|i| {
                let mut x = 0.0;
                for k in 0..=i {
                    x += l[i][k] * z[k];
                }
                match signs[i] {
                    Sign::Pos => x > 0.0,
                    Sign::Neg => x < 0.0,
                }
            });
            hits += usize::from(ok);
        }
        let mc = hits as f64 / ORTHANT_SAMPLES as f64;
        let se = proportion_se(mc, ORTHANT_SAMPLES).max(1e-12);
        results.push(if (mc - exact).abs() < 3.0 * se {
            CheckResult::pass(name)
        } else {
            CheckResult::fail(name, format!("exact {exact} vs mc {mc} (se {se})"))
        });
    }
    Ok(results)
}

fn independence_checks(params: &ModelParams, seed: u64) -> Result<Vec<CheckResult>, CliError> {
    let pairs = [(5usize, 6usize), (5, 7), (5, 50)];
    let mut counts = [[0u64; 4]; 3];
    for k in 0..INDEPENDENCE_TRIALS {
        let r = observe(
            params,
            Hypothesis::H0,
            GenerationMode::Ar,
            sub_seed(seed, k as u64),
        )?;
        let signs = r.as_slice();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let e_i = usize::from(signs[i] == signs[i + 1]);
            let e_j = usize::from(signs[j] == signs[j + 1]);
            counts[p][(e_i << 1) | e_j] += 1;
        }
    }
    let mut results = Vec::new();
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let name = format!("h0-independence pair ({i}, {j})");
        let worst = counts[p]
            .iter()
            .map(|&c| {
                let freq = c as f64 / INDEPENDENCE_TRIALS as f64;
                let se = proportion_se(freq, INDEPENDENCE_TRIALS).max(1e-12);
                ((freq - 0.25).abs() / se, freq)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("four cells");
        results.push(if worst.0 < 3.0 {
            CheckResult::pass(name)
        } else {
            CheckResult::fail(
                name,
                format!("cell frequency {} is {:.2} std errors from 1/4", worst.1, worst.0),
            )
        });
    }
    Ok(results)
}

fn pair_oracle_checks(params: &ModelParams, seed: u64) -> Result<Vec<CheckResult>, CliError> {
    let coeffs = detector_coeffs(params);
    let pairs = [(10usize, 11usize), (10, 12), (10, 20)];
    let estimates = mc_joint_event_oracle(params, &pairs, PAIR_ORACLE_TRIALS, seed)?;
    let mut results = Vec::new();
    for est in &estimates {
        let name = format!("pair-joint-mc pair ({}, {})", est.i, est.j);
        let exact = pair_joint_probs_for_mode(
            est.i,
            est.j,
            params,
            &coeffs,
            GenerationMode::ExactTridiagonal,
        )?;
        let cells = [
            (est.probs.p00, exact.p00),
            (est.probs.p01, exact.p01),
            (est.probs.p10, exact.p10),
            (est.probs.p11, exact.p11),
        ];
        let worst = cells
            .iter()
            .zip(&est.ses)
            .map(|(&(mc, want), &se)| ((mc - want).abs() / se.max(1e-12), mc, want))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("four cells");
        results.push(if worst.0 < 3.0 {
            CheckResult::pass(name)
        } else {
            CheckResult::fail(
                name,
                format!(
                    "oracle {} vs closed form {} at {:.2} std errors",
                    worst.1, worst.2, worst.0
                ),
            )
        });
    }
    Ok(results)
}

impl CliError {
    fn from_orthant(e: onebit_detect::orthant::OrthantError) -> Self {
        CliError::numerical(e.to_string())
    }
}
