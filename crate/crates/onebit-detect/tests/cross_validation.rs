//! End-to-end consistency between the closed-form analysis and the sampling
//! path, exercised through the public API only.
//!
//! Each check pins a seeded Monte-Carlo estimate against the corresponding
//! closed-form quantity at a three-standard-error band, so failures indicate
//! real disagreement rather than sampling noise.

use onebit_detect::analysis::{null_moments, pair_joint_probs, pair_joint_probs_for_mode};
use onebit_detect::detector::{
    agreement_sequence, detect, detector_coeffs, proportion_se, statistic, threshold,
};
use onebit_detect::model::{noise_std_for_snr, observe, GenerationMode};
use onebit_detect::num::sub_seed;
use onebit_detect::sim::mc_joint_event_oracle;
use onebit_detect::{Hypothesis, ModelParams};

/// Signal-present benchmark chain at a given correlation, noise level, and
/// length.
fn benchmark_params(corr: f64, noise_std: f64, n: usize) -> ModelParams {
    ModelParams::new(0.95, 0.01 / 0.9, 0.1, 0.01, 1.0, corr, noise_std, n).unwrap()
}

fn benchmark_params_snr(corr: f64, snr_db: f64, n: usize) -> ModelParams {
    let params = benchmark_params(corr, 0.3, n);
    let noise = noise_std_for_snr(&params, snr_db);
    params.with_noise_std(noise).unwrap()
}

#[test]
fn ar_pair_joints_match_end_to_end_sampling() {
    let params = benchmark_params_snr(0.7, -5.0, 200);
    let coeffs = detector_coeffs(&params);
    let pairs = [(10usize, 11usize), (50, 52), (100, 103), (150, 158)];
    let trials = 150_000usize;

    let mut counts = [[0u64; 4]; 4];
    for k in 0..trials {
        let seed = sub_seed(0x0ddba11, k as u64);
        let r = observe(&params, Hypothesis::H1, GenerationMode::Ar, seed).unwrap();
        let signs = r.as_slice();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let e_i = usize::from(signs[i] == signs[i + 1]);
            let e_j = usize::from(signs[j] == signs[j + 1]);
            counts[p][(e_i << 1) | e_j] += 1;
        }
    }

    for (p, &(i, j)) in pairs.iter().enumerate() {
        let joint = pair_joint_probs_for_mode(i, j, &params, &coeffs, GenerationMode::Ar).unwrap();
        assert!((joint.sum() - 1.0).abs() < 1e-12);
        for (cell, want) in [joint.p00, joint.p01, joint.p10, joint.p11]
            .iter()
            .enumerate()
        {
            let got = counts[p][cell] as f64 / trials as f64;
            let se = proportion_se(got, trials);
            assert!(
                (got - want).abs() < 3.0 * se,
                "pair ({i}, {j}) cell {cell}: sampled {got} vs closed form {want} (se {se})"
            );
        }
    }
}

#[test]
fn tridiagonal_pair_joints_match_windowed_oracle() {
    let params = benchmark_params_snr(0.7, -5.0, 1000);
    let coeffs = detector_coeffs(&params);
    let pairs = [(20usize, 21usize), (40, 42), (60, 63), (80, 90)];
    let estimates = mc_joint_event_oracle(&params, &pairs, 600_000, 0x5eed).unwrap();

    for est in &estimates {
        let want = pair_joint_probs(est.i, est.j, &params, &coeffs).unwrap();
        assert_eq!(est.counts.iter().sum::<u64>() as usize, est.trials);
        for (cell, (got, want)) in [est.probs.p00, est.probs.p01, est.probs.p10, est.probs.p11]
            .iter()
            .zip([want.p00, want.p01, want.p10, want.p11])
            .enumerate()
        {
            let se = est.ses[cell].max(1e-12);
            assert!(
                (got - want).abs() < 3.0 * se,
                "pair ({}, {}) cell {cell}: oracle {got} vs closed form {want} (se {se})",
                est.i,
                est.j
            );
        }
    }
}

#[test]
fn null_moments_match_h0_sample_moments() {
    let params = benchmark_params_snr(0.7, -5.0, 300);
    let coeffs = detector_coeffs(&params);
    let moments = null_moments(&coeffs);
    let trials = 60_000usize;

    let mut stats = Vec::with_capacity(trials);
    for k in 0..trials {
        let seed = sub_seed(0xca11ab1e, k as u64);
        let r = observe(&params, Hypothesis::H0, GenerationMode::Ar, seed).unwrap();
        let e = agreement_sequence(&r).unwrap();
        stats.push(statistic(&e, &coeffs).unwrap());
    }

    let t = trials as f64;
    let mean = stats.iter().sum::<f64>() / t;
    let var = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (t - 1.0);
    let m4 = stats
        .iter()
        .map(|s| {
            let d = s - mean;
            d * d * d * d
        })
        .sum::<f64>()
        / t;

    let mean_se = (var / t).sqrt();
    assert!(
        (mean - moments.mu0).abs() < 3.0 * mean_se,
        "sample mean {mean} vs mu0 {} (se {mean_se})",
        moments.mu0
    );
    // Standard error of the sample variance from the empirical fourth moment.
    let var_se = ((m4 - var * var) / t).sqrt();
    assert!(
        (var - moments.var0).abs() < 3.0 * var_se,
        "sample variance {var} vs var0 {} (se {var_se})",
        moments.var0
    );
}

#[test]
fn detect_agrees_with_manual_pipeline() {
    let params = benchmark_params_snr(0.7, -5.0, 400);
    let coeffs = detector_coeffs(&params);
    let th = threshold(params.prior_h0(), params.n()).unwrap();
    for k in 0..50u64 {
        for hyp in [Hypothesis::H0, Hypothesis::H1] {
            let seed = sub_seed(0xfeed, 2 * k + u64::from(hyp == Hypothesis::H1));
            let r = observe(&params, hyp, GenerationMode::Ar, seed).unwrap();
            let result = detect(&r, &params).unwrap();
            let e = agreement_sequence(&r).unwrap();
            let t = statistic(&e, &coeffs).unwrap();
            assert_eq!(result.statistic.to_bits(), t.to_bits());
            assert_eq!(result.threshold.to_bits(), th.to_bits());
            let want = if t > th { Hypothesis::H1 } else { Hypothesis::H0 };
            assert_eq!(result.decision, want);
        }
    }
}
