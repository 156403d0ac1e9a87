use approx::assert_relative_eq;
use ndarray::{array, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_bht::bhta::SolverConfig;
use sparse_bht::error::Error;
use sparse_bht::metrics::{
    assumption_diagnostics, column_variances, excess_kurtosis, input_snr, output_snr,
    output_snr_with, support_report, SnrConvention, SNR_CAP_DB,
};
use sparse_bht::model::{sample_dictionary, SpikyPrior};

fn gaussian_samples(count: usize, seed: u64) -> Vec<f64> {
    // Polar-method Gaussians, independent of the library's internal sampler.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            out.push(u * f);
            if out.len() < count {
                out.push(v * f);
            }
        }
    }
    out
}

// ----------------------------------------------------------------- output SNR

#[test]
fn output_snr_matches_hand_computed_ratios() {
    let y = array![10.0, 0.0];
    let off_by_one = array![9.0, 0.0];
    // Norm ratio 10 under the 10 log10 convention.
    assert_relative_eq!(output_snr(&y, &off_by_one).unwrap(), 10.0, max_relative = 1e-12);
    // A zero estimate scores exactly 0 dB: the error equals the signal.
    let zero = Array1::zeros(2);
    assert_relative_eq!(output_snr(&y, &zero).unwrap(), 0.0, epsilon = 1e-12);
}

#[test]
fn output_snr_caps_perfect_reconstruction() {
    let y = array![1.0, -2.0, 3.0];
    let snr = output_snr(&y, &y.clone()).unwrap();
    assert_eq!(snr, SNR_CAP_DB);
    // Extremely close but imperfect estimates stay at or below the cap.
    let mut close = y.clone();
    close[0] += 1e-300;
    assert!(output_snr(&y, &close).unwrap() <= SNR_CAP_DB);
}

#[test]
fn output_snr_rejects_a_zero_reference() {
    let zero = Array1::<f64>::zeros(3);
    let y_hat = array![1.0, 0.0, 0.0];
    assert!(matches!(
        output_snr(&zero, &y_hat),
        Err(Error::ZeroNorm(_))
    ));
}

#[test]
fn output_snr_is_scale_and_permutation_invariant() {
    let y = array![1.0, -2.0, 0.5, 3.0];
    let y_hat = array![0.9, -2.2, 0.4, 3.3];
    let base = output_snr(&y, &y_hat).unwrap();
    let scaled = output_snr(&(&y * 7.0), &(&y_hat * 7.0)).unwrap();
    assert_relative_eq!(base, scaled, max_relative = 1e-12);
    let perm_y = array![3.0, 1.0, -2.0, 0.5];
    let perm_hat = array![3.3, 0.9, -2.2, 0.4];
    let permuted = output_snr(&perm_y, &perm_hat).unwrap();
    assert_relative_eq!(base, permuted, max_relative = 1e-12);
}

#[test]
fn output_snr_conventions_differ_by_a_factor_of_two() {
    let y = array![1.0, -2.0, 0.5, 3.0];
    let y_hat = array![0.9, -2.2, 0.4, 3.3];
    let ten = output_snr_with(&y, &y_hat, SnrConvention::Log10NormRatio).unwrap();
    let twenty = output_snr_with(&y, &y_hat, SnrConvention::Log20NormRatio).unwrap();
    assert_relative_eq!(twenty, 2.0 * ten, max_relative = 1e-12);
}

// ------------------------------------------------------------------ input SNR

#[test]
fn input_snr_matches_hand_computed_values() {
    assert_relative_eq!(input_snr(100.0, 1.0).unwrap(), 40.0, max_relative = 1e-12);
    assert_relative_eq!(input_snr(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-12);
    assert_relative_eq!(input_snr(10.0, 0.1).unwrap(), 40.0, max_relative = 1e-12);
    assert!(input_snr(0.0, 1.0).is_err());
    assert!(input_snr(1.0, -1.0).is_err());
}

// ------------------------------------------------------------ support report

#[test]
fn support_report_counts_hits_and_misses() {
    let q_true = array![1.0, 0.0, 1.0, 0.0];

    let same = support_report(&q_true, &q_true.clone()).unwrap();
    assert_eq!(
        (same.true_positives, same.false_positives, same.false_negatives),
        (2, 0, 0)
    );
    assert!(same.exact_recovery);

    let complement = array![0.0, 1.0, 0.0, 1.0];
    let miss = support_report(&q_true, &complement).unwrap();
    assert_eq!(
        (miss.true_positives, miss.false_positives, miss.false_negatives),
        (0, 2, 2)
    );
    assert!(!miss.exact_recovery);

    let partial = array![1.0, 1.0, 0.0, 0.0];
    let rep = support_report(&q_true, &partial).unwrap();
    assert_eq!(
        (rep.true_positives, rep.false_positives, rep.false_negatives),
        (1, 1, 1)
    );
    assert!(!rep.exact_recovery);
}

#[test]
fn support_report_requires_binary_patterns_of_equal_length() {
    let q_true = array![1.0, 0.0, 1.0];
    let fractional = array![1.0, 0.5, 0.0];
    assert!(matches!(
        support_report(&q_true, &fractional),
        Err(Error::InvalidParameter { name: "q_hat", .. })
    ));
    assert!(matches!(
        support_report(&fractional, &q_true),
        Err(Error::InvalidParameter { name: "q_true", .. })
    ));
    let short = array![1.0, 0.0];
    assert!(support_report(&q_true, &short).is_err());
}

// -------------------------------------------------------------- kurtosis

#[test]
fn excess_kurtosis_is_near_zero_for_gaussian_samples() {
    let n = 20000;
    let samples = gaussian_samples(n, 201);
    let k = excess_kurtosis(samples);
    let bound = 4.0 * (24.0 / n as f64).sqrt();
    assert!(k.abs() < bound, "kurtosis {k} outside sampling bound {bound}");
}

#[test]
fn excess_kurtosis_of_a_symmetric_two_point_distribution_is_minus_two() {
    let samples: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_relative_eq!(excess_kurtosis(samples), -2.0, max_relative = 1e-12);
}

#[test]
fn excess_kurtosis_is_scale_invariant_and_safe_on_degenerate_input() {
    let samples = gaussian_samples(500, 202);
    let base: f64 = excess_kurtosis(samples.iter().cloned());
    let scaled = excess_kurtosis(samples.iter().map(|v| v * 42.0));
    assert_relative_eq!(base, scaled, max_relative = 1e-9);
    assert_eq!(excess_kurtosis(Vec::<f64>::new()), 0.0);
    assert_eq!(excess_kurtosis(vec![0.0; 16]), 0.0);
}

// ------------------------------------------------------------ column variance

#[test]
fn column_variances_match_a_hand_computed_case() {
    let a = array![1.0, 2.0, 3.0];
    let b = array![3.0, 2.0, 1.0];
    let c = array![2.0, 2.0, 2.0];
    let v = column_variances(&[&a, &b, &c]);
    // Biased (population) variance per column: mean of squared deviations.
    assert_relative_eq!(v[0], 2.0 / 3.0, max_relative = 1e-12);
    assert_eq!(v[1], 0.0);
    assert_relative_eq!(v[2], 2.0 / 3.0, max_relative = 1e-12);
}

#[test]
fn column_variances_track_the_generating_variance() {
    let runs = 2000;
    let dim = 16;
    let sigma = 0.7;
    let pool = gaussian_samples(runs * dim, 203);
    let rows: Vec<Array1<f64>> = (0..runs)
        .map(|r| Array1::from_iter(pool[r * dim..(r + 1) * dim].iter().map(|v| v * sigma)))
        .collect();
    let refs: Vec<&Array1<f64>> = rows.iter().collect();
    let v = column_variances(&refs);
    let target = sigma * sigma;
    let mean_gap: f64 = v.iter().map(|&x| (x - target).abs()).sum::<f64>() / dim as f64;
    let bound = 3.0 * target * (2.0 / runs as f64).sqrt();
    assert!(mean_gap < bound, "mean gap {mean_gap} exceeds {bound}");
}

// ----------------------------------------------------------- diagnostics run

#[test]
fn assumption_diagnostics_requires_enough_runs() {
    let dict = sample_dictionary::<f64>(16, 32, 31).unwrap();
    let prior = SpikyPrior::new(0.9, 1.0).unwrap();
    let config = SolverConfig::default();
    assert!(matches!(
        assumption_diagnostics(&dict, &prior, 0.01, &config, 10, 7),
        Err(Error::InvalidParameter { name: "runs", .. })
    ));
}

#[test]
fn assumption_diagnostics_produces_finite_per_iteration_traces() {
    let dict = sample_dictionary::<f64>(32, 64, 32).unwrap();
    let prior = SpikyPrior::new(0.9, 1.0).unwrap();
    let config = SolverConfig::default();
    let trace = assumption_diagnostics(&dict, &prior, 0.01, &config, 30, 8).unwrap();
    let len = trace.error_term.len();
    assert!(len >= 1, "expected at least one common iteration");
    assert_eq!(trace.mean_gamma_sq.len(), len);
    assert_eq!(trace.kurtosis.len(), len);
    for i in 0..len {
        assert!(trace.error_term[i].is_finite() && trace.error_term[i] >= 0.0);
        assert!(trace.mean_gamma_sq[i].is_finite() && trace.mean_gamma_sq[i] > 0.0);
        assert!(trace.kurtosis[i].is_finite());
    }
    // Deterministic in the seed.
    let again = assumption_diagnostics(&dict, &prior, 0.01, &config, 30, 8).unwrap();
    assert_eq!(trace.error_term, again.error_term);
    assert_eq!(trace.kurtosis, again.kurtosis);
}
