//! Randomized invariants over the numeric core.

use pra_core::analysis;
use pra_core::indicators::{ema_smooth, Indicator, IndicatorKind};
use pra_core::matrix::Mat;
use pra_core::significance::{self, NullDistribution, TailStatistic, TrialRecord};
use pra_core::spectra;
use pra_core::stats;
use pra_core::synthetic;
use proptest::prelude::*;

fn symmetric_matrix(max_n: usize) -> impl Strategy<Value = Mat<f64>> {
    (2usize..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-3.0f64..3.0, n * n)
            .prop_map(move |data| Mat::from_fn(n, n, |i, j| data[i * n + j]).symmetrized())
    })
}

fn uniform_reference(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn two_by_two_eigenvalues_match_the_closed_form(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        c in -3.0f64..3.0,
    ) {
        let m = Mat::from_rows(vec![vec![a, b], vec![b, c]]).unwrap();
        let spectrum = spectra::eig_symmetric(&m, &[1.0, 0.0]).unwrap();
        let mid = 0.5 * (a + c);
        let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        prop_assert!((spectrum.eigenvalues[0] - (mid + radius)).abs() < 1e-9);
        prop_assert!((spectrum.eigenvalues[1] - (mid - radius)).abs() < 1e-9);
    }

    #[test]
    fn decompositions_preserve_trace_and_reconstruct(m in symmetric_matrix(6)) {
        let n = m.n_rows();
        let spectrum = spectra::eig_symmetric(&m, &uniform_reference(n)).unwrap();
        let trace = m.trace();
        let eigen_sum: f64 = spectrum.eigenvalues.iter().sum();
        prop_assert!((trace - eigen_sum).abs() < 1e-9 * (1.0 + trace.abs()));
        let residual = spectrum.reconstruct().add_scaled(&m, -1.0).frobenius();
        prop_assert!(residual < 1e-8 * (1.0 + m.frobenius()));
    }

    #[test]
    fn sign_alignment_is_idempotent_and_non_negative(
        v in prop::collection::vec(-3.0f64..3.0, 2..8),
        r in prop::collection::vec(-3.0f64..3.0, 2..8),
    ) {
        let n = v.len().min(r.len());
        let v = &v[..n];
        let r = &r[..n];
        prop_assume!(stats::norm2(v) > 1e-3 && stats::norm2(r) > 1e-3);
        let once = spectra::sign_align(v, r).unwrap();
        let twice = spectra::sign_align(&once, r).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(stats::dot(&once, r) >= 0.0);
    }

    #[test]
    fn standardization_is_idempotent(v in prop::collection::vec(-4.0f64..4.0, 3..80)) {
        let mut first = v.clone();
        prop_assume!(stats::sample_variance(&first) > 1e-6);
        stats::standardize_in_place(&mut first, "v").unwrap();
        let mut second = first.clone();
        stats::standardize_in_place(&mut second, "v").unwrap();
        for (a, b) in first.iter().zip(&second) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ema_smoothing_ignores_affine_changes_of_the_input(
        x in prop::collection::vec(-2.0f64..2.0, 80..120),
        a in 0.05f64..3.0,
        b in -2.0f64..2.0,
        flip in proptest::bool::ANY,
    ) {
        // The smoothed series is standardized, so rescaling and shifting
        // the input leaves it unchanged up to the sign of the scale.
        let beta = 0.5;
        let make = |values: Vec<f64>| Indicator {
            values,
            valid_from: 0,
            kind: IndicatorKind::Synthetic,
            beta: None,
            cutoff: None,
        };
        let base = match ema_smooth(&make(x.clone()), beta) {
            Ok(e) => e,
            // Degenerate inputs (constant after smoothing) prove nothing.
            Err(_) => return Ok(()),
        };
        let scale = if flip { -a } else { a };
        let transformed: Vec<f64> = x.iter().map(|v| scale * v + b).collect();
        let smoothed = ema_smooth(&make(transformed), beta).unwrap();
        let sign = if flip { -1.0 } else { 1.0 };
        for t in base.valid_from..x.len() {
            prop_assert!(
                (smoothed.values[t] - sign * base.values[t]).abs() < 1e-9,
                "affine invariance broken at t = {}", t
            );
        }
    }

    #[test]
    fn psd_projection_respects_the_floor(m in symmetric_matrix(5)) {
        let floor = 1e-8;
        let projected = synthetic::psd_project(&m, floor).unwrap();
        let n = projected.n_rows();
        let spectrum = spectra::eig_symmetric(&projected, &uniform_reference(n)).unwrap();
        prop_assert!(spectrum.lambda_min() >= floor - 1e-12);
    }

    #[test]
    fn group_averages_of_symmetric_matrices_are_symmetric(
        m in symmetric_matrix(6),
        n_groups in 1usize..4,
    ) {
        let n = m.n_rows();
        let n_groups = n_groups.min(n);
        let groups: Vec<usize> = (0..n).map(|i| i % n_groups).collect();
        let g = analysis::group_average_matrix(&m, &groups, n_groups).unwrap();
        prop_assert!(g.max_asymmetry() < 1e-12);
    }

    #[test]
    fn bin_counts_partition_the_sample_and_means_stay_in_range(
        x in prop::collection::vec(-5.0f64..5.0, 8..200),
        n_bins in 2usize..8,
    ) {
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi > lo);
        let curve = analysis::binned_means(&x, &x, n_bins).unwrap();
        prop_assert_eq!(curve.bin_counts.iter().sum::<usize>(), x.len());
        prop_assert_eq!(curve.bin_edges.len(), n_bins + 1);
        for (b, mean) in curve.bin_means.iter().enumerate() {
            if let Some(m) = mean {
                prop_assert!(*m >= curve.bin_edges[b] - 1e-12);
                prop_assert!(*m <= curve.bin_edges[b + 1] + 1e-12);
            }
        }
    }

    #[test]
    fn p_values_are_probabilities_and_monotone(
        minima in prop::collection::vec(-2.0f64..0.0, 3..60),
        first in -3.0f64..0.5,
        second in -3.0f64..0.5,
    ) {
        let records: Vec<TrialRecord<f64>> = minima
            .iter()
            .map(|&l| TrialRecord {
                eigenvalues: vec![l.abs(), l],
                bottom_overlap: 0.2,
                top_overlap: 0.1,
            })
            .collect();
        let n = records.len();
        let null = NullDistribution {
            n_trials: n,
            seed: 0,
            records,
            mean_spectrum: Vec::new(),
            failures: 0,
        };
        let floor = 1.0 / (n as f64 + 1.0);
        let p_first = significance::p_value(&null, TailStatistic::MinEigenvalue, first).unwrap();
        let p_second = significance::p_value(&null, TailStatistic::MinEigenvalue, second).unwrap();
        for p in [p_first, p_second] {
            prop_assert!(p >= floor - 1e-15 && p <= 1.0);
        }
        if first <= second {
            prop_assert!(p_first <= p_second);
        } else {
            prop_assert!(p_second <= p_first);
        }
    }
}
