use proptest::prelude::*;

use specsense::detectors::{metric_trajectory, oas_ratio, run_algorithm1, CumulativeDetector};
use specsense::harness::{format_g, parse_summary_csv, parse_trials_csv, summary_csv, trials_csv, SummaryRow, TrialRecord};
use specsense::linalg::{eigen_extremes, eigenvalues, jacobi_eigen, CovarianceAccumulator, SymmetricMatrix};
use specsense::shrinkage::{oas_estimate, oas_rho, oas_rho_iterative};
use specsense::signal::{generate_noise, make_segment, mix_at_snr, NoiseModel, SampleStream};
use specsense::threshold::{CacheEntry, CalibrationMode, CalibrationTarget, ThresholdCache};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn symmetric(dim: usize) -> impl Strategy<Value = SymmetricMatrix> {
    prop::collection::vec(-5.0f64..5.0, dim * dim).prop_map(move |v| {
        SymmetricMatrix::from_upper_fn(dim, |i, j| 0.5 * (v[i * dim + j] + v[j * dim + i]))
    })
}

/// Sample covariance of `n` random vectors of length `dim`.
fn sample_cov(dim: usize, n: usize) -> impl Strategy<Value = SymmetricMatrix> {
    prop::collection::vec(-3.0f64..3.0, dim * n).prop_map(move |v| {
        let mut acc = CovarianceAccumulator::new(dim);
        for x in v.chunks(dim) {
            acc.accumulate(x).unwrap();
        }
        acc.sample_covariance().unwrap()
    })
}

fn stream(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, len).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sliding_window(samples in prop::collection::vec(-1.0f64..1.0, 20..60), dim in 1usize..6) {
        let n = samples.len() - dim + 1;
        let seg = make_segment(&SampleStream::from_samples(samples.clone()).unwrap(), dim, n, 0).unwrap();
        prop_assert_eq!(seg.total_samples(), n + dim - 1);
        for j in 0..n - 1 {
            for i in 0..dim - 1 {
                prop_assert_eq!(seg.get(i, j + 1), seg.get(i + 1, j));
            }
        }
    }

    #[test]
    fn mixing_is_linear(seed in any::<u64>(), snr in -15.0f64..5.0) {
        let s = generate_noise(64, &NoiseModel::default(), seed).unwrap();
        let w = generate_noise(64, &NoiseModel::default(), seed ^ 1).unwrap();
        let once = mix_at_snr(&s, &w, snr).unwrap();
        let twice = mix_at_snr(&s.scaled(2.0), &w.scaled(2.0), snr).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            prop_assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn eigen_extremes_match_jacobi(m in (1usize..9).prop_flat_map(symmetric)) {
        let (hi, lo) = eigen_extremes(&m).unwrap();
        let full = jacobi_eigen(&m);
        let norm = m.frobenius_norm().max(1e-300);
        prop_assert!(hi >= lo);
        prop_assert!((hi - full.values[0]).abs() <= 1e-10 * norm);
        prop_assert!((lo - full.values[m.dim() - 1]).abs() <= 1e-10 * norm);
        let sum: f64 = eigenvalues(&m).unwrap().iter().sum();
        prop_assert!((sum - m.trace()).abs() <= 1e-9 * norm);
    }

    #[test]
    fn eigen_extremes_scale_and_shift(m in (2usize..8).prop_flat_map(symmetric), c in 0.01f64..100.0, alpha in -3.0f64..3.0) {
        let (hi, lo) = eigen_extremes(&m).unwrap();
        let (shi, slo) = eigen_extremes(&m.scaled(c)).unwrap();
        let norm = m.frobenius_norm();
        prop_assert!((shi - c * hi).abs() <= 1e-12 * c * norm);
        prop_assert!((slo - c * lo).abs() <= 1e-12 * c * norm);
        let (ahi, alo) = eigen_extremes(&m.affine_identity(1.0, alpha)).unwrap();
        prop_assert!((ahi - hi - alpha).abs() <= 1e-10 * (norm + alpha.abs()));
        prop_assert!((alo - lo - alpha).abs() <= 1e-10 * (norm + alpha.abs()));
    }

    #[test]
    fn sample_covariance_is_psd((dim, r) in (1usize..10).prop_flat_map(|d| (Just(d), sample_cov(d, 5)))) {
        let (_, lo) = eigen_extremes(&r).unwrap();
        prop_assert!(lo >= -1e-10 * r.frobenius_norm(), "dim {}", dim);
    }

    #[test]
    fn rho_is_scale_invariant(r in sample_cov(6, 4), n in 1usize..500, c in 1e-3f64..1e3) {
        let a = oas_rho(&r, n).unwrap();
        let b = oas_rho(&r.scaled(c), n).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(rel_close(a, b, 1e-12));
        let est = oas_estimate(&r, n).unwrap();
        let scaled = oas_estimate(&r.scaled(c), n).unwrap();
        for (x, y) in est.sigma.as_slice().iter().zip(scaled.sigma.as_slice()) {
            prop_assert!((c * x - y).abs() <= 1e-12 * (c * est.sigma.frobenius_norm()));
        }
    }

    #[test]
    fn shrunk_estimate_properties(r in sample_cov(5, 3), n in 1usize..100) {
        let est = oas_estimate(&r, n).unwrap();
        let tr = r.trace();
        prop_assert!((est.sigma.trace() - tr).abs() <= 1e-12 * tr);
        let rebuilt = r.affine_identity(1.0 - est.rho, est.rho * tr / 5.0);
        prop_assert!(rebuilt.frobenius_distance(&est.sigma) <= 1e-12 * est.sigma.frobenius_norm());
        let (_, lo) = eigen_extremes(&est.sigma).unwrap();
        prop_assert!(lo > 0.0);
        prop_assert!(lo >= est.rho * tr / 5.0 - 1e-12 * tr);
    }

    #[test]
    fn rho_non_increasing_in_n(r in sample_cov(4, 8)) {
        let mut prev = f64::INFINITY;
        for n in (2..=10_000).step_by(97) {
            let rho = oas_rho(&r, n).unwrap();
            prop_assert!(rho <= prev);
            prev = rho;
        }
    }

    #[test]
    fn closed_form_is_fixed_point(r in sample_cov(8, 40), n in 20usize..400) {
        let closed = oas_rho(&r, n).unwrap();
        let it = oas_rho_iterative(&r, n, 0.5, 100_000, 1e-12).unwrap();
        prop_assert!(it.converged);
        if closed < 1.0 {
            prop_assert!((closed - it.rho).abs() < 1e-8, "{} vs {}", closed, it.rho);
        }
    }

    #[test]
    fn trajectory_is_scale_invariant(x in stream(60), c in prop::sample::select(vec![0.01, 0.5, 10.0, 100.0])) {
        let a = metric_trajectory(&x, 6, 55).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let b = metric_trajectory(&scaled, 6, 55).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!(rel_close(*p, *q, 1e-9));
        }
        let gamma = a[a.len() / 2] * (1.0 + 1e-6);
        prop_assert_eq!(
            run_algorithm1(&x, 6, 55, gamma).unwrap().decision,
            run_algorithm1(&scaled, 6, 55, gamma).unwrap().decision
        );
    }

    #[test]
    fn recursion_equals_sum(x in stream(50)) {
        let mut det = CumulativeDetector::new(4);
        for k in 0..47 {
            det.push(&x[k..k + 4]).unwrap();
            let sum: f64 = det.ratios().iter().sum();
            prop_assert!(rel_close(det.cumulative_sum(), sum, 1e-9));
            prop_assert!(det.ratios().iter().all(|t| *t >= 1.0));
            prop_assert_eq!(det.metric().unwrap(), det.cumulative_sum() / (k + 1) as f64);
        }
    }

    #[test]
    fn ratio_is_at_least_one(r in sample_cov(7, 3), n in 1usize..50) {
        prop_assert!(oas_ratio(&r, n).unwrap() >= 1.0);
    }

    #[test]
    fn format_g_roundtrips_to_ten_digits(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let back: f64 = format_g(x).parse().unwrap();
        prop_assert!(rel_close(back, x, 1e-9) || (x == 0.0 && back == 0.0));
    }

    #[test]
    fn trials_csv_roundtrip(rows in prop::collection::vec((0usize..3, -20i32..10, 1usize..2000, any::<bool>(), 0.0f64..1e6), 0..30)) {
        let records: Vec<TrialRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(d, snr, n, decision, stat))| TrialRecord {
                detector: ["alg1", "alg2", "ed:1.5"][d].to_string(),
                snr_db: snr as f64 / 2.0,
                n,
                trial_index: i,
                decision,
                stop_total_samples: n + 31,
                statistic: stat,
            })
            .collect();
        let text = trials_csv(&records);
        let back = parse_trials_csv(&text).unwrap();
        prop_assert_eq!(trials_csv(&back), text);
        prop_assert_eq!(back.len(), records.len());
    }

    #[test]
    fn summary_csv_roundtrip(rows in prop::collection::vec((0usize..3, -20i32..10, 1usize..2000, 0.0f64..1.0, 0.0f64..1.0, 0.5f64..5.0, 1.0f64..2000.0), 0..20)) {
        let summaries: Vec<SummaryRow> = rows
            .iter()
            .map(|&(d, snr, n, pd, pfa, gamma, stop)| SummaryRow {
                detector: ["alg1", "mme", "ftm"][d].to_string(),
                snr_db: snr as f64,
                n,
                pd,
                pfa_hat: pfa,
                gamma,
                mean_stop: stop,
                median_stop: stop.floor(),
            })
            .collect();
        let text = summary_csv(&summaries);
        prop_assert_eq!(summary_csv(&parse_summary_csv(&text).unwrap()), text);
    }

    #[test]
    fn cache_roundtrip(dim in 1usize..128, n in 1usize..5000, p_fa in 1e-6f64..0.5, seed in any::<u64>(), gamma in 1.0f64..10.0, analytic in any::<bool>(), seq in any::<bool>(), trials in 0usize..100_000) {
        let mut c = ThresholdCache::new();
        let entry = CacheEntry {
            dim,
            n,
            p_fa,
            mode: if analytic { CalibrationMode::Analytic } else { CalibrationMode::Empirical },
            seed,
            target: if seq { CalibrationTarget::RunningMax } else { CalibrationTarget::FinalMetric },
            trials,
            gamma,
        };
        c.insert(entry.clone());
        let back = ThresholdCache::parse(&c.to_text()).unwrap();
        prop_assert_eq!(back.lookup(&entry).map(f64::to_bits), Some(gamma.to_bits()));
        prop_assert_eq!(back, c);
    }
}
