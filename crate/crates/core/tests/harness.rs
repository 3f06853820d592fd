use bitrobust::codec::{CodecKind, CodecSpec};
use bitrobust::harness::{
    box_stats, csv_string, parity_variant, plain_variant, robustness_from_means, run_sweep, spearman, stats,
    ParityBudget, SweepConfig,
};
use bitrobust::model::{quantize_model, train_toy, GridPolicy, LabeledDataset, ModelBundle, ToyConfig};
use proptest::prelude::*;

/// Mean accuracies of the 16-bit MNIST model at rber 0, 0.001, ..., 0.014.
const PUBLISHED_MEANS: [f64; 15] = [
    0.9959, 0.9952, 0.9945, 0.9937, 0.9924, 0.9906, 0.9885, 0.9847, 0.9816, 0.9754, 0.96952, 0.9576, 0.94875,
    0.9339, 0.9224,
];
const PUBLISHED_RATES: [f64; 15] = [
    0.0, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009, 0.010, 0.011, 0.012, 0.013, 0.014,
];

#[test]
fn published_curve_gives_expected_robustness() {
    let means: Vec<(f64, f64)> = PUBLISHED_RATES.into_iter().zip(PUBLISHED_MEANS).collect();
    assert_eq!(robustness_from_means(0.9961, &means, 0.95), Some(0.012));
    assert_eq!(robustness_from_means(0.9961, &means, 0.999), Some(0.001));
    assert_eq!(robustness_from_means(0.9961, &means, 1.0), None);
    assert_eq!(robustness_from_means(0.9961, &means, 0.5), Some(0.014));
}

proptest! {
    #[test]
    fn robustness_never_grows_with_x(
        means in prop::collection::vec(0.0f64..1.0, 1..20),
        baseline in 0.1f64..1.0,
        x1 in 0.01f64..=1.0,
        x2 in 0.01f64..=1.0,
    ) {
        let curve: Vec<(f64, f64)> = means.iter().enumerate().map(|(i, &m)| (i as f64 * 1e-3, m)).collect();
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let r_lo = robustness_from_means(baseline, &curve, lo);
        let r_hi = robustness_from_means(baseline, &curve, hi);
        if let Some(h) = r_hi {
            prop_assert!(r_lo.unwrap() >= h);
        }
    }

    #[test]
    fn spearman_without_ties_matches_rank_difference_formula(
        raw in prop::collection::btree_set(-1000i32..1000, 3..30),
        seed in any::<u64>(),
    ) {
        let a: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
        let n = a.len();
        // a permutation of distinct values for the second variable
        let mut b: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1_000_003) as f64 + i as f64 * 1e-7).collect();
        b.rotate_left(seed as usize % n);
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter().map(|x| v.iter().filter(|y| *y < x).count() as f64 + 1.0).collect()
        };
        let (ra, rb) = (rank(&a), rank(&b));
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        let nf = n as f64;
        let expected = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
        prop_assert!((spearman(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn quartiles_follow_interpolated_order_statistics(v in prop::collection::vec(-1.0f64..1.0, 1..60), p in 0.0f64..=1.0) {
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        // piecewise-linear interpolation through the points ((k)/(n-1), x_k)
        let expected = if n == 1 {
            sorted[0]
        } else {
            let k = (0..n - 1).find(|&k| p <= (k + 1) as f64 / (n - 1) as f64).unwrap();
            let t = p * (n - 1) as f64 - k as f64;
            sorted[k] * (1.0 - t) + sorted[k + 1] * t
        };
        prop_assert!((stats::quantile_sorted(&sorted, p) - expected).abs() < 1e-12);
    }
}

#[test]
fn box_statistics_fixture() {
    let s = box_stats(&[7.0, 1.0, 100.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 9.0]).unwrap();
    assert_eq!((s.q1, s.median, s.q3), (3.25, 5.5, 7.75));
    assert_eq!((s.whisker_low, s.whisker_high), (1.0, 9.0));
    assert_eq!(s.outliers, vec![100.0]);
    assert_eq!(s.mean, 14.5);
    assert!(box_stats(&[]).is_err());
    assert!(box_stats(&[1.0, f64::NAN]).is_err());
}

#[test]
fn spearman_with_ties() {
    let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!((r - 0.9486832980505138).abs() < 1e-12);
    assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
}

fn small_toy() -> (ModelBundle, LabeledDataset) {
    let cfg = ToyConfig { samples: 400, hidden: 8, epochs: 15, ..ToyConfig::default() };
    let out = train_toy(&cfg).unwrap();
    let spec = CodecSpec::new(CodecKind::BinaryExpansion, 16, false).unwrap();
    (quantize_model(&out.model, spec, GridPolicy::PerTensor).unwrap(), out.test)
}

#[test]
fn sweep_is_reproducible_and_ordered() {
    let (bundle, data) = small_toy();
    let mut cfg = SweepConfig::new(vec![0.0, 0.001, 0.01, 0.1], 17);
    cfg.trials = 6;
    let a = run_sweep(&bundle, &data, &cfg).unwrap();
    let b = run_sweep(&bundle, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(csv_string(&a).unwrap(), csv_string(&b).unwrap());
    for (p, rate) in a.points.iter().zip(&cfg.rber_grid) {
        assert_eq!(p.rber, *rate);
        let trials: Vec<u64> = p.samples.iter().map(|s| s.trial).collect();
        assert_eq!(trials, (0..6).collect::<Vec<_>>());
    }
    assert_eq!(a.points[0].mean_accuracy, a.baseline_accuracy);
    assert!(a.points[0].samples.iter().all(|s| s.flips == 0));
    // common random numbers: trial t at a higher rate never flips fewer bits here
    for t in 0..6 {
        let flips: Vec<u64> = a.points.iter().map(|p| p.samples[t].flips).collect();
        assert!(flips.windows(2).all(|w| w[0] <= w[1]), "{flips:?}");
    }
    let other = run_sweep(&bundle, &data, &SweepConfig { master_seed: 18, ..cfg.clone() }).unwrap();
    assert_ne!(a.points[3].samples, other.points[3].samples);
}

#[test]
fn csv_layout() {
    let (bundle, data) = small_toy();
    let mut cfg = SweepConfig::new(vec![0.0, 0.05], 1);
    cfg.trials = 3;
    let csv = csv_string(&run_sweep(&bundle, &data, &cfg).unwrap()).unwrap();
    let blocks: Vec<&str> = csv.split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    assert!(blocks[0].starts_with("rber,trial,accuracy,flips\n"));
    assert_eq!(blocks[0].lines().count(), 1 + 6);
    assert!(blocks[1].starts_with("rber,mean,median,q1,q3,whisker_low,whisker_high,outlier_count\n"));
    assert_eq!(blocks[1].trim_end().lines().count(), 1 + 2);
}

#[test]
fn sweep_rejects_bad_input() {
    let (bundle, data) = small_toy();
    let mut cfg = SweepConfig::new(vec![0.0, 0.01], 1);
    cfg.tensor_filter.insert("missing".into());
    assert!(run_sweep(&bundle, &data, &cfg).is_err());
    let empty = LabeledDataset::new(data.dims(), vec![], vec![]).unwrap();
    assert!(run_sweep(&bundle, &empty, &SweepConfig::new(vec![0.0], 1)).is_err());
}

#[test]
fn parity_variants_keep_storage_budget() {
    let (bundle, data) = small_toy();
    let equal = parity_variant(&bundle, ParityBudget::EqualStorage).unwrap();
    assert_eq!(equal.stored_bits(), bundle.stored_bits());
    assert!(equal.tensors().iter().all(|t| t.spec().parity() && t.spec().q() == 16));
    let wider = parity_variant(&bundle, ParityBudget::EqualPrecision).unwrap();
    assert_eq!(wider.stored_bits(), bundle.stored_bits() / 16 * 17);
    assert_eq!(plain_variant(&equal).unwrap().stored_bits(), bundle.stored_bits());

    let mut cfg = SweepConfig::new(vec![0.0], 2);
    cfg.trials = 2;
    let plain = run_sweep(&bundle, &data, &cfg).unwrap();
    let checked = run_sweep(&equal, &data, &cfg).unwrap();
    assert!((plain.baseline_accuracy - checked.baseline_accuracy).abs() <= 0.01);
}
