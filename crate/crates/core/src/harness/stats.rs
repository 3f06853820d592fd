//! Box-plot summaries and rank correlation.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxStats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`, the "type 7" rule). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartiles, 1.5 IQR whiskers and outliers. NaN samples are rejected.
pub fn box_stats(samples: &[f64]) -> Result<BoxStats> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("box statistics need at least one sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = sorted.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v));
    let whisker_low = inside.clone().fold(f64::INFINITY, f64::min);
    let whisker_high = inside.fold(f64::NEG_INFINITY, f64::max);
    let outliers = samples
        .iter()
        .copied()
        .filter(|v| !(lo_fence..=hi_fence).contains(v))
        .collect();
    Ok(BoxStats {
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
/// Returns `None` when either input is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut va, mut vb) = (0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample() {
        let s = box_stats(&[5.0]).unwrap();
        assert_eq!((s.mean, s.median, s.q1, s.q3), (5.0, 5.0, 5.0, 5.0));
        assert_eq!((s.whisker_low, s.whisker_high), (5.0, 5.0));
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn flags_far_sample() {
        let s = box_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(s.outliers, vec![100.0]);
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 4.0));
    }

    #[test]
    fn uniform_hundred() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        let s = box_stats(&v).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (24.75, 49.5, 74.25));
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(box_stats(&[]).is_err());
        assert!(box_stats(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }
}
