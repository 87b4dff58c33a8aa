//! Interquartile-range outlier screening.

use crate::stats::quantile_sorted;

pub const DEFAULT_IQR_MULTIPLIER: f64 = 2.0;

/// Indices of values outside `[q1 - r·IQR, q3 + r·IQR]` with type-7 quartiles.
/// Fewer than four values are never screened.
pub fn detect_outliers(values: &[f64], r: f64) -> Vec<usize> {
    if values.len() < 4 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - r * iqr, q3 + r * iqr);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < lo || v > hi)
        .map(|(i, _)| i)
        .collect()
}
