//! QQ-plot location and scale on the central theoretical-quantile window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::norm_ppf;

/// Probability window of theoretical quantiles used for the line fit.
pub const QQ_WINDOW: (f64, f64) = (0.025, 0.975);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqMetrics {
    /// Intercept of the fitted line.
    pub location: f64,
    /// Slope of the fitted line.
    pub scale: f64,
    /// `(theoretical, sample)` pairs inside the window.
    pub points: Vec<(f64, f64)>,
}

/// Pairs the order statistics with standard-normal quantiles at plotting
/// positions `(i - 0.5)/n`, keeps those whose position lies in [`QQ_WINDOW`],
/// and fits `sample = location + scale · theoretical` by least squares.
pub fn qq_metrics(values: &[f64]) -> Result<QqMetrics> {
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let points: Vec<(f64, f64)> = x
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| {
            let p = (i as f64 + 0.5) / n;
            (p >= QQ_WINDOW.0 && p <= QQ_WINDOW.1).then(|| (norm_ppf(p), v))
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "QQ window holds {} points, need at least 2",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let tx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ty = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - tx) * (p.1 - ty)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - tx).powi(2)).sum();
    let scale = sxy / sxx;
    Ok(QqMetrics { location: ty - scale * tx, scale, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn normal_quantiles(n: usize) -> Vec<f64> {
        (0..n).map(|i| norm_ppf((i as f64 + 0.5) / n as f64)).collect()
    }

    #[test]
    fn self_pairing() {
        let q = qq_metrics(&normal_quantiles(50)).unwrap();
        assert_abs_diff_eq!(q.location, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.scale, 1.0, epsilon = 1e-12);
        assert_eq!(q.points.len(), 48);
    }

    #[test]
    fn affine_example() {
        let v: Vec<f64> = normal_quantiles(50).iter().map(|z| 3.0 + 2.0 * z).collect();
        let q = qq_metrics(&v).unwrap();
        assert_abs_diff_eq!(q.location, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.scale, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn too_few_points() {
        assert!(qq_metrics(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn affine_equivariant(a in -5.0f64..5.0, b in 0.01f64..10.0, v in prop::collection::vec(-10.0f64..10.0, 10..60)) {
            let base = qq_metrics(&v).unwrap();
            let t: Vec<f64> = v.iter().map(|x| a + b * x).collect();
            let q = qq_metrics(&t).unwrap();
            prop_assert!((q.location - (a + b * base.location)).abs() < 1e-9 * (1.0 + q.location.abs()));
            prop_assert!((q.scale - b * base.scale).abs() < 1e-9 * (1.0 + q.scale.abs()));
        }
    }
}
