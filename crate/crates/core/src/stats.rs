//! Small numeric helpers shared by the model, confirmation and search stages.

use statrs::distribution::{ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::standard()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// Standard normal quantile. Returns ±inf at 0 and 1.
pub fn norm_ppf(p: f64) -> f64 {
    standard().inverse_cdf(p)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Type-7 quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_reference_values() {
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_cdf(1.96), 0.9750021048517795, epsilon = 1e-10);
        assert_abs_diff_eq!(norm_ppf(0.05), -1.6448536269514729, epsilon = 1e-9);
        assert_abs_diff_eq!(norm_ppf(0.1), -1.2815515655446004, epsilon = 1e-9);
    }

    #[test]
    fn type7_quartiles() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.25), 2.75);
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.75), 6.25);
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.5), 4.5);
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(sample_std(&[3.0; 5]), 0.0);
        assert_abs_diff_eq!(sample_std(&[1.0, 2.0, 3.0, 4.0]), 1.2909944487358056, epsilon = 1e-14);
    }
}
