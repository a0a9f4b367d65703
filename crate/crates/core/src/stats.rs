//! Sample summaries shared by the Monte Carlo engines.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// Summation runs in slice order, so equal inputs give bit-equal output.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let (mean, var) = mean_and_variance(values);
        Estimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.std_error
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

/// Mean and unbiased variance. Deviations are taken from the first sample
/// before averaging, so a constant sample has variance exactly 0.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let shift = values[0];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &v in values {
        let d = v - shift;
        sum += d;
        sum_sq += d * d;
    }
    let nf = n as f64;
    let mean_dev = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean_dev * mean_dev) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    (shift + mean_dev, var)
}

/// Sample variance with the standard error of that variance estimate,
/// `sqrt((m4 - s^4) / n)`.
pub fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let (mean, var) = mean_and_variance(values);
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let se = ((m4 - var * var).max(0.0) / n).sqrt();
    (var, se)
}

/// Heavy-tail warning: the largest 1% of the (nonnegative) samples carry more
/// than half of the total mass.
pub fn heavy_tail_flag(values: &[f64]) -> bool {
    if values.is_empty() {
        return false;
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return !total.is_finite();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = (values.len() as f64 * 0.01).ceil() as usize;
    let top_mass: f64 = sorted[..top.max(1)].iter().sum();
    top_mass > 0.5 * total
}

/// Empirical quantile (nearest rank) of integer-valued samples.
pub fn count_quantile(counts: &[usize], q: f64) -> usize {
    if counts.is_empty() {
        return 0;
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_variance() {
        let v = vec![0.367_879_441_171_442_3; 100_000];
        let e = Estimate::from_samples(&v);
        assert_eq!(e.mean, v[0]);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn mean_and_se() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(e.within(2.5, 0.0));
    }

    #[test]
    fn tail_flag() {
        let mut v = vec![1.0; 1000];
        assert!(!heavy_tail_flag(&v));
        v[0] = 5000.0;
        assert!(heavy_tail_flag(&v));
    }

    #[test]
    fn quantiles() {
        let c: Vec<usize> = (0..1000).collect();
        assert_eq!(count_quantile(&c, 0.999), 998);
        assert_eq!(count_quantile(&[3], 0.5), 3);
    }
}
