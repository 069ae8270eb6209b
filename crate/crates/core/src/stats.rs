//! Small sample statistics shared by the Monte Carlo routines.

use crate::math::sqrt;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// Two-pass mean and standard error. Summation runs in slice order, so the
    /// result only depends on the sample values.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, standard_error: f64::NAN, n_samples: 0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            sqrt(ss / ((n - 1) as f64) / n as f64)
        } else {
            0.0
        };
        Self { mean, standard_error: se, n_samples: n }
    }

    /// `|mean - target| <= k·SE + slack`.
    pub fn agrees_with(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.standard_error + slack
    }
}

/// Unbiased sample variance with the standard error of that estimator,
/// computed from the fourth central moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub standard_error: f64,
    pub n_samples: usize,
}

impl VarianceEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n < 4 {
            return Self { variance: f64::NAN, standard_error: f64::NAN, n_samples: n };
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for x in samples {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        let variance = m2 / (nf - 1.0);
        let mu2 = m2 / nf;
        let mu4 = m4 / nf;
        let se = sqrt(((mu4 - mu2 * mu2 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0));
        Self { variance, standard_error: se, n_samples: n }
    }
}

/// A binomial proportion with its 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub successes: usize,
    pub trials: usize,
}

const Z_95: f64 = 1.959_963_984_540_054;

impl Proportion {
    pub fn wilson(successes: usize, trials: usize) -> Self {
        if trials == 0 {
            return Self { estimate: f64::NAN, lower: 0.0, upper: 1.0, successes, trials };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z_95 * Z_95;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = Z_95 * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        Self {
            estimate: p,
            lower: if successes == 0 { 0.0 } else { (centre - half).max(0.0) },
            upper: if successes == trials { 1.0 } else { (centre + half).min(1.0) },
            successes,
            trials,
        }
    }

    pub fn overlaps(&self, other: &Proportion) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se_of_known_sample() {
        let est = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(est.mean, 2.5);
        // s² = 5/3, SE = sqrt(5/3 / 4)
        assert!((est.standard_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let p = Proportion::wilson(30, 100);
        assert!(p.lower < 0.3 && 0.3 < p.upper);
        // Reference values for 30/100: [0.2189, 0.3958].
        assert!((p.lower - 0.2189).abs() < 1e-3);
        assert!((p.upper - 0.3958).abs() < 1e-3);
        let all = Proportion::wilson(10, 10);
        assert_eq!(all.upper, 1.0);
    }

    #[test]
    fn variance_of_symmetric_sample() {
        let v = VarianceEstimate::from_samples(&[-1.0, 1.0, -1.0, 1.0]);
        assert!((v.variance - 4.0 / 3.0).abs() < 1e-15);
    }
}
