//! Small statistical toolkit: goodness-of-fit tests, binomial intervals and
//! compensated summation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut previous = 0.0f64;
    for j in 1..=200 {
        let jf = j as f64;
        let term = sign * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() || term.abs() <= 1e-300 {
            return (2.0 * sum).clamp(0.0, 1.0);
        }
        if term.abs() == previous {
            break;
        }
        previous = term.abs();
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_sf((root + 0.12 + 0.11 / root) * d)
}

/// KS statistic for sorted samples given their model CDF values
/// `cdf_at_sorted[i] = F(x_(i))`.
pub fn ks_statistic_from_cdf(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// One-sample KS test from model CDF values at the sorted sample.
pub fn ks_one_sample_from_cdf(cdf_at_sorted: &[f64]) -> Result<TestOutcome> {
    if cdf_at_sorted.is_empty() {
        return Err(Error::Degenerate("KS test needs at least one sample".into()));
    }
    let d = ks_statistic_from_cdf(cdf_at_sorted);
    Ok(TestOutcome {
        statistic: d,
        p_value: ks_p_value(d, cdf_at_sorted.len() as f64),
    })
}

/// One-sample KS test of `samples` against `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<TestOutcome> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let values: Vec<f64> = sorted.iter().map(|&x| cdf(x)).collect();
    ks_one_sample_from_cdf(&values)
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("KS test needs two non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(TestOutcome {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    })
}

/// Pearson chi-square test of observed counts against equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> Result<TestOutcome> {
    if counts.len() < 2 {
        return Err(Error::Degenerate("chi-square test needs at least two bins".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Degenerate("chi-square test on empty sample".into()));
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    Ok(TestOutcome {
        statistic,
        p_value: dist.sf(statistic),
    })
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    /// Raw fraction of successes.
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub trials: u64,
}

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Proportion {
    if trials == 0 {
        return Proportion {
            estimate: f64::NAN,
            ci_halfwidth: f64::NAN,
            ci_lower: 0.0,
            ci_upper: 1.0,
            trials,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        estimate: p,
        ci_halfwidth: half,
        ci_lower: (center - half).max(0.0),
        ci_upper: (center + half).min(1.0),
        trials,
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss = values
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kolmogorov_reference_values() {
        // Classical critical values: P(K > 1.358) ≈ 0.05, P(K > 1.628) ≈ 0.01.
        assert_relative_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 5e-4);
        assert_relative_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 2e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let ok = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(ok.passes(0.01), "{ok:?}");
        let shifted = ks_one_sample(&xs, |x| (x - 0.05).clamp(0.0, 1.0)).unwrap();
        assert!(!shifted.passes(0.01));
    }

    #[test]
    fn two_sample_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..3000).map(|_| rng.random::<f64>().powf(1.3)).collect();
        assert!(ks_two_sample(&a, &b).unwrap().passes(0.01));
        assert!(!ks_two_sample(&a, &c).unwrap().passes(0.01));
    }

    #[test]
    fn wilson_known_value() {
        // 50/100 at 95%: half-width 0.0962 (standard tables).
        let p = wilson_interval(50, 100, Z95);
        assert_eq!(p.estimate, 0.5);
        assert_relative_eq!(p.ci_halfwidth, 0.0962, epsilon = 1e-4);
        let edge = wilson_interval(100, 100, Z95);
        assert_eq!(edge.estimate, 1.0);
        assert!(edge.ci_lower < 1.0 && edge.ci_upper == 1.0);
    }

    #[test]
    fn chi_square_detects_skew() {
        assert!(chi_square_uniform(&[100, 98, 103, 99]).unwrap().passes(0.01));
        assert!(!chi_square_uniform(&[150, 50, 100, 100]).unwrap().passes(0.01));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let values = [1e16, 1.0, -1e16, 1.0];
        let s: CompensatedSum = values.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0], 0.99), 1.0);
    }
}
