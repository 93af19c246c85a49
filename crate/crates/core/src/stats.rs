//! Small statistics toolbox: Wilson intervals, exact binomial test and the
//! two-sample Kolmogorov-Smirnov test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, Discrete, Normal};

use crate::error::{usage, Result};

/// Two-sided z quantile for a central confidence level.
pub fn z_for_confidence(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + confidence / 2.0)
}

/// Closed proportion interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<Interval> {
    if trials == 0 {
        return Err(usage("wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(usage("more successes than trials"));
    }
    let z = z_for_confidence(confidence);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bounds are exact at the edges; floating cancellation would leave ~1e-17.
    let low = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    Ok(Interval { low, high })
}

/// Exact two-sided binomial test p-value (sum of outcomes no more likely than `k`).
pub fn binomial_test(k: u64, n: u64, p: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(usage("binomial test needs 0 <= k <= n and n >= 1"));
    }
    let dist = Binomial::new(p, n).map_err(|e| usage(e.to_string()))?;
    let observed = dist.pmf(k);
    let cutoff = observed * (1.0 + 1e-7);
    let total: f64 = (0..=n).map(|i| dist.pmf(i)).filter(|&q| q <= cutoff).sum();
    Ok(total.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    /// Largest vertical distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value under the null of a common distribution.
    pub p_value: f64,
}

impl KsOutcome {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Two-sample Kolmogorov-Smirnov test for continuous data.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsOutcome> {
    if xs.is_empty() || ys.is_empty() {
        return Err(usage("KS test needs two nonempty samples"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(usage("KS test input contains NaN"));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);

    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }

    let en = (n1 * n2 / (n1 + n2)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(KsOutcome {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// Q_KS(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²).
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev_term = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev_term || term.abs() <= 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
        prev_term = term.abs();
        sign = -sign;
    }
    // Series did not settle: only happens for tiny lambda.
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_quantile_95() {
        assert!((z_for_confidence(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn wilson_known_values() {
        // 50/100 at 95%: centre 0.5, half-width 1.96*sqrt(0.0025+0.000096)/1.0384.
        let ci = wilson_interval(50, 100, 0.95).unwrap();
        assert!((ci.low - 0.403_831).abs() < 1e-5, "{ci:?}");
        assert!((ci.high - 0.596_169).abs() < 1e-5, "{ci:?}");
        let zero = wilson_interval(0, 10, 0.95).unwrap();
        assert_eq!(zero.low, 0.0);
        assert!(zero.high > 0.25 && zero.high < 0.32);
        assert!(wilson_interval(1, 0, 0.95).is_err());
        assert!(wilson_interval(3, 2, 0.95).is_err());
    }

    #[test]
    fn binomial_test_values() {
        assert!((binomial_test(5, 10, 0.5).unwrap() - 1.0).abs() < 1e-12);
        // P(X<=1)+P(X>=9) for Bin(10, .5) = 22/1024.
        assert!((binomial_test(1, 10, 0.5).unwrap() - 22.0 / 1024.0).abs() < 1e-12);
        assert!(binomial_test(11, 10, 0.5).is_err());
    }

    #[test]
    fn ks_identical_and_shifted() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let same = ks_two_sample(&xs, &xs).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert!(same.p_value > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.2).collect();
        let out = ks_two_sample(&xs, &shifted).unwrap();
        assert!((out.statistic - 0.2).abs() < 2e-3);
        assert!(out.rejects(0.01));
        assert!(ks_two_sample(&[], &xs).is_err());
    }

    #[test]
    fn ks_statistic_matches_brute_force() {
        let xs = [0.3, 1.2, -0.5, 2.2, 0.9, 0.1];
        let ys = [0.25, -1.0, 3.0, 0.95];
        let ecdf =
            |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
        let brute = xs
            .iter()
            .chain(&ys)
            .map(|&t| (ecdf(&xs, t) - ecdf(&ys, t)).abs())
            .fold(0.0, f64::max);
        let out = ks_two_sample(&xs, &ys).unwrap();
        assert!((out.statistic - brute).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // Q_KS(1.3581) ≈ 0.05 and Q_KS(1.6276) ≈ 0.01 (classic critical values).
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 2e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
    }
}
