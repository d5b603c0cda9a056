use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Exact one-sided McNemar test: probability of at least `b` of `b + c` discordant pairs
/// favoring the first arm when both arms are equally likely.
pub fn mcnemar_one_sided(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 || b == 0 {
        return 1.0;
    }
    let binom = Binomial::new(0.5, n).expect("valid binomial parameters");
    binom.sf(b - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateStats {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateStats {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials, 1.96);
        let rate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        RateStats { successes, trials, rate, ci_low, ci_high }
    }

    /// True when the 95% intervals do not overlap and `self` is higher.
    pub fn clearly_above(&self, other: &RateStats) -> bool {
        self.ci_low > other.ci_high
    }
}

/// Paired comparison of two arms run on the same seeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedStats {
    pub first: RateStats,
    pub second: RateStats,
    /// Pairs where only the first arm succeeded.
    pub first_only: u64,
    /// Pairs where only the second arm succeeded.
    pub second_only: u64,
    /// One-sided p-value for "the second arm succeeds more often".
    pub p_value: f64,
}

impl PairedStats {
    pub fn from_pairs(pairs: &[(bool, bool)]) -> Self {
        let n = pairs.len() as u64;
        let first = pairs.iter().filter(|p| p.0).count() as u64;
        let second = pairs.iter().filter(|p| p.1).count() as u64;
        let first_only = pairs.iter().filter(|p| p.0 && !p.1).count() as u64;
        let second_only = pairs.iter().filter(|p| !p.0 && p.1).count() as u64;
        PairedStats {
            first: RateStats::new(first, n),
            second: RateStats::new(second, n),
            first_only,
            second_only,
            p_value: mcnemar_one_sided(second_only, first_only),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_reference_values() {
        // 0/500 upper bound and 50/100 symmetric interval.
        let (lo, hi) = wilson_interval(0, 500, 1.96);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.007624).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.40383).abs() < 1e-4 && (hi - 0.59617).abs() < 1e-4);
    }

    #[test]
    fn mcnemar_exact_tail() {
        // P(X >= 8 | n = 10) = 56 / 1024.
        assert!((mcnemar_one_sided(8, 2) - 56.0 / 1024.0).abs() < 1e-9);
        assert!((mcnemar_one_sided(0, 5) - 1.0).abs() < 1e-9);
        assert!((mcnemar_one_sided(5, 0) - 1.0 / 32.0).abs() < 1e-9);
    }
}
