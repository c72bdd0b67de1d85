//! Small statistics helpers: Wilson intervals and chi-square tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Wilson score interval for `successes` out of `trials` at `z` standard
/// deviations. Returns `(low, high)`; `(0, 1)` when there are no trials.
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

/// Two-sided tail probability of a standard normal beyond `z`.
pub fn two_sided_tail(z: f64) -> f64 {
    let normal = Normal::standard();
    2.0 * normal.sf(z)
}

/// The per-test critical value that keeps the family-wise two-sided error of
/// `tests` independent tests at the level of a single `z`-sigma test (Šidák).
pub fn sidak_z(z: f64, tests: usize) -> f64 {
    if tests <= 1 {
        return z;
    }
    let family = two_sided_tail(z);
    let per_test = -(-family).ln_1p() / tests as f64;
    let per_test = -(-per_test).exp_m1();
    Normal::standard().inverse_cdf(1.0 - per_test / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareSummary {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, df: u64) -> f64 {
    ChiSquared::new(df as f64)
        .expect("degrees of freedom are positive")
        .sf(statistic)
}

/// Pearson goodness-of-fit against equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquareSummary {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let df = counts.len() as u64 - 1;
    ChiSquareSummary { statistic, df, p_value: chi_square_sf(statistic, df) }
}

/// Pearson homogeneity test for a `2 x k` table of win/loss counts, each
/// column having `trials` observations. `None` when all or no outcomes are wins.
pub fn chi_square_homogeneity(wins: &[u64], trials: u64) -> Option<ChiSquareSummary> {
    if wins.len() < 2 || trials == 0 {
        return None;
    }
    let total_wins: u64 = wins.iter().sum();
    let total = trials * wins.len() as u64;
    if total_wins == 0 || total_wins == total {
        return None;
    }
    let p = total_wins as f64 / total as f64;
    let (ew, el) = (trials as f64 * p, trials as f64 * (1.0 - p));
    let statistic = wins
        .iter()
        .map(|&w| {
            let (dw, dl) = (w as f64 - ew, (trials - w) as f64 - el);
            dw * dw / ew + dl * dl / el
        })
        .sum();
    let df = wins.len() as u64 - 1;
    Some(ChiSquareSummary { statistic, df, p_value: chi_square_sf(statistic, df) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_reference_values() {
        // 50/100 at z = 1.96: center 0.5, half-width 0.0960
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.40383).abs() < 1e-4 && (hi - 0.59617).abs() < 1e-4);
        // all successes keeps the interval below 1 and strictly positive width
        let (lo, hi) = wilson_interval(10, 10, 3.0);
        assert!(hi == 1.0 && lo > 0.4 && lo < 0.6);
        assert_eq!(wilson_interval(0, 0, 3.0), (0.0, 1.0));
    }

    #[test]
    fn chi_square_reference_value() {
        // counts 28, 31, 40, 35 against uniform: X^2 = 2.41791, p = 0.49031
        let s = chi_square_uniform(&[28, 31, 40, 35]);
        assert!((s.statistic - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((s.p_value - 0.490_309_306_965_388_3).abs() < 1e-9);
    }

    #[test]
    fn sidak_reduces_to_z_for_one_test() {
        assert_eq!(sidak_z(3.0, 1), 3.0);
        let z = sidak_z(3.0, 1000);
        assert!(z > 4.0 && z < 5.0);
        let per = two_sided_tail(z);
        let family = 1.0 - (1.0 - per).powi(1000);
        assert!((family - two_sided_tail(3.0)).abs() < 1e-9);
    }

    #[test]
    fn homogeneity_detects_differences() {
        assert!(chi_square_homogeneity(&[50, 50, 50], 100).unwrap().p_value > 0.99);
        assert!(chi_square_homogeneity(&[10, 90], 100).unwrap().p_value < 1e-10);
        assert!(chi_square_homogeneity(&[100, 100], 100).is_none());
    }
}
