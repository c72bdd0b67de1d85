//! Concentration and martingale audits over trial logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{sidak_z, wilson_interval};
use super::ExperimentError;
use crate::game::TrialRecord;

/// `2 exp(-eps^2 / 2n)`, the two-sided Azuma bound for a ±1-increment martingale.
pub fn azuma_bound(n: u64, epsilon: f64) -> f64 {
    2.0 * (-(epsilon * epsilon) / (2.0 * n as f64)).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AzumaPoint {
    pub n: u64,
    pub epsilon: f64,
    /// Trials with `S_n >= epsilon`.
    pub exceedances: u64,
    pub frequency: f64,
    pub bound: f64,
    /// `frequency` minus its lower Wilson limit.
    pub margin: f64,
    /// True when even the lower Wilson limit exceeds the bound.
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AzumaReport {
    pub trials: u64,
    pub z: f64,
    pub points: Vec<AzumaPoint>,
    pub violations: u64,
}

/// Compares `Pr[S_n >= eps]` across `trials` with the Azuma bound on every
/// grid point. Every trial must cover at least `max(n_grid)` players.
pub fn azuma_audit(trials: &[&TrialRecord], n_grid: &[u64], epsilon_grid: &[f64], z: f64) -> AzumaReport {
    let total = trials.len() as u64;
    let mut points = Vec::with_capacity(n_grid.len() * epsilon_grid.len());
    for &n in n_grid {
        for &epsilon in epsilon_grid {
            let exceedances = trials
                .iter()
                .filter(|t| t.trajectory[n as usize - 1] as f64 >= epsilon)
                .count() as u64;
            let frequency = if total == 0 { 0.0 } else { exceedances as f64 / total as f64 };
            let (low, _) = wilson_interval(exceedances, total, z);
            let bound = azuma_bound(n, epsilon);
            points.push(AzumaPoint {
                n,
                epsilon,
                exceedances,
                frequency,
                bound,
                margin: frequency - low,
                violation: low > bound,
            });
        }
    }
    let violations = points.iter().filter(|p| p.violation).count() as u64;
    AzumaReport { trials: total, z, points, violations }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleConfig {
    /// Family-wise confidence in standard deviations.
    pub z: f64,
    /// Bins with fewer observations are reported but not tested.
    pub min_bin_count: u64,
}

impl Default for MartingaleConfig {
    fn default() -> Self {
        Self { z: 3.0, min_bin_count: 30 }
    }
}

/// Trials whose partial sum after `n` players was `s_n`, and how the next
/// increment behaved on them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleBin {
    pub n: u64,
    pub s_n: i64,
    pub count: u64,
    /// Empirical `E[s_{n+1} | S_n = s_n]`.
    pub mean_next: f64,
    pub tested: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub trajectories: u64,
    /// Steps with `|S_{n+1} - S_n| != 1` (or `|S_1| != 1`).
    pub increment_violations: u64,
    pub bins_tested: u64,
    pub bins_failed: u64,
    /// Per-bin critical value after the family-wise correction.
    pub per_bin_z: f64,
    pub bins: Vec<MartingaleBin>,
    pub martingale_holds: bool,
    pub verdict: String,
}

/// Checks the ±1 increment structure and `E[s_{n+1} | S_n] = 0` on a log.
///
/// Each bin's win frequency `(1 + mean) / 2` must have a Wilson interval
/// containing 1/2 at a Šidák-corrected level, so that the whole family of
/// bins is tested at `z` sigma.
pub fn martingale_audit(log: &[TrialRecord], cfg: &MartingaleConfig) -> Result<MartingaleReport, ExperimentError> {
    let invalid = log.iter().filter(|t| !t.valid).count();
    if invalid > 0 {
        return Err(ExperimentError::InvalidTrialsInLog { count: invalid as u64 });
    }

    let mut increment_violations = 0u64;
    for t in log {
        let mut prev = 0i64;
        for &s in &t.trajectory {
            if (s - prev).abs() != 1 {
                increment_violations += 1;
            }
            prev = s;
        }
    }

    // (n, S_n) -> (count, wins of step n+1)
    let mut cells: BTreeMap<(u64, i64), (u64, u64)> = BTreeMap::new();
    for t in log {
        for n in 1..t.trajectory.len() {
            let cell = cells.entry((n as u64, t.trajectory[n - 1])).or_default();
            cell.0 += 1;
            if t.s[n] > 0 {
                cell.1 += 1;
            }
        }
    }
    let tests = cells.values().filter(|(c, _)| *c >= cfg.min_bin_count).count();
    let per_bin_z = sidak_z(cfg.z, tests);

    let bins: Vec<MartingaleBin> = cells
        .into_iter()
        .map(|((n, s_n), (count, wins))| {
            let tested = count >= cfg.min_bin_count;
            let (low, high) = wilson_interval(wins, count, per_bin_z);
            MartingaleBin {
                n,
                s_n,
                count,
                mean_next: (2.0 * wins as f64 - count as f64) / count as f64,
                tested,
                pass: !tested || (low <= 0.5 && 0.5 <= high),
            }
        })
        .collect();
    let bins_tested = tests as u64;
    let bins_failed = bins.iter().filter(|b| !b.pass).count() as u64;
    let martingale_holds = increment_violations == 0 && bins_failed == 0;
    let verdict = if martingale_holds {
        format!("martingale property holds: ±1 increments on all {} trajectories, {bins_tested} conditional-mean bins consistent with zero drift", log.len())
    } else if increment_violations > 0 {
        format!("martingale property FAILS: {increment_violations} increments differ from ±1")
    } else {
        let drift = bins.iter().filter(|b| !b.pass).map(|b| b.mean_next).sum::<f64>() / bins_failed as f64;
        format!("martingale property FAILS: {bins_failed} of {bins_tested} bins show conditional drift (mean failing-bin drift {drift:+.3})")
    };

    Ok(MartingaleReport {
        trajectories: log.len() as u64,
        increment_violations,
        bins_tested,
        bins_failed,
        per_bin_z,
        bins,
        martingale_holds,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstream::BitStream;

    fn record(s: Vec<i8>, valid: bool) -> TrialRecord {
        let trajectory = s
            .iter()
            .scan(0i64, |a, &x| {
                *a += x as i64;
                Some(*a)
            })
            .collect();
        TrialRecord {
            root: BitStream::generator(0),
            outputs: vec![0; s.len()],
            s,
            trajectory,
            threshold: None,
            valid,
        }
    }

    #[test]
    fn azuma_bound_closed_form() {
        assert!((azuma_bound(50, 30.0) - 2.0 * (-9.0f64).exp()).abs() < 1e-15);
        assert!((azuma_bound(50, 30.0) - 2.4682e-4).abs() < 1e-8);
        assert!((azuma_bound(1, 2.0) - 0.270_670_566_473_225_4).abs() < 1e-12);
        assert!((azuma_bound(10, 1e-9) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_step_never_reaches_two() {
        let log = [record(vec![1], true), record(vec![-1], true)];
        let refs: Vec<&TrialRecord> = log.iter().collect();
        let report = azuma_audit(&refs, &[1], &[2.0], 3.0);
        assert_eq!(report.points[0].exceedances, 0);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn always_winning_log_violates_azuma() {
        let log: Vec<TrialRecord> = (0..1000).map(|_| record(vec![1; 64], true)).collect();
        let refs: Vec<&TrialRecord> = log.iter().collect();
        let report = azuma_audit(&refs, &[64], &[16.0], 3.0);
        assert!(report.points[0].violation);
    }

    #[test]
    fn single_trial_checks_increments_only() {
        let report = martingale_audit(&[record(vec![1, -1, 1], true)], &MartingaleConfig::default()).unwrap();
        assert_eq!(report.increment_violations, 0);
        assert_eq!(report.bins_tested, 0);
        assert!(report.martingale_holds);
    }

    #[test]
    fn broken_increments_are_flagged() {
        let mut r = record(vec![1, 1], true);
        r.trajectory[1] = 3;
        let report = martingale_audit(&[r], &MartingaleConfig::default()).unwrap();
        assert_eq!(report.increment_violations, 1);
        assert!(!report.martingale_holds);
    }

    #[test]
    fn drift_fails_the_audit() {
        let log: Vec<TrialRecord> = (0..200).map(|_| record(vec![1; 8], true)).collect();
        let report = martingale_audit(&log, &MartingaleConfig::default()).unwrap();
        assert!(!report.martingale_holds);
        assert!(report.verdict.contains("FAILS"));
    }

    #[test]
    fn invalid_trials_are_refused() {
        let log = [record(vec![1], false)];
        assert!(matches!(
            martingale_audit(&log, &MartingaleConfig::default()),
            Err(ExperimentError::InvalidTrialsInLog { count: 1 })
        ));
    }
}
