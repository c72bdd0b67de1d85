//! The Monte Carlo harness.
//!
//! Trial `t` gets the key `derive(master_seed, t)`; its root and every
//! player's randomness are derived from that key alone, so trials can run in
//! any order on any number of threads. Aggregation happens after all trials
//! are collected in index order.

pub mod audit;
pub mod invariance;
pub mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::BitStream;
use crate::game::{GameError, GameVariant, Referee, TrialRecord};
use crate::oracle::{MemoEntry, Oracle, OracleMode};
use crate::seed::{self, domain};
use crate::strategy::{StrategyError, StrategySpec};

pub use audit::{azuma_audit, azuma_bound, martingale_audit, AzumaPoint, AzumaReport, MartingaleConfig, MartingaleReport};
pub use invariance::{invariance_test, InvarianceConfig, InvarianceReport, RootSampler};
pub use stats::{wilson_interval, ChiSquareSummary};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("players must be at least 1")]
    ZeroPlayers,
    #[error("epsilon grid values must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("Azuma grid point n = {n} is outside 1..={players}")]
    GridBeyondPlayers { n: u64, players: u64 },
    #[error("confidence z must be positive and finite, got {0}")]
    InvalidZ(f64),
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
    #[error("memoized oracle mode requires parallelism 1, got {0}")]
    MemoizedNeedsSerial(usize),
    #[error("fixed root and root override depth cannot be combined")]
    FixedRootWithOverrides,
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("trial {trial}: {source}")]
    Game { trial: u64, source: GameError },
    #[error("log contains {count} signaling-invalid trials")]
    InvalidTrialsInLog { count: u64 },
    #[error("bins must be a power of two no smaller than 2, got {0}")]
    InvarianceBins(u64),
    #[error("{samples} samples is below the required {required}")]
    TooFewSamples { samples: u64, required: u64 },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn default_n_grid() -> Vec<u64> {
    vec![16, 32, 64]
}

fn default_epsilon_grid() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}

fn default_z() -> f64 {
    3.0
}

fn default_parallelism() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub game: GameVariant,
    pub strategy: StrategySpec,
    pub players: u64,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub oracle_mode: OracleMode,
    /// Indices `1..=d` of every generated root are flipped, so the root's
    /// class representative disagrees with it exactly up to `d`.
    #[serde(default)]
    pub root_override_depth: u64,
    /// Play every trial on this root instead of generating one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_root: Option<BitStream>,
    /// Azuma grid points beyond `players` are dropped.
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<u64>,
    #[serde(default = "default_epsilon_grid")]
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_z")]
    pub confidence_z: f64,
    /// Worker threads. Not part of the report: results do not depend on it.
    #[serde(default = "default_parallelism", skip_serializing)]
    pub parallelism: usize,
    /// Quarantine signaling trials. Disabling it is for negative controls only.
    #[serde(default = "yes")]
    pub enforcement: bool,
}

impl ExperimentConfig {
    pub fn new(strategy: StrategySpec, players: u64, trials: u64, master_seed: u64) -> Self {
        Self {
            game: GameVariant::default(),
            strategy,
            players,
            trials,
            master_seed,
            oracle_mode: OracleMode::default(),
            root_override_depth: 0,
            fixed_root: None,
            n_grid: default_n_grid(),
            epsilon_grid: default_epsilon_grid(),
            confidence_z: default_z(),
            parallelism: default_parallelism(),
            enforcement: true,
        }
    }

    /// Drops Azuma grid points beyond the player count; if none remain the
    /// grid becomes `[players]`.
    pub fn fit_grid(mut self) -> Self {
        let players = self.players;
        self.n_grid.retain(|&n| n <= players);
        if self.n_grid.is_empty() {
            self.n_grid.push(players);
        }
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::ZeroTrials);
        }
        if self.players == 0 {
            return Err(ExperimentError::ZeroPlayers);
        }
        if let Some(&eps) = self.epsilon_grid.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(ExperimentError::InvalidEpsilon(eps));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n == 0 || n > self.players) {
            return Err(ExperimentError::GridBeyondPlayers { n, players: self.players });
        }
        if !(self.confidence_z.is_finite() && self.confidence_z > 0.0) {
            return Err(ExperimentError::InvalidZ(self.confidence_z));
        }
        if self.parallelism == 0 {
            return Err(ExperimentError::ZeroParallelism);
        }
        if self.oracle_mode == OracleMode::Memoized && self.parallelism != 1 {
            return Err(ExperimentError::MemoizedNeedsSerial(self.parallelism));
        }
        if self.fixed_root.is_some() && self.root_override_depth > 0 {
            return Err(ExperimentError::FixedRootWithOverrides);
        }
        self.strategy.contract()?;
        Ok(())
    }

    pub fn trial_key(&self, trial: u64) -> u64 {
        seed::derive(self.master_seed, trial)
    }

    /// The root of trial `trial`.
    pub fn root(&self, trial: u64) -> BitStream {
        if let Some(root) = &self.fixed_root {
            return root.clone();
        }
        let base = BitStream::generator(seed::derive(self.trial_key(trial), domain::ROOT));
        let flips: Vec<_> = (1..=self.root_override_depth).map(|i| (i, 1 - base.bit_at(i))).collect();
        base.with_overrides(flips).expect("override indices start at 1")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub wins: u64,
    pub trials: u64,
    pub frequency: f64,
    pub low: f64,
    pub high: f64,
}

impl Rate {
    fn new(wins: u64, trials: u64, z: f64) -> Self {
        let frequency = if trials == 0 { 0.0 } else { wins as f64 / trials as f64 };
        let (low, high) = wilson_interval(wins, trials, z);
        Self { wins, trials, frequency, low, high }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerRate {
    pub player: u64,
    #[serde(flatten)]
    pub rate: Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCount {
    /// `None` for trials whose last player lost.
    pub threshold: Option<u64>,
    pub count: u64,
}

/// Win rates over the valid trials. Quarantined trials are only counted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinRateReport {
    pub z: f64,
    pub valid_trials: u64,
    pub invalid_trials: u64,
    pub per_player: Vec<PlayerRate>,
    /// Equal to the mean of the per-player frequencies.
    pub pooled: Rate,
    pub threshold_histogram: Vec<ThresholdCount>,
    /// Homogeneity of the per-player rates; absent when every guess won or
    /// every guess lost.
    pub homogeneity: Option<ChiSquareSummary>,
}

impl WinRateReport {
    pub fn from_trials(trials: &[TrialRecord], players: u64, z: f64) -> Self {
        let valid: Vec<&TrialRecord> = trials.iter().filter(|t| t.valid).collect();
        let n = valid.len() as u64;
        let mut wins = vec![0u64; players as usize];
        let mut histogram: BTreeMap<(bool, u64), u64> = BTreeMap::new();
        for t in &valid {
            for (w, &s) in wins.iter_mut().zip(&t.s) {
                *w += (s > 0) as u64;
            }
            let key = match t.threshold {
                Some(th) => (false, th),
                None => (true, 0),
            };
            *histogram.entry(key).or_default() += 1;
        }
        let per_player = wins
            .iter()
            .enumerate()
            .map(|(i, &w)| PlayerRate { player: i as u64 + 1, rate: Rate::new(w, n, z) })
            .collect();
        let pooled = Rate::new(wins.iter().sum(), n * players, z);
        let threshold_histogram = histogram
            .into_iter()
            .map(|((lost_last, th), count)| ThresholdCount {
                threshold: (!lost_last).then_some(th),
                count,
            })
            .collect();
        Self {
            z,
            valid_trials: n,
            invalid_trials: trials.len() as u64 - n,
            per_player,
            pooled,
            threshold_histogram,
            homogeneity: stats::chi_square_homogeneity(&wins, n),
        }
    }
}

/// Everything an experiment produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub win_rates: WinRateReport,
    /// Computed over valid trials only.
    pub azuma: AzumaReport,
    pub trials: Vec<TrialRecord>,
    /// Empty unless the oracle was memoized.
    pub memo_table: Vec<MemoEntry>,
}

impl ExperimentOutcome {
    pub fn invalid_trials(&self) -> u64 {
        self.win_rates.invalid_trials
    }
}

/// Runs `cfg.trials` independent rounds and aggregates them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    run_experiment_with(cfg, Oracle::new(cfg.oracle_mode))
}

/// As [`run_experiment`] but with a caller-supplied oracle, e.g. one
/// preloaded from a recorded memo table.
pub fn run_experiment_with(cfg: &ExperimentConfig, oracle: Oracle) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    if oracle.mode() == OracleMode::Memoized && cfg.parallelism != 1 {
        return Err(ExperimentError::MemoizedNeedsSerial(cfg.parallelism));
    }
    let referee = Referee::new(cfg.game, cfg.players, cfg.strategy.build()?, oracle)
        .map_err(|source| ExperimentError::Game { trial: 0, source })?
        .with_enforcement(cfg.enforcement);

    let play = |t: u64| {
        referee
            .run_trial(&cfg.root(t), cfg.trial_key(t))
            .map_err(|source| ExperimentError::Game { trial: t, source })
    };
    let trials: Vec<TrialRecord> = if cfg.parallelism == 1 {
        let out: Result<Vec<_>, _> = (0..cfg.trials).map(play).collect();
        referee.oracle().release();
        out?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
        pool.install(|| (0..cfg.trials).into_par_iter().map(play).collect::<Result<_, _>>())?
    };

    let win_rates = WinRateReport::from_trials(&trials, cfg.players, cfg.confidence_z);
    let valid: Vec<&TrialRecord> = trials.iter().filter(|t| t.valid).collect();
    let azuma = azuma_audit(&valid, &cfg.n_grid, &cfg.epsilon_grid, cfg.confidence_z);
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        win_rates,
        azuma,
        trials,
        memo_table: referee.oracle().memo_table(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(strategy: &str, players: u64, trials: u64) -> ExperimentConfig {
        ExperimentConfig::new(StrategySpec::parse(strategy).unwrap(), players, trials, 7).fit_grid()
    }

    #[test]
    fn validation() {
        let mut c = cfg("fns", 8, 10);
        assert!(c.validate().is_ok());
        c.trials = 0;
        assert!(matches!(c.validate(), Err(ExperimentError::ZeroTrials)));
        let mut c = cfg("fns", 8, 10);
        c.epsilon_grid = vec![1.0, 0.0];
        assert!(matches!(c.validate(), Err(ExperimentError::InvalidEpsilon(_))));
        let mut c = cfg("fns", 8, 10);
        c.n_grid = vec![9];
        assert!(matches!(c.validate(), Err(ExperimentError::GridBeyondPlayers { n: 9, players: 8 })));
        let mut c = cfg("fns", 8, 10);
        c.oracle_mode = OracleMode::Memoized;
        c.parallelism = 4;
        assert!(matches!(c.validate(), Err(ExperimentError::MemoizedNeedsSerial(4))));
    }

    #[test]
    fn fit_grid_keeps_reachable_points() {
        assert_eq!(cfg("fns", 40, 1).n_grid, vec![16, 32]);
        assert_eq!(cfg("fns", 5, 1).n_grid, vec![5]);
    }

    #[test]
    fn config_json_rejects_unknown_fields_and_omits_parallelism() {
        let mut c = cfg("fns", 4, 2);
        c.parallelism = 8;
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("parallelism"));
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.parallelism, 1);
        let bad = json.replacen('{', "{\"tirals\":3,", 1);
        assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn override_depth_flips_leading_bits() {
        let mut c = cfg("fns", 4, 2);
        c.root_override_depth = 5;
        let root = c.root(1);
        let base = root.without_overrides();
        for i in 1..=5 {
            assert_ne!(root.bit_at(i), base.bit_at(i));
        }
        assert_eq!(root.bit_at(6), base.bit_at(6));
    }

    #[test]
    fn fns_on_pristine_roots_always_wins() {
        let out = run_experiment(&cfg("fns", 16, 50)).unwrap();
        assert_eq!(out.win_rates.pooled.frequency, 1.0);
        assert_eq!(out.win_rates.threshold_histogram, vec![ThresholdCount { threshold: Some(0), count: 50 }]);
        assert!(out.win_rates.homogeneity.is_none());
    }

    #[test]
    fn pooled_is_mean_of_players() {
        let out = run_experiment(&cfg("local-random:0.5", 8, 200)).unwrap();
        let mean = out.win_rates.per_player.iter().map(|p| p.rate.frequency).sum::<f64>() / 8.0;
        assert!((mean - out.win_rates.pooled.frequency).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let mut c = cfg("local-random:0.5", 16, 300);
        let serial = run_experiment(&c).unwrap();
        c.parallelism = 4;
        let parallel = run_experiment(&c).unwrap();
        assert_eq!(serde_json::to_string(&serial).unwrap(), serde_json::to_string(&parallel).unwrap());
    }

    #[test]
    fn memoized_replay_reproduces_table() {
        let mut c = cfg("fns", 8, 20);
        c.oracle_mode = OracleMode::Memoized;
        c.root_override_depth = 2;
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.memo_table.len(), 20);
        assert_eq!(a, b);
        let replay = run_experiment_with(&c, Oracle::from_memo_table(a.memo_table.clone())).unwrap();
        assert_eq!(replay.memo_table, a.memo_table);
        assert_eq!(replay.trials, a.trials);
    }

    #[test]
    fn cheat_is_quarantined() {
        let out = run_experiment(&cfg("cheat", 8, 20)).unwrap();
        assert_eq!(out.invalid_trials(), 20);
        assert_eq!(out.win_rates.valid_trials, 0);
        assert_eq!(out.azuma.trials, 0);
    }
}
