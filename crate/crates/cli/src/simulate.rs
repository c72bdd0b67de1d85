use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use nosig_core::experiment::{
    run_experiment_with, AzumaReport, ExperimentConfig, ExperimentError, ExperimentOutcome, WinRateReport,
};
use nosig_core::oracle::MemoEntry;
use nosig_core::{BitStream, GameVariant, Oracle, OracleMode, StrategySpec};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::output::{csv_bytes, write_bytes, write_json, write_jsonl, Format, OutputArgs, SCHEMA_VERSION};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Strategy: fns, constant[:b], local-random:p, local-table:m:bits, cheat,
    /// or a JSON object.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<StrategySpec>,
    /// Number of players K.
    #[arg(long)]
    pub players: Option<u64>,
    /// Number of trials T.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_oracle_mode)]
    pub oracle_mode: Option<OracleMode>,
    /// Flip root bits 1..=d of every generated root.
    #[arg(long)]
    pub root_override_depth: Option<u64>,
    /// baker or hat.
    #[arg(long, value_parser = parse_game)]
    pub game: Option<GameVariant>,
    /// Azuma grid over n, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<u64>>,
    /// Azuma grid over epsilon, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub epsilon_grid: Option<Vec<f64>>,
    /// Width of confidence intervals in standard deviations.
    #[arg(long)]
    pub confidence_z: Option<f64>,
    /// Worker threads; reports do not depend on it. Defaults to all cores,
    /// or 1 with a memoized oracle.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Experiment config JSON. Flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stream descriptor JSON; every trial is played on this root.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Memo table JSON from an earlier report, to replay its choices.
    #[arg(long)]
    pub memo_table: Option<PathBuf>,
    /// Write the raw trial log as JSON lines (default with --out-dir: trials.jsonl).
    #[arg(long)]
    pub trial_log: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_strategy(s: &str) -> Result<StrategySpec, String> {
    StrategySpec::parse(s).map_err(|e| e.to_string())
}

fn parse_oracle_mode(s: &str) -> Result<OracleMode, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| "expected canonical or memoized".to_string())
}

fn parse_game(s: &str) -> Result<GameVariant, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| "expected baker or hat".to_string())
}

#[derive(Serialize)]
pub struct SimulateReport<'a> {
    pub schema_version: u32,
    pub command: &'static str,
    pub master_seed: u64,
    pub config: &'a ExperimentConfig,
    pub valid_trials: u64,
    pub invalid_trials: u64,
    pub win_rates: &'a WinRateReport,
    pub azuma: &'a AzumaReport,
    pub memo_table: &'a [MemoEntry],
}

#[derive(Serialize)]
struct PlayerRow {
    schema_version: u32,
    master_seed: u64,
    player: String,
    wins: u64,
    trials: u64,
    frequency: f64,
    low: f64,
    high: f64,
}

#[derive(Serialize)]
struct AzumaRow {
    schema_version: u32,
    master_seed: u64,
    n: u64,
    epsilon: f64,
    exceedances: u64,
    trials: u64,
    frequency: f64,
    bound: f64,
    margin: f64,
    violation: bool,
}

/// Which flag a validation error is about.
fn flag_for(err: &ExperimentError) -> &'static str {
    match err {
        ExperimentError::ZeroTrials => "--trials",
        ExperimentError::ZeroPlayers => "--players",
        ExperimentError::InvalidEpsilon(_) => "--epsilon-grid",
        ExperimentError::GridBeyondPlayers { .. } => "--n-grid",
        ExperimentError::InvalidZ(_) => "--confidence-z",
        ExperimentError::ZeroParallelism | ExperimentError::MemoizedNeedsSerial(_) => "--parallelism",
        ExperimentError::FixedRootWithOverrides => "--root-override-depth",
        ExperimentError::Strategy(_) => "--strategy",
        _ => "config",
    }
}

/// Merges the config file with the flags; flags win.
pub fn resolve(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut fields = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("--config: reading {}", path.display()))?;
            match serde_json::from_str(&text).with_context(|| format!("--config: {} is not valid JSON", path.display()))? {
                Value::Object(map) => map,
                _ => bail!("--config: {} must hold a JSON object", path.display()),
            }
        }
        None => Map::new(),
    };
    let mut set = |key: &str, value: Option<Value>| {
        if let Some(v) = value {
            fields.insert(key.to_string(), v);
        }
    };
    set("strategy", args.strategy.as_ref().map(|s| serde_json::to_value(s).expect("specs serialize")));
    set("players", args.players.map(Value::from));
    set("trials", args.trials.map(Value::from));
    set("master_seed", args.seed.map(Value::from));
    set("oracle_mode", args.oracle_mode.map(|m| serde_json::to_value(m).expect("modes serialize")));
    set("root_override_depth", args.root_override_depth.map(Value::from));
    set("game", args.game.map(|g| serde_json::to_value(g).expect("variants serialize")));
    set("n_grid", args.n_grid.clone().map(Value::from));
    set("epsilon_grid", args.epsilon_grid.clone().map(Value::from));
    set("confidence_z", args.confidence_z.map(Value::from));
    set("parallelism", args.parallelism.map(Value::from));
    if let Some(path) = &args.root {
        let text = fs::read_to_string(path).with_context(|| format!("--root: reading {}", path.display()))?;
        let root: BitStream =
            serde_json::from_str(&text).with_context(|| format!("--root: {} is not a stream descriptor", path.display()))?;
        set("fixed_root", Some(serde_json::to_value(root)?));
    }

    for (key, flag) in [("strategy", "--strategy"), ("players", "--players"), ("trials", "--trials"), ("master_seed", "--seed")] {
        if !fields.contains_key(key) {
            bail!("missing {flag} (or `{key}` in --config)");
        }
    }
    let explicit_grid = fields.contains_key("n_grid");
    let memoized = fields.get("oracle_mode") == Some(&Value::from("memoized"));
    if !fields.contains_key("parallelism") {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        fields.insert("parallelism".into(), Value::from(if memoized { 1 } else { cores }));
    }

    let mut cfg: ExperimentConfig =
        serde_json::from_value(Value::Object(fields)).map_err(|e| anyhow!("config: {e}"))?;
    if !explicit_grid {
        cfg = cfg.fit_grid();
    }
    cfg.validate().map_err(|e| anyhow!("{}: {e}", flag_for(&e)))?;
    Ok(cfg)
}

/// Runs the experiment and writes its reports. Returns the number of
/// quarantined trials.
pub fn run(args: &SimulateArgs) -> Result<u64> {
    let cfg = resolve(args)?;
    let oracle = match &args.memo_table {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("--memo-table: reading {}", path.display()))?;
            let entries: Vec<MemoEntry> =
                serde_json::from_str(&text).with_context(|| format!("--memo-table: {} is not a memo table", path.display()))?;
            Oracle::from_memo_table(entries)
        }
        None => Oracle::new(cfg.oracle_mode),
    };
    let outcome = run_experiment_with(&cfg, oracle).map_err(|e| anyhow!("{}: {e}", flag_for(&e)))?;
    write_reports(args, &outcome)?;
    Ok(outcome.invalid_trials())
}

pub fn report(outcome: &ExperimentOutcome) -> SimulateReport<'_> {
    SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        master_seed: outcome.config.master_seed,
        config: &outcome.config,
        valid_trials: outcome.win_rates.valid_trials,
        invalid_trials: outcome.win_rates.invalid_trials,
        win_rates: &outcome.win_rates,
        azuma: &outcome.azuma,
        memo_table: &outcome.memo_table,
    }
}

fn write_reports(args: &SimulateArgs, outcome: &ExperimentOutcome) -> Result<()> {
    let out = &args.output;
    let seed = outcome.config.master_seed;
    match out.format {
        Format::Json => write_json(out.destination("simulate").as_deref(), &report(outcome))?,
        Format::Csv => {
            let w = &outcome.win_rates;
            let players = w
                .per_player
                .iter()
                .map(|p| (p.player.to_string(), &p.rate))
                .chain(std::iter::once(("pooled".to_string(), &w.pooled)))
                .map(|(player, r)| PlayerRow {
                    schema_version: SCHEMA_VERSION,
                    master_seed: seed,
                    player,
                    wins: r.wins,
                    trials: r.trials,
                    frequency: r.frequency,
                    low: r.low,
                    high: r.high,
                });
            let azuma = outcome.azuma.points.iter().map(|p| AzumaRow {
                schema_version: SCHEMA_VERSION,
                master_seed: seed,
                n: p.n,
                epsilon: p.epsilon,
                exceedances: p.exceedances,
                trials: outcome.azuma.trials,
                frequency: p.frequency,
                bound: p.bound,
                margin: p.margin,
                violation: p.violation,
            });
            let players = csv_bytes(players)?;
            let azuma = csv_bytes(azuma)?;
            match out.destination("simulate") {
                Some(path) => {
                    write_bytes(Some(&path), &players)?;
                    write_bytes(out.sibling("simulate", "azuma.csv").as_deref(), &azuma)?;
                    write_json(out.sibling("simulate", "config.json").as_deref(), &report(outcome).config)?;
                }
                None => {
                    let mut both = players;
                    both.push(b'\n');
                    both.extend(azuma);
                    write_bytes(None, &both)?;
                }
            }
        }
    }
    let log = args
        .trial_log
        .clone()
        .or_else(|| out.out_dir.as_ref().map(|d| d.join("trials.jsonl")));
    if let Some(path) = log {
        write_jsonl(&path, &outcome.trials)?;
    }
    Ok(())
}
