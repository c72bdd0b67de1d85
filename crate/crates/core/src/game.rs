//! Referee for the hat game and the baker's-map game.
//!
//! Player `k` (1-based) must output bit `k` of the root `x_0`. In the baker
//! game it receives `x_k`, the root after `k` doublings; in the hat game it
//! sees the hats of players `k+1, k+2, ...`. Both views carry exactly the root
//! bits beyond `k`, so the two games are information-isomorphic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::{Bit, BitStream};
use crate::oracle::{Oracle, OracleMode};
use crate::seed::{self, domain};
use crate::strategy::{AccessContract, GuessContext, Strategy, StrategyError, StrategySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("a game needs at least one player")]
    NoPlayers,
    #[error("player {player}: {source}")]
    Strategy { player: u64, source: StrategyError },
    #[error(transparent)]
    Build(#[from] StrategyError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameVariant {
    #[default]
    Baker,
    Hat,
}

/// `[x_1, ..., x_K]` with `x_k` the root after `k` applications of the baker's map.
pub fn generate_inputs(root: &BitStream, players: u64) -> Vec<BitStream> {
    let mut inputs = Vec::with_capacity(players as usize);
    let mut x = root.clone();
    for _ in 0..players {
        x = x.baker_shift();
        inputs.push(x.clone());
    }
    inputs
}

/// The bit player `k` must output: `2 x_{k-1} - x_k`, i.e. bit `k` of the root.
pub fn target_bit(root: &BitStream, k: u64) -> Bit {
    root.bit_at(k)
}

/// What player `k` observes. There is no way to ask a view for root bits at
/// or before `k`: position `i` of the view is root position `k + i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayerView {
    player: u64,
    stream: BitStream,
}

impl PlayerView {
    pub fn player(&self) -> u64 {
        self.player
    }

    /// View bit `i >= 1`, which is root bit `player + i`.
    pub fn bit(&self, i: u64) -> Bit {
        self.stream.bit_at(i)
    }

    /// View bits `1..=m`.
    pub fn prefix(&self, m: u64) -> Vec<Bit> {
        self.stream.prefix(m)
    }

    /// The view as a stream (the player's input `x_k`).
    pub fn stream(&self) -> &BitStream {
        &self.stream
    }
}

pub fn player_view(variant: GameVariant, root: &BitStream, k: u64) -> PlayerView {
    assert!(k >= 1, "players are numbered from 1");
    let stream = match variant {
        GameVariant::Baker => (0..k).fold(root.clone(), |x, _| x.baker_shift()),
        GameVariant::Hat => root.shifted(k),
    };
    PlayerView { player: k, stream }
}

/// One round of the game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub root: BitStream,
    pub outputs: Vec<Bit>,
    /// +1 for a correct guess, -1 otherwise.
    pub s: Vec<i8>,
    /// Partial sums `S_n = s_1 + ... + s_n`.
    #[serde(rename = "S")]
    pub trajectory: Vec<i64>,
    /// Least `t` such that every player `k > t` in the window won; `None`
    /// when the last player lost.
    pub threshold: Option<u64>,
    /// False for trials quarantined as signaling.
    pub valid: bool,
}

impl TrialRecord {
    fn score(root: BitStream, outputs: Vec<Bit>, valid: bool) -> Self {
        let s: Vec<i8> = outputs
            .iter()
            .enumerate()
            .map(|(i, &a)| if a == target_bit(&root, i as u64 + 1) { 1 } else { -1 })
            .collect();
        let trajectory = s
            .iter()
            .scan(0i64, |acc, &x| {
                *acc += x as i64;
                Some(*acc)
            })
            .collect();
        let players = s.len() as u64;
        let threshold = match s.iter().rposition(|&x| x < 0) {
            None => Some(0),
            Some(last) if last as u64 + 1 == players => None,
            Some(last) => Some(last as u64 + 1),
        };
        Self { root, outputs, s, trajectory, threshold, valid }
    }

    pub fn wins(&self) -> usize {
        self.s.iter().filter(|&&x| x > 0).count()
    }
}

/// A strategy, a shared oracle and the rules for `players` players.
#[derive(Debug)]
pub struct Referee {
    variant: GameVariant,
    players: u64,
    strategy: Box<dyn Strategy>,
    oracle: Oracle,
    enforcement: bool,
}

impl Referee {
    pub fn new(
        variant: GameVariant,
        players: u64,
        strategy: Box<dyn Strategy>,
        oracle: Oracle,
    ) -> Result<Self, GameError> {
        if players == 0 {
            return Err(GameError::NoPlayers);
        }
        Ok(Self { variant, players, strategy, oracle, enforcement: true })
    }

    /// With enforcement off, signaling strategies are scored like any other.
    /// Intended only for negative-control tests.
    pub fn with_enforcement(mut self, on: bool) -> Self {
        self.enforcement = on;
        self
    }

    pub fn players(&self) -> u64 {
        self.players
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn contract(&self) -> AccessContract {
        self.strategy.contract()
    }

    fn views(&self, root: &BitStream) -> Vec<BitStream> {
        match self.variant {
            GameVariant::Baker => generate_inputs(root, self.players),
            GameVariant::Hat => (1..=self.players).map(|k| root.shifted(k)).collect(),
        }
    }

    /// Plays one round on `root`; `trial_key` seeds all player randomness.
    pub fn run_trial(&self, root: &BitStream, trial_key: u64) -> Result<TrialRecord, GameError> {
        let contract = self.strategy.contract();
        let players_key = seed::derive(trial_key, domain::PLAYER);
        let shared_key = seed::derive(trial_key, domain::SHARED);
        #[cfg(feature = "cheat-backdoor")]
        let backdoor = crate::strategy::Backdoor::new(root);

        let mut outputs = Vec::with_capacity(self.players as usize);
        for (i, stream) in self.views(root).into_iter().enumerate() {
            let k = i as u64 + 1;
            let view = PlayerView { player: k, stream };
            let mut ctx = GuessContext::new(view, seed::derive(players_key, k), shared_key);
            if contract != AccessContract::LocalView {
                ctx = ctx.with_oracle(&self.oracle);
            }
            #[cfg(feature = "cheat-backdoor")]
            if contract == AccessContract::ForbiddenAccess {
                ctx = ctx.with_backdoor(&backdoor);
            }
            let a = self
                .strategy
                .guess(&ctx)
                .map_err(|source| GameError::Strategy { player: k, source })?;
            outputs.push(a);
        }

        #[cfg(feature = "cheat-backdoor")]
        let signaled = contract == AccessContract::ForbiddenAccess || backdoor.was_used();
        #[cfg(not(feature = "cheat-backdoor"))]
        let signaled = contract == AccessContract::ForbiddenAccess;

        Ok(TrialRecord::score(root.clone(), outputs, !(self.enforcement && signaled)))
    }
}

/// A self-contained description of one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    #[serde(default)]
    pub variant: GameVariant,
    pub players: u64,
    pub root: BitStream,
    pub strategy: StrategySpec,
    #[serde(default)]
    pub oracle_mode: OracleMode,
    #[serde(default)]
    pub trial_key: u64,
}

impl GameSpec {
    pub fn player_view(&self, k: u64) -> PlayerView {
        player_view(self.variant, &self.root, k)
    }
}

/// Plays `spec` once with a fresh oracle.
pub fn run_trial(spec: &GameSpec) -> Result<TrialRecord, GameError> {
    let referee = Referee::new(spec.variant, spec.players, spec.strategy.build()?, Oracle::new(spec.oracle_mode))?;
    referee.run_trial(&spec.root, spec.trial_key)
}
