//! Player strategies.
//!
//! Every strategy declares an [`AccessContract`]. Local strategies see only
//! their own [`PlayerView`]; the choice strategy additionally queries the
//! shared [`Oracle`]. The signaling negative control reads the referee's root
//! through a backdoor that only exists with the `cheat-backdoor` feature.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::{Bit, StreamError};
use crate::game::PlayerView;
use crate::oracle::{Oracle, OracleError};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("strategy needs the choice oracle but none was provided")]
    MissingOracle,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("lookup table over {m} bits needs {expected} entries, got {got}")]
    TableSize { m: u32, expected: usize, got: usize },
    #[error("lookup tables read at most {max} bits, got m = {m}")]
    TableTooWide { m: u32, max: u32 },
    #[error("table entries must be bits, got {0}")]
    InvalidBit(u8),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("mixture needs at least one component with positive weight")]
    EmptyMixture,
    #[error("mixture weights must be finite and nonnegative, got {0}")]
    InvalidWeight(f64),
    #[error("the signaling strategy needs a build with the `cheat-backdoor` feature")]
    BackdoorUnavailable,
    #[error("unknown strategy `{0}`")]
    Unknown(String),
    #[error("malformed strategy `{spec}`: {reason}")]
    Malformed { spec: String, reason: String },
}

/// What a strategy is allowed to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessContract {
    LocalView,
    LocalViewWithOracle,
    /// Test-only: reads information outside the player's view.
    ForbiddenAccess,
}

impl AccessContract {
    fn join(self, other: Self) -> Self {
        use AccessContract::*;
        match (self, other) {
            (ForbiddenAccess, _) | (_, ForbiddenAccess) => ForbiddenAccess,
            (LocalViewWithOracle, _) | (_, LocalViewWithOracle) => LocalViewWithOracle,
            _ => LocalView,
        }
    }
}

/// Read access to the referee's root, for the signaling negative control.
#[cfg(feature = "cheat-backdoor")]
#[derive(Debug)]
pub struct Backdoor<'a> {
    root: &'a crate::bitstream::BitStream,
    touched: std::cell::Cell<bool>,
}

#[cfg(feature = "cheat-backdoor")]
impl<'a> Backdoor<'a> {
    pub fn new(root: &'a crate::bitstream::BitStream) -> Self {
        Self { root, touched: std::cell::Cell::new(false) }
    }

    pub fn was_used(&self) -> bool {
        self.touched.get()
    }

    fn root_bit(&self, i: u64) -> Bit {
        self.touched.set(true);
        self.root.bit_at(i)
    }
}

/// Everything a player may consult when guessing.
pub struct GuessContext<'a> {
    view: PlayerView,
    private_key: u64,
    shared_key: u64,
    oracle: Option<&'a Oracle>,
    #[cfg(feature = "cheat-backdoor")]
    backdoor: Option<&'a Backdoor<'a>>,
}

impl<'a> GuessContext<'a> {
    /// `private_key` seeds randomness unique to this player and trial;
    /// `shared_key` seeds randomness common to every player of the trial.
    pub fn new(view: PlayerView, private_key: u64, shared_key: u64) -> Self {
        Self {
            view,
            private_key,
            shared_key,
            oracle: None,
            #[cfg(feature = "cheat-backdoor")]
            backdoor: None,
        }
    }

    pub fn with_oracle(mut self, oracle: &'a Oracle) -> Self {
        self.oracle = Some(oracle);
        self
    }

    #[cfg(feature = "cheat-backdoor")]
    pub fn with_backdoor(mut self, backdoor: &'a Backdoor<'a>) -> Self {
        self.backdoor = Some(backdoor);
        self
    }

    pub fn player(&self) -> u64 {
        self.view.player()
    }

    pub fn view(&self) -> &PlayerView {
        &self.view
    }

    pub fn oracle(&self) -> Option<&'a Oracle> {
        self.oracle
    }

    pub fn private_rng(&self) -> ChaCha8Rng {
        seed::rng(self.private_key)
    }

    pub fn shared_rng(&self) -> ChaCha8Rng {
        seed::rng(self.shared_key)
    }

    /// Context for the `index`-th sub-strategy of a composite strategy, with
    /// independent private randomness.
    fn child(&self, index: u64) -> Self {
        Self {
            view: self.view.clone(),
            private_key: seed::derive(self.private_key, index + 1),
            shared_key: seed::derive(self.shared_key, index + 1),
            oracle: self.oracle,
            #[cfg(feature = "cheat-backdoor")]
            backdoor: self.backdoor,
        }
    }
}

pub trait Strategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn contract(&self) -> AccessContract;
    fn guess(&self, ctx: &GuessContext<'_>) -> Result<Bit, StrategyError>;
}

/// The choice strategy: pad the view back to full length with zeros, look up
/// the class representative and answer with its bit at the player's index.
pub fn fns_guess(ctx: &GuessContext<'_>) -> Result<Bit, StrategyError> {
    let oracle = ctx.oracle.ok_or(StrategyError::MissingOracle)?;
    let k = ctx.player();
    let padded = ctx.view.stream().pad_prefix_zeros(k)?;
    let rep = oracle.representative(&padded)?;
    Ok(rep.shifted(k - 1).first_fraction_bit())
}

/// A deterministic function of the first `m` bits of the view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct LookupTable {
    m: u32,
    table: Vec<Bit>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    m: u32,
    table: Vec<Bit>,
}

impl TryFrom<RawTable> for LookupTable {
    type Error = StrategyError;
    fn try_from(raw: RawTable) -> Result<Self, StrategyError> {
        Self::new(raw.m, raw.table)
    }
}

impl From<LookupTable> for RawTable {
    fn from(t: LookupTable) -> Self {
        Self { m: t.m, table: t.table }
    }
}

impl LookupTable {
    pub const MAX_BITS: u32 = 16;

    /// `table[j]` is the answer when bits `1..=m` of the view, read as a
    /// big-endian number, equal `j`.
    pub fn new(m: u32, table: Vec<Bit>) -> Result<Self, StrategyError> {
        if m > Self::MAX_BITS {
            return Err(StrategyError::TableTooWide { m, max: Self::MAX_BITS });
        }
        let expected = 1usize << m;
        if table.len() != expected {
            return Err(StrategyError::TableSize { m, expected, got: table.len() });
        }
        if let Some(&b) = table.iter().find(|&&b| b > 1) {
            return Err(StrategyError::InvalidBit(b));
        }
        Ok(Self { m, table })
    }

    pub fn constant(bit: Bit) -> Self {
        Self { m: 0, table: vec![bit & 1] }
    }

    /// The `index`-th of the `2^(2^m)` tables on `m` bits.
    pub fn enumerate(m: u32, index: u64) -> Self {
        let size = 1usize << m;
        let table = (0..size).map(|j| ((index >> j) & 1) as Bit).collect();
        Self { m, table }
    }

    pub fn bits_read(&self) -> u32 {
        self.m
    }

    pub fn entries(&self) -> &[Bit] {
        &self.table
    }

    pub fn apply(&self, prefix: &[Bit]) -> Bit {
        let index = prefix.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        self.table[index]
    }
}

pub fn local_deterministic_guess(ctx: &GuessContext<'_>, table: &LookupTable) -> Bit {
    table.apply(&ctx.view.prefix(table.m as u64))
}

/// Outputs 1 with probability `p` from the player's private randomness.
pub fn local_random_guess(ctx: &GuessContext<'_>, p: f64) -> Bit {
    let u: f64 = ctx.private_rng().random();
    Bit::from(u < p)
}

/// Reads the player's own target bit from the referee's root.
#[cfg(feature = "cheat-backdoor")]
pub fn cheat_signaling_guess(ctx: &GuessContext<'_>) -> Result<Bit, StrategyError> {
    let backdoor = ctx.backdoor.ok_or(StrategyError::BackdoorUnavailable)?;
    Ok(backdoor.root_bit(ctx.player()))
}

#[derive(Debug)]
struct Fns;

impl Strategy for Fns {
    fn name(&self) -> &'static str {
        "fns"
    }
    fn contract(&self) -> AccessContract {
        AccessContract::LocalViewWithOracle
    }
    fn guess(&self, ctx: &GuessContext<'_>) -> Result<Bit, StrategyError> {
        fns_guess(ctx)
    }
}

#[derive(Debug)]
struct Table(LookupTable);

impl Strategy for Table {
    fn name(&self) -> &'static str {
        "local-table"
    }
    fn contract(&self) -> AccessContract {
        AccessContract::LocalView
    }
    fn guess(&self, ctx: &GuessContext<'_>) -> Result<Bit, StrategyError> {
        Ok(local_deterministic_guess(ctx, &self.0))
    }
}

#[derive(Debug)]
struct Bernoulli(f64);

impl Strategy for Bernoulli {
    fn name(&self) -> &'static str {
        "local-random"
    }
    fn contract(&self) -> AccessContract {
        AccessContract::LocalView
    }
    fn guess(&self, ctx: &GuessContext<'_>) -> Result<Bit, StrategyError> {
        Ok(local_random_guess(ctx, self.0))
    }
}

#[derive(Debug)]
struct Mixture {
    weights: Vec<f64>,
    components: Vec<Box<dyn Strategy>>,
    shared: bool,
}

impl Strategy for Mixture {
    fn name(&self) -> &'static str {
        "mixture"
    }
    fn contract(&self) -> AccessContract {
        self.components
            .iter()
            .fold(AccessContract::LocalView, |acc, c| acc.join(c.contract()))
    }
    fn guess(&self, ctx: &GuessContext<'_>) -> Result<Bit, StrategyError> {
        let total: f64 = self.weights.iter().sum();
        let u: f64 = if self.shared {
            ctx.shared_rng().random()
        } else {
            ctx.private_rng().random()
        };
        let mut target = u * total;
        let mut pick = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        self.components[pick].guess(&ctx.child(pick as u64))
    }
}

#[cfg(feature = "cheat-backdoor")]
#[derive(Debug)]
struct Cheat;

#[cfg(feature = "cheat-backdoor")]
impl Strategy for Cheat {
    fn name(&self) -> &'static str {
        "cheat"
    }
    fn contract(&self) -> AccessContract {
        AccessContract::ForbiddenAccess
    }
    fn guess(&self, ctx: &GuessContext<'_>) -> Result<Bit, StrategyError> {
        cheat_signaling_guess(ctx)
    }
}

/// One weighted part of a mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub strategy: StrategySpec,
}

/// A strategy by name plus its parameters; the JSON form used in configs and
/// on the command line, e.g. `{"name":"local-table","m":2,"table":[0,1,1,0]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategySpec {
    Constant {
        #[serde(default)]
        bit: Bit,
    },
    LocalTable {
        m: u32,
        table: Vec<Bit>,
    },
    LocalRandom {
        p: f64,
    },
    Mixture {
        components: Vec<MixtureComponent>,
        /// Pick the component with randomness common to all players.
        #[serde(default)]
        shared: bool,
    },
    Fns,
    Cheat,
}

impl StrategySpec {
    pub fn build(&self) -> Result<Box<dyn Strategy>, StrategyError> {
        Ok(match self {
            Self::Constant { bit } => {
                if *bit > 1 {
                    return Err(StrategyError::InvalidBit(*bit));
                }
                Box::new(Table(LookupTable::constant(*bit)))
            }
            Self::LocalTable { m, table } => Box::new(Table(LookupTable::new(*m, table.clone())?)),
            Self::LocalRandom { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(StrategyError::InvalidProbability(*p));
                }
                Box::new(Bernoulli(*p))
            }
            Self::Mixture { components, shared } => {
                if let Some(c) = components.iter().find(|c| !c.weight.is_finite() || c.weight < 0.0) {
                    return Err(StrategyError::InvalidWeight(c.weight));
                }
                if components.iter().all(|c| c.weight == 0.0) {
                    return Err(StrategyError::EmptyMixture);
                }
                Box::new(Mixture {
                    weights: components.iter().map(|c| c.weight).collect(),
                    components: components
                        .iter()
                        .map(|c| c.strategy.build())
                        .collect::<Result<_, _>>()?,
                    shared: *shared,
                })
            }
            Self::Fns => Box::new(Fns),
            #[cfg(feature = "cheat-backdoor")]
            Self::Cheat => Box::new(Cheat),
            #[cfg(not(feature = "cheat-backdoor"))]
            Self::Cheat => return Err(StrategyError::BackdoorUnavailable),
        })
    }

    /// Parses the command-line shorthand: a JSON object, or one of `fns`,
    /// `cheat`, `constant[:bit]`, `local-random:p`, `local-table:m:bits`
    /// (e.g. `local-table:2:0110`).
    pub fn parse(text: &str) -> Result<Self, StrategyError> {
        let text = text.trim();
        let malformed = |reason: &str| StrategyError::Malformed {
            spec: text.to_string(),
            reason: reason.to_string(),
        };
        if text.starts_with('{') {
            return serde_json::from_str(text).map_err(|e| malformed(&e.to_string()));
        }
        let mut parts = text.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let spec = match (name, args.as_slice()) {
            ("fns", []) => Self::Fns,
            ("cheat", []) => Self::Cheat,
            ("constant", []) => Self::Constant { bit: 0 },
            ("constant", [bit]) => Self::Constant {
                bit: bit.parse().map_err(|_| malformed("bit must be 0 or 1"))?,
            },
            ("local-random", [p]) => Self::LocalRandom {
                p: p.parse().map_err(|_| malformed("p must be a number"))?,
            },
            ("local-table", [m, bits]) => Self::LocalTable {
                m: m.parse().map_err(|_| malformed("m must be an integer"))?,
                table: bits
                    .bytes()
                    .map(|c| match c {
                        b'0' | b'1' => Ok(c - b'0'),
                        _ => Err(malformed("table must be a string of 0s and 1s")),
                    })
                    .collect::<Result<_, _>>()?,
            },
            ("fns" | "cheat" | "constant" | "local-random" | "local-table", _) => {
                return Err(malformed("wrong number of parameters"))
            }
            _ => return Err(StrategyError::Unknown(name.to_string())),
        };
        spec.build()?;
        Ok(spec)
    }

    pub fn contract(&self) -> Result<AccessContract, StrategyError> {
        Ok(self.build()?.contract())
    }
}
