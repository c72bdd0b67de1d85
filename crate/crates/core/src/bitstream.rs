//! Exact, lazily evaluated infinite binary sequences.
//!
//! A [`BitStream`] is the binary expansion `0.b_1 b_2 b_3 ...` of a point of
//! `[0, 1]` (equivalently an infinite hat-colour assignment). Two families are
//! representable:
//!
//! * eventually periodic streams (every rational), kept in a normal form with
//!   minimal preperiod and minimal period and no pending shift or overrides;
//! * generator-backed streams, whose bit `i` is a pure hash of
//!   `(seed, i + shift)` and which stand in for generic irrationals.
//!
//! Either family may carry finitely many overridden positions. Because class
//! identity is carried structurally, eventual equality is decidable within
//! each family.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// A single binary digit, always 0 or 1.
pub type Bit = u8;

/// How far [`eventually_equal`] scans for a disagreement between streams
/// it already knows to be inequivalent.
const WITNESS_SCAN_LIMIT: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StreamError {
    #[error("period must be nonempty")]
    EmptyPeriod,
    #[error("bit values must be 0 or 1, got {0}")]
    InvalidBit(u8),
    #[error("bit positions are 1-based; index 0 is not a position")]
    ZeroIndex,
    #[error("cannot prepend {k} zeros to a generator stream shifted by only {shift}")]
    PadBeyondBase { k: u64, shift: u64 },
    #[error("generator stream descriptor is missing a seed")]
    MissingSeed,
    #[error("periodic stream descriptor is missing a period")]
    MissingPeriod,
    #[error("rational {num}/{den} is not in [0, 1]")]
    OutOfRange { num: u64, den: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Base {
    Periodic { preperiod: Vec<Bit>, period: Vec<Bit> },
    Generator { seed: u64 },
}

/// Which representable family a stream belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Periodic,
    Generator,
}

/// An infinite binary sequence, indexed from 1.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "StreamDescriptor", into = "StreamDescriptor")]
pub struct BitStream {
    base: Base,
    shift: u64,
    overrides: BTreeMap<u64, Bit>,
}

fn check_bits(bits: &[Bit]) -> Result<(), StreamError> {
    match bits.iter().find(|&&b| b > 1) {
        Some(&b) => Err(StreamError::InvalidBit(b)),
        None => Ok(()),
    }
}

fn minimal_period(period: &[Bit]) -> usize {
    let n = period.len();
    (1..=n)
        .find(|&p| n.is_multiple_of(p) && (p..n).all(|i| period[i] == period[i - p]))
        .unwrap_or(n)
}

#[inline]
fn generator_bit(seed: u64, position: u64) -> Bit {
    let i = position - 1;
    ((seed::word(seed, i / 64) >> (i % 64)) & 1) as Bit
}

impl BitStream {
    /// The eventually periodic stream `preperiod ++ period ++ period ++ ...`.
    pub fn periodic(preperiod: Vec<Bit>, period: Vec<Bit>) -> Result<Self, StreamError> {
        if period.is_empty() {
            return Err(StreamError::EmptyPeriod);
        }
        check_bits(&preperiod)?;
        check_bits(&period)?;
        Ok(Self::normalized_periodic(preperiod, period))
    }

    /// The purely periodic stream generated by `word`.
    pub fn purely_periodic(word: Vec<Bit>) -> Result<Self, StreamError> {
        Self::periodic(Vec::new(), word)
    }

    /// A pseudo-generic stream whose bits are a pure function of `seed`.
    pub fn generator(seed: u64) -> Self {
        Self {
            base: Base::Generator { seed },
            shift: 0,
            overrides: BTreeMap::new(),
        }
    }

    /// The binary expansion of `num / den`. Dyadic rationals get their
    /// terminating (eventually zero) expansion; `1` is `0.111...`.
    pub fn from_rational(num: u64, den: u64) -> Result<Self, StreamError> {
        if den == 0 || num > den {
            return Err(StreamError::OutOfRange { num, den });
        }
        if num == den {
            return Self::periodic(Vec::new(), vec![1]);
        }
        let den = den as u128;
        let mut rem = num as u128;
        let mut seen: BTreeMap<u128, usize> = BTreeMap::new();
        let mut bits = Vec::new();
        while !seen.contains_key(&rem) {
            seen.insert(rem, bits.len());
            rem *= 2;
            if rem >= den {
                bits.push(1);
                rem -= den;
            } else {
                bits.push(0);
            }
        }
        let start = seen[&rem];
        let period = bits.split_off(start);
        Self::periodic(bits, period)
    }

    fn normalized_periodic(mut preperiod: Vec<Bit>, mut period: Vec<Bit>) -> Self {
        let p = minimal_period(&period);
        period.truncate(p);
        while let (Some(&last_pre), Some(&last_per)) = (preperiod.last(), period.last()) {
            if last_pre != last_per {
                break;
            }
            preperiod.pop();
            period.rotate_right(1);
        }
        Self {
            base: Base::Periodic { preperiod, period },
            shift: 0,
            overrides: BTreeMap::new(),
        }
    }

    /// Replaces bit `index` with `bit`.
    pub fn with_override(self, index: u64, bit: Bit) -> Result<Self, StreamError> {
        self.with_overrides([(index, bit)])
    }

    /// Replaces finitely many bits. Later entries win on repeated indices.
    pub fn with_overrides(
        mut self,
        overrides: impl IntoIterator<Item = (u64, Bit)>,
    ) -> Result<Self, StreamError> {
        for (index, bit) in overrides {
            if index == 0 {
                return Err(StreamError::ZeroIndex);
            }
            check_bits(&[bit])?;
            self.overrides.insert(index, bit);
        }
        Ok(self.fold_periodic_overrides())
    }

    /// Periodic streams absorb overrides into their preperiod so that their
    /// stored form stays canonical.
    fn fold_periodic_overrides(self) -> Self {
        match &self.base {
            Base::Periodic { preperiod, period } if !self.overrides.is_empty() => {
                let depth = *self.overrides.keys().next_back().unwrap();
                let depth = depth.max(preperiod.len() as u64);
                let prefix: Vec<Bit> = (1..=depth).map(|i| self.bit_at(i)).collect();
                let offset = (depth - preperiod.len() as u64) % period.len() as u64;
                let mut period = period.clone();
                period.rotate_left(offset as usize);
                Self::normalized_periodic(prefix, period)
            }
            _ => self,
        }
    }

    pub fn kind(&self) -> StreamKind {
        match self.base {
            Base::Periodic { .. } => StreamKind::Periodic,
            Base::Generator { .. } => StreamKind::Generator,
        }
    }

    pub fn generator_seed(&self) -> Option<u64> {
        match self.base {
            Base::Generator { seed } => Some(seed),
            Base::Periodic { .. } => None,
        }
    }

    /// Number of leading bits consumed from the base (always 0 for periodic
    /// streams, which apply shifts eagerly).
    pub fn shift(&self) -> u64 {
        self.shift
    }

    pub fn overrides(&self) -> &BTreeMap<u64, Bit> {
        &self.overrides
    }

    pub fn preperiod(&self) -> Option<&[Bit]> {
        match &self.base {
            Base::Periodic { preperiod, .. } => Some(preperiod),
            Base::Generator { .. } => None,
        }
    }

    pub fn period(&self) -> Option<&[Bit]> {
        match &self.base {
            Base::Periodic { period, .. } => Some(period),
            Base::Generator { .. } => None,
        }
    }

    /// The same stream with every override dropped.
    pub fn without_overrides(&self) -> Self {
        Self {
            base: self.base.clone(),
            shift: self.shift,
            overrides: BTreeMap::new(),
        }
    }

    /// The period word of the purely periodic stream that agrees with this
    /// one on its eventual tail (the tail extended backwards to index 1).
    pub(crate) fn periodic_tail_word(&self) -> Option<Vec<Bit>> {
        match &self.base {
            Base::Periodic { preperiod, period } => {
                let mut word = period.clone();
                let offset = preperiod.len() % period.len();
                word.rotate_right(offset);
                Some(word)
            }
            Base::Generator { .. } => None,
        }
    }

    /// Highest position at which this stream's own structure can differ from
    /// its eventual tail: the preperiod length or the deepest override.
    pub(crate) fn structural_depth(&self) -> u64 {
        let overrides = self.overrides.keys().next_back().copied().unwrap_or(0);
        let preperiod = self.preperiod().map_or(0, |p| p.len() as u64);
        overrides.max(preperiod)
    }

    /// Bit `i` (1-based) of the sequence.
    ///
    /// Panics if `i == 0`.
    pub fn bit_at(&self, i: u64) -> Bit {
        assert!(i >= 1, "bit positions are 1-based");
        if let Some(&b) = self.overrides.get(&i) {
            return b;
        }
        let j = i + self.shift;
        match &self.base {
            Base::Generator { seed } => generator_bit(*seed, j),
            Base::Periodic { preperiod, period } => {
                let j = j as usize;
                if j <= preperiod.len() {
                    preperiod[j - 1]
                } else {
                    period[(j - preperiod.len() - 1) % period.len()]
                }
            }
        }
    }

    /// Bits `1..=n`.
    pub fn prefix(&self, n: u64) -> Vec<Bit> {
        (1..=n).map(|i| self.bit_at(i)).collect()
    }

    /// Drops the first `n` bits: bit `i` of the result is bit `i + n` here.
    pub fn shifted(&self, n: u64) -> Self {
        if n == 0 {
            return self.clone();
        }
        match &self.base {
            Base::Periodic { preperiod, period } => {
                let len = preperiod.len() as u64;
                if n <= len {
                    Self::normalized_periodic(preperiod[n as usize..].to_vec(), period.clone())
                } else {
                    let mut period = period.clone();
                    let offset = (n - len) % period.len() as u64;
                    period.rotate_left(offset as usize);
                    Self::normalized_periodic(Vec::new(), period)
                }
            }
            Base::Generator { .. } => Self {
                base: self.base.clone(),
                shift: self.shift + n,
                overrides: self
                    .overrides
                    .range(n + 1..)
                    .map(|(&i, &b)| (i - n, b))
                    .collect(),
            },
        }
    }

    /// One application of the baker's (doubling) map: erase the most
    /// significant bit.
    pub fn baker_shift(&self) -> Self {
        self.shifted(1)
    }

    /// Prepends `k` zeros, i.e. maps `x` to `x / 2^k`.
    ///
    /// Generator streams are un-shifted by `k` so the result keeps the base
    /// identity; this needs `k <= shift`, since bits before the base's first
    /// position do not exist.
    pub fn pad_prefix_zeros(&self, k: u64) -> Result<Self, StreamError> {
        if k == 0 {
            return Ok(self.clone());
        }
        match &self.base {
            Base::Periodic { preperiod, period } => {
                let mut padded = vec![0; k as usize];
                padded.extend_from_slice(preperiod);
                Ok(Self::normalized_periodic(padded, period.clone()))
            }
            Base::Generator { .. } => {
                if k > self.shift {
                    return Err(StreamError::PadBeyondBase { k, shift: self.shift });
                }
                let overrides = (1..=k)
                    .map(|i| (i, 0))
                    .chain(self.overrides.iter().map(|(&i, &b)| (i + k, b)))
                    .collect();
                Ok(Self {
                    base: self.base.clone(),
                    shift: self.shift - k,
                    overrides,
                })
            }
        }
    }

    /// `floor(2x)`: the most significant bit.
    pub fn first_fraction_bit(&self) -> Bit {
        self.bit_at(1)
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.base {
            Base::Periodic { preperiod, period } => {
                let show = |bits: &[Bit]| bits.iter().map(|b| char::from(b'0' + b)).collect::<String>();
                write!(f, "0.{}({})", show(preperiod), show(period))
            }
            Base::Generator { seed } => {
                write!(f, "gen({seed:#x})>>{}", self.shift)?;
                if !self.overrides.is_empty() {
                    write!(f, " with {:?}", self.overrides)?;
                }
                Ok(())
            }
        }
    }
}

/// The verdict of the eventual-equality test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EquivalenceWitness {
    /// The streams agree at every index strictly beyond `bound`, and `bound`
    /// is the least such index.
    Equivalent { bound: u64 },
    /// The streams disagree infinitely often; `witness` is one disagreement.
    NotEquivalent { witness: u64 },
    /// Not decidable for this pair of families.
    Unknown,
}

impl EquivalenceWitness {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Self::Equivalent { .. })
    }
}

fn last_disagreement_up_to(a: &BitStream, b: &BitStream, depth: u64) -> u64 {
    (1..=depth).rev().find(|&i| a.bit_at(i) != b.bit_at(i)).unwrap_or(0)
}

fn first_disagreement_after(a: &BitStream, b: &BitStream, from: u64, limit: u64) -> Option<u64> {
    (from + 1..=from + limit).find(|&i| a.bit_at(i) != b.bit_at(i))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Decides `a ~ b`: whether the two streams agree beyond some finite index.
///
/// Generator streams are equivalent exactly when they share seed and shift;
/// periodic streams when their backward-extended tails coincide. A generator
/// and a periodic stream are never decided.
pub fn eventually_equal(a: &BitStream, b: &BitStream) -> EquivalenceWitness {
    let depth = a.structural_depth().max(b.structural_depth());
    match (&a.base, &b.base) {
        (Base::Generator { seed: sa }, Base::Generator { seed: sb }) => {
            if sa == sb && a.shift == b.shift {
                EquivalenceWitness::Equivalent {
                    bound: last_disagreement_up_to(a, b, depth),
                }
            } else {
                match first_disagreement_after(a, b, depth, WITNESS_SCAN_LIMIT) {
                    Some(witness) => EquivalenceWitness::NotEquivalent { witness },
                    None => EquivalenceWitness::Unknown,
                }
            }
        }
        (Base::Periodic { period: pa, .. }, Base::Periodic { period: pb, .. }) => {
            if a.periodic_tail_word() == b.periodic_tail_word() {
                EquivalenceWitness::Equivalent {
                    bound: last_disagreement_up_to(a, b, depth),
                }
            } else {
                let (la, lb) = (pa.len() as u64, pb.len() as u64);
                let lcm = la / gcd(la, lb) * lb;
                let witness = first_disagreement_after(a, b, depth, lcm)
                    .expect("distinct minimal periodic tails disagree within one common period");
                EquivalenceWitness::NotEquivalent { witness }
            }
        }
        _ => EquivalenceWitness::Unknown,
    }
}

/// JSON wire form of a [`BitStream`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamDescriptor {
    pub kind: StreamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preperiod: Option<Vec<Bit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Vec<Bit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub shift: u64,
    #[serde(default)]
    pub overrides: BTreeMap<u64, Bit>,
}

impl TryFrom<StreamDescriptor> for BitStream {
    type Error = StreamError;

    fn try_from(d: StreamDescriptor) -> Result<Self, StreamError> {
        let base = match d.kind {
            StreamKind::Generator => Self::generator(d.seed.ok_or(StreamError::MissingSeed)?),
            StreamKind::Periodic => Self::periodic(
                d.preperiod.unwrap_or_default(),
                d.period.ok_or(StreamError::MissingPeriod)?,
            )?,
        };
        base.shifted(d.shift).with_overrides(d.overrides)
    }
}

impl From<BitStream> for StreamDescriptor {
    fn from(s: BitStream) -> Self {
        match s.base {
            Base::Periodic { preperiod, period } => Self {
                kind: StreamKind::Periodic,
                preperiod: Some(preperiod),
                period: Some(period),
                seed: None,
                shift: 0,
                overrides: BTreeMap::new(),
            },
            Base::Generator { seed } => Self {
                kind: StreamKind::Generator,
                preperiod: None,
                period: None,
                seed: Some(seed),
                shift: s.shift,
                overrides: s.overrides,
            },
        }
    }
}
