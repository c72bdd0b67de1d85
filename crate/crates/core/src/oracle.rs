//! The choice oracle: one fixed representative per eventual-equality class.
//!
//! This is the finite shadow of a choice function. It can only select from
//! classes it can name, which is why streams carry their class identity
//! structurally: a generator class is `(seed, shift)`, a periodic class is
//! its tail extended backwards to index 1. A choice function over arbitrary
//! sequences is not implementable.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::thread::{self, ThreadId};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::{eventually_equal, Bit, BitStream, EquivalenceWitness};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("memoized oracle queried from a second thread; memoized experiments must run serially")]
    ConcurrentMemoAccess,
    #[error("streams are not provably equivalent ({0:?})")]
    NotEquivalent(EquivalenceWitness),
}

/// Structural identity of an eventual-equality class.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassHandle {
    Generator { seed: u64, shift: u64 },
    /// The period word of the class's unique purely periodic member.
    Periodic { word: Vec<Bit> },
}

/// The class of `s`. Overrides never change it.
pub fn class_of(s: &BitStream) -> ClassHandle {
    match s.generator_seed() {
        Some(seed) => ClassHandle::Generator { seed, shift: s.shift() },
        None => ClassHandle::Periodic {
            word: s.periodic_tail_word().expect("non-generator streams are periodic"),
        },
    }
}

/// The canonical member of `class`: the override-free base for generator
/// classes, the purely periodic member for periodic classes.
pub fn canonical_representative(class: &ClassHandle) -> BitStream {
    match class {
        ClassHandle::Generator { seed, shift } => BitStream::generator(*seed).shifted(*shift),
        ClassHandle::Periodic { word } => {
            BitStream::purely_periodic(word.clone()).expect("class words are nonempty bit words")
        }
    }
}

/// The least `t` such that `member` and `rep` agree at every index beyond `t`.
pub fn disagreement_bound(member: &BitStream, rep: &BitStream) -> Result<u64, OracleError> {
    match eventually_equal(member, rep) {
        EquivalenceWitness::Equivalent { bound } => Ok(bound),
        other => Err(OracleError::NotEquivalent(other)),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    #[default]
    Canonical,
    /// First query of a class fixes its representative. Order-sensitive.
    Memoized,
}

/// One row of a memoized oracle's table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoEntry {
    pub class: ClassHandle,
    pub representative: BitStream,
}

#[derive(Debug, Default)]
struct MemoState {
    owner: Option<ThreadId>,
    table: BTreeMap<ClassHandle, BitStream>,
}

/// A choice function shared by every player of a game.
#[derive(Debug)]
pub struct Oracle {
    mode: OracleMode,
    memo: Mutex<MemoState>,
}

impl Oracle {
    pub fn new(mode: OracleMode) -> Self {
        Self {
            mode,
            memo: Mutex::new(MemoState::default()),
        }
    }

    pub fn canonical() -> Self {
        Self::new(OracleMode::Canonical)
    }

    pub fn memoized() -> Self {
        Self::new(OracleMode::Memoized)
    }

    /// A memoized oracle preloaded with a previously recorded table.
    pub fn from_memo_table(entries: impl IntoIterator<Item = MemoEntry>) -> Self {
        let table = entries.into_iter().map(|e| (e.class, e.representative)).collect();
        Self {
            mode: OracleMode::Memoized,
            memo: Mutex::new(MemoState { owner: None, table }),
        }
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    /// The representative of `member`'s class.
    pub fn representative(&self, member: &BitStream) -> Result<BitStream, OracleError> {
        let class = class_of(member);
        match self.mode {
            OracleMode::Canonical => Ok(canonical_representative(&class)),
            OracleMode::Memoized => {
                let mut memo = self.memo.lock().expect("memo table lock poisoned");
                let me = thread::current().id();
                match memo.owner {
                    Some(owner) if owner != me => return Err(OracleError::ConcurrentMemoAccess),
                    _ => memo.owner = Some(me),
                }
                Ok(memo
                    .table
                    .entry(class)
                    .or_insert_with(|| member.without_overrides())
                    .clone())
            }
        }
    }

    /// Releases the memo table's thread binding so a later serial run on a
    /// different thread may continue using it.
    pub fn release(&self) {
        self.memo.lock().expect("memo table lock poisoned").owner = None;
    }

    /// The memo table in class order (empty in canonical mode).
    pub fn memo_table(&self) -> Vec<MemoEntry> {
        let memo = self.memo.lock().expect("memo table lock poisoned");
        memo.table
            .iter()
            .map(|(class, rep)| MemoEntry {
                class: class.clone(),
                representative: rep.clone(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstream::tests::arb_stream;
    use proptest::prelude::*;

    fn bits(s: &str) -> Vec<Bit> {
        s.bytes().map(|c| c - b'0').collect()
    }

    #[test]
    fn class_ignores_overrides() {
        let g = BitStream::generator(8).shifted(2).with_override(1, 0).unwrap();
        assert_eq!(class_of(&g), ClassHandle::Generator { seed: 8, shift: 2 });
        assert_ne!(class_of(&BitStream::generator(1)), class_of(&BitStream::generator(2)));
    }

    #[test]
    fn periodic_class_matches_phase() {
        // 1 0 1 (0 1)... = 1 0 1 0 1 0 ... has the same tail as (01) only after a shift;
        // at matching phase it is (10)
        let a = BitStream::periodic(bits("101"), bits("01")).unwrap();
        assert_eq!(class_of(&a), class_of(&BitStream::purely_periodic(bits("10")).unwrap()));
        let b = BitStream::periodic(bits("11"), bits("01")).unwrap();
        assert_eq!(class_of(&b), class_of(&BitStream::purely_periodic(bits("01")).unwrap()));
    }

    #[test]
    fn canonical_periodic_representative() {
        let member = BitStream::periodic(bits("1"), bits("01")).unwrap();
        let rep = Oracle::canonical().representative(&member).unwrap();
        assert_eq!(rep, BitStream::purely_periodic(bits("10")).unwrap());
        // brute-force scan of bits 1..64 for the last disagreement
        let last = (1..=64).filter(|&i| member.bit_at(i) != rep.bit_at(i)).max().unwrap_or(0);
        assert!(last <= 1);
        assert_eq!(disagreement_bound(&member, &rep).unwrap(), last);

        let member = BitStream::periodic(bits("0"), bits("01")).unwrap();
        let rep = Oracle::canonical().representative(&member).unwrap();
        let last = (1..=64).filter(|&i| member.bit_at(i) != rep.bit_at(i)).max().unwrap_or(0);
        assert_eq!(last, 1);
        assert_eq!(disagreement_bound(&member, &rep).unwrap(), 1);
    }

    #[test]
    fn canonical_generator_representative_is_pristine() {
        let rep = canonical_representative(&ClassHandle::Generator { seed: 3, shift: 0 });
        assert_eq!(rep, BitStream::generator(3));
        assert!(rep.overrides().is_empty());
    }

    #[test]
    fn memoized_keeps_first_choice() {
        let oracle = Oracle::memoized();
        let first = BitStream::periodic(bits("110"), bits("01")).unwrap();
        let second = BitStream::periodic(bits("0"), bits("01")).unwrap();
        assert_eq!(class_of(&first), class_of(&second));
        let r1 = oracle.representative(&first).unwrap();
        let r2 = oracle.representative(&second).unwrap();
        assert_eq!(r1, first);
        assert_eq!(r1, r2);
        assert_ne!(r1, canonical_representative(&class_of(&first)));
        assert_eq!(oracle.memo_table().len(), 1);

        let g = BitStream::generator(4).with_override(2, 1).unwrap();
        assert_eq!(oracle.representative(&g).unwrap(), BitStream::generator(4));
    }

    #[test]
    fn memoized_rejects_cross_thread_queries() {
        let oracle = Oracle::memoized();
        let s = BitStream::generator(1);
        oracle.representative(&s).unwrap();
        thread::scope(|scope| {
            let res = scope.spawn(|| oracle.representative(&s)).join().unwrap();
            assert_eq!(res, Err(OracleError::ConcurrentMemoAccess));
        });
        oracle.release();
        thread::scope(|scope| {
            assert!(scope.spawn(|| oracle.representative(&s)).join().unwrap().is_ok());
        });
    }

    #[test]
    fn memo_table_replays() {
        let oracle = Oracle::memoized();
        for seed in 0..3 {
            oracle.representative(&BitStream::generator(seed).shifted(1)).unwrap();
        }
        let table = oracle.memo_table();
        let json = serde_json::to_string(&table).unwrap();
        let back: Vec<MemoEntry> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
        let replay = Oracle::from_memo_table(back);
        assert_eq!(replay.memo_table(), table);
    }

    #[test]
    fn disagreement_bound_examples() {
        let rep = BitStream::generator(12);
        assert_eq!(disagreement_bound(&rep, &rep).unwrap(), 0);
        let member = rep.clone().with_override(3, 1 - rep.bit_at(3)).unwrap();
        assert_eq!(disagreement_bound(&member, &rep).unwrap(), 3);
        assert!(disagreement_bound(&rep, &BitStream::generator(13)).is_err());
    }

    #[test]
    fn padded_view_bound_is_within_pad_plus_root_depth() {
        let base = BitStream::generator(99);
        let root = base.clone().with_overrides([(1, 1 - base.bit_at(1)), (2, 1 - base.bit_at(2))]).unwrap();
        let rep = canonical_representative(&class_of(&root));
        for k in 0..20u64 {
            let padded = root.shifted(k).pad_prefix_zeros(k).unwrap();
            let scanned = (1..=k + 64).filter(|&i| padded.bit_at(i) != rep.bit_at(i)).max().unwrap_or(0);
            assert!(scanned <= k.max(2));
            assert_eq!(disagreement_bound(&padded, &rep).unwrap(), scanned);
        }
    }

    proptest! {
        #[test]
        fn class_matches_equivalence(a in arb_stream(), b in arb_stream()) {
            match eventually_equal(&a, &b) {
                EquivalenceWitness::Equivalent { .. } => prop_assert_eq!(class_of(&a), class_of(&b)),
                EquivalenceWitness::NotEquivalent { .. } => prop_assert_ne!(class_of(&a), class_of(&b)),
                EquivalenceWitness::Unknown => {}
            }
        }

        #[test]
        fn representative_is_a_member(s in arb_stream()) {
            for oracle in [Oracle::canonical(), Oracle::memoized()] {
                let rep = oracle.representative(&s).unwrap();
                prop_assert!(eventually_equal(&s, &rep).is_equivalent());
            }
        }

        #[test]
        fn representative_is_constant_on_classes(
            a in arb_stream(),
            extra in prop::collection::btree_map(1u64..20, 0u8..=1, 0..5),
        ) {
            let b = a.clone().with_overrides(extra).unwrap();
            prop_assert!(eventually_equal(&a, &b).is_equivalent());
            for oracle in [Oracle::canonical(), Oracle::memoized()] {
                prop_assert_eq!(oracle.representative(&a).unwrap(), oracle.representative(&b).unwrap());
            }
        }

        #[test]
        fn canonical_is_idempotent(s in arb_stream()) {
            let rep = canonical_representative(&class_of(&s));
            prop_assert_eq!(canonical_representative(&class_of(&rep)), rep);
        }
    }
}
