//! Finite-alphabet behaviors `P(a | x)` and their no-signaling checks.
//!
//! A behavior assigns to every input vector `x = (x_1, ..., x_N)` a
//! distribution over output vectors `a`. It is no-signaling when the marginal
//! of every party's output depends on that party's input only. Deterministic
//! behaviors are tuples of functions `a_k = f_k(x)`; for those the condition
//! reads `f_k(y_1, .., x_k, .., y_N) = f_k(z_1, .., x_k, .., z_N)`.
//!
//! Tables are exact rationals unless built from floats, in which case every
//! comparison uses the caller's tolerance.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest function space [`check_functional_locality_equivalence`] enumerates.
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("a behavior needs at least one party")]
    NoParties,
    #[error("party {party} has an empty {which} alphabet")]
    EmptyAlphabet { party: usize, which: &'static str },
    #[error("expected {expected} parties, got {got} {what}")]
    PartyCount { expected: usize, got: usize, what: &'static str },
    #[error("table has {got} entries, expected {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("entry {index}: symbol {value} is outside an alphabet of size {size}")]
    SymbolOutOfRange { index: usize, value: usize, size: usize },
    #[error("entry {index}: duplicate (x, a) pair")]
    DuplicateEntry { index: usize },
    #[error("entry {index}: malformed probability `{text}`")]
    MalformedProbability { index: usize, text: String },
    #[error("P(a | x = {x:?}) = {value} is outside [0, 1]")]
    OutOfUnitInterval { x: Vec<usize>, value: String },
    #[error("probabilities for x = {x:?} sum to {sum}, not 1")]
    NotNormalized { x: Vec<usize>, sum: String },
    #[error("behavior is not deterministic at x = {x:?}")]
    NotDeterministic { x: Vec<usize> },
    #[error("function for party {party} has {got} entries, expected {expected}")]
    FunctionSize { party: usize, expected: usize, got: usize },
    #[error("enumeration needs {required} function tuples, budget is {budget}")]
    BudgetExceeded { required: String, budget: u64 },
}

fn radix_total(radices: &[usize]) -> usize {
    radices.iter().product()
}

/// Mixed-radix encoding, first digit most significant.
fn encode(digits: &[usize], radices: &[usize]) -> usize {
    digits.iter().zip(radices).fold(0, |acc, (&d, &r)| acc * r + d)
}

fn decode(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for (d, &r) in digits.iter_mut().zip(radices).rev() {
        *d = index % r;
        index /= r;
    }
    digits
}

fn check_alphabets(inputs: &[usize], outputs: &[usize]) -> Result<(), BehaviorError> {
    if inputs.is_empty() {
        return Err(BehaviorError::NoParties);
    }
    if outputs.len() != inputs.len() {
        return Err(BehaviorError::PartyCount {
            expected: inputs.len(),
            got: outputs.len(),
            what: "output alphabets",
        });
    }
    for (which, sizes) in [("input", inputs), ("output", outputs)] {
        if let Some(party) = sizes.iter().position(|&s| s == 0) {
            return Err(BehaviorError::EmptyAlphabet { party: party + 1, which });
        }
    }
    Ok(())
}

/// Arithmetic the checks need from a probability value.
trait Prob: Clone + Send + Sync + fmt::Display {
    fn zero() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn close(&self, other: &Self, tol: f64) -> bool;
    fn is_one(&self, tol: f64) -> bool;
    fn is_zero(&self, tol: f64) -> bool;
    fn in_unit(&self, tol: f64) -> bool;
}

impl Prob for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn close(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
    fn is_one(&self, _tol: f64) -> bool {
        One::is_one(self)
    }
    fn is_zero(&self, _tol: f64) -> bool {
        Zero::is_zero(self)
    }
    fn in_unit(&self, _tol: f64) -> bool {
        !self.is_negative() && *self <= BigRational::one()
    }
}

impl Prob for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn close(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }
    fn is_one(&self, tol: f64) -> bool {
        (self - 1.0).abs() <= tol
    }
    fn is_zero(&self, tol: f64) -> bool {
        self.abs() <= tol
    }
    fn in_unit(&self, tol: f64) -> bool {
        *self >= -tol && *self <= 1.0 + tol
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Table {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

/// A conditional probability table for `N` parties with finite alphabets.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    table: Table,
}

/// One marginal that changes with another party's input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsViolation {
    /// 1-based parties whose joint marginal was checked.
    pub parties: Vec<usize>,
    /// Their inputs.
    pub inputs: Vec<usize>,
    /// Their outputs.
    pub outputs: Vec<usize>,
    /// Full input vectors that agree on `inputs` but give different marginals.
    pub reference_x: Vec<usize>,
    pub other_x: Vec<usize>,
    pub reference_value: String,
    pub other_value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsVerdict {
    pub pass: bool,
    pub strict: bool,
    pub violations: Vec<NsViolation>,
}

impl Behavior {
    fn check_shape(inputs: &[usize], outputs: &[usize], len: usize) -> Result<(), BehaviorError> {
        check_alphabets(inputs, outputs)?;
        let expected = radix_total(inputs) * radix_total(outputs);
        if len != expected {
            return Err(BehaviorError::TableSize { expected, got: len });
        }
        Ok(())
    }

    /// Builds an exact table from `p(x, a)`.
    pub fn exact(
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        p: impl Fn(&[usize], &[usize]) -> BigRational,
    ) -> Result<Self, BehaviorError> {
        check_alphabets(&inputs, &outputs)?;
        let table = Self::grid(&inputs, &outputs).map(|(x, a)| p(&x, &a)).collect();
        Ok(Self { inputs, outputs, table: Table::Exact(table) })
    }

    /// Builds a floating-point table from `p(x, a)`.
    pub fn float(
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        p: impl Fn(&[usize], &[usize]) -> f64,
    ) -> Result<Self, BehaviorError> {
        check_alphabets(&inputs, &outputs)?;
        let table = Self::grid(&inputs, &outputs).map(|(x, a)| p(&x, &a)).collect();
        Ok(Self { inputs, outputs, table: Table::Float(table) })
    }

    /// Dense exact table in `(x, a)` mixed-radix order.
    pub fn from_exact_table(
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        table: Vec<BigRational>,
    ) -> Result<Self, BehaviorError> {
        Self::check_shape(&inputs, &outputs, table.len())?;
        Ok(Self { inputs, outputs, table: Table::Exact(table) })
    }

    fn grid(inputs: &[usize], outputs: &[usize]) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> {
        let (xs, as_) = (radix_total(inputs), radix_total(outputs));
        let (inputs, outputs) = (inputs.to_vec(), outputs.to_vec());
        (0..xs).flat_map(move |xi| {
            let x = decode(xi, &inputs);
            let outputs = outputs.clone();
            (0..as_).map(move |ai| (x.clone(), decode(ai, &outputs)))
        })
    }

    pub fn parties(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_sizes(&self) -> &[usize] {
        &self.inputs
    }

    pub fn output_sizes(&self) -> &[usize] {
        &self.outputs
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.table, Table::Exact(_))
    }

    fn out_total(&self) -> usize {
        radix_total(&self.outputs)
    }

    /// `P(a | x)` rendered as text (`num/den` for exact tables).
    pub fn probability(&self, x: &[usize], a: &[usize]) -> String {
        let i = encode(x, &self.inputs) * self.out_total() + encode(a, &self.outputs);
        match &self.table {
            Table::Exact(t) => t[i].to_string(),
            Table::Float(t) => t[i].to_string(),
        }
    }

    /// Checks entries lie in `[0, 1]` and each row sums to 1.
    pub fn validate(&self, tol: f64) -> Result<(), BehaviorError> {
        match &self.table {
            Table::Exact(t) => self.validate_with(t, tol),
            Table::Float(t) => self.validate_with(t, tol),
        }
    }

    fn validate_with<P: Prob>(&self, table: &[P], tol: f64) -> Result<(), BehaviorError> {
        let out = self.out_total();
        for (xi, row) in table.chunks(out).enumerate() {
            let x = decode(xi, &self.inputs);
            if let Some(bad) = row.iter().find(|p| !p.in_unit(tol)) {
                return Err(BehaviorError::OutOfUnitInterval { x, value: bad.to_string() });
            }
            let sum = row.iter().fold(P::zero(), |acc, p| acc.add(p));
            if !sum.is_one(tol) {
                return Err(BehaviorError::NotNormalized { x, sum: sum.to_string() });
            }
        }
        Ok(())
    }

    fn subsets(&self, strict: bool) -> Vec<Vec<usize>> {
        let n = self.parties();
        if strict && n > 1 {
            (1..(1usize << n) - 1)
                .map(|mask| (0..n).filter(|k| mask >> k & 1 == 1).collect())
                .collect()
        } else {
            (0..n).map(|k| vec![k]).collect()
        }
    }

    fn ns_violations<P: Prob>(&self, table: &[P], tol: f64, strict: bool) -> Vec<NsViolation> {
        let out = self.out_total();
        let xs = radix_total(&self.inputs);
        let mut violations = Vec::new();
        for subset in self.subsets(strict) {
            let sub_in: Vec<usize> = subset.iter().map(|&k| self.inputs[k]).collect();
            let sub_out: Vec<usize> = subset.iter().map(|&k| self.outputs[k]).collect();
            let sub_out_total = radix_total(&sub_out);
            // marginal[xi][a_S]
            let marginals: Vec<Vec<P>> = (0..xs)
                .map(|xi| {
                    let mut m = vec![P::zero(); sub_out_total];
                    for ai in 0..out {
                        let a = decode(ai, &self.outputs);
                        let a_s: Vec<usize> = subset.iter().map(|&k| a[k]).collect();
                        let j = encode(&a_s, &sub_out);
                        m[j] = m[j].add(&table[xi * out + ai]);
                    }
                    m
                })
                .collect();
            let mut reference: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for xi in 0..xs {
                let x = decode(xi, &self.inputs);
                let x_s: Vec<usize> = subset.iter().map(|&k| x[k]).collect();
                let ri = *reference.entry(x_s.clone()).or_insert(xi);
                if ri == xi {
                    continue;
                }
                for (j, (r, o)) in marginals[ri].iter().zip(&marginals[xi]).enumerate() {
                    if !r.close(o, tol) {
                        violations.push(NsViolation {
                            parties: subset.iter().map(|k| k + 1).collect(),
                            inputs: x_s.clone(),
                            outputs: decode(j, &sub_out),
                            reference_x: decode(ri, &self.inputs),
                            other_x: x.clone(),
                            reference_value: r.to_string(),
                            other_value: o.to_string(),
                        });
                    }
                }
            }
            debug_assert_eq!(sub_in.len(), subset.len());
        }
        violations
    }

    fn deterministic_rows<P: Prob>(&self, table: &[P], tol: f64) -> Result<Vec<usize>, Vec<usize>> {
        let out = self.out_total();
        table
            .chunks(out)
            .enumerate()
            .map(|(xi, row)| {
                let all_extreme = row.iter().all(|p| p.is_zero(tol) || p.is_one(tol));
                let ones: Vec<usize> = (0..out).filter(|&ai| row[ai].is_one(tol)).collect();
                match (all_extreme, ones.as_slice()) {
                    (true, [ai]) => Ok(*ai),
                    _ => Err(decode(xi, &self.inputs)),
                }
            })
            .collect()
    }
}

/// Checks that every party's output marginal is independent of the other
/// parties' inputs. With `strict`, every proper subset of parties is
/// checked instead of single parties only. `tol` is ignored for exact tables.
pub fn check_no_signaling(b: &Behavior, tol: f64, strict: bool) -> Result<NsVerdict, BehaviorError> {
    b.validate(tol)?;
    let violations = match &b.table {
        Table::Exact(t) => b.ns_violations(t, tol, strict),
        Table::Float(t) => b.ns_violations(t, tol, strict),
    };
    Ok(NsVerdict { pass: violations.is_empty(), strict, violations })
}

/// True iff every entry is 0 or 1 (within `tol` for float tables).
pub fn is_deterministic_extremal(b: &Behavior, tol: f64) -> bool {
    match &b.table {
        Table::Exact(t) => b.deterministic_rows(t, tol).is_ok(),
        Table::Float(t) => b.deterministic_rows(t, tol).is_ok(),
    }
}

/// Per-party output functions `f_k(x)` on the full input grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionTuple {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    /// `maps[k][encode(x)]` is `f_k(x)`.
    maps: Vec<Vec<usize>>,
}

/// A pair of full input vectors that agree at `party` but give different outputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnsViolation {
    /// 1-based.
    pub party: usize,
    pub own_input: usize,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    pub f_y: usize,
    pub f_z: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnsVerdict {
    pub pass: bool,
    pub violations: Vec<FnsViolation>,
}

impl FunctionTuple {
    pub fn new(inputs: Vec<usize>, outputs: Vec<usize>, maps: Vec<Vec<usize>>) -> Result<Self, BehaviorError> {
        check_alphabets(&inputs, &outputs)?;
        if maps.len() != inputs.len() {
            return Err(BehaviorError::PartyCount { expected: inputs.len(), got: maps.len(), what: "functions" });
        }
        let xs = radix_total(&inputs);
        for (k, map) in maps.iter().enumerate() {
            if map.len() != xs {
                return Err(BehaviorError::FunctionSize { party: k + 1, expected: xs, got: map.len() });
            }
            if let Some(&v) = map.iter().find(|&&v| v >= outputs[k]) {
                return Err(BehaviorError::SymbolOutOfRange { index: k, value: v, size: outputs[k] });
            }
        }
        Ok(Self { inputs, outputs, maps })
    }

    /// Tabulates `f(k, x)` (0-based party `k`).
    pub fn from_fn(
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        f: impl Fn(usize, &[usize]) -> usize,
    ) -> Result<Self, BehaviorError> {
        check_alphabets(&inputs, &outputs)?;
        let xs = radix_total(&inputs);
        let maps = (0..inputs.len())
            .map(|k| (0..xs).map(|xi| f(k, &decode(xi, &inputs))).collect())
            .collect();
        Self::new(inputs, outputs, maps)
    }

    /// The tuple `f_k(x) = local[k][x_k]`.
    pub fn from_local(inputs: Vec<usize>, outputs: Vec<usize>, local: &[Vec<usize>]) -> Result<Self, BehaviorError> {
        Self::from_fn(inputs, outputs, |k, x| local[k][x[k]])
    }

    pub fn eval(&self, party: usize, x: &[usize]) -> usize {
        self.maps[party][encode(x, &self.inputs)]
    }

    /// The 0/1 behavior this tuple induces.
    pub fn to_behavior(&self) -> Behavior {
        let xs = radix_total(&self.inputs);
        let out = radix_total(&self.outputs);
        let mut table = vec![<BigRational as Zero>::zero(); xs * out];
        for xi in 0..xs {
            let a: Vec<usize> = self.maps.iter().map(|m| m[xi]).collect();
            table[xi * out + encode(&a, &self.outputs)] = BigRational::one();
        }
        Behavior { inputs: self.inputs.clone(), outputs: self.outputs.clone(), table: Table::Exact(table) }
    }
}

/// Extracts `f_k(x)`, the unique `a_k` with probability 1.
pub fn functions_from_deterministic(b: &Behavior, tol: f64) -> Result<FunctionTuple, BehaviorError> {
    let rows = match &b.table {
        Table::Exact(t) => b.deterministic_rows(t, tol),
        Table::Float(t) => b.deterministic_rows(t, tol),
    }
    .map_err(|x| BehaviorError::NotDeterministic { x })?;
    let n = b.parties();
    let mut maps = vec![Vec::with_capacity(rows.len()); n];
    for ai in rows {
        for (k, a_k) in decode(ai, &b.outputs).into_iter().enumerate() {
            maps[k].push(a_k);
        }
    }
    FunctionTuple::new(b.inputs.clone(), b.outputs.clone(), maps)
}

/// Checks that each `f_k` depends on `x_k` alone.
pub fn check_fns(ft: &FunctionTuple) -> FnsVerdict {
    let xs = radix_total(&ft.inputs);
    let mut violations = Vec::new();
    for (k, map) in ft.maps.iter().enumerate() {
        let mut reference: Vec<Option<usize>> = vec![None; ft.inputs[k]];
        for xi in 0..xs {
            let x = decode(xi, &ft.inputs);
            match reference[x[k]] {
                None => reference[x[k]] = Some(xi),
                Some(ri) if map[ri] != map[xi] => violations.push(FnsViolation {
                    party: k + 1,
                    own_input: x[k],
                    y: decode(ri, &ft.inputs),
                    z: x,
                    f_y: map[ri],
                    f_z: map[xi],
                }),
                Some(_) => {}
            }
        }
    }
    FnsVerdict { pass: violations.is_empty(), violations }
}

/// Outcome of comparing FNS with functional locality over a whole function space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub total: u64,
    pub fns_count: u64,
    pub factored_count: u64,
    /// Whether the FNS tuples are exactly the factored ones.
    pub equal: bool,
}

/// `base^exp`, or `None` past `u64`.
fn checked_pow(base: usize, exp: usize) -> Option<u64> {
    (0..exp).try_fold(1u64, |acc, _| acc.checked_mul(base as u64))
}

/// The number of function tuples over these alphabets, if it fits in `u64`.
pub fn function_space_size(inputs: &[usize], outputs: &[usize]) -> Option<u64> {
    let xs = radix_total(inputs);
    outputs
        .iter()
        .try_fold(1u64, |acc, &a| acc.checked_mul(checked_pow(a, xs)?))
}

fn tuple_from_index(inputs: &[usize], outputs: &[usize], mut index: u64) -> FunctionTuple {
    let xs = radix_total(inputs);
    let mut maps = vec![Vec::new(); outputs.len()];
    for (k, &a) in outputs.iter().enumerate().rev() {
        let size = checked_pow(a, xs).expect("checked by caller");
        let mut f = index % size;
        index /= size;
        maps[k] = (0..xs)
            .map(|_| {
                let v = (f % a as u64) as usize;
                f /= a as u64;
                v
            })
            .collect();
    }
    FunctionTuple { inputs: inputs.to_vec(), outputs: outputs.to_vec(), maps }
}

fn tuple_index(ft: &FunctionTuple) -> u64 {
    let xs = radix_total(&ft.inputs);
    ft.maps.iter().zip(&ft.outputs).fold(0u64, |acc, (map, &a)| {
        let size = checked_pow(a, xs).expect("checked by caller");
        let f = map.iter().rev().fold(0u64, |f, &v| f * a as u64 + v as u64);
        acc * size + f
    })
}

/// Enumerates every deterministic function tuple and checks that the ones
/// passing [`check_fns`] are exactly those of the form `(F_1(x_1), ..., F_N(x_N))`.
pub fn check_functional_locality_equivalence(
    inputs: &[usize],
    outputs: &[usize],
) -> Result<LocalityReport, BehaviorError> {
    check_alphabets(inputs, outputs)?;
    let total = match function_space_size(inputs, outputs) {
        Some(t) if t <= ENUMERATION_BUDGET => t,
        other => {
            return Err(BehaviorError::BudgetExceeded {
                required: other.map_or_else(|| "more than 2^64".to_string(), |t| t.to_string()),
                budget: ENUMERATION_BUDGET,
            })
        }
    };

    let fns: Vec<u64> = (0..total)
        .into_par_iter()
        .filter(|&i| check_fns(&tuple_from_index(inputs, outputs, i)).pass)
        .collect();

    // independent route: build every factored tuple from single-argument functions
    let local_sizes: Vec<u64> = inputs
        .iter()
        .zip(outputs)
        .map(|(&x, &a)| checked_pow(a, x).expect("bounded by the full space"))
        .collect();
    let local_total: u64 = local_sizes.iter().product();
    let mut factored: Vec<u64> = (0..local_total)
        .into_par_iter()
        .map(|mut i| {
            let mut local = vec![Vec::new(); inputs.len()];
            for k in (0..inputs.len()).rev() {
                let mut f = i % local_sizes[k];
                i /= local_sizes[k];
                local[k] = (0..inputs[k])
                    .map(|_| {
                        let v = (f % outputs[k] as u64) as usize;
                        f /= outputs[k] as u64;
                        v
                    })
                    .collect();
            }
            let ft = FunctionTuple::from_local(inputs.to_vec(), outputs.to_vec(), &local)
                .expect("local tables are in range");
            tuple_index(&ft)
        })
        .collect();
    factored.sort_unstable();
    factored.dedup();

    Ok(LocalityReport {
        inputs: inputs.to_vec(),
        outputs: outputs.to_vec(),
        total,
        fns_count: fns.len() as u64,
        factored_count: factored.len() as u64,
        equal: fns == factored,
    })
}

/// JSON wire form: `{"parties": N, "inputs": [..], "outputs": [..],
/// "table": [{"x": [..], "a": [..], "p": "num/den"}]}`. Omitted entries are 0.
/// A numeric `p` makes the whole table floating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorFile {
    pub parties: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub table: Vec<TableEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub x: Vec<usize>,
    pub a: Vec<usize>,
    pub p: serde_json::Value,
}

fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (text.parse::<BigInt>().ok()?, BigInt::one()),
    };
    if den.is_zero() {
        return None;
    }
    Some(BigRational::new(num, den))
}

impl TryFrom<BehaviorFile> for Behavior {
    type Error = BehaviorError;

    fn try_from(file: BehaviorFile) -> Result<Self, BehaviorError> {
        check_alphabets(&file.inputs, &file.outputs)?;
        if file.parties != file.inputs.len() {
            return Err(BehaviorError::PartyCount { expected: file.parties, got: file.inputs.len(), what: "input alphabets" });
        }
        let out = radix_total(&file.outputs);
        let size = radix_total(&file.inputs) * out;
        let float = file.table.iter().any(|e| e.p.is_number());
        let mut exact = vec![<BigRational as Zero>::zero(); size];
        let mut approx = vec![0.0; size];
        let mut seen = vec![false; size];
        for (index, entry) in file.table.iter().enumerate() {
            for (vec, sizes, what) in [(&entry.x, &file.inputs, "inputs"), (&entry.a, &file.outputs, "outputs")] {
                if vec.len() != file.parties {
                    return Err(BehaviorError::PartyCount { expected: file.parties, got: vec.len(), what });
                }
                if let Some((&value, &size)) = vec.iter().zip(sizes.iter()).find(|(v, s)| v >= s) {
                    return Err(BehaviorError::SymbolOutOfRange { index, value, size });
                }
            }
            let i = encode(&entry.x, &file.inputs) * out + encode(&entry.a, &file.outputs);
            if std::mem::replace(&mut seen[i], true) {
                return Err(BehaviorError::DuplicateEntry { index });
            }
            let malformed = || BehaviorError::MalformedProbability { index, text: entry.p.to_string() };
            let value = match &entry.p {
                serde_json::Value::String(s) => parse_rational(s).ok_or_else(malformed)?,
                serde_json::Value::Number(n) if float => {
                    approx[i] = n.as_f64().ok_or_else(malformed)?;
                    continue;
                }
                _ => return Err(malformed()),
            };
            if float {
                approx[i] = value.to_f64().ok_or_else(malformed)?;
            } else {
                exact[i] = value;
            }
        }
        let table = if float { Table::Float(approx) } else { Table::Exact(exact) };
        Ok(Behavior { inputs: file.inputs, outputs: file.outputs, table })
    }
}

impl From<&Behavior> for BehaviorFile {
    fn from(b: &Behavior) -> Self {
        let out = b.out_total();
        let table = match &b.table {
            Table::Exact(t) => t
                .iter()
                .enumerate()
                .filter(|(_, p)| !Zero::is_zero(*p))
                .map(|(i, p)| (i, serde_json::Value::String(p.to_string())))
                .collect::<Vec<_>>(),
            Table::Float(t) => t
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(i, &p)| (i, serde_json::json!(p)))
                .collect(),
        };
        BehaviorFile {
            parties: b.parties(),
            inputs: b.inputs.clone(),
            outputs: b.outputs.clone(),
            table: table
                .into_iter()
                .map(|(i, p)| TableEntry { x: decode(i / out, &b.inputs), a: decode(i % out, &b.outputs), p })
                .collect(),
        }
    }
}

/// Standard fixtures.
pub mod boxes {
    use super::*;

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    fn indicator(c: bool) -> BigRational {
        if c {
            BigRational::one()
        } else {
            <BigRational as Zero>::zero()
        }
    }

    /// `P(a, b | x, y) = 1/2` if `a xor b = x and y`.
    pub fn pr_box() -> Behavior {
        Behavior::exact(vec![2, 2], vec![2, 2], |x, a| {
            if (a[0] ^ a[1]) == (x[0] & x[1]) {
                half()
            } else {
                <BigRational as Zero>::zero()
            }
        })
        .expect("fixed alphabets")
    }

    /// Alice outputs 0, Bob outputs Alice's input.
    pub fn signaling_box() -> Behavior {
        Behavior::exact(vec![2, 2], vec![2, 2], |x, a| indicator(a[0] == 0 && a[1] == x[0])).expect("fixed alphabets")
    }

    /// `a = x`, `b = y`.
    pub fn local_identity_box() -> Behavior {
        Behavior::exact(vec![2, 2], vec![2, 2], |x, a| indicator(a[0] == x[0] && a[1] == x[1])).expect("fixed alphabets")
    }

    /// Uniform outputs regardless of inputs.
    pub fn uniform_noise_box() -> Behavior {
        Behavior::exact(vec![2, 2], vec![2, 2], |_, _| BigRational::new(1.into(), 4.into())).expect("fixed alphabets")
    }
}
