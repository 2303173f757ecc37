//! Relational instances with tuple identifiers and the endogenous/exogenous
//! partition.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{to_fraction_string, Rational};

/// Default cap on the number of endogenous tuples for exhaustive enumeration.
pub const DEFAULT_MAX_ENDOGENOUS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_endogenous: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_endogenous: DEFAULT_MAX_ENDOGENOUS,
        }
    }
}

impl Limits {
    pub fn check(&self, needed: usize) -> Result<()> {
        if needed > self.max_endogenous {
            return Err(Error::CapExceeded {
                cap: self.max_endogenous,
                needed,
            });
        }
        Ok(())
    }
}

/// Opaque tuple identifier. Ordered naturally, so `t2 < t10`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleId(String);

impl TupleId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for TupleId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialOrd for TupleId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TupleId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0).then_with(|| self.0.cmp(&other.0))
    }
}

fn chunks(s: &str) -> Vec<(bool, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    for i in 1..=bytes.len() {
        if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
            out.push((bytes[start].is_ascii_digit(), &s[start..i]));
            start = i;
        }
    }
    out
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, sa), (db, sb)) in ca.iter().zip(cb.iter()) {
        let ord = if *da && *db {
            let (ta, tb) = (sa.trim_start_matches('0'), sb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            sa.cmp(sb)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len())
}

/// A constant: symbolic or an exact number.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Sym(String),
    Num(Rational),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self {
            Value::Num(n) => Some(n),
            Value::Sym(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Sym(s) => f.write_str(s),
            Value::Num(n) if n.is_integer() => write!(f, "{}", n.numer()),
            Value::Num(n) => f.write_str(&to_fraction_string(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TupleKind {
    Endogenous,
    Exogenous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Symbolic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    pub arity: usize,
    /// Per-position domain tags; `None` leaves positions untyped.
    pub domains: Option<Vec<DomainTag>>,
}

impl RelationSchema {
    pub fn untyped(arity: usize) -> Self {
        Self { arity, domains: None }
    }
}

pub type Schema = BTreeMap<String, RelationSchema>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleRecord {
    pub tid: TupleId,
    pub predicate: String,
    pub args: Vec<Value>,
    pub kind: TupleKind,
}

impl TupleRecord {
    pub fn new(tid: &str, predicate: &str, args: Vec<Value>, kind: TupleKind) -> Self {
        Self {
            tid: TupleId::new(tid),
            predicate: predicate.to_string(),
            args,
            kind,
        }
    }

    pub fn is_exogenous(&self) -> bool {
        self.kind == TupleKind::Exogenous
    }
}

impl fmt::Display for TupleRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        write!(f, "{}: {}({})", self.tid, self.predicate, args.join(","))
    }
}

/// A set of tuples of one instance, addressed by tuple index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TupleSet(FixedBitSet);

impl TupleSet {
    pub fn empty(universe: usize) -> Self {
        Self(FixedBitSet::with_capacity(universe))
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(universe);
        for i in indices {
            set.insert(i);
        }
        set
    }

    /// Size of the tuple universe the set ranges over.
    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn insert(&mut self, index: usize) {
        self.0.insert(index);
    }

    pub fn remove(&mut self, index: usize) {
        self.0.set(index, false);
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(index)
    }

    pub fn is_subset(&self, other: &TupleSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &TupleSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn union_with(&mut self, other: &TupleSet) {
        self.0.union_with(&other.0);
    }

    pub fn difference_with(&mut self, other: &TupleSet) {
        self.0.difference_with(&other.0);
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.ones().collect()
    }
}

/// A relational instance `D = D_en ∪ D_ex`.
///
/// Tuples are stored sorted by tuple id, so tuple indices, world keys and
/// reports do not depend on input order.
#[derive(Debug, Clone)]
pub struct Instance {
    schema: Schema,
    tuples: Vec<TupleRecord>,
    index: HashMap<TupleId, usize>,
    endogenous: Vec<usize>,
    exogenous: TupleSet,
    by_predicate: BTreeMap<String, Vec<usize>>,
    limits: Limits,
}

impl Instance {
    pub fn new(schema: Schema, mut tuples: Vec<TupleRecord>) -> Result<Self> {
        tuples.sort_by(|a, b| a.tid.cmp(&b.tid));
        let mut index = HashMap::with_capacity(tuples.len());
        for (i, t) in tuples.iter().enumerate() {
            if index.insert(t.tid.clone(), i).is_some() {
                return Err(Error::DuplicateTuple(t.tid.to_string()));
            }
            let rel = schema
                .get(&t.predicate)
                .ok_or_else(|| Error::UnknownPredicate(t.predicate.clone()))?;
            if rel.arity != t.args.len() {
                return Err(Error::Arity {
                    predicate: t.predicate.clone(),
                    expected: rel.arity,
                    found: t.args.len(),
                });
            }
            if let Some(domains) = &rel.domains {
                for (arg, tag) in t.args.iter().zip(domains) {
                    let ok = matches!(
                        (arg, tag),
                        (Value::Num(_), DomainTag::Numeric) | (Value::Sym(_), DomainTag::Symbolic)
                    );
                    if !ok {
                        return Err(Error::Document(format!(
                            "tuple `{}`: value `{arg}` does not match the {tag:?} domain of `{}`",
                            t.tid, t.predicate
                        )));
                    }
                }
            }
        }
        let n = tuples.len();
        let endogenous = (0..n).filter(|&i| !tuples[i].is_exogenous()).collect();
        let exogenous = TupleSet::from_indices(n, (0..n).filter(|&i| tuples[i].is_exogenous()));
        let mut by_predicate: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in tuples.iter().enumerate() {
            by_predicate.entry(t.predicate.clone()).or_default().push(i);
        }
        Ok(Self {
            schema,
            tuples,
            index,
            endogenous,
            exogenous,
            by_predicate,
            limits: Limits::default(),
        })
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[TupleRecord] {
        &self.tuples
    }

    pub fn tuple(&self, index: usize) -> &TupleRecord {
        &self.tuples[index]
    }

    pub fn tid(&self, index: usize) -> &TupleId {
        &self.tuples[index].tid
    }

    pub fn index_of(&self, tid: &TupleId) -> Result<usize> {
        self.index
            .get(tid)
            .copied()
            .ok_or_else(|| Error::UnknownTuple(tid.to_string()))
    }

    /// Index of an endogenous tuple; exogenous ids are rejected.
    pub fn endogenous_index(&self, tid: &TupleId) -> Result<usize> {
        let i = self.index_of(tid)?;
        if self.tuples[i].is_exogenous() {
            return Err(Error::Exogenous(tid.to_string()));
        }
        Ok(i)
    }

    pub fn endogenous(&self) -> &[usize] {
        &self.endogenous
    }

    pub fn exogenous(&self) -> &TupleSet {
        &self.exogenous
    }

    pub fn is_exogenous(&self, index: usize) -> bool {
        self.exogenous.contains(index)
    }

    pub fn tuples_of(&self, predicate: &str) -> &[usize] {
        self.by_predicate.get(predicate).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn empty_set(&self) -> TupleSet {
        TupleSet::empty(self.len())
    }

    pub fn full_set(&self) -> TupleSet {
        TupleSet::from_indices(self.len(), 0..self.len())
    }

    pub fn set_of(&self, tids: impl IntoIterator<Item = TupleId>) -> Result<TupleSet> {
        let mut set = self.empty_set();
        for tid in tids {
            set.insert(self.index_of(&tid)?);
        }
        Ok(set)
    }

    pub fn set_of_strs(&self, tids: &[&str]) -> Result<TupleSet> {
        self.set_of(tids.iter().map(|t| TupleId::new(*t)))
    }

    pub fn tids_of(&self, set: &TupleSet) -> Vec<TupleId> {
        set.iter().map(|i| self.tuples[i].tid.clone()).collect()
    }

    /// `W ∪ D_ex` for a set `W` of endogenous tuple indices drawn by bitmask
    /// over `members`.
    pub fn world_from_mask(&self, members: &[usize], mask: u64) -> TupleSet {
        let mut world = self.exogenous.clone();
        for (bit, &i) in members.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                world.insert(i);
            }
        }
        world
    }

    /// Active domain: every constant appearing in some tuple.
    pub fn active_domain(&self) -> BTreeSet<Value> {
        self.tuples.iter().flat_map(|t| t.args.iter().cloned()).collect()
    }

    /// The same schema with additional tuples. Limits are inherited.
    pub fn extended(&self, extra: Vec<TupleRecord>) -> Result<Instance> {
        let mut tuples = self.tuples.clone();
        tuples.extend(extra);
        Ok(Instance::new(self.schema.clone(), tuples)?.with_limits(self.limits))
    }

    pub fn describe(&self, set: &TupleSet) -> String {
        let tids: Vec<String> = set.iter().map(|i| self.tuples[i].tid.to_string()).collect();
        format!("{{{}}}", tids.join(", "))
    }
}
