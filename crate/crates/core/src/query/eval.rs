//! Query evaluation on single worlds.
//!
//! Queries are evaluated through homomorphisms into the instance. A query can
//! be compiled once per instance into the family of its homomorphic images,
//! after which evaluation on a world is a handful of subset tests.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::{One, Zero};

use super::ast::{AggregateOp, Cq, Query, Term};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, Rational};
use crate::pdb::{Instance, TupleSet, Value};

/// Constant equality tolerant of untyped columns: `"1"` stored as a symbol
/// matches the numeric literal `1` in a query.
pub(crate) fn value_matches(constant: &Value, stored: &Value) -> bool {
    match (constant, stored) {
        (a, b) if a == b => true,
        (Value::Num(n), Value::Sym(s)) | (Value::Sym(s), Value::Num(n)) => {
            parse_rational(s).is_ok_and(|m| &m == n)
        }
        _ => false,
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Value),
}

struct Pattern<'q> {
    predicate: &'q str,
    slots: Vec<Slot>,
}

fn patterns<'q>(cq: &'q Cq, vars: &[String]) -> Vec<Pattern<'q>> {
    cq.atoms
        .iter()
        .map(|a| Pattern {
            predicate: &a.predicate,
            slots: a
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Slot::Var(vars.iter().position(|w| w == v).unwrap()),
                    Term::Const(c) => Slot::Const(c.clone()),
                })
                .collect(),
        })
        .collect()
}

/// Enumerates every homomorphism from `cq` into the tuples of `inst`
/// (restricted to `within` when given). The callback receives the variable
/// assignment, in [`Cq::variables`] order, and the tuple chosen per atom.
pub fn for_each_homomorphism(
    cq: &Cq,
    inst: &Instance,
    within: Option<&TupleSet>,
    mut visit: impl FnMut(&[Value], &[usize]),
) {
    search_until(cq, inst, within, |a, i| {
        visit(a, i);
        false
    });
}

/// Like [`for_each_homomorphism`], stopping once the callback returns true.
/// Returns whether it stopped early.
fn search_until(cq: &Cq, inst: &Instance, within: Option<&TupleSet>, mut visit: impl FnMut(&[Value], &[usize]) -> bool) -> bool {
    let vars = cq.variables();
    let pats = patterns(cq, &vars);
    let mut binding: Vec<Option<Value>> = vec![None; vars.len()];
    let mut image = Vec::with_capacity(pats.len());
    search(&pats, inst, within, 0, &mut binding, &mut image, &mut visit)
}

fn search(
    pats: &[Pattern<'_>],
    inst: &Instance,
    within: Option<&TupleSet>,
    depth: usize,
    binding: &mut Vec<Option<Value>>,
    image: &mut Vec<usize>,
    visit: &mut impl FnMut(&[Value], &[usize]) -> bool,
) -> bool {
    if depth == pats.len() {
        let full: Vec<Value> = binding.iter().map(|b| b.clone().expect("all variables bound")).collect();
        return visit(&full, image);
    }
    let pat = &pats[depth];
    for &t in inst.tuples_of(pat.predicate) {
        if within.is_some_and(|w| !w.contains(t)) {
            continue;
        }
        let args = &inst.tuple(t).args;
        if args.len() != pat.slots.len() {
            continue;
        }
        let mut bound_here = Vec::new();
        let mut ok = true;
        for (slot, arg) in pat.slots.iter().zip(args) {
            match slot {
                Slot::Const(c) => ok = value_matches(c, arg),
                Slot::Var(v) => match &binding[*v] {
                    Some(b) => ok = b == arg,
                    None => {
                        binding[*v] = Some(arg.clone());
                        bound_here.push(*v);
                    }
                },
            }
            if !ok {
                break;
            }
        }
        let mut stop = false;
        if ok {
            image.push(t);
            stop = search(pats, inst, within, depth + 1, binding, image, visit);
            image.pop();
        }
        for v in bound_here {
            binding[v] = None;
        }
        if stop {
            return true;
        }
    }
    false
}

fn cq_holds(cq: &Cq, inst: &Instance, world: &TupleSet) -> bool {
    search_until(cq, inst, Some(world), |_, _| true)
}

/// Truth value of a Boolean query on a world.
pub fn eval_boolean(query: &Query, inst: &Instance, world: &TupleSet) -> Result<bool> {
    match query {
        Query::Bcq(cq) => Ok(cq_holds(cq, inst, world)),
        Query::Ubcq(ds) => Ok(ds.iter().any(|cq| cq_holds(cq, inst, world))),
        Query::Aggregate { .. } => Err(Error::QueryForm("expected a Boolean query".into())),
    }
}

fn aggregate_contribution(op: AggregateOp, target: Option<usize>, vars: &[String], assignment: &[Value]) -> Result<Rational> {
    match (op, target) {
        (AggregateOp::Count, _) | (AggregateOp::Sum, None) => Ok(Rational::one()),
        (AggregateOp::Sum, Some(i)) => match &assignment[i] {
            Value::Num(n) => Ok(n.clone()),
            Value::Sym(s) => parse_rational(s).map_err(|_| Error::NonNumeric {
                variable: vars[i].clone(),
                value: s.clone(),
            }),
        },
    }
}

fn target_index(body: &Cq, target: &Option<String>) -> Option<usize> {
    target.as_ref().and_then(|t| body.variables().iter().position(|v| v == t))
}

/// Value of an aggregate on a world: one contribution per distinct
/// satisfying assignment of the body variables.
pub fn eval_aggregate(query: &Query, inst: &Instance, world: &TupleSet) -> Result<Rational> {
    let Query::Aggregate { op, target, body } = query else {
        return Err(Error::QueryForm("expected an aggregate query".into()));
    };
    let vars = body.variables();
    let ti = target_index(body, target);
    let mut seen = BTreeSet::new();
    for_each_homomorphism(body, inst, Some(world), |a, _| {
        seen.insert(a.to_vec());
    });
    let mut total = Rational::zero();
    for a in &seen {
        total += aggregate_contribution(*op, ti, &vars, a)?;
    }
    Ok(total)
}

/// Numeric value of any query on a world; Boolean queries give 0 or 1.
pub fn eval_query(query: &Query, inst: &Instance, world: &TupleSet) -> Result<Rational> {
    if query.is_boolean() {
        Ok(if eval_boolean(query, inst, world)? { Rational::one() } else { Rational::zero() })
    } else {
        eval_aggregate(query, inst, world)
    }
}

/// A function from worlds of a fixed instance to exact numbers.
pub trait WorldQuery: Send + Sync {
    fn eval(&self, world: &TupleSet) -> Rational;

    /// Whether every value is 0 or 1.
    fn is_boolean(&self) -> bool;
}

/// The minimal homomorphic images of a Boolean query, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MssFamily {
    pub sets: Vec<TupleSet>,
}

impl MssFamily {
    fn from_images(images: impl IntoIterator<Item = TupleSet>) -> Self {
        let mut all: Vec<TupleSet> = images.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        all.sort_by_key(|s| (s.len(), s.indices()));
        let mut sets: Vec<TupleSet> = Vec::new();
        for s in all {
            if !sets.iter().any(|m| m.is_subset(&s)) {
                sets.push(s);
            }
        }
        sets.sort_by_cached_key(|s| s.indices());
        Self { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn satisfied_by(&self, world: &TupleSet) -> bool {
        self.sets.iter().any(|s| s.is_subset(world))
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Boolean(MssFamily),
    /// One group per distinct assignment: its value and the images realizing it.
    Aggregate(Vec<(Rational, Vec<TupleSet>)>),
}

/// A query compiled against one instance.
#[derive(Debug, Clone)]
pub struct CompiledQuery {
    query: Query,
    inner: Compiled,
}

fn image_set(inst: &Instance, image: &[usize]) -> TupleSet {
    TupleSet::from_indices(inst.len(), image.iter().copied())
}

impl CompiledQuery {
    pub fn new(query: &Query, inst: &Instance) -> Result<Self> {
        query.check(inst.schema())?;
        let inner = match query {
            Query::Bcq(_) | Query::Ubcq(_) => {
                let mut images = Vec::new();
                for cq in query.bodies() {
                    for_each_homomorphism(cq, inst, None, |_, img| images.push(image_set(inst, img)));
                }
                Compiled::Boolean(MssFamily::from_images(images))
            }
            Query::Aggregate { op, target, body } => {
                let vars = body.variables();
                let ti = target_index(body, target);
                let mut groups: BTreeMap<Vec<Value>, BTreeSet<TupleSet>> = BTreeMap::new();
                for_each_homomorphism(body, inst, None, |a, img| {
                    groups.entry(a.to_vec()).or_default().insert(image_set(inst, img));
                });
                let mut out = Vec::with_capacity(groups.len());
                for (a, imgs) in groups {
                    let value = aggregate_contribution(*op, ti, &vars, &a)?;
                    out.push((value, imgs.into_iter().collect()));
                }
                Compiled::Aggregate(out)
            }
        };
        Ok(Self {
            query: query.clone(),
            inner,
        })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    /// The minimal satisfying sets; `None` for aggregates.
    pub fn mss(&self) -> Option<&MssFamily> {
        match &self.inner {
            Compiled::Boolean(m) => Some(m),
            Compiled::Aggregate(_) => None,
        }
    }

    /// Aggregate groups as (value, images); empty for Boolean queries.
    pub fn groups(&self) -> &[(Rational, Vec<TupleSet>)] {
        match &self.inner {
            Compiled::Aggregate(g) => g,
            Compiled::Boolean(_) => &[],
        }
    }

    /// Tuples occurring in some homomorphic image.
    pub fn relevant_tuples(&self, universe: usize) -> TupleSet {
        let mut out = TupleSet::empty(universe);
        match &self.inner {
            Compiled::Boolean(m) => m.sets.iter().for_each(|s| out.union_with(s)),
            Compiled::Aggregate(g) => g.iter().flat_map(|(_, i)| i).for_each(|s| out.union_with(s)),
        }
        out
    }
}

impl WorldQuery for CompiledQuery {
    fn eval(&self, world: &TupleSet) -> Rational {
        match &self.inner {
            Compiled::Boolean(m) => {
                if m.satisfied_by(world) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
            Compiled::Aggregate(groups) => groups
                .iter()
                .filter(|(_, imgs)| imgs.iter().any(|s| s.is_subset(world)))
                .map(|(v, _)| v)
                .sum(),
        }
    }

    fn is_boolean(&self) -> bool {
        matches!(self.inner, Compiled::Boolean(_))
    }
}

/// The minimal satisfying sets of a Boolean query over an instance.
pub fn minimal_satisfiable_sets(query: &Query, inst: &Instance) -> Result<MssFamily> {
    if !query.is_boolean() {
        return Err(Error::QueryForm("minimal satisfying sets need a Boolean query".into()));
    }
    let c = CompiledQuery::new(query, inst)?;
    Ok(c.mss().cloned().expect("boolean"))
}

/// `[S ⊆ W]`.
#[derive(Debug, Clone)]
pub struct QueryOfSet(pub TupleSet);

impl WorldQuery for QueryOfSet {
    fn eval(&self, world: &TupleSet) -> Rational {
        if self.0.is_subset(world) {
            Rational::one()
        } else {
            Rational::zero()
        }
    }

    fn is_boolean(&self) -> bool {
        true
    }
}

/// Pointwise minimum.
#[derive(Clone)]
pub struct Conjunction(pub Vec<Arc<dyn WorldQuery>>);

impl WorldQuery for Conjunction {
    fn eval(&self, world: &TupleSet) -> Rational {
        self.0.iter().map(|q| q.eval(world)).min().unwrap_or_else(Rational::one)
    }

    fn is_boolean(&self) -> bool {
        self.0.iter().all(|q| q.is_boolean())
    }
}

/// Pointwise maximum.
#[derive(Clone)]
pub struct Disjunction(pub Vec<Arc<dyn WorldQuery>>);

impl WorldQuery for Disjunction {
    fn eval(&self, world: &TupleSet) -> Rational {
        self.0.iter().map(|q| q.eval(world)).max().unwrap_or_else(Rational::zero)
    }

    fn is_boolean(&self) -> bool {
        self.0.iter().all(|q| q.is_boolean())
    }
}

/// `Σ cᵢ·Qᵢ`.
#[derive(Clone)]
pub struct LinearCombination(pub Vec<(Rational, Arc<dyn WorldQuery>)>);

impl WorldQuery for LinearCombination {
    fn eval(&self, world: &TupleSet) -> Rational {
        self.0.iter().map(|(c, q)| c * q.eval(world)).sum()
    }

    fn is_boolean(&self) -> bool {
        false
    }
}

/// A query given by a closure.
pub struct FnQuery<F> {
    pub f: F,
    pub boolean: bool,
}

impl<F: Fn(&TupleSet) -> Rational + Send + Sync> WorldQuery for FnQuery<F> {
    fn eval(&self, world: &TupleSet) -> Rational {
        (self.f)(world)
    }

    fn is_boolean(&self) -> bool {
        self.boolean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::int;
    use crate::pdb::{RelationSchema, Schema, TupleKind, TupleRecord};
    use crate::query::parse_query;
    use proptest::prelude::*;

    /// The path graph a→b→c→d→e plus a chord, as edges e1..e6.
    fn paths() -> Instance {
        let mut schema = Schema::new();
        schema.insert("E".into(), RelationSchema::untyped(2));
        let edges = [("a", "e"), ("a", "b"), ("b", "e"), ("a", "c"), ("c", "d"), ("d", "e")];
        let tuples = edges
            .iter()
            .enumerate()
            .map(|(i, (x, y))| TupleRecord::new(&format!("t{}", i + 1), "E", vec![Value::sym(*x), Value::sym(*y)], TupleKind::Endogenous))
            .collect();
        Instance::new(schema, tuples).unwrap()
    }

    const PATH_Q: &str = "Q() :- E(a,e) ; E(a,X), E(X,e) ; E(a,X), E(X,Y), E(Y,e)";

    fn set(inst: &Instance, tids: &[&str]) -> TupleSet {
        inst.set_of_strs(tids).unwrap()
    }

    #[test]
    fn mss_of_path_query() {
        let inst = paths();
        let q = parse_query(PATH_Q, inst.schema()).unwrap();
        let m = minimal_satisfiable_sets(&q, &inst).unwrap();
        let expected = vec![set(&inst, &["t1"]), set(&inst, &["t2", "t3"]), set(&inst, &["t4", "t5", "t6"])];
        assert_eq!(m.sets, expected);
    }

    #[test]
    fn boolean_eval() {
        let inst = paths();
        let q = parse_query(PATH_Q, inst.schema()).unwrap();
        assert!(!eval_boolean(&q, &inst, &set(&inst, &["t2", "t5", "t6"])).unwrap());
        assert!(eval_boolean(&q, &inst, &set(&inst, &["t4", "t5", "t6"])).unwrap());
        assert!(!eval_boolean(&q, &inst, &inst.empty_set()).unwrap());
    }

    fn sales() -> Instance {
        let mut schema = Schema::new();
        schema.insert("S".into(), RelationSchema::untyped(2));
        let rows = [("a", 3), ("b", 5), ("c", 9), ("a", 3)];
        let tuples = rows
            .iter()
            .enumerate()
            .map(|(i, (x, y))| TupleRecord::new(&format!("s{}", i + 1), "S", vec![Value::sym(*x), Value::Num(int(*y))], TupleKind::Endogenous))
            .collect();
        Instance::new(schema, tuples).unwrap()
    }

    #[test]
    fn aggregates_dedup_assignments() {
        let inst = sales();
        let sum = parse_query("Q(sum(Y)) :- S(X,Y)", inst.schema()).unwrap();
        let count = parse_query("Q(count()) :- S(X,Y)", inst.schema()).unwrap();
        let full = inst.full_set();
        assert_eq!(eval_aggregate(&sum, &inst, &full).unwrap(), int(17));
        assert_eq!(eval_aggregate(&count, &inst, &full).unwrap(), int(3));
        let only_dup = set(&inst, &["s4"]);
        assert_eq!(eval_aggregate(&sum, &inst, &only_dup).unwrap(), int(3));
        let compiled = CompiledQuery::new(&sum, &inst).unwrap();
        assert_eq!(compiled.eval(&full), int(17));
        assert_eq!(compiled.groups().len(), 3);
    }

    #[test]
    fn non_numeric_sum_is_an_error() {
        let inst = sales();
        let q = parse_query("Q(sum(X)) :- S(X,Y)", inst.schema()).unwrap();
        assert!(matches!(eval_aggregate(&q, &inst, &inst.full_set()), Err(Error::NonNumeric { .. })));
        assert!(CompiledQuery::new(&q, &inst).is_err());
    }

    #[test]
    fn numeric_literal_matches_untyped_symbol() {
        assert!(value_matches(&Value::Num(int(1)), &Value::sym("1")));
        assert!(!value_matches(&Value::Num(int(1)), &Value::sym("a")));
    }

    #[test]
    fn combinators() {
        let inst = paths();
        let a: Arc<dyn WorldQuery> = Arc::new(QueryOfSet(set(&inst, &["t1"])));
        let b: Arc<dyn WorldQuery> = Arc::new(QueryOfSet(set(&inst, &["t2"])));
        let w = set(&inst, &["t1"]);
        assert_eq!(Conjunction(vec![a.clone(), b.clone()]).eval(&w), int(0));
        assert_eq!(Disjunction(vec![a.clone(), b.clone()]).eval(&w), int(1));
        assert_eq!(LinearCombination(vec![(int(2), a), (int(3), b)]).eval(&inst.full_set()), int(5));
    }

    proptest! {
        #[test]
        fn compiled_matches_direct(mask in 0u64..64) {
            let inst = paths();
            let w = inst.world_from_mask(inst.endogenous(), mask);
            let q = parse_query(PATH_Q, inst.schema()).unwrap();
            let compiled = CompiledQuery::new(&q, &inst).unwrap();
            prop_assert_eq!(compiled.eval(&w), eval_query(&q, &inst, &w).unwrap());
            // Q[W] is the disjunction over minimal sets of [S ⊆ W].
            let m = compiled.mss().unwrap();
            prop_assert_eq!(m.satisfied_by(&w), eval_boolean(&q, &inst, &w).unwrap());
        }

        #[test]
        fn monotone_in_worlds(mask in 0u64..64, extra in 0usize..6) {
            let inst = paths();
            let w = inst.world_from_mask(inst.endogenous(), mask);
            let mut bigger = w.clone();
            bigger.insert(extra);
            let q = parse_query(PATH_Q, inst.schema()).unwrap();
            prop_assert!(eval_query(&q, &inst, &w).unwrap() <= eval_query(&q, &inst, &bigger).unwrap());
        }
    }
}
