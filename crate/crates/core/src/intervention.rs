//! Counterfactual interventions `do(T in)` and `do(T out)`.
//!
//! An intervention transports the mass of every world `W` to `W ∪ T` (in) or
//! `W ∖ T` (out). Tuple-independent spaces stay tuple-independent: the target
//! marginals become 1 or 0.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{Probability, Rational};
use crate::pdb::{Instance, Pdb, Representation, TupleId, TupleSet};
use crate::query::{expected_value, Backend, CompiledQuery, Evaluation, Query, WorldQuery};

/// Tuples forced into and out of every world, applied jointly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Intervention {
    pub force_in: BTreeSet<TupleId>,
    pub force_out: BTreeSet<TupleId>,
}

impl Intervention {
    pub fn force_in(tids: impl IntoIterator<Item = TupleId>) -> Self {
        Self {
            force_in: tids.into_iter().collect(),
            force_out: BTreeSet::new(),
        }
    }

    pub fn force_out(tids: impl IntoIterator<Item = TupleId>) -> Self {
        Self {
            force_in: BTreeSet::new(),
            force_out: tids.into_iter().collect(),
        }
    }

    pub fn mixed(force_in: impl IntoIterator<Item = TupleId>, force_out: impl IntoIterator<Item = TupleId>) -> Self {
        Self {
            force_in: force_in.into_iter().collect(),
            force_out: force_out.into_iter().collect(),
        }
    }

    /// Checks the targets against an instance and resolves them to index sets.
    pub fn resolve(&self, inst: &Instance) -> Result<Resolved> {
        if self.force_in.is_empty() && self.force_out.is_empty() {
            return Err(Error::EmptyTargets);
        }
        if let Some(t) = self.force_in.intersection(&self.force_out).next() {
            return Err(Error::ConflictingTargets(t.to_string()));
        }
        let mut ins = inst.empty_set();
        for t in &self.force_in {
            ins.insert(inst.endogenous_index(t)?);
        }
        let mut outs = inst.empty_set();
        for t in &self.force_out {
            outs.insert(inst.endogenous_index(t)?);
        }
        Ok(Resolved { ins, outs })
    }
}

impl std::fmt::Display for Intervention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list = |s: &BTreeSet<TupleId>| s.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ");
        match (self.force_in.is_empty(), self.force_out.is_empty()) {
            (false, true) => write!(f, "do({{{}}} in)", list(&self.force_in)),
            (true, false) => write!(f, "do({{{}}} out)", list(&self.force_out)),
            _ => write!(f, "do({{{}}} in, {{{}}} out)", list(&self.force_in), list(&self.force_out)),
        }
    }
}

/// An intervention resolved against one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub ins: TupleSet,
    pub outs: TupleSet,
}

impl Resolved {
    pub fn in_set(ins: TupleSet) -> Self {
        let outs = TupleSet::empty(ins.universe());
        Self { ins, outs }
    }

    pub fn out_set(outs: TupleSet) -> Self {
        let ins = TupleSet::empty(outs.universe());
        Self { ins, outs }
    }

    /// `(W ∪ ins) ∖ outs`.
    pub fn push(&self, world: &TupleSet) -> TupleSet {
        let mut w = world.clone();
        w.union_with(&self.ins);
        w.difference_with(&self.outs);
        w
    }
}

/// The intervened space together with what produced it.
#[derive(Debug, Clone)]
pub struct IntervenedSpace {
    pub intervention: Intervention,
    pub space: Pdb,
}

/// Materializes the intervened distribution in the base's representation.
pub fn intervene(pdb: &Pdb, iv: &Intervention) -> Result<IntervenedSpace> {
    let r = iv.resolve(pdb.instance())?;
    Ok(IntervenedSpace {
        intervention: iv.clone(),
        space: intervene_resolved(pdb, &r)?,
    })
}

pub(crate) fn intervene_resolved(pdb: &Pdb, r: &Resolved) -> Result<Pdb> {
    match pdb.representation() {
        Representation::Explicit(ew) => Ok(Pdb::explicit_raw(
            pdb.shared_instance(),
            ew.worlds().iter().filter(|w| !w.mass.is_zero()).map(|w| (r.push(&w.world), w.mass.clone())),
        )),
        Representation::Independent(m) => {
            let mut m = m.clone();
            for i in r.ins.iter() {
                m[i] = Some(Probability::one());
            }
            for i in r.outs.iter() {
                m[i] = Some(Probability::zero());
            }
            Ok(pdb.with_representation(Representation::Independent(m)))
        }
    }
}

/// `Σ_W p(W)·Q[push(W)]` over the base worlds.
pub fn intervened_expectation_direct(pdb: &Pdb, query: &dyn WorldQuery, r: &Resolved) -> Result<Rational> {
    let mut total = Rational::zero();
    pdb.for_each_world(|w, m| {
        let v = query.eval(&r.push(w));
        if !v.is_zero() {
            total += m * v;
        }
    })?;
    Ok(total)
}

/// `P(Q = v | do(..))` by the direct sum over base worlds.
pub fn intervened_query_value(pdb: &Pdb, query: &Query, iv: &Intervention, value: bool) -> Result<Rational> {
    if !query.is_boolean() {
        return Err(Error::QueryForm("query values are defined for Boolean queries; use the expectation".into()));
    }
    let r = iv.resolve(pdb.instance())?;
    let compiled = CompiledQuery::new(query, pdb.instance())?;
    let p_true = intervened_expectation_direct(pdb, &compiled, &r)?;
    Ok(if value { p_true } else { Rational::one() - p_true })
}

/// `E(Q | do(..))`, evaluated on the materialized intervened space so the
/// lifted and closed-form backends apply.
pub fn intervened_expectation(pdb: &Pdb, query: &Query, iv: &Intervention, backend: Backend) -> Result<Evaluation> {
    let space = intervene(pdb, iv)?.space;
    expected_value(&space, query, backend)
}
