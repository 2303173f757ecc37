//! Query probabilities and expectations over possible-world spaces.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::analysis::{components, hierarchy_violation, is_self_join_free};
use super::ast::{Atom, Cq, Query, Term};
use super::eval::{value_matches, CompiledQuery, WorldQuery};
use crate::error::{Error, Result};
use crate::exact::Rational;
use crate::pdb::{Pdb, TupleSet, Value};

/// Largest instance for the exhaustive monotonicity check.
pub const MONOTONE_CHECK_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Lifted or closed form when applicable, brute force otherwise.
    #[default]
    Auto,
    Brute,
    Lifted,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "brute" => Ok(Backend::Brute),
            "lifted" => Ok(Backend::Lifted),
            other => Err(Error::Document(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UsedBackend {
    Brute,
    Lifted,
    ClosedForm,
}

impl std::fmt::Display for UsedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UsedBackend::Brute => "brute",
            UsedBackend::Lifted => "lifted",
            UsedBackend::ClosedForm => "closed-form",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub value: Rational,
    pub backend: UsedBackend,
}

/// `Σ_W p(W)·Q[W]` by enumeration.
pub fn brute_expectation(pdb: &Pdb, query: &dyn WorldQuery) -> Result<Rational> {
    let mut total = Rational::zero();
    pdb.for_each_world(|w, m| {
        let v = query.eval(w);
        if !v.is_zero() {
            total += m * v;
        }
    })?;
    Ok(total)
}

fn lifted_applies(pdb: &Pdb, query: &Query) -> bool {
    pdb.is_tuple_independent()
        && query
            .as_bcq()
            .is_some_and(|cq| is_self_join_free(cq) && hierarchy_violation(cq).is_none())
}

/// `P(Q)` for a Boolean query.
pub fn query_probability(pdb: &Pdb, query: &Query, backend: Backend) -> Result<Evaluation> {
    if !query.is_boolean() {
        return Err(Error::QueryForm("probability needs a Boolean query; use the expectation".into()));
    }
    query.check(pdb.instance().schema())?;
    let use_lifted = match backend {
        Backend::Auto => lifted_applies(pdb, query),
        Backend::Brute => false,
        Backend::Lifted => true,
    };
    if use_lifted {
        let cq = query
            .as_bcq()
            .ok_or_else(|| Error::QueryForm("the lifted backend handles single conjunctive queries only".into()))?;
        return Ok(Evaluation {
            value: lifted_probability(pdb, cq)?,
            backend: UsedBackend::Lifted,
        });
    }
    let compiled = CompiledQuery::new(query, pdb.instance())?;
    Ok(Evaluation {
        value: brute_expectation(pdb, &compiled)?,
        backend: UsedBackend::Brute,
    })
}

/// `E(Q)`: the probability for Boolean queries, the expected aggregate value
/// otherwise.
pub fn expected_value(pdb: &Pdb, query: &Query, backend: Backend) -> Result<Evaluation> {
    if query.is_boolean() {
        return query_probability(pdb, query, backend);
    }
    let compiled = CompiledQuery::new(query, pdb.instance())?;
    let closed = match backend {
        Backend::Auto => pdb.is_tuple_independent(),
        Backend::Brute => false,
        Backend::Lifted => {
            if !pdb.is_tuple_independent() {
                return Err(Error::NotTupleIndependent);
            }
            true
        }
    };
    if closed {
        Ok(Evaluation {
            value: closed_form_expectation(pdb, &compiled)?,
            backend: UsedBackend::ClosedForm,
        })
    } else {
        Ok(Evaluation {
            value: brute_expectation(pdb, &compiled)?,
            backend: UsedBackend::Brute,
        })
    }
}

fn set_probability(pdb: &Pdb, set: &TupleSet) -> Result<Rational> {
    let mut p = Rational::one();
    for i in set.iter() {
        p *= pdb.marginal(i)?.value();
    }
    Ok(p)
}

/// Linearity of expectation over aggregate groups on a TID. Each group
/// contributes its value times the probability that one of its images is
/// present, by inclusion-exclusion over the images.
fn closed_form_expectation(pdb: &Pdb, compiled: &CompiledQuery) -> Result<Rational> {
    let mut total = Rational::zero();
    for (value, images) in compiled.groups() {
        let k = images.len();
        pdb.instance().limits().check(k)?;
        let mut p = Rational::zero();
        for mask in 1u64..(1u64 << k) {
            let mut union = pdb.instance().empty_set();
            for (j, img) in images.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    union.union_with(img);
                }
            }
            let term = set_probability(pdb, &union)?;
            if mask.count_ones() % 2 == 1 {
                p += term;
            } else {
                p -= term;
            }
        }
        total += value * p;
    }
    Ok(total)
}

/// The lifted evaluator for self-join-free hierarchical BCQs on TIDs.
pub fn lifted_probability(pdb: &Pdb, cq: &Cq) -> Result<Rational> {
    if !pdb.is_tuple_independent() {
        return Err(Error::NotTupleIndependent);
    }
    if !is_self_join_free(cq) {
        return Err(Error::Dichotomy("query has a self-join".into()));
    }
    if let Some((x, y)) = hierarchy_violation(cq) {
        return Err(Error::Dichotomy(format!(
            "query is not hierarchical: atoms of {x} and {y} overlap without nesting"
        )));
    }
    lifted(pdb, cq)
}

fn lifted(pdb: &Pdb, cq: &Cq) -> Result<Rational> {
    if cq.atoms.is_empty() {
        return Ok(Rational::one());
    }
    let parts = components(cq);
    if parts.len() > 1 {
        let mut p = Rational::one();
        for comp in &parts.components {
            let sub = Cq::new(comp.iter().map(|&i| cq.atoms[i].clone()).collect());
            p *= lifted(pdb, &sub)?;
            if p.is_zero() {
                break;
            }
        }
        return Ok(p);
    }
    if cq.atoms.len() == 1 && cq.atoms[0].is_ground() {
        return ground_atom_probability(pdb, &cq.atoms[0]);
    }
    let root = cq
        .variables()
        .into_iter()
        .find(|v| cq.atoms.iter().all(|a| a.variables().any(|w| w == v)))
        .ok_or_else(|| Error::Dichotomy("connected component without a root variable".into()))?;
    let mut none = Rational::one();
    for a in root_candidates(pdb, cq, &root) {
        let sub = substitute(cq, &root, &a);
        none *= Rational::one() - lifted(pdb, &sub)?;
        if none.is_zero() {
            break;
        }
    }
    Ok(Rational::one() - none)
}

fn ground_atom_probability(pdb: &Pdb, atom: &Atom) -> Result<Rational> {
    let inst = pdb.instance();
    let mut none = Rational::one();
    for &t in inst.tuples_of(&atom.predicate) {
        let args = &inst.tuple(t).args;
        let matches = args.len() == atom.terms.len()
            && atom.terms.iter().zip(args).all(|(term, arg)| match term {
                Term::Const(c) => value_matches(c, arg),
                Term::Var(_) => false,
            });
        if matches {
            none *= pdb.marginal(t)?.complement().value();
        }
    }
    Ok(Rational::one() - none)
}

/// Values the root can take: those stored at its positions in the first atom.
fn root_candidates(pdb: &Pdb, cq: &Cq, root: &str) -> BTreeSet<Value> {
    let inst = pdb.instance();
    let atom = &cq.atoms[0];
    let pos = atom.terms.iter().position(|t| t.as_var() == Some(root)).expect("root occurs in every atom");
    inst.tuples_of(&atom.predicate)
        .iter()
        .filter_map(|&t| inst.tuple(t).args.get(pos).cloned())
        .collect()
}

fn substitute(cq: &Cq, var: &str, value: &Value) -> Cq {
    Cq::new(
        cq.atoms
            .iter()
            .map(|a| {
                Atom::new(
                    &a.predicate,
                    a.terms
                        .iter()
                        .map(|t| match t {
                            Term::Var(v) if v == var => Term::Const(value.clone()),
                            other => other.clone(),
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Whether `Q[W] ≤ Q[W ∪ {τ}]` for all worlds of the instance. Boolean
/// queries, counts and sums over non-negative values are monotone by form;
/// sums that can see a negative value are checked exhaustively on small
/// instances.
pub fn is_monotone_check(query: &Query, pdb: &Pdb) -> Result<bool> {
    let inst = pdb.instance();
    let compiled = CompiledQuery::new(query, inst)?;
    if compiled.is_boolean() || compiled.groups().iter().all(|(v, _)| !v.is_negative()) {
        return Ok(true);
    }
    let relevant: Vec<usize> = compiled.relevant_tuples(inst.len()).iter().collect();
    if relevant.len() > MONOTONE_CHECK_CAP {
        return Err(Error::CapExceeded {
            cap: MONOTONE_CHECK_CAP,
            needed: relevant.len(),
        });
    }
    for mask in 0u64..(1u64 << relevant.len()) {
        let w = TupleSet::from_indices(inst.len(), relevant.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &t)| t));
        let here = compiled.eval(&w);
        for (j, &t) in relevant.iter().enumerate() {
            if mask >> j & 1 == 0 {
                let mut bigger = w.clone();
                bigger.insert(t);
                if compiled.eval(&bigger) < here {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
