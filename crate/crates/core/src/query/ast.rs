use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::pdb::{Schema, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn sym(name: &str) -> Self {
        Term::Const(Value::sym(name))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(Value::Sym(s)) if is_bare_constant(s) => f.write_str(s),
            Term::Const(Value::Sym(s)) => write!(f, "{s:?}"),
            Term::Const(v) => write!(f, "{v}"),
        }
    }
}

fn is_bare_constant(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, terms: Vec<Term>) -> Self {
        Self {
            predicate: predicate.to_string(),
            terms,
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(Term::as_var)
    }

    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Const(_)))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        write!(f, "{}({})", self.predicate, terms.join(","))
    }
}

/// A conjunction of atoms, all variables existentially closed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cq {
    pub atoms: Vec<Atom>,
}

impl Cq {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    /// Variables in order of first occurrence.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.atoms.iter().flat_map(Atom::variables) {
            if seen.insert(v) {
                out.push(v.to_string());
            }
        }
        out
    }

    /// Indices of the atoms mentioning `var`.
    pub fn atoms_of(&self, var: &str) -> BTreeSet<usize> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.variables().any(|v| v == var))
            .map(|(i, _)| i)
            .collect()
    }

    fn check(&self, schema: &Schema) -> Result<()> {
        for atom in &self.atoms {
            let rel = schema
                .get(&atom.predicate)
                .ok_or_else(|| Error::UnknownPredicate(atom.predicate.clone()))?;
            if rel.arity != atom.terms.len() {
                return Err(Error::Arity {
                    predicate: atom.predicate.clone(),
                    expected: rel.arity,
                    found: atom.terms.len(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        f.write_str(&atoms.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateOp {
    Sum,
    Count,
}

/// A monotone query: a Boolean CQ, a union of Boolean CQs, or a scalar
/// aggregate over a CQ body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Query {
    Bcq(Cq),
    Ubcq(Vec<Cq>),
    Aggregate {
        op: AggregateOp,
        /// The summed variable; `None` for `count()`.
        target: Option<String>,
        body: Cq,
    },
}

impl Query {
    pub fn is_boolean(&self) -> bool {
        !matches!(self, Query::Aggregate { .. })
    }

    /// The conjunctive bodies: one for a BCQ or aggregate, one per disjunct
    /// for a UBCQ.
    pub fn bodies(&self) -> Vec<&Cq> {
        match self {
            Query::Bcq(cq) => vec![cq],
            Query::Ubcq(ds) => ds.iter().collect(),
            Query::Aggregate { body, .. } => vec![body],
        }
    }

    pub fn as_bcq(&self) -> Option<&Cq> {
        match self {
            Query::Bcq(cq) => Some(cq),
            _ => None,
        }
    }

    /// Checks predicates and arities against a schema.
    pub fn check(&self, schema: &Schema) -> Result<()> {
        self.bodies().into_iter().try_for_each(|cq| cq.check(schema))
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Bcq(cq) => write!(f, "Q() :- {cq}"),
            Query::Ubcq(ds) => {
                let parts: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
                write!(f, "Q() :- {}", parts.join(" ; "))
            }
            Query::Aggregate { op: AggregateOp::Sum, target, body } => {
                write!(f, "Q(sum({})) :- {body}", target.as_deref().unwrap_or(""))
            }
            Query::Aggregate { op: AggregateOp::Count, body, .. } => write!(f, "Q(count()) :- {body}"),
        }
    }
}
