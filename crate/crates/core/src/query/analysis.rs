//! Structural analysis of conjunctive queries: self-joins, the hierarchy
//! test, and variable-connected components.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::Cq;

pub fn is_self_join_free(cq: &Cq) -> bool {
    let mut seen = BTreeSet::new();
    cq.atoms.iter().all(|a| seen.insert(a.predicate.as_str()))
}

/// The first variable pair whose atom sets overlap without nesting.
pub fn hierarchy_violation(cq: &Cq) -> Option<(String, String)> {
    let vars = cq.variables();
    let sets: Vec<BTreeSet<usize>> = vars.iter().map(|v| cq.atoms_of(v)).collect();
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            let (a, b) = (&sets[i], &sets[j]);
            if !(a.is_subset(b) || b.is_subset(a) || a.is_disjoint(b)) {
                return Some((vars[i].clone(), vars[j].clone()));
            }
        }
    }
    None
}

pub fn is_hierarchical(cq: &Cq) -> bool {
    hierarchy_violation(cq).is_none()
}

/// Connected components of the variable-sharing graph over atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentPartition {
    /// Atom indices per component, each sorted, components ordered by their
    /// first atom.
    pub components: Vec<Vec<usize>>,
}

impl ComponentPartition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

pub fn components(cq: &Cq) -> ComponentPartition {
    let n = cq.atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, atom) in cq.atoms.iter().enumerate() {
        for v in atom.variables() {
            match owner.get(v) {
                Some(&j) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
                None => {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut components: Vec<Vec<usize>> = groups.into_values().collect();
    components.sort_by_key(|c| c[0]);
    ComponentPartition { components }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PTIME")]
    Ptime,
    #[serde(rename = "#P-hard")]
    SharpPHard,
    #[serde(rename = "out of dichotomy scope (self-join)")]
    SelfJoin,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Ptime => "PTIME",
            Verdict::SharpPHard => "#P-hard",
            Verdict::SelfJoin => "out of dichotomy scope (self-join)",
        })
    }
}

/// Classification of a BCQ against the evaluation dichotomy on TIDs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub self_join_free: bool,
    pub hierarchical: bool,
    /// Atom indices mentioning each variable.
    pub atoms_by_variable: BTreeMap<String, Vec<usize>>,
    pub components: ComponentPartition,
    pub violation: Option<(String, String)>,
    pub verdict: Verdict,
}

pub fn classify(cq: &Cq) -> Classification {
    let self_join_free = is_self_join_free(cq);
    let violation = hierarchy_violation(cq);
    let verdict = match (self_join_free, &violation) {
        (false, _) => Verdict::SelfJoin,
        (true, None) => Verdict::Ptime,
        (true, Some(_)) => Verdict::SharpPHard,
    };
    Classification {
        self_join_free,
        hierarchical: violation.is_none(),
        atoms_by_variable: cq
            .variables()
            .into_iter()
            .map(|v| {
                let atoms = cq.atoms_of(&v).into_iter().collect();
                (v, atoms)
            })
            .collect(),
        components: components(cq),
        violation,
        verdict,
    }
}
