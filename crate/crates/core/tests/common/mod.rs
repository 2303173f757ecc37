//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use ces_core::exact::{ratio, Probability};
use ces_core::pdb::{Instance, Pdb, RelationSchema, Schema, TupleKind, TupleRecord, TupleSet, Value};
use ces_core::query::{is_hierarchical, Atom, Cq, Query, Term};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directory holding the bundled PDB documents and queries.
pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/examples")
}

pub fn corpus_file(name: &str) -> String {
    let path = corpus_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const PREDICATES: [(&str, usize); 4] = [("A", 1), ("B", 2), ("C", 2), ("D", 1)];
const CONSTANTS: [&str; 3] = ["a", "b", "c"];
const VARIABLES: [&str; 3] = ["X", "Y", "Z"];

pub fn schema() -> Schema {
    PREDICATES
        .iter()
        .map(|&(p, k)| (p.to_string(), RelationSchema::untyped(k)))
        .collect()
}

/// Up to `n` distinct random facts, each exogenous with probability `p_exo`.
pub fn instance(rng: &mut Rng8, n: usize, p_exo: f64) -> Instance {
    let mut facts: Vec<(&str, Vec<&str>)> = Vec::new();
    for _ in 0..n * 4 {
        if facts.len() == n {
            break;
        }
        let (p, k) = *PREDICATES.choose(rng).unwrap();
        let args: Vec<&str> = (0..k).map(|_| *CONSTANTS.choose(rng).unwrap()).collect();
        if !facts.iter().any(|(q, a)| *q == p && *a == args) {
            facts.push((p, args));
        }
    }
    let tuples = facts
        .into_iter()
        .enumerate()
        .map(|(i, (p, args))| {
            let kind = if rng.gen_bool(p_exo) { TupleKind::Exogenous } else { TupleKind::Endogenous };
            TupleRecord::new(&format!("t{}", i + 1), p, args.into_iter().map(Value::sym).collect(), kind)
        })
        .collect();
    Instance::new(schema(), tuples).unwrap()
}

fn marginal(rng: &mut Rng8) -> Probability {
    let choices = [(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1)];
    let (n, d) = *choices.choose(rng).unwrap();
    Probability::new(ratio(n, d)).unwrap()
}

pub fn tid(rng: &mut Rng8, inst: Instance) -> Pdb {
    let m = (0..inst.len())
        .map(|i| Some(if inst.is_exogenous(i) { Probability::one() } else { marginal(rng) }))
        .collect();
    Pdb::independent(inst, m)
}

/// Explicit worlds with random integer weights; every world keeps the
/// exogenous tuples.
pub fn explicit(rng: &mut Rng8, inst: Instance) -> Pdb {
    let endo = inst.endogenous().to_vec();
    let k = rng.gen_range(1..=6usize.min(1 << endo.len()));
    let picks: Vec<(TupleSet, i64)> = (0..k)
        .map(|_| {
            let mut w = inst.exogenous().clone();
            for &t in &endo {
                if rng.gen_bool(0.5) {
                    w.insert(t);
                }
            }
            (w, rng.gen_range(1..=5))
        })
        .collect();
    let total: i64 = picks.iter().map(|(_, c)| c).sum();
    let worlds = picks
        .into_iter()
        .map(|(w, c)| (w, Probability::new(ratio(c, total)).unwrap()))
        .collect();
    Pdb::explicit(Arc::new(inst), worlds)
}

fn term(rng: &mut Rng8, p_const: f64) -> Term {
    if rng.gen_bool(p_const) {
        Term::sym(CONSTANTS.choose(rng).unwrap())
    } else {
        Term::var(VARIABLES.choose(rng).unwrap())
    }
}

fn atom(rng: &mut Rng8, pred: (&str, usize), p_const: f64) -> Atom {
    Atom::new(pred.0, (0..pred.1).map(|_| term(rng, p_const)).collect())
}

/// A BCQ of 1..=3 atoms; self-joins allowed.
pub fn cq(rng: &mut Rng8) -> Cq {
    let n = rng.gen_range(1..=3);
    Cq::new(
        (0..n)
            .map(|_| {
                let p = *PREDICATES.choose(rng).unwrap();
                atom(rng, p, 0.25)
            })
            .collect(),
    )
}

/// A self-join-free BCQ of 1..=4 atoms.
pub fn sjf_cq(rng: &mut Rng8) -> Cq {
    let n = rng.gen_range(1..=PREDICATES.len());
    let preds: Vec<_> = PREDICATES.choose_multiple(rng, n).copied().collect();
    Cq::new(preds.into_iter().map(|p| atom(rng, p, 0.2)).collect())
}

/// Rejection-samples a hierarchical self-join-free BCQ.
pub fn hierarchical_cq(rng: &mut Rng8) -> Cq {
    loop {
        let q = sjf_cq(rng);
        if is_hierarchical(&q) {
            return q;
        }
    }
}

/// A BCQ or a union of two or three BCQs.
pub fn boolean_query(rng: &mut Rng8) -> Query {
    if rng.gen_bool(0.5) {
        Query::Bcq(cq(rng))
    } else {
        let n = rng.gen_range(2..=3);
        Query::Ubcq((0..n).map(|_| cq(rng)).collect())
    }
}
