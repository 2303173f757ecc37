//! Axiom checks for tuple score functions over monotone Boolean queries,
//! plus the fresh-expansion product identity and the minimal-set
//! decomposition.

use std::sync::Arc;

use num_traits::{One, Zero};
use serde_json::{json, Value as Json};

use crate::error::{Error, Result};
use crate::exact::{pow2, ExactValue, Probability, Rational};
use crate::pdb::{make_uniform_tid, Instance, Pdb, RelationSchema, TupleId, TupleKind, TupleRecord, TupleSet, Value};
use crate::query::{
    components, eval_boolean, query_probability, Backend, CompiledQuery, Conjunction, Cq, Disjunction, Query,
    QueryOfSet, Term, WorldQuery,
};
use crate::scores::{causal_effect, delta, gces_direct, power_of_tuple, weighted_power};

/// Largest endogenous set for the exhaustive symmetry hypotheses.
pub const SYM_CAP: usize = 20;
/// Largest instance for the exhaustive decomposition check.
pub const DECOMPOSITION_CAP: usize = 12;

/// A single-tuple score `ψ_τ(Q)`.
pub trait ScoreFunction: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, pdb: &Pdb, query: &dyn WorldQuery, tau: usize) -> Result<Rational>;
}

/// The generalized causal effect under the PDB's own distribution.
pub struct GcesScore;

impl ScoreFunction for GcesScore {
    fn name(&self) -> &str {
        "gces"
    }

    fn score(&self, pdb: &Pdb, query: &dyn WorldQuery, tau: usize) -> Result<Rational> {
        gces_direct(pdb, query, &TupleSet::from_indices(pdb.instance().len(), [tau]))
    }
}

/// The causal effect on the uniform-½ TID, ignoring the PDB's distribution.
pub struct CesUiScore;

impl ScoreFunction for CesUiScore {
    fn name(&self) -> &str {
        "ces-ui"
    }

    fn score(&self, pdb: &Pdb, query: &dyn WorldQuery, tau: usize) -> Result<Rational> {
        let uniform = make_uniform_tid(pdb.shared_instance());
        gces_direct(&uniform, query, &TupleSet::from_indices(pdb.instance().len(), [tau]))
    }
}

pub struct BanzhafScore;

impl ScoreFunction for BanzhafScore {
    fn name(&self) -> &str {
        "banzhaf"
    }

    fn score(&self, pdb: &Pdb, query: &dyn WorldQuery, tau: usize) -> Result<Rational> {
        let inst = pdb.instance();
        crate::scores::banzhaf(inst, query, inst.tid(tau))
    }
}

pub struct ShapleyScore;

impl ScoreFunction for ShapleyScore {
    fn name(&self) -> &str {
        "shapley"
    }

    fn score(&self, pdb: &Pdb, query: &dyn WorldQuery, tau: usize) -> Result<Rational> {
        let inst = pdb.instance();
        crate::scores::shapley(inst, query, inst.tid(tau))
    }
}

/// The same value for every tuple and query.
pub struct ConstantScore(pub Rational);

impl ScoreFunction for ConstantScore {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, _: &Pdb, _: &dyn WorldQuery, _: usize) -> Result<Rational> {
        Ok(self.0.clone())
    }
}

pub fn score_function(name: &str) -> Result<Box<dyn ScoreFunction>> {
    match name {
        "gces" => Ok(Box::new(GcesScore)),
        "ces-ui" => Ok(Box::new(CesUiScore)),
        "banzhaf" => Ok(Box::new(BanzhafScore)),
        "shapley" => Ok(Box::new(ShapleyScore)),
        other => Err(Error::Document(format!("unknown score function `{other}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axiom {
    Dum,
    Eff,
    Sym,
    Lin,
    GEff,
    GSym,
}

impl Axiom {
    pub fn name(self) -> &'static str {
        match self {
            Axiom::Dum => "DUM",
            Axiom::Eff => "EFF",
            Axiom::Sym => "SYM",
            Axiom::Lin => "LIN",
            Axiom::GEff => "G-EFF",
            Axiom::GSym => "G-SYM",
        }
    }
}

impl std::fmt::Display for Axiom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub tuples: Vec<TupleId>,
    pub description: String,
    pub lhs: Rational,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomVerdict {
    pub axiom: Axiom,
    pub holds: bool,
    pub witnesses: Vec<Witness>,
}

impl AxiomVerdict {
    fn from_witnesses(axiom: Axiom, witnesses: Vec<Witness>) -> Self {
        Self {
            axiom,
            holds: witnesses.is_empty(),
            witnesses,
        }
    }

    pub fn to_json(&self) -> Json {
        let witnesses: Vec<Json> = self
            .witnesses
            .iter()
            .map(|w| {
                json!({
                    "tuples": w.tuples,
                    "description": w.description,
                    "lhs": ExactValue::from(&w.lhs),
                    "rhs": ExactValue::from(&w.rhs),
                })
            })
            .collect();
        json!({ "axiom": self.axiom.name(), "holds": self.holds, "witnesses": witnesses })
    }
}

fn all_scores(pdb: &Pdb, query: &dyn WorldQuery, f: &dyn ScoreFunction) -> Result<Vec<(usize, Rational)>> {
    pdb.instance()
        .endogenous()
        .iter()
        .map(|&t| Ok((t, f.score(pdb, query, t)?)))
        .collect()
}

/// Every `W ⊆ D_en ∖ excluded`, as endogenous-only sets.
fn subsets_avoiding(inst: &Instance, excluded: &[usize], cap: usize) -> Result<Vec<TupleSet>> {
    let rest: Vec<usize> = inst.endogenous().iter().copied().filter(|t| !excluded.contains(t)).collect();
    if rest.len() + excluded.len() > cap {
        return Err(Error::CapExceeded {
            cap,
            needed: rest.len() + excluded.len(),
        });
    }
    Ok((0u64..(1u64 << rest.len()))
        .map(|mask| TupleSet::from_indices(inst.len(), rest.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &t)| t)))
        .collect())
}

/// Dummy tuples (power 0) must score 0.
pub fn check_dum(pdb: &Pdb, query: &dyn WorldQuery, f: &dyn ScoreFunction) -> Result<AxiomVerdict> {
    let inst = pdb.instance();
    let mut witnesses = Vec::new();
    for &t in inst.endogenous() {
        if power_of_tuple(inst, query, inst.tid(t))?.is_zero() {
            let s = f.score(pdb, query, t)?;
            if !s.is_zero() {
                witnesses.push(Witness {
                    tuples: vec![inst.tid(t).clone()],
                    description: format!("dummy tuple {} scores {}", inst.tid(t), s),
                    lhs: s,
                    rhs: Rational::zero(),
                });
            }
        }
    }
    Ok(AxiomVerdict::from_witnesses(Axiom::Dum, witnesses))
}

/// `Σ_τ ψ_τ(Q) = Power(Q) / 2^{N−1}`.
pub fn check_eff(pdb: &Pdb, query: &dyn WorldQuery, f: &dyn ScoreFunction) -> Result<AxiomVerdict> {
    let inst = pdb.instance();
    let n = inst.endogenous().len();
    if n == 0 {
        return Ok(AxiomVerdict::from_witnesses(Axiom::Eff, vec![]));
    }
    let lhs: Rational = all_scores(pdb, query, f)?.into_iter().map(|(_, s)| s).sum();
    let rhs = crate::scores::total_power(inst, query)? / pow2(n - 1);
    Ok(AxiomVerdict::from_witnesses(Axiom::Eff, sum_witness("sum of scores vs total power / 2^(N-1)", lhs, rhs)))
}

fn sum_witness(description: &str, lhs: Rational, rhs: Rational) -> Vec<Witness> {
    if lhs == rhs {
        vec![]
    } else {
        vec![Witness {
            tuples: vec![],
            description: description.to_string(),
            lhs,
            rhs,
        }]
    }
}

fn world_with_exogenous(inst: &Instance, w: &TupleSet, extra: Option<usize>) -> TupleSet {
    let mut full = w.clone();
    full.union_with(inst.exogenous());
    if let Some(t) = extra {
        full.insert(t);
    }
    full
}

fn pairs(inst: &Instance) -> Vec<(usize, usize)> {
    let en = inst.endogenous();
    let mut out = Vec::new();
    for i in 0..en.len() {
        for j in i + 1..en.len() {
            out.push((en[i], en[j]));
        }
    }
    out
}

fn pair_witness(inst: &Instance, a: usize, b: usize, what: &str, lhs: Rational, rhs: Rational) -> Witness {
    Witness {
        tuples: vec![inst.tid(a).clone(), inst.tid(b).clone()],
        description: format!("{what} for ({}, {})", inst.tid(a), inst.tid(b)),
        lhs,
        rhs,
    }
}

/// Interchangeable tuples must score equally.
pub fn check_sym(pdb: &Pdb, query: &dyn WorldQuery, f: &dyn ScoreFunction) -> Result<AxiomVerdict> {
    let inst = pdb.instance();
    let mut witnesses = Vec::new();
    for (a, b) in pairs(inst) {
        let symmetric = subsets_avoiding(inst, &[a, b], SYM_CAP)?.iter().all(|w| {
            query.eval(&world_with_exogenous(inst, w, Some(a))) == query.eval(&world_with_exogenous(inst, w, Some(b)))
        });
        if symmetric {
            let (sa, sb) = (f.score(pdb, query, a)?, f.score(pdb, query, b)?);
            if sa != sb {
                witnesses.push(pair_witness(inst, a, b, "symmetric tuples score differently", sa, sb));
            }
        }
    }
    Ok(AxiomVerdict::from_witnesses(Axiom::Sym, witnesses))
}

/// `ψ(Q ∨ Q′) + ψ(Q ∧ Q′) = ψ(Q) + ψ(Q′)` tuple by tuple.
pub fn check_lin(pdb: &Pdb, qa: Arc<dyn WorldQuery>, qb: Arc<dyn WorldQuery>, f: &dyn ScoreFunction) -> Result<AxiomVerdict> {
    let inst = pdb.instance();
    let or = Disjunction(vec![qa.clone(), qb.clone()]);
    let and = Conjunction(vec![qa.clone(), qb.clone()]);
    let mut witnesses = Vec::new();
    for &t in inst.endogenous() {
        let lhs = f.score(pdb, &or, t)? + f.score(pdb, &and, t)?;
        let rhs = f.score(pdb, qa.as_ref(), t)? + f.score(pdb, qb.as_ref(), t)?;
        if lhs != rhs {
            witnesses.push(Witness {
                tuples: vec![inst.tid(t).clone()],
                description: format!("psi(Q or Q') + psi(Q and Q') vs psi(Q) + psi(Q') at {}", inst.tid(t)),
                lhs,
                rhs,
            });
        }
    }
    Ok(AxiomVerdict::from_witnesses(Axiom::Lin, witnesses))
}

/// `Σ_τ ψ_τ(Q) = Σ_{W ⊊ D_en} Σ_{τ ∉ W} Δ(Q,W,τ)·(p(W ∪ D_ex) + p(W ∪ D_ex ∪ {τ}))`.
pub fn check_g_eff(pdb: &Pdb, query: &dyn WorldQuery, f: &dyn ScoreFunction) -> Result<AxiomVerdict> {
    let inst = pdb.instance();
    let lhs: Rational = all_scores(pdb, query, f)?.into_iter().map(|(_, s)| s).sum();
    let mut rhs = Rational::zero();
    for w in subsets_avoiding(inst, &[], inst.limits().max_endogenous)? {
        for &t in inst.endogenous() {
            if w.contains(t) {
                continue;
            }
            let d = delta(query, inst, &w, t);
            if !d.is_zero() {
                let p0 = pdb.world_probability(&world_with_exogenous(inst, &w, None))?;
                let p1 = pdb.world_probability(&world_with_exogenous(inst, &w, Some(t)))?;
                rhs += d * (p0 + p1);
            }
        }
    }
    Ok(AxiomVerdict::from_witnesses(Axiom::GEff, sum_witness("sum of scores vs distribution-weighted swing total", lhs, rhs)))
}

/// Tuples that never swing alone (`Δ = 0` on every `W ⊆ D_en ∖ {τ,τ′}`)
/// must have equal `ψ − Power^w`.
pub fn check_g_sym(pdb: &Pdb, query: &dyn WorldQuery, f: &dyn ScoreFunction) -> Result<AxiomVerdict> {
    let inst = pdb.instance();
    let mut witnesses = Vec::new();
    for (a, b) in pairs(inst) {
        let idle = subsets_avoiding(inst, &[a, b], SYM_CAP)?
            .iter()
            .all(|w| delta(query, inst, w, a).is_zero() && delta(query, inst, w, b).is_zero());
        if idle {
            let la = f.score(pdb, query, a)? - weighted_power(pdb, query, inst.tid(a))?;
            let lb = f.score(pdb, query, b)? - weighted_power(pdb, query, inst.tid(b))?;
            if la != lb {
                witnesses.push(pair_witness(inst, a, b, "score minus weighted power differs", la, lb));
            }
        }
    }
    Ok(AxiomVerdict::from_witnesses(Axiom::GSym, witnesses))
}

/// DUM, EFF, SYM, G-EFF, G-SYM, and LIN when a second query is given.
pub fn check_all(pdb: &Pdb, query: Arc<dyn WorldQuery>, other: Option<Arc<dyn WorldQuery>>, f: &dyn ScoreFunction) -> Result<Vec<AxiomVerdict>> {
    let q = query.as_ref();
    let mut out = vec![
        check_dum(pdb, q, f)?,
        check_eff(pdb, q, f)?,
        check_sym(pdb, q, f)?,
    ];
    if let Some(o) = other {
        out.push(check_lin(pdb, query.clone(), o, f)?);
    }
    out.push(check_g_eff(pdb, q, f)?);
    out.push(check_g_sym(pdb, q, f)?);
    Ok(out)
}

/// An instance extended with one fresh tuple per query atom.
#[derive(Debug, Clone)]
pub struct FreshExpansion {
    pub expanded: Instance,
    /// Fresh tuple id per atom, in atom order.
    pub fresh: Vec<TupleId>,
    /// Atom indices per query component.
    pub components: Vec<Vec<usize>>,
    /// Each selection function as one atom index per component.
    pub selections: Vec<Vec<usize>>,
}

fn fresh_name(prefix: &str, k: usize, taken: &dyn Fn(&str) -> bool) -> String {
    let mut name = format!("{prefix}{k}");
    while taken(&name) {
        name.insert(0, '_');
    }
    name
}

/// Replaces every variable by a fresh constant `_f1, _f2, …` (numbered by
/// first occurrence) and adds one marginal-1 endogenous tuple per atom.
pub fn fresh_expansion(inst: &Instance, cq: &Cq) -> Result<FreshExpansion> {
    let adom = inst.active_domain();
    let vars = cq.variables();
    let constants: Vec<Value> = (1..=vars.len())
        .map(|k| Value::sym(fresh_name("_f", k, &|n| adom.contains(&Value::sym(n)))))
        .collect();
    let mut schema = inst.schema().clone();
    let mut tuples = inst.tuples().to_vec();
    let mut fresh = Vec::new();
    for (i, atom) in cq.atoms.iter().enumerate() {
        let rel = schema
            .get(&atom.predicate)
            .ok_or_else(|| Error::UnknownPredicate(atom.predicate.clone()))?;
        // Fresh symbols may land in numeric columns.
        schema.insert(atom.predicate.clone(), RelationSchema::untyped(rel.arity));
        let args = atom
            .terms
            .iter()
            .map(|t| match t {
                Term::Var(v) => constants[vars.iter().position(|w| w == v).unwrap()].clone(),
                Term::Const(c) => c.clone(),
            })
            .collect();
        let tid = fresh_name("_u", i + 1, &|n| inst.index_of(&TupleId::new(n)).is_ok());
        tuples.push(TupleRecord::new(&tid, &atom.predicate, args, TupleKind::Endogenous));
        fresh.push(TupleId::new(tid));
    }
    let expanded = Instance::new(schema, tuples)?.with_limits(inst.limits());
    let comps = components(cq).components;
    let mut selections: Vec<Vec<usize>> = vec![vec![]];
    for comp in &comps {
        selections = selections
            .into_iter()
            .flat_map(|s| {
                comp.iter().map(move |&a| {
                    let mut s = s.clone();
                    s.push(a);
                    s
                })
            })
            .collect();
    }
    Ok(FreshExpansion {
        expanded,
        fresh,
        components: comps,
        selections,
    })
}

/// Both sides of `P(Q) = Π_C (1 − CE(D′, Q, σ(C)))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductReport {
    pub lhs: Rational,
    /// Causal effect of each fresh tuple in the expanded TID, in atom order.
    pub fresh_effects: Vec<(TupleId, Rational)>,
    /// Right-hand side per selection function, keyed by the chosen tuples.
    pub rhs: Vec<(Vec<TupleId>, Rational)>,
}

impl ProductReport {
    pub fn agree(&self) -> bool {
        self.rhs.iter().all(|(_, r)| *r == self.lhs)
    }

    pub fn to_json(&self) -> Json {
        json!({
            "lhs": ExactValue::from(&self.lhs),
            "fresh_effects": self.fresh_effects.iter().map(|(t, v)| json!({"tid": t, "value": ExactValue::from(v)})).collect::<Vec<_>>(),
            "rhs": self.rhs.iter().map(|(s, v)| json!({"selection": s, "value": ExactValue::from(v)})).collect::<Vec<_>>(),
            "agree": self.agree(),
        })
    }
}

/// Checks the component product identity on a TID, computing the left side
/// by enumeration.
pub fn verify_product_formula(pdb: &Pdb, cq: &Cq) -> Result<ProductReport> {
    let Some(marginals) = pdb.marginals() else {
        return Err(Error::NotTupleIndependent);
    };
    let query = Query::Bcq(cq.clone());
    let lhs = query_probability(pdb, &query, Backend::Brute)?.value;
    let fx = fresh_expansion(pdb.instance(), cq)?;
    let exp = &fx.expanded;
    let mut m: Vec<Option<Probability>> = vec![None; exp.len()];
    for (i, p) in marginals.iter().enumerate() {
        m[exp.index_of(pdb.instance().tid(i))?] = p.clone();
    }
    for t in &fx.fresh {
        m[exp.index_of(t)?] = Some(Probability::one());
    }
    let expanded = Pdb::independent(exp.clone(), m);
    let fresh_effects = fx
        .fresh
        .iter()
        .map(|t| Ok((t.clone(), causal_effect(&expanded, &query, std::slice::from_ref(t), Backend::Auto)?.value)))
        .collect::<Result<Vec<_>>>()?;
    let rhs = fx
        .selections
        .iter()
        .map(|sel| {
            let value = sel
                .iter()
                .map(|&a| Rational::one() - &fresh_effects[a].1)
                .product::<Rational>();
            (sel.iter().map(|&a| fx.fresh[a].clone()).collect(), value)
        })
        .collect();
    Ok(ProductReport {
        lhs,
        fresh_effects,
        rhs,
    })
}

/// Outcome of the exhaustive `Q[W] = ⋁_S [S ⊆ W]` check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionCheck {
    pub family_size: usize,
    pub worlds_checked: usize,
    pub counterexample: Option<TupleSet>,
}

impl DecompositionCheck {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

pub fn mss_decomposition_check(inst: &Instance, query: &Query) -> Result<DecompositionCheck> {
    if inst.len() > DECOMPOSITION_CAP {
        return Err(Error::CapExceeded {
            cap: DECOMPOSITION_CAP,
            needed: inst.len(),
        });
    }
    let compiled = CompiledQuery::new(query, inst)?;
    let family = compiled
        .mss()
        .ok_or_else(|| Error::QueryForm("the decomposition applies to Boolean queries".into()))?;
    let parts: Vec<Arc<dyn WorldQuery>> = family.sets.iter().map(|s| Arc::new(QueryOfSet(s.clone())) as Arc<dyn WorldQuery>).collect();
    let decomposed = Disjunction(parts);
    let all: Vec<usize> = (0..inst.len()).collect();
    let mut counterexample = None;
    let total = 1usize << inst.len();
    for mask in 0..total as u64 {
        let w = TupleSet::from_indices(inst.len(), all.iter().copied().filter(|j| mask >> j & 1 == 1));
        let direct = eval_boolean(query, inst, &w)?;
        if direct != !decomposed.eval(&w).is_zero() {
            counterexample = Some(w);
            break;
        }
    }
    Ok(DecompositionCheck {
        family_size: family.len(),
        worlds_checked: total,
        counterexample,
    })
}
