//! Attribution scores for endogenous tuples: the generalized causal effect,
//! its uniform special case, Shapley, Banzhaf, and the power functions.

use std::fmt::Write as _;
use std::str::FromStr;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::error::{Error, Result};
use crate::exact::{factorial, pow2, to_decimal_string, ExactValue, Rational};
use crate::intervention::{intervene_resolved, intervened_expectation_direct, Intervention, Resolved};
use crate::pdb::{make_uniform_tid, Instance, Pdb, TupleId, TupleSet};
use crate::query::{brute_expectation, expected_value, Backend, CompiledQuery, Query, UsedBackend, WorldQuery};

/// `Δ(Q, W, τ) = Q[W ∪ D_ex ∪ {τ}] − Q[W ∪ D_ex]` for `W ⊆ D_en`.
pub fn delta(query: &dyn WorldQuery, inst: &Instance, w: &TupleSet, tau: usize) -> Rational {
    if w.contains(tau) {
        return Rational::zero();
    }
    let mut base = w.clone();
    base.union_with(inst.exogenous());
    let without = query.eval(&base);
    base.insert(tau);
    query.eval(&base) - without
}

/// Endogenous tuples other than `tau`, checked against the enumeration cap.
fn others(inst: &Instance, tau: usize) -> Result<Vec<usize>> {
    let rest: Vec<usize> = inst.endogenous().iter().copied().filter(|&t| t != tau).collect();
    inst.limits().check(rest.len())?;
    Ok(rest)
}

/// Calls `visit(|W|, W ∪ D_ex, Δ)` for every `W ⊆ D_en ∖ {τ}` with `Δ ≠ 0`.
fn for_each_swing(inst: &Instance, query: &dyn WorldQuery, tau: usize, mut visit: impl FnMut(usize, &TupleSet, &Rational)) -> Result<()> {
    let rest = others(inst, tau)?;
    for mask in 0u64..(1u64 << rest.len()) {
        let mut w = inst.world_from_mask(&rest, mask);
        let without = query.eval(&w);
        w.insert(tau);
        let d = query.eval(&w) - without;
        if !d.is_zero() {
            w.remove(tau);
            visit(mask.count_ones() as usize, &w, &d);
        }
    }
    Ok(())
}

fn endogenous(inst: &Instance, tid: &TupleId) -> Result<usize> {
    inst.endogenous_index(tid)
}

/// Exact value with the backend that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scored {
    pub value: Rational,
    pub backend: UsedBackend,
}

/// `E(Q | do(T in)) − E(Q | do(T out))` for a target set `T`.
pub fn causal_effect(pdb: &Pdb, query: &Query, targets: &[TupleId], backend: Backend) -> Result<Scored> {
    let inst = pdb.instance();
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let iv_in = Intervention::force_in(targets.iter().cloned());
    let r_in = iv_in.resolve(inst)?;
    let r_out = Resolved::out_set(r_in.ins.clone());
    let e_in = expected_value(&intervene_resolved(pdb, &r_in)?, query, backend)?;
    let e_out = expected_value(&intervene_resolved(pdb, &r_out)?, query, backend)?;
    Ok(Scored {
        value: e_in.value - e_out.value,
        backend: e_in.backend,
    })
}

/// GCES from the two materialized intervened spaces.
pub fn gces_intervened(pdb: &Pdb, query: &dyn WorldQuery, targets: &TupleSet) -> Result<Rational> {
    let plus = intervene_resolved(pdb, &Resolved::in_set(targets.clone()))?;
    let minus = intervene_resolved(pdb, &Resolved::out_set(targets.clone()))?;
    Ok(brute_expectation(&plus, query)? - brute_expectation(&minus, query)?)
}

/// GCES as two sums over the base worlds, no intervened space built.
pub fn gces_direct(pdb: &Pdb, query: &dyn WorldQuery, targets: &TupleSet) -> Result<Rational> {
    let e_in = intervened_expectation_direct(pdb, query, &Resolved::in_set(targets.clone()))?;
    let e_out = intervened_expectation_direct(pdb, query, &Resolved::out_set(targets.clone()))?;
    Ok(e_in - e_out)
}

/// GCES of one tuple as `Σ_W Δ(Q,W,τ)·(p(W ∪ D_ex) + p(W ∪ D_ex ∪ {τ}))`.
pub fn gces_swing_form(pdb: &Pdb, query: &dyn WorldQuery, tau: usize) -> Result<Rational> {
    let inst = pdb.instance();
    let mut total = Rational::zero();
    let mut failure = None;
    for_each_swing(inst, query, tau, |_, w, d| {
        let mut with = w.clone();
        with.insert(tau);
        match (pdb.world_probability(w), pdb.world_probability(&with)) {
            (Ok(a), Ok(b)) => total += d * (a + b),
            (Err(e), _) | (_, Err(e)) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// The three GCES computations side by side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcesForms {
    pub intervened: Rational,
    pub direct: Rational,
    pub swing: Rational,
}

impl GcesForms {
    pub fn agree(&self) -> bool {
        self.intervened == self.direct && self.direct == self.swing
    }
}

pub fn gces_forms(pdb: &Pdb, query: &dyn WorldQuery, tid: &TupleId) -> Result<GcesForms> {
    let inst = pdb.instance();
    let tau = endogenous(inst, tid)?;
    let t = TupleSet::from_indices(inst.len(), [tau]);
    Ok(GcesForms {
        intervened: gces_intervened(pdb, query, &t)?,
        direct: gces_direct(pdb, query, &t)?,
        swing: gces_swing_form(pdb, query, tau)?,
    })
}

/// GCES on the uniform-½ TID over the instance.
pub fn ces_ui(inst: &Instance, query: &Query, tid: &TupleId, backend: Backend) -> Result<Scored> {
    let pdb = make_uniform_tid(inst.clone());
    causal_effect(&pdb, query, std::slice::from_ref(tid), backend)
}

/// Shapley value in subset form with exact factorial weights.
pub fn shapley(inst: &Instance, query: &dyn WorldQuery, tid: &TupleId) -> Result<Rational> {
    let tau = endogenous(inst, tid)?;
    let n = inst.endogenous().len();
    let nf = Rational::from_integer(factorial(n));
    let weights: Vec<Rational> = (0..n)
        .map(|s| Rational::from_integer(factorial(s) * factorial(n - s - 1)) / &nf)
        .collect();
    let mut total = Rational::zero();
    for_each_swing(inst, query, tau, |s, _, d| total += &weights[s] * d)?;
    Ok(total)
}

/// Banzhaf index: `Σ_W Δ(Q,W,τ) / 2^{N−1}`.
pub fn banzhaf(inst: &Instance, query: &dyn WorldQuery, tid: &TupleId) -> Result<Rational> {
    let tau = endogenous(inst, tid)?;
    let n = inst.endogenous().len();
    Ok(power_of_tuple_at(inst, query, tau)? / pow2(n - 1))
}

fn power_of_tuple_at(inst: &Instance, query: &dyn WorldQuery, tau: usize) -> Result<Rational> {
    let mut total = Rational::zero();
    for_each_swing(inst, query, tau, |_, _, d| total += d)?;
    Ok(total)
}

/// `Σ_{τ ∈ D_en} Δ(Q, W, τ)` for a proper subset `W ⊊ D_en`.
pub fn power_of_set(inst: &Instance, query: &dyn WorldQuery, w: &TupleSet) -> Result<Rational> {
    let en = TupleSet::from_indices(inst.len(), inst.endogenous().iter().copied());
    if !w.is_subset(&en) || w.len() == en.len() {
        return Err(Error::NotProperSubset);
    }
    Ok(inst.endogenous().iter().map(|&t| delta(query, inst, w, t)).sum())
}

/// `Σ_{W ⊆ D_en ∖ {τ}} Δ(Q, W, τ)`.
pub fn power_of_tuple(inst: &Instance, query: &dyn WorldQuery, tid: &TupleId) -> Result<Rational> {
    power_of_tuple_at(inst, query, endogenous(inst, tid)?)
}

/// `Σ_{W ⊆ D_en ∖ {τ}} Δ(Q, W, τ)·p(W ∪ D_ex)`.
pub fn weighted_power(pdb: &Pdb, query: &dyn WorldQuery, tid: &TupleId) -> Result<Rational> {
    let tau = endogenous(pdb.instance(), tid)?;
    weighted_power_at(pdb, query, tau)
}

pub(crate) fn weighted_power_at(pdb: &Pdb, query: &dyn WorldQuery, tau: usize) -> Result<Rational> {
    let mut total = Rational::zero();
    let mut failure = None;
    for_each_swing(pdb.instance(), query, tau, |_, w, d| match pdb.world_probability(w) {
        Ok(p) => total += d * p,
        Err(e) => failure = Some(e),
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `Σ_{W ⊊ D_en} Power(W)`, computed as the sum of tuple powers.
pub fn total_power(inst: &Instance, query: &dyn WorldQuery) -> Result<Rational> {
    let mut total = Rational::zero();
    for &t in inst.endogenous() {
        total += power_of_tuple_at(inst, query, t)?;
    }
    Ok(total)
}

/// Total power as the double sum over proper subsets `W` and `τ ∉ W`.
pub fn total_power_by_sets(inst: &Instance, query: &dyn WorldQuery) -> Result<Rational> {
    let en = inst.endogenous();
    inst.limits().check(en.len())?;
    let mut total = Rational::zero();
    for mask in 0u64..(1u64 << en.len()).saturating_sub(1) {
        let w = TupleSet::from_indices(inst.len(), en.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &t)| t));
        total += power_of_set(inst, query, &w)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    Gces,
    CesTid,
    CesUi,
    Shapley,
    Banzhaf,
    PowerTuple,
    WeightedPower,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 7] = [
        ScoreKind::Gces,
        ScoreKind::CesTid,
        ScoreKind::CesUi,
        ScoreKind::Shapley,
        ScoreKind::Banzhaf,
        ScoreKind::PowerTuple,
        ScoreKind::WeightedPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Gces => "gces",
            ScoreKind::CesTid => "ces-tid",
            ScoreKind::CesUi => "ces-ui",
            ScoreKind::Shapley => "shapley",
            ScoreKind::Banzhaf => "banzhaf",
            ScoreKind::PowerTuple => "power",
            ScoreKind::WeightedPower => "weighted-power",
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Document(format!("unknown score kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreEntry {
    pub tid: TupleId,
    pub value: Rational,
    pub backend: UsedBackend,
    /// Whether the uniform causal effect is strictly positive; set for
    /// `ces-ui` only.
    pub positive_ceui: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreReport {
    pub kind: ScoreKind,
    pub query: String,
    /// One entry per endogenous tuple, in tuple-id order.
    pub entries: Vec<ScoreEntry>,
    /// Tuple ids by value descending, ties by tuple id ascending.
    pub ranking: Vec<TupleId>,
    pub n_endogenous: usize,
}

/// Scores one endogenous tuple.
pub fn score_tuple(pdb: &Pdb, query: &Query, compiled: &CompiledQuery, kind: ScoreKind, tid: &TupleId, backend: Backend) -> Result<ScoreEntry> {
    let inst = pdb.instance();
    endogenous(inst, tid)?;
    let brute = |value: Rational| Scored {
        value,
        backend: UsedBackend::Brute,
    };
    let scored = match kind {
        ScoreKind::Gces => causal_effect(pdb, query, std::slice::from_ref(tid), backend)?,
        ScoreKind::CesTid => {
            if !pdb.is_tuple_independent() {
                return Err(Error::NotTupleIndependent);
            }
            causal_effect(pdb, query, std::slice::from_ref(tid), backend)?
        }
        ScoreKind::CesUi => ces_ui(inst, query, tid, backend)?,
        ScoreKind::Shapley => brute(shapley(inst, compiled, tid)?),
        ScoreKind::Banzhaf => brute(banzhaf(inst, compiled, tid)?),
        ScoreKind::PowerTuple => brute(power_of_tuple(inst, compiled, tid)?),
        ScoreKind::WeightedPower => brute(weighted_power(pdb, compiled, tid)?),
    };
    let positive_ceui = (kind == ScoreKind::CesUi).then(|| scored.value > Rational::zero());
    Ok(ScoreEntry {
        tid: tid.clone(),
        value: scored.value,
        backend: scored.backend,
        positive_ceui,
    })
}

/// Scores every endogenous tuple, in parallel, with a deterministic ranking.
pub fn score_all(pdb: &Pdb, query: &Query, kind: ScoreKind, backend: Backend) -> Result<ScoreReport> {
    let inst = pdb.instance();
    let compiled = CompiledQuery::new(query, inst)?;
    let tids: Vec<TupleId> = inst.endogenous().iter().map(|&i| inst.tid(i).clone()).collect();
    let entries = tids
        .par_iter()
        .map(|t| score_tuple(pdb, query, &compiled, kind, t, backend))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<&ScoreEntry> = entries.iter().collect();
    order.sort_by(|a, b| b.value.cmp(&a.value).then_with(|| a.tid.cmp(&b.tid)));
    let ranking = order.into_iter().map(|e| e.tid.clone()).collect();
    Ok(ScoreReport {
        kind,
        query: query.to_string(),
        n_endogenous: entries.len(),
        entries,
        ranking,
    })
}

impl ScoreReport {
    pub fn value_of(&self, tid: &str) -> Option<&Rational> {
        self.entries.iter().find(|e| e.tid.as_str() == tid).map(|e| &e.value)
    }

    pub fn to_json(&self) -> Json {
        let scores: Vec<Json> = self
            .entries
            .iter()
            .map(|e| {
                let v = ExactValue::from(&e.value);
                let mut o = json!({
                    "tid": e.tid,
                    "exact": v.exact,
                    "decimal": v.decimal,
                    "backend": e.backend,
                });
                if let Some(flag) = e.positive_ceui {
                    o["positive-ceui"] = json!(flag);
                }
                o
            })
            .collect();
        json!({
            "kind": self.kind,
            "query": self.query,
            "n_endogenous": self.n_endogenous,
            "scores": scores,
            "ranking": self.ranking,
        })
    }

    /// Aligned text table in ranking order.
    pub fn to_table(&self) -> String {
        let rows: Vec<[String; 5]> = self
            .ranking
            .iter()
            .enumerate()
            .map(|(i, tid)| {
                let e = self.entries.iter().find(|e| &e.tid == tid).expect("ranked tuple has an entry");
                [
                    (i + 1).to_string(),
                    e.tid.to_string(),
                    to_decimal_string(&e.value, 6),
                    ExactValue::from(&e.value).exact,
                    e.backend.to_string(),
                ]
            })
            .collect();
        let header = ["rank", "tid", self.kind.name(), "exact", "backend"];
        let mut widths = header.map(str::len);
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "query: {}", self.query);
        let line = |cells: [&str; 5], out: &mut String| {
            let _ = writeln!(
                out,
                "{:>w0$}  {:<w1$}  {:>w2$}  {:<w3$}  {}",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                cells[4],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3],
            );
        };
        line(header, &mut out);
        for r in &rows {
            line([&r[0], &r[1], &r[2], &r[3], &r[4]], &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, parse_rational, ratio, Probability};
    use crate::pdb::{pdb_from_json, RelationSchema, Schema, TupleKind, TupleRecord, Value};
    use crate::query::parse_query;
    use proptest::prelude::*;

    fn edges() -> Instance {
        let mut schema = Schema::new();
        schema.insert("E".into(), RelationSchema::untyped(2));
        let rows = [("t1", "a", "b"), ("t2", "a", "c"), ("t3", "c", "b"), ("t4", "a", "d"), ("t5", "d", "e"), ("t6", "e", "b")];
        let tuples = rows
            .iter()
            .map(|(t, x, y)| TupleRecord::new(t, "E", vec![Value::sym(*x), Value::sym(*y)], TupleKind::Endogenous))
            .collect();
        Instance::new(schema, tuples).unwrap()
    }

    const PATH: &str = "Q() :- E(a,b) ; E(a,X), E(X,b) ; E(a,X), E(X,Y), E(Y,b)";

    fn table2() -> Pdb {
        let ids = |v: &[&str]| v.iter().map(|s| TupleId::new(*s)).collect::<Vec<_>>();
        let p = |s: &str| Probability::parse(s).unwrap();
        Pdb::explicit_from_tids(
            edges(),
            vec![
                (ids(&["t1", "t3", "t4", "t6"]), p("0.20")),
                (ids(&["t1", "t2", "t3"]), p("0.25")),
                (ids(&["t2", "t3", "t6"]), p("0.15")),
                (ids(&["t2", "t6"]), p("0.40")),
            ],
        )
        .unwrap()
    }

    /// R(a,b), R(b,c), S(a,a), S(a,d) with the first exogenous.
    fn power_instance() -> Instance {
        let mut schema = Schema::new();
        schema.insert("R".into(), RelationSchema::untyped(2));
        schema.insert("S".into(), RelationSchema::untyped(2));
        let row = |t: &str, p: &str, a: &str, b: &str, k| TupleRecord::new(t, p, vec![Value::sym(a), Value::sym(b)], k);
        Instance::new(
            schema,
            vec![
                row("t1", "R", "a", "b", TupleKind::Exogenous),
                row("t2", "R", "b", "c", TupleKind::Endogenous),
                row("t3", "S", "a", "a", TupleKind::Endogenous),
                row("t4", "S", "a", "d", TupleKind::Endogenous),
            ],
        )
        .unwrap()
    }

    /// Worlds over t2..t4 (t1 always present); `light` sets get 1/12, the rest 1/6.
    fn skewed() -> Pdb {
        let inst = power_instance();
        let light = [vec!["t2"], vec!["t3"], vec!["t4"], vec!["t2", "t3"]];
        let heavy = [vec!["t2", "t4"], vec!["t3", "t4"], vec!["t2", "t3", "t4"], vec![]];
        let mut worlds = Vec::new();
        for (sets, p) in [(&light, ratio(1, 12)), (&heavy, ratio(1, 6))] {
            for s in sets.iter() {
                let mut ids: Vec<TupleId> = s.iter().map(|t| TupleId::new(*t)).collect();
                ids.push("t1".into());
                worlds.push((ids, Probability::new(p.clone()).unwrap()));
            }
        }
        Pdb::explicit_from_tids(inst, worlds).unwrap()
    }

    const POWER_Q: &str = "Q() :- R(X,Y), S(X,Z)";

    fn compiled(pdb: &Pdb, text: &str) -> (Query, CompiledQuery) {
        let q = parse_query(text, pdb.instance().schema()).unwrap();
        let c = CompiledQuery::new(&q, pdb.instance()).unwrap();
        (q, c)
    }

    #[test]
    fn uniform_path_scores() {
        let pdb = make_uniform_tid(edges());
        let (q, _) = compiled(&pdb, PATH);
        let report = score_all(&pdb, &q, ScoreKind::CesUi, Backend::Auto).unwrap();
        let expected = [("t1", ratio(21, 32)), ("t2", ratio(7, 32)), ("t3", ratio(7, 32)), ("t4", ratio(3, 32)), ("t5", ratio(3, 32)), ("t6", ratio(3, 32))];
        for (t, v) in &expected {
            assert_eq!(report.value_of(t).unwrap(), v, "{t}");
        }
        let ranking: Vec<&str> = report.ranking.iter().map(TupleId::as_str).collect();
        assert_eq!(ranking, ["t1", "t2", "t3", "t4", "t5", "t6"]);
        assert!(report.entries.iter().all(|e| e.positive_ceui == Some(true)));
    }

    #[test]
    fn explicit_gces_three_ways() {
        let pdb = table2();
        let (q, c) = compiled(&pdb, PATH);
        let forms = gces_forms(&pdb, &c, &"t3".into()).unwrap();
        assert!(forms.agree());
        assert_eq!(forms.direct, parse_rational("0.55").unwrap());
        let ce = causal_effect(&pdb, &q, &["t3".into()], Backend::Auto).unwrap();
        assert_eq!(ce.value, forms.direct);
        assert_eq!(ce.backend, UsedBackend::Brute);
    }

    #[test]
    fn deltas() {
        let pdb = skewed();
        let (_, c) = compiled(&pdb, POWER_Q);
        let inst = pdb.instance();
        let s = |v: &[&str]| inst.set_of_strs(v).unwrap();
        let idx = |t: &str| inst.index_of(&t.into()).unwrap();
        assert_eq!(delta(&c, inst, &s(&["t2"]), idx("t3")), int(1));
        assert_eq!(delta(&c, inst, &s(&["t3"]), idx("t2")), int(0));
        assert_eq!(delta(&c, inst, &s(&["t3"]), idx("t3")), int(0));
    }

    #[test]
    fn powers() {
        let pdb = skewed();
        let (_, c) = compiled(&pdb, POWER_Q);
        let inst = pdb.instance();
        let s = |v: &[&str]| inst.set_of_strs(v).unwrap();
        assert_eq!(power_of_set(inst, &c, &s(&["t2"])).unwrap(), int(2));
        assert_eq!(power_of_set(inst, &c, &s(&["t3", "t4"])).unwrap(), int(0));
        assert_eq!(power_of_set(inst, &c, &inst.empty_set()).unwrap(), int(2));
        assert!(matches!(power_of_set(inst, &c, &s(&["t2", "t3", "t4"])), Err(Error::NotProperSubset)));
        assert_eq!(power_of_tuple(inst, &c, &"t2".into()).unwrap(), int(0));
        assert_eq!(power_of_tuple(inst, &c, &"t3".into()).unwrap(), int(2));
        assert_eq!(total_power(inst, &c).unwrap(), int(4));
        assert_eq!(total_power_by_sets(inst, &c).unwrap(), int(4));
        assert!(matches!(power_of_tuple(inst, &c, &"t1".into()), Err(Error::Exogenous(_))));
    }

    #[test]
    fn gces_under_both_distributions() {
        let skew = skewed();
        let uniform = make_uniform_tid(power_instance());
        let (q, _) = compiled(&skew, POWER_Q);
        let values = |pdb: &Pdb| -> Vec<Rational> {
            ["t2", "t3", "t4"]
                .iter()
                .map(|t| causal_effect(pdb, &q, &[TupleId::new(*t)], Backend::Auto).unwrap().value)
                .collect()
        };
        assert_eq!(values(&uniform), vec![int(0), ratio(1, 2), ratio(1, 2)]);
        assert_eq!(values(&skew), vec![int(0), ratio(5, 12), ratio(1, 2)]);
    }

    #[test]
    fn weighted_power_values() {
        let uniform = make_uniform_tid(power_instance());
        let (_, c) = compiled(&uniform, POWER_Q);
        assert_eq!(weighted_power(&uniform, &c, &"t3".into()).unwrap(), ratio(1, 4));
        assert_eq!(weighted_power(&uniform, &c, &"t2".into()).unwrap(), int(0));
        let skew = skewed();
        assert_eq!(weighted_power(&skew, &c, &"t3".into()).unwrap(), ratio(1, 4));
        assert_eq!(weighted_power(&skew, &c, &"t4".into()).unwrap(), ratio(1, 4));
    }

    #[test]
    fn shapley_and_banzhaf() {
        let inst = power_instance();
        let pdb = make_uniform_tid(inst.clone());
        let (q, c) = compiled(&pdb, POWER_Q);
        assert_eq!(shapley(&inst, &c, &"t3".into()).unwrap(), ratio(1, 2));
        assert_eq!(shapley(&inst, &c, &"t2".into()).unwrap(), int(0));
        assert_eq!(banzhaf(&inst, &c, &"t3".into()).unwrap(), ratio(1, 2));
        assert_eq!(banzhaf(&inst, &c, &"t2".into()).unwrap(), int(0));
        let total: Rational = ["t2", "t3", "t4"].iter().map(|t| shapley(&inst, &c, &TupleId::new(*t)).unwrap()).sum();
        assert_eq!(total, int(1));
        assert_eq!(ces_ui(&inst, &q, &"t3".into(), Backend::Auto).unwrap().value, ratio(1, 2));
    }

    /// Shapley by averaging marginal contributions over all orderings.
    fn shapley_by_permutations(inst: &Instance, q: &dyn WorldQuery, tau: usize) -> Rational {
        fn perms(items: &[usize]) -> Vec<Vec<usize>> {
            if items.is_empty() {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.to_vec();
                let x = rest.remove(i);
                for mut p in perms(&rest) {
                    p.insert(0, x);
                    out.push(p);
                }
            }
            out
        }
        let all = perms(inst.endogenous());
        let count = all.len() as i64;
        let mut total = Rational::zero();
        for p in all {
            let before: Vec<usize> = p.iter().copied().take_while(|&t| t != tau).collect();
            let w = TupleSet::from_indices(inst.len(), before);
            total += delta(q, inst, &w, tau);
        }
        total / int(count)
    }

    #[test]
    fn shapley_matches_permutation_oracle() {
        let inst = edges();
        let pdb = make_uniform_tid(inst.clone());
        let (_, c) = compiled(&pdb, PATH);
        for &t in inst.endogenous() {
            assert_eq!(shapley(&inst, &c, inst.tid(t)).unwrap(), shapley_by_permutations(&inst, &c, t));
        }
    }

    #[test]
    fn aggregate_gces_is_the_value() {
        let text = r#"{
            "schema": {"S": {"arity": 2, "domains": ["symbolic", "numeric"]}},
            "tuples": [
                {"tid": "t7", "predicate": "S", "args": ["a", 1]},
                {"tid": "t8", "predicate": "S", "args": ["a", 2]},
                {"tid": "t9", "predicate": "S", "args": ["b", 0]},
                {"tid": "t10", "predicate": "S", "args": ["a", 3]},
                {"tid": "t11", "predicate": "S", "args": ["b", 1]},
                {"tid": "t12", "predicate": "S", "args": ["b", 10]}
            ],
            "marginals": {"t7": "1/2", "t8": "1/2", "t9": "1/2", "t10": "1/2", "t11": "1/2", "t12": "1/2"}
        }"#;
        let pdb = pdb_from_json(text).unwrap();
        let (q, c) = compiled(&pdb, "Q(sum(Y)) :- S(X,Y)");
        let auto = score_all(&pdb, &q, ScoreKind::Gces, Backend::Auto).unwrap();
        let brute = score_all(&pdb, &q, ScoreKind::Gces, Backend::Brute).unwrap();
        assert_eq!(auto.value_of("t7").unwrap(), &int(1));
        assert_eq!(auto.value_of("t12").unwrap(), &int(10));
        assert_eq!(auto.entries[0].backend, UsedBackend::ClosedForm);
        assert_eq!(auto.entries.iter().map(|e| &e.value).collect::<Vec<_>>(), brute.entries.iter().map(|e| &e.value).collect::<Vec<_>>());
        assert!(gces_forms(&pdb, &c, &"t7".into()).unwrap().agree());
    }

    #[test]
    fn report_rendering() {
        let pdb = make_uniform_tid(edges());
        let (q, _) = compiled(&pdb, PATH);
        let report = score_all(&pdb, &q, ScoreKind::CesUi, Backend::Auto).unwrap();
        let j = report.to_json();
        assert_eq!(j["scores"][0]["exact"], "21/32");
        assert_eq!(j["scores"][0]["decimal"], "0.656250");
        assert_eq!(j["scores"][0]["backend"], "brute");
        let table = report.to_table();
        assert!(table.contains("0.656250"));
        assert!(table.contains("0.093750"));
    }

    #[test]
    fn kinds_and_errors() {
        for k in ScoreKind::ALL {
            assert_eq!(k.name().parse::<ScoreKind>().unwrap(), k);
        }
        let pdb = table2();
        let (q, _) = compiled(&pdb, PATH);
        assert!(matches!(score_all(&pdb, &q, ScoreKind::CesTid, Backend::Auto), Err(Error::NotTupleIndependent)));
        assert!(matches!(causal_effect(&pdb, &q, &[], Backend::Auto), Err(Error::EmptyTargets)));
        let empty = Instance::new(edges().schema().clone(), vec![]).unwrap();
        let r = score_all(&make_uniform_tid(empty), &q, ScoreKind::Banzhaf, Backend::Auto).unwrap();
        assert!(r.entries.is_empty());
    }

    #[test]
    fn ranking_is_independent_of_thread_count() {
        let pdb = make_uniform_tid(edges());
        let (q, _) = compiled(&pdb, PATH);
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| score_all(&pdb, &q, ScoreKind::Shapley, Backend::Auto).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    fn tid_strategy() -> impl Strategy<Value = Pdb> {
        proptest::collection::vec(0i64..=4, 6).prop_map(|ks| {
            let marg = ks.iter().map(|&k| Some(Probability::new(ratio(k, 4)).unwrap())).collect();
            Pdb::independent(edges(), marg)
        })
    }

    proptest! {
        #[test]
        fn gces_forms_agree_on_tids(pdb in tid_strategy(), t in 1usize..7) {
            let (q, c) = compiled(&pdb, PATH);
            let tid = TupleId::new(format!("t{t}"));
            let forms = gces_forms(&pdb, &c, &tid).unwrap();
            prop_assert!(forms.agree());
            let lifted_or_brute = causal_effect(&pdb, &q, &[tid], Backend::Auto).unwrap().value;
            prop_assert_eq!(lifted_or_brute, forms.direct.clone());
            prop_assert!(forms.direct >= int(0) && forms.direct <= int(1));
        }

        #[test]
        fn lifted_gces_matches_brute(pdb in tid_strategy(), t in 1usize..7, which in 0usize..4) {
            let text = ["Q() :- E(X,b)", "Q() :- E(a,X)", "Q() :- E(X,Y)", "Q() :- E(c,b)"][which];
            let q = parse_query(text, pdb.instance().schema()).unwrap();
            let tid = TupleId::new(format!("t{t}"));
            let lifted = causal_effect(&pdb, &q, std::slice::from_ref(&tid), Backend::Lifted).unwrap().value;
            let brute = causal_effect(&pdb, &q, &[tid], Backend::Brute).unwrap().value;
            prop_assert_eq!(lifted, brute);
        }
    }
}
