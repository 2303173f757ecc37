use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{bail, Result};
use serde_json::{json, Value as Json};

use ces_core::axioms::{check_all, mss_decomposition_check, score_function, verify_product_formula, DECOMPOSITION_CAP};
use ces_core::exact::{to_decimal_string, ExactValue, Rational};
use ces_core::intervention::{self, intervened_expectation, Intervention};
use ces_core::pdb::{pdb_to_json, Pdb, Representation, TupleId};
use ces_core::query::{classify, expected_value, Backend, CompiledQuery, Query, WorldQuery};
use ces_core::scores::{causal_effect, gces_forms, score_all, score_tuple, ScoreKind, ScoreReport};

use crate::{Inputs, Report};

fn show(v: &Rational) -> String {
    let e = ExactValue::from(v);
    format!("{} ({})", e.exact, e.decimal)
}

fn tids(names: &[String]) -> Vec<TupleId> {
    names.iter().map(TupleId::new).collect()
}

pub fn validate(pdb: &Pdb) -> Report {
    let inst = pdb.instance();
    let diags = pdb.validate();
    let repr = match pdb.representation() {
        Representation::Explicit(_) => "explicit",
        Representation::Independent(_) => "tid",
    };
    let mut text = String::new();
    if diags.is_empty() {
        let _ = writeln!(
            text,
            "valid: {} tuples ({} endogenous), {repr} representation",
            inst.len(),
            inst.endogenous().len()
        );
    } else {
        for d in &diags {
            let _ = writeln!(text, "violation: {}", d.message);
        }
    }
    Report {
        ok: diags.is_empty(),
        json: json!({
            "valid": diags.is_empty(),
            "representation": repr,
            "tuples": inst.len(),
            "endogenous": inst.endogenous().len(),
            "violations": diags,
        }),
        text,
    }
}

pub fn prob(inp: &Inputs, backend: Backend) -> Result<Report> {
    let ev = expected_value(&inp.pdb, &inp.query, backend)?;
    let label = if inp.query.is_boolean() { "P(Q)" } else { "E(Q)" };
    let v = ExactValue::from(&ev.value);
    Ok(Report {
        text: format!("query: {}\n{label} = {} [{}]\n", inp.query, show(&ev.value), ev.backend),
        json: json!({
            "query": inp.query.to_string(),
            "exact": v.exact,
            "decimal": v.decimal,
            "backend": ev.backend,
        }),
        ok: true,
    })
}

fn report_for(inp: &Inputs, kind: ScoreKind, only: &[TupleId], backend: Backend) -> Result<ScoreReport> {
    let inst = inp.pdb.instance();
    if only.is_empty() {
        return Ok(score_all(&inp.pdb, &inp.query, kind, backend)?);
    }
    let compiled = CompiledQuery::new(&inp.query, inst)?;
    let mut entries = only
        .iter()
        .map(|t| score_tuple(&inp.pdb, &inp.query, &compiled, kind, t, backend))
        .collect::<ces_core::Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.tid.cmp(&b.tid));
    entries.dedup_by(|a, b| a.tid == b.tid);
    let mut order: Vec<_> = entries.iter().collect();
    order.sort_by(|a, b| b.value.cmp(&a.value).then_with(|| a.tid.cmp(&b.tid)));
    let ranking = order.into_iter().map(|e| e.tid.clone()).collect();
    Ok(ScoreReport {
        kind,
        query: inp.query.to_string(),
        n_endogenous: inst.endogenous().len(),
        entries,
        ranking,
    })
}

pub fn score(inp: &Inputs, kind: ScoreKind, tuples: &[String], joint: bool, backend: Backend) -> Result<Report> {
    if !joint {
        let r = report_for(inp, kind, &tids(tuples), backend)?;
        return Ok(Report {
            text: r.to_table(),
            json: r.to_json(),
            ok: true,
        });
    }
    if !matches!(kind, ScoreKind::Gces | ScoreKind::CesTid) {
        bail!("--joint applies to gces and ces-tid only");
    }
    if kind == ScoreKind::CesTid && !inp.pdb.is_tuple_independent() {
        return Err(ces_core::Error::NotTupleIndependent.into());
    }
    let targets = tids(tuples);
    let s = causal_effect(&inp.pdb, &inp.query, &targets, backend)?;
    let names: Vec<&str> = targets.iter().map(TupleId::as_str).collect();
    let v = ExactValue::from(&s.value);
    Ok(Report {
        text: format!(
            "query: {}\n{kind}({{{}}}) = {} [{}]\n",
            inp.query,
            names.join(", "),
            show(&s.value),
            s.backend
        ),
        json: json!({
            "kind": kind,
            "query": inp.query.to_string(),
            "targets": targets,
            "exact": v.exact,
            "decimal": v.decimal,
            "backend": s.backend,
        }),
        ok: true,
    })
}

pub fn rank(inp: &Inputs, kind: ScoreKind, backend: Backend) -> Result<Report> {
    let r = report_for(inp, kind, &[], backend)?;
    let mut text = String::new();
    let _ = writeln!(text, "query: {}", r.query);
    for (i, t) in r.ranking.iter().enumerate() {
        let v = r.value_of(t.as_str()).expect("ranked tuple has a value");
        let _ = writeln!(text, "{:>3}. {t}  {}", i + 1, to_decimal_string(v, 6));
    }
    Ok(Report {
        text,
        json: json!({ "kind": kind, "query": r.query, "ranking": r.to_json()["scores"].clone(), "order": r.ranking }),
        ok: true,
    })
}

pub fn intervene(pdb: &Pdb, force_in: &[String], force_out: &[String], query: Option<&Query>, backend: Backend) -> Result<Report> {
    let iv = Intervention::mixed(tids(force_in), tids(force_out));
    let space = intervention::intervene(pdb, &iv)?;
    let inst = pdb.instance();
    let mut text = format!("{iv}\n");
    match space.space.representation() {
        Representation::Explicit(ew) => {
            for w in ew.worlds() {
                let _ = writeln!(text, "  {}  {}", inst.describe(&w.world), show(&w.mass));
            }
        }
        Representation::Independent(m) => {
            for (i, p) in m.iter().enumerate() {
                let p = p.as_ref().map(|p| show(p.value())).unwrap_or_else(|| "missing".into());
                let _ = writeln!(text, "  {}  {p}", inst.tid(i));
            }
        }
    }
    let mut out = json!({
        "intervention": iv.to_string(),
        "pdb": pdb_to_json(&space.space),
    });
    if let Some(q) = query {
        let ev = intervened_expectation(pdb, q, &iv, backend)?;
        let label = if q.is_boolean() { "P" } else { "E" };
        let _ = writeln!(text, "query: {q}\n{label}(Q | {iv}) = {} [{}]", show(&ev.value), ev.backend);
        let v = ExactValue::from(&ev.value);
        out["query"] = json!(q.to_string());
        out["value"] = json!({ "exact": v.exact, "decimal": v.decimal, "backend": ev.backend });
    }
    Ok(Report {
        text,
        json: out,
        ok: true,
    })
}

pub fn dichotomy(query: &Query) -> Result<Report> {
    let Some(cq) = query.as_bcq() else {
        bail!("dichotomy classification applies to a single Boolean conjunctive query");
    };
    let c = classify(cq);
    let mut text = format!("query: {query}\n");
    let _ = writeln!(text, "self-join-free: {}", c.self_join_free);
    let _ = writeln!(text, "hierarchical: {}", c.hierarchical);
    for (var, atoms) in &c.atoms_by_variable {
        let names: Vec<String> = atoms.iter().map(|&a| cq.atoms[a].to_string()).collect();
        let _ = writeln!(text, "  at({var}) = {{{}}}", names.join(", "));
    }
    if let Some((x, y)) = &c.violation {
        let _ = writeln!(text, "violation: at({x}) and at({y}) overlap without containment");
    }
    let _ = writeln!(text, "components: {}", c.components.len());
    let _ = writeln!(text, "verdict: {}", c.verdict);
    let mut js = serde_json::to_value(&c)?;
    js["query"] = json!(query.to_string());
    if let Some((x, y)) = &c.violation {
        js["violation"] = json!([x, y]);
    }
    Ok(Report {
        text,
        json: js,
        ok: true,
    })
}

pub fn axioms(inp: &Inputs, other: Option<&Query>, score: &str) -> Result<Report> {
    let f = score_function(score)?;
    let inst = inp.pdb.instance();
    let q: Arc<dyn WorldQuery> = Arc::new(CompiledQuery::new(&inp.query, inst)?);
    let o: Option<Arc<dyn WorldQuery>> = other
        .map(|o| CompiledQuery::new(o, inst).map(|c| Arc::new(c) as Arc<dyn WorldQuery>))
        .transpose()?;
    let verdicts = check_all(&inp.pdb, q, o, f.as_ref())?;
    let mut text = format!("query: {}\nscore: {}\n", inp.query, f.name());
    for v in &verdicts {
        if v.holds {
            let _ = writeln!(text, "{:<5} holds", v.axiom.name());
        } else {
            let _ = writeln!(text, "{:<5} fails", v.axiom.name());
            for w in &v.witnesses {
                let _ = writeln!(text, "      {}: {} vs {}", w.description, show(&w.lhs), show(&w.rhs));
            }
        }
    }
    let mut js = json!({
        "query": inp.query.to_string(),
        "score": f.name(),
        "axioms": verdicts.iter().map(|v| v.to_json()).collect::<Vec<Json>>(),
    });

    if let (Some(cq), true) = (inp.query.as_bcq(), inp.pdb.is_tuple_independent()) {
        let p = verify_product_formula(&inp.pdb, cq)?;
        let _ = writeln!(text, "product identity: {}", if p.agree() { "agrees" } else { "DISAGREES" });
        let _ = writeln!(text, "  P(Q) = {}", show(&p.lhs));
        for (t, v) in &p.fresh_effects {
            let _ = writeln!(text, "  CE({t}) = {}", show(v));
        }
        for (sel, v) in &p.rhs {
            let names: Vec<&str> = sel.iter().map(TupleId::as_str).collect();
            let _ = writeln!(text, "  product over {{{}}} = {}", names.join(", "), show(v));
        }
        js["product"] = p.to_json();
    }
    if inp.query.is_boolean() && inst.len() <= DECOMPOSITION_CAP {
        let d = mss_decomposition_check(inst, &inp.query)?;
        match &d.counterexample {
            None => {
                let _ = writeln!(
                    text,
                    "minimal-set decomposition: holds ({} sets, {} worlds)",
                    d.family_size, d.worlds_checked
                );
            }
            Some(w) => {
                let _ = writeln!(text, "minimal-set decomposition: fails at {}", inst.describe(w));
            }
        }
        js["decomposition"] = json!({
            "holds": d.holds(),
            "family_size": d.family_size,
            "worlds_checked": d.worlds_checked,
            "counterexample": d.counterexample.as_ref().map(|w| inst.tids_of(w)),
        });
    }
    Ok(Report {
        ok: verdicts.iter().all(|v| v.holds),
        text,
        json: js,
    })
}

pub fn oracle_compare(inp: &Inputs, tuple: &str) -> Result<Report> {
    let tid = TupleId::new(tuple);
    let inst = inp.pdb.instance();
    let compiled = CompiledQuery::new(&inp.query, inst)?;
    let forms = gces_forms(&inp.pdb, &compiled, &tid)?;
    let auto = causal_effect(&inp.pdb, &inp.query, std::slice::from_ref(&tid), Backend::Auto)?;
    let ok = forms.agree() && auto.value == forms.direct;
    let rows = [
        ("intervened", &forms.intervened, None),
        ("direct", &forms.direct, None),
        ("swing", &forms.swing, None),
        ("backend", &auto.value, Some(auto.backend)),
    ];
    let mut text = format!("query: {}\ntuple: {tid}\n", inp.query);
    for (name, v, b) in &rows {
        match b {
            Some(b) => {
                let _ = writeln!(text, "  {name:<10} {} [{b}]", show(v));
            }
            None => {
                let _ = writeln!(text, "  {name:<10} {}", show(v));
            }
        }
    }
    let _ = writeln!(text, "{}", if ok { "agree" } else { "DISAGREE" });
    let forms_json: serde_json::Map<String, Json> = rows
        .iter()
        .map(|(name, v, _)| (name.to_string(), json!(ExactValue::from(*v))))
        .collect();
    Ok(Report {
        text,
        json: json!({
            "query": inp.query.to_string(),
            "tuple": tid,
            "forms": forms_json,
            "backend": auto.backend,
            "agree": ok,
        }),
        ok,
    })
}
