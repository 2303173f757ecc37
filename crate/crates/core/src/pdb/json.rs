//! The PDB JSON document format.
//!
//! ```json
//! {
//!   "schema": { "E": 2, "S": { "arity": 2, "domains": ["symbolic", "numeric"] } },
//!   "tuples": [ { "tid": "t1", "predicate": "E", "args": ["a", "b"], "kind": "endogenous" } ],
//!   "worlds": [ { "tids": ["t1"], "p": "0.25" } ]
//! }
//! ```
//!
//! Exactly one of `worlds` or `marginals` (tid → probability) is present.
//! Probabilities must be strings, either decimal (`"0.25"`) or fractions
//! (`"1/12"`); JSON numbers are rejected so no binary float ever enters.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::instance::{DomainTag, Instance, Limits, RelationSchema, Schema, TupleId, TupleKind, TupleRecord, Value};
use super::space::{Pdb, Representation};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, to_fraction_string, Probability};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema: BTreeMap<String, SchemaEntry>,
    tuples: Vec<TupleDoc>,
    worlds: Option<Vec<WorldDoc>>,
    marginals: Option<BTreeMap<String, Json>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SchemaEntry {
    Arity(usize),
    Typed {
        arity: usize,
        #[serde(default)]
        domains: Option<Vec<DomainTag>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TupleDoc {
    tid: String,
    predicate: String,
    args: Vec<Json>,
    #[serde(default = "default_kind")]
    kind: TupleKind,
}

fn default_kind() -> TupleKind {
    TupleKind::Endogenous
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldDoc {
    tids: Vec<String>,
    p: Json,
}

fn probability(field: &str, raw: &Json) -> Result<Probability> {
    match raw {
        Json::String(s) => Probability::parse(s),
        other => Err(Error::Document(format!(
            "{field}: probabilities must be decimal strings, got `{other}`"
        ))),
    }
}

fn argument(tid: &str, raw: &Json, tag: Option<DomainTag>) -> Result<Value> {
    match (raw, tag) {
        (Json::String(s), Some(DomainTag::Numeric)) => Ok(Value::Num(parse_rational(s)?)),
        (Json::String(s), _) => Ok(Value::Sym(s.clone())),
        (Json::Number(n), Some(DomainTag::Symbolic)) => Ok(Value::Sym(n.to_string())),
        (Json::Number(n), _) => Ok(Value::Num(parse_rational(&n.to_string())?)),
        (other, _) => Err(Error::Document(format!("tuple `{tid}`: unsupported argument `{other}`"))),
    }
}

/// Parses a PDB document.
pub fn pdb_from_json(text: &str) -> Result<Pdb> {
    pdb_from_json_with_limits(text, Limits::default())
}

pub fn pdb_from_json_with_limits(text: &str, limits: Limits) -> Result<Pdb> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
    let mut schema = Schema::new();
    for (name, entry) in doc.schema {
        let rel = match entry {
            SchemaEntry::Arity(arity) => RelationSchema::untyped(arity),
            SchemaEntry::Typed { arity, domains } => {
                if let Some(d) = &domains {
                    if d.len() != arity {
                        return Err(Error::Document(format!(
                            "schema `{name}`: {} domain tags for arity {arity}",
                            d.len()
                        )));
                    }
                }
                RelationSchema { arity, domains }
            }
        };
        schema.insert(name, rel);
    }
    let mut tuples = Vec::with_capacity(doc.tuples.len());
    for t in doc.tuples {
        let tags = schema.get(&t.predicate).and_then(|r| r.domains.clone());
        let args = t
            .args
            .iter()
            .enumerate()
            .map(|(i, a)| argument(&t.tid, a, tags.as_ref().and_then(|d| d.get(i).copied())))
            .collect::<Result<Vec<_>>>()?;
        tuples.push(TupleRecord {
            tid: TupleId::new(t.tid),
            predicate: t.predicate,
            args,
            kind: t.kind,
        });
    }
    let instance = Arc::new(Instance::new(schema, tuples)?.with_limits(limits));
    match (doc.worlds, doc.marginals) {
        (Some(worlds), None) => {
            let mut entries = Vec::with_capacity(worlds.len());
            for (i, w) in worlds.into_iter().enumerate() {
                let p = probability(&format!("worlds[{i}]"), &w.p)?;
                entries.push((w.tids.into_iter().map(TupleId::new).collect(), p));
            }
            Pdb::explicit_from_tids(instance, entries)
        }
        (None, Some(marginals)) => {
            let mut map = BTreeMap::new();
            for (tid, raw) in marginals {
                let p = probability(&format!("marginals.{tid}"), &raw)?;
                map.insert(TupleId::new(tid), p);
            }
            Pdb::independent_from_map(instance, map)
        }
        _ => Err(Error::Document(
            "exactly one of `worlds` or `marginals` must be given".into(),
        )),
    }
}

#[derive(Serialize)]
struct TupleOut<'a> {
    tid: &'a str,
    predicate: &'a str,
    args: Vec<Json>,
    kind: TupleKind,
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Sym(s) => Json::String(s.clone()),
        Value::Num(n) if n.is_integer() => Json::String(n.numer().to_string()),
        Value::Num(n) => Json::String(to_fraction_string(n)),
    }
}

/// Serializes a PDB back into the document format with exact probabilities.
pub fn pdb_to_json(pdb: &Pdb) -> Json {
    let inst = pdb.instance();
    let schema: BTreeMap<&str, Json> = inst
        .schema()
        .iter()
        .map(|(name, rel)| {
            let entry = match &rel.domains {
                None => json!(rel.arity),
                Some(d) => json!({ "arity": rel.arity, "domains": d }),
            };
            (name.as_str(), entry)
        })
        .collect();
    let tuples: Vec<TupleOut> = inst
        .tuples()
        .iter()
        .map(|t| TupleOut {
            tid: t.tid.as_str(),
            predicate: &t.predicate,
            args: t.args.iter().map(value_json).collect(),
            kind: t.kind,
        })
        .collect();
    match pdb.representation() {
        Representation::Explicit(ew) => {
            let worlds: Vec<Json> = ew
                .worlds()
                .iter()
                .map(|w| {
                    let tids: Vec<&str> = w.world.iter().map(|i| inst.tid(i).as_str()).collect();
                    json!({ "tids": tids, "p": to_fraction_string(&w.mass) })
                })
                .collect();
            json!({ "schema": schema, "tuples": tuples, "worlds": worlds })
        }
        Representation::Independent(m) => {
            let marginals: BTreeMap<&str, String> = m
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.as_ref().map(|p| (inst.tid(i).as_str(), p.to_string())))
                .collect();
            json!({ "schema": schema, "tuples": tuples, "marginals": marginals })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, ratio};

    const TABLE2: &str = r#"{
        "schema": {"E": 2},
        "tuples": [
            {"tid": "t1", "predicate": "E", "args": ["a", "b"]},
            {"tid": "t2", "predicate": "E", "args": ["a", "c"]},
            {"tid": "t3", "predicate": "E", "args": ["c", "b"]}
        ],
        "worlds": [
            {"tids": ["t1", "t3"], "p": "0.25"},
            {"tids": ["t2"], "p": "3/4"}
        ]
    }"#;

    #[test]
    fn loads_explicit_worlds() {
        let pdb = pdb_from_json(TABLE2).unwrap();
        assert!(pdb.validate().is_empty());
        assert_eq!(pdb.tuple_probability_of(&"t1".into()).unwrap(), ratio(1, 4));
    }

    #[test]
    fn rejects_float_probabilities() {
        let text = TABLE2.replace("\"0.25\"", "0.25");
        assert!(matches!(pdb_from_json(&text), Err(Error::Document(_))));
    }

    #[test]
    fn requires_exactly_one_distribution() {
        let text = TABLE2.replace("\"worlds\"", "\"marginals\": {}, \"worlds\"");
        assert!(pdb_from_json(&text).is_err());
    }

    #[test]
    fn numeric_domains() {
        let text = r#"{
            "schema": {"S": {"arity": 2, "domains": ["symbolic", "numeric"]}},
            "tuples": [
                {"tid": "t7", "predicate": "S", "args": ["a", "1"]},
                {"tid": "t8", "predicate": "S", "args": ["a", 2.5], "kind": "exogenous"}
            ],
            "marginals": {"t7": "0.5", "t8": "1"}
        }"#;
        let pdb = pdb_from_json(text).unwrap();
        let inst = pdb.instance();
        assert_eq!(inst.tuple(0).args[1], Value::Num(int(1)));
        assert_eq!(inst.tuple(1).args[1], Value::Num(ratio(5, 2)));
        assert!(inst.is_exogenous(1));
    }

    #[test]
    fn unknown_tid_in_world_is_an_error() {
        let text = TABLE2.replace("[\"t2\"]", "[\"t9\"]");
        assert!(matches!(pdb_from_json(&text), Err(Error::UnknownTuple(_))));
    }

    #[test]
    fn document_roundtrip() {
        let pdb = pdb_from_json(TABLE2).unwrap();
        let again = pdb_from_json(&pdb_to_json(&pdb).to_string()).unwrap();
        assert_eq!(
            pdb.enumerate_worlds().unwrap(),
            again.enumerate_worlds().unwrap()
        );
    }
}
