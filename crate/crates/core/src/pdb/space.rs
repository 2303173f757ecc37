//! Probability spaces over possible worlds.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use super::instance::{Instance, TupleId, TupleSet};
use crate::error::{Error, Result};
use crate::exact::{to_fraction_string, Probability, Rational};

/// A world together with its probability mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedWorld {
    pub world: TupleSet,
    pub mass: Rational,
}

/// Explicitly listed worlds, merged by set and kept in canonical order
/// (lexicographic over sorted tuple lists).
#[derive(Debug, Clone)]
pub struct ExplicitWorlds {
    worlds: Vec<WeightedWorld>,
    lookup: HashMap<TupleSet, usize>,
}

impl ExplicitWorlds {
    fn new(entries: impl IntoIterator<Item = (TupleSet, Rational)>) -> Self {
        let mut merged: HashMap<TupleSet, Rational> = HashMap::new();
        for (world, mass) in entries {
            *merged.entry(world).or_insert_with(Rational::zero) += mass;
        }
        let mut worlds: Vec<WeightedWorld> = merged
            .into_iter()
            .map(|(world, mass)| WeightedWorld { world, mass })
            .collect();
        worlds.sort_by_cached_key(|w| w.world.indices());
        let lookup = worlds.iter().enumerate().map(|(i, w)| (w.world.clone(), i)).collect();
        Self { worlds, lookup }
    }

    pub fn worlds(&self) -> &[WeightedWorld] {
        &self.worlds
    }

    pub fn mass_of(&self, world: &TupleSet) -> Rational {
        self.lookup
            .get(world)
            .map(|&i| self.worlds[i].mass.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn total_mass(&self) -> Rational {
        self.worlds.iter().map(|w| &w.mass).sum()
    }
}

#[derive(Debug, Clone)]
pub enum Representation {
    Explicit(ExplicitWorlds),
    /// Marginal per tuple index; `None` marks a missing entry.
    Independent(Vec<Option<Probability>>),
}

/// A probabilistic database `⟨W, p⟩` over an instance.
#[derive(Debug, Clone)]
pub struct Pdb {
    instance: Arc<Instance>,
    repr: Representation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    MassNotOne,
    ExogenousMissing,
    ExogenousMarginal,
    MissingMarginal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: ViolationKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tid: Option<TupleId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<Vec<TupleId>>,
}

impl Pdb {
    /// Builds an explicit-worlds space; duplicate worlds are merged by summing.
    pub fn explicit(instance: impl Into<Arc<Instance>>, worlds: Vec<(TupleSet, Probability)>) -> Self {
        Self {
            instance: instance.into(),
            repr: Representation::Explicit(ExplicitWorlds::new(
                worlds.into_iter().map(|(w, p)| (w, p.into_inner())),
            )),
        }
    }

    pub fn explicit_from_tids(
        instance: impl Into<Arc<Instance>>,
        worlds: Vec<(Vec<TupleId>, Probability)>,
    ) -> Result<Self> {
        let instance = instance.into();
        let mut entries = Vec::with_capacity(worlds.len());
        for (tids, p) in worlds {
            entries.push((instance.set_of(tids)?, p));
        }
        Ok(Self::explicit(instance, entries))
    }

    pub(crate) fn explicit_raw(instance: Arc<Instance>, worlds: impl IntoIterator<Item = (TupleSet, Rational)>) -> Self {
        Self {
            instance,
            repr: Representation::Explicit(ExplicitWorlds::new(worlds)),
        }
    }

    pub fn independent(instance: impl Into<Arc<Instance>>, marginals: Vec<Option<Probability>>) -> Self {
        let instance = instance.into();
        assert_eq!(marginals.len(), instance.len(), "one marginal slot per tuple");
        Self {
            instance,
            repr: Representation::Independent(marginals),
        }
    }

    pub fn independent_from_map(
        instance: impl Into<Arc<Instance>>,
        marginals: BTreeMap<TupleId, Probability>,
    ) -> Result<Self> {
        let instance = instance.into();
        let mut slots = vec![None; instance.len()];
        for (tid, p) in marginals {
            slots[instance.index_of(&tid)?] = Some(p);
        }
        Ok(Self::independent(instance, slots))
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn shared_instance(&self) -> Arc<Instance> {
        Arc::clone(&self.instance)
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn is_tuple_independent(&self) -> bool {
        matches!(self.repr, Representation::Independent(_))
    }

    pub fn marginals(&self) -> Option<&[Option<Probability>]> {
        match &self.repr {
            Representation::Independent(m) => Some(m),
            Representation::Explicit(_) => None,
        }
    }

    pub fn marginal(&self, index: usize) -> Result<&Probability> {
        match &self.repr {
            Representation::Independent(m) => m[index]
                .as_ref()
                .ok_or_else(|| Error::MissingMarginal(self.instance.tid(index).to_string())),
            Representation::Explicit(_) => Err(Error::NotTupleIndependent),
        }
    }

    /// Reports every violated invariant; an empty list means the space is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let inst = &self.instance;
        let mut out = Vec::new();
        match &self.repr {
            Representation::Explicit(ew) => {
                let total = ew.total_mass();
                if !total.is_one() {
                    out.push(Diagnostic {
                        kind: ViolationKind::MassNotOne,
                        message: format!("world masses sum to {}, not 1", to_fraction_string(&total)),
                        tid: None,
                        world: None,
                    });
                }
                for w in ew.worlds() {
                    if w.mass.is_zero() || inst.exogenous().is_subset(&w.world) {
                        continue;
                    }
                    let mut missing = inst.exogenous().clone();
                    missing.difference_with(&w.world);
                    for i in missing.iter() {
                        out.push(Diagnostic {
                            kind: ViolationKind::ExogenousMissing,
                            message: format!(
                                "world {} has mass {} but omits exogenous tuple {}",
                                inst.describe(&w.world),
                                to_fraction_string(&w.mass),
                                inst.tid(i)
                            ),
                            tid: Some(inst.tid(i).clone()),
                            world: Some(inst.tids_of(&w.world)),
                        });
                    }
                }
            }
            Representation::Independent(marginals) => {
                for (i, m) in marginals.iter().enumerate() {
                    let tid = inst.tid(i);
                    match m {
                        None => out.push(Diagnostic {
                            kind: ViolationKind::MissingMarginal,
                            message: format!("no marginal for tuple {tid}"),
                            tid: Some(tid.clone()),
                            world: None,
                        }),
                        Some(p) if inst.is_exogenous(i) && !p.is_one() => out.push(Diagnostic {
                            kind: ViolationKind::ExogenousMarginal,
                            message: format!("exogenous tuple {tid} has marginal {p}, expected 1"),
                            tid: Some(tid.clone()),
                            world: None,
                        }),
                        Some(_) => {}
                    }
                }
            }
        }
        out
    }

    /// `p(W)`: the stored mass, or the product of marginals for a TID.
    pub fn world_probability(&self, world: &TupleSet) -> Result<Rational> {
        match &self.repr {
            Representation::Explicit(ew) => Ok(ew.mass_of(world)),
            Representation::Independent(_) => {
                let mut p = Rational::one();
                for i in 0..self.instance.len() {
                    let m = self.marginal(i)?;
                    if world.contains(i) {
                        p *= m.value();
                    } else {
                        p *= m.complement().value();
                    }
                    if p.is_zero() {
                        break;
                    }
                }
                Ok(p)
            }
        }
    }

    pub fn world_probability_of(&self, tids: &[TupleId]) -> Result<Rational> {
        let world = self.instance.set_of(tids.iter().cloned())?;
        self.world_probability(&world)
    }

    /// `P(τ) = Σ_{W ∋ τ} p(W)`.
    pub fn tuple_probability(&self, index: usize) -> Result<Rational> {
        match &self.repr {
            Representation::Explicit(ew) => Ok(ew
                .worlds()
                .iter()
                .filter(|w| w.world.contains(index))
                .map(|w| &w.mass)
                .sum()),
            Representation::Independent(_) => Ok(self.marginal(index)?.value().clone()),
        }
    }

    pub fn tuple_probability_of(&self, tid: &TupleId) -> Result<Rational> {
        self.tuple_probability(self.instance.index_of(tid)?)
    }

    /// Tuples whose TID marginal is strictly between 0 and 1.
    fn free_tuples(&self, marginals: &[Option<Probability>]) -> Result<(Vec<usize>, TupleSet)> {
        let mut free = Vec::new();
        let mut forced = self.instance.empty_set();
        for (i, m) in marginals.iter().enumerate() {
            let m = m
                .as_ref()
                .ok_or_else(|| Error::MissingMarginal(self.instance.tid(i).to_string()))?;
            if m.is_one() {
                forced.insert(i);
            } else if !m.is_zero() {
                free.push(i);
            }
        }
        Ok((free, forced))
    }

    /// Number of worlds the enumerator would visit, as a count of free
    /// endogenous tuples for TIDs. Checked against the instance cap.
    pub fn check_enumerable(&self) -> Result<()> {
        if let Representation::Independent(m) = &self.repr {
            let (free, _) = self.free_tuples(m)?;
            self.instance.limits().check(free.len())?;
        }
        Ok(())
    }

    /// Visits every world of nonzero mass exactly once. The visiting order is
    /// deterministic but not canonical; use [`Pdb::enumerate_worlds`] for that.
    pub fn for_each_world(&self, mut visit: impl FnMut(&TupleSet, &Rational)) -> Result<()> {
        match &self.repr {
            Representation::Explicit(ew) => {
                for w in ew.worlds().iter().filter(|w| !w.mass.is_zero()) {
                    visit(&w.world, &w.mass);
                }
            }
            Representation::Independent(marginals) => {
                let (free, forced) = self.free_tuples(marginals)?;
                self.instance.limits().check(free.len())?;
                let probs: Vec<&Probability> = free.iter().map(|&i| marginals[i].as_ref().unwrap()).collect();
                let mut world = forced;
                descend(&free, &probs, 0, &mut world, &Rational::one(), &mut visit);
            }
        }
        Ok(())
    }

    /// All worlds of nonzero mass in canonical order.
    pub fn enumerate_worlds(&self) -> Result<Vec<WeightedWorld>> {
        let mut out = Vec::new();
        self.for_each_world(|w, m| {
            out.push(WeightedWorld {
                world: w.clone(),
                mass: m.clone(),
            })
        })?;
        if self.is_tuple_independent() {
            out.sort_by_cached_key(|w| w.world.indices());
        }
        Ok(out)
    }

    pub(crate) fn with_representation(&self, repr: Representation) -> Self {
        Self {
            instance: Arc::clone(&self.instance),
            repr,
        }
    }
}

fn descend(
    free: &[usize],
    probs: &[&Probability],
    depth: usize,
    world: &mut TupleSet,
    mass: &Rational,
    visit: &mut impl FnMut(&TupleSet, &Rational),
) {
    if depth == free.len() {
        visit(world, mass);
        return;
    }
    let p = probs[depth].value();
    world.insert(free[depth]);
    descend(free, probs, depth + 1, world, &(mass * p), visit);
    world.remove(free[depth]);
    descend(free, probs, depth + 1, world, &(mass * (Rational::one() - p)), visit);
}

/// The uniform tuple-independent space: ½ for endogenous, 1 for exogenous tuples.
pub fn make_uniform_tid(instance: impl Into<Arc<Instance>>) -> Pdb {
    let instance = instance.into();
    let marginals = (0..instance.len())
        .map(|i| {
            Some(if instance.is_exogenous(i) {
                Probability::one()
            } else {
                Probability::half()
            })
        })
        .collect();
    Pdb::independent(instance, marginals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{parse_rational, ratio};
    use crate::pdb::instance::{RelationSchema, Schema, TupleKind, TupleRecord, Value};
    use proptest::prelude::*;

    fn edge_instance(exogenous: &[&str]) -> Instance {
        let mut schema = Schema::new();
        schema.insert("E".into(), RelationSchema::untyped(2));
        let edges = [("t1", "a", "b"), ("t2", "a", "c"), ("t3", "c", "b"), ("t4", "a", "d"), ("t5", "d", "e"), ("t6", "e", "b")];
        let tuples = edges
            .iter()
            .map(|(t, a, b)| {
                let kind = if exogenous.contains(t) { TupleKind::Exogenous } else { TupleKind::Endogenous };
                TupleRecord::new(t, "E", vec![Value::sym(*a), Value::sym(*b)], kind)
            })
            .collect();
        Instance::new(schema, tuples).unwrap()
    }

    fn p(s: &str) -> Probability {
        Probability::parse(s).unwrap()
    }

    fn table2() -> Pdb {
        let inst = edge_instance(&[]);
        let w = |ids: &[&str]| ids.iter().map(|s| TupleId::new(*s)).collect::<Vec<_>>();
        Pdb::explicit_from_tids(
            inst,
            vec![
                (w(&["t1", "t3", "t4", "t6"]), p("0.20")),
                (w(&["t1", "t2", "t3"]), p("0.25")),
                (w(&["t2", "t3", "t6"]), p("0.15")),
                (w(&["t2", "t6"]), p("0.40")),
            ],
        )
        .unwrap()
    }

    fn section4_like() -> Pdb {
        let inst = edge_instance(&[]);
        let marg = ["0.9", "0.3", "0.8", "0.5", "0.9", "0.2"].iter().map(|s| Some(p(s))).collect();
        Pdb::independent(inst, marg)
    }

    #[test]
    fn table2_is_valid_with_four_worlds() {
        let pdb = table2();
        assert!(pdb.validate().is_empty());
        assert_eq!(pdb.enumerate_worlds().unwrap().len(), 4);
        let w4 = pdb.instance().set_of_strs(&["t2", "t6"]).unwrap();
        assert_eq!(pdb.world_probability(&w4).unwrap(), ratio(2, 5));
    }

    #[test]
    fn table2_tuple_probabilities() {
        let pdb = table2();
        let get = |t: &str| pdb.tuple_probability_of(&t.into()).unwrap();
        assert_eq!(get("t1"), parse_rational("0.45").unwrap());
        assert_eq!(get("t2"), parse_rational("0.8").unwrap());
        assert_eq!(get("t5"), Rational::zero());
        assert_eq!(get("t6"), parse_rational("0.75").unwrap());
    }

    #[test]
    fn mass_deficit_is_reported() {
        let inst = edge_instance(&[]);
        let pdb = Pdb::explicit_from_tids(inst, vec![(vec!["t1".into()], p("0.9"))]).unwrap();
        let d = pdb.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, ViolationKind::MassNotOne);
    }

    #[test]
    fn world_missing_exogenous_is_reported() {
        let inst = edge_instance(&["t2"]);
        let pdb = Pdb::explicit_from_tids(
            inst,
            vec![(vec!["t1".into(), "t2".into()], p("0.5")), (vec!["t1".into()], p("0.5"))],
        )
        .unwrap();
        let d = pdb.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, ViolationKind::ExogenousMissing);
        assert_eq!(d[0].tid.as_ref().unwrap().as_str(), "t2");
        assert_eq!(d[0].world.as_ref().unwrap(), &vec![TupleId::from("t1")]);
    }

    #[test]
    fn duplicates_merge_and_zero_worlds_are_skipped() {
        let inst = edge_instance(&[]);
        let pdb = Pdb::explicit_from_tids(
            inst,
            vec![
                (vec!["t1".into()], p("0.5")),
                (vec!["t1".into()], p("0.5")),
                (vec!["t2".into()], p("0")),
            ],
        )
        .unwrap();
        assert!(pdb.validate().is_empty());
        let worlds = pdb.enumerate_worlds().unwrap();
        assert_eq!(worlds.len(), 1);
        assert!(worlds[0].mass.is_one());
    }

    #[test]
    fn tid_world_probability_product() {
        let pdb = section4_like();
        let w = pdb.instance().set_of_strs(&["t1", "t4", "t5"]).unwrap();
        assert_eq!(pdb.world_probability(&w).unwrap(), parse_rational("0.04536").unwrap());
    }

    #[test]
    fn tid_sure_tuple_absent_gives_zero() {
        let inst = edge_instance(&["t1"]);
        let pdb = make_uniform_tid(inst);
        assert!(pdb.world_probability(&pdb.instance().empty_set()).unwrap().is_zero());
    }

    #[test]
    fn uniform_cube_and_zero_marginal() {
        let inst = edge_instance(&[]);
        let mut m: Vec<Option<Probability>> = vec![Some(Probability::half()); 6];
        m[3] = Some(Probability::one());
        m[4] = Some(Probability::one());
        m[5] = Some(Probability::zero());
        let pdb = Pdb::independent(inst, m);
        let worlds = pdb.enumerate_worlds().unwrap();
        assert_eq!(worlds.len(), 8);
        assert!(worlds.iter().all(|w| w.mass == ratio(1, 8)));
        assert!(worlds.iter().all(|w| !w.world.contains(5) && w.world.contains(3)));
    }

    #[test]
    fn only_exogenous_is_a_single_world() {
        let inst = edge_instance(&["t1", "t2", "t3", "t4", "t5", "t6"]);
        let worlds = make_uniform_tid(inst).enumerate_worlds().unwrap();
        assert_eq!(worlds.len(), 1);
        assert!(worlds[0].mass.is_one());
    }

    #[test]
    fn uniform_tid_marks_exogenous_sure() {
        let inst = edge_instance(&["t1"]);
        let pdb = make_uniform_tid(inst);
        let m = pdb.marginals().unwrap();
        assert!(m[0].as_ref().unwrap().is_one());
        assert!(m[1..].iter().all(|x| x.as_ref().unwrap() == &Probability::half()));
        assert!(pdb.validate().is_empty());
    }

    #[test]
    fn tid_diagnostics() {
        let inst = edge_instance(&["t1"]);
        let mut m: Vec<Option<Probability>> = vec![Some(Probability::half()); 6];
        m[2] = None;
        let pdb = Pdb::independent(inst, m);
        let kinds: Vec<ViolationKind> = pdb.validate().iter().map(|d| d.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::ExogenousMarginal, ViolationKind::MissingMarginal]);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = edge_instance(&[]).with_limits(crate::pdb::Limits { max_endogenous: 3 });
        let err = make_uniform_tid(inst).enumerate_worlds().unwrap_err();
        assert_eq!(err, Error::CapExceeded { cap: 3, needed: 6 });
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let pdb = make_uniform_tid(edge_instance(&["t4", "t5", "t6"]));
        let keys: Vec<Vec<usize>> = pdb.enumerate_worlds().unwrap().iter().map(|w| w.world.indices()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    fn marginal_strategy() -> impl Strategy<Value = Probability> {
        (0i64..=6).prop_map(|k| Probability::new(ratio(k, 6)).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tid_mass_and_marginals_are_consistent(ms in proptest::collection::vec(marginal_strategy(), 6)) {
            let pdb = Pdb::independent(edge_instance(&[]), ms.iter().cloned().map(Some).collect());
            let worlds = pdb.enumerate_worlds().unwrap();
            let total: Rational = worlds.iter().map(|w| &w.mass).sum();
            prop_assert!(total.is_one());
            let nondegenerate = ms.iter().filter(|m| !m.is_zero() && !m.is_one()).count();
            prop_assert_eq!(worlds.len(), 1 << nondegenerate);
            for i in 0..6 {
                let via_worlds: Rational = worlds.iter().filter(|w| w.world.contains(i)).map(|w| &w.mass).sum();
                prop_assert_eq!(&via_worlds, &pdb.tuple_probability(i).unwrap());
            }
            for w in &worlds {
                prop_assert_eq!(&pdb.world_probability(&w.world).unwrap(), &w.mass);
            }
        }

        #[test]
        fn explicit_tuple_probability_matches_eq1(
            entries in proptest::collection::vec((0u64..64, 1i64..10), 1..8)
        ) {
            let inst = Arc::new(edge_instance(&[]));
            let total: i64 = entries.iter().map(|(_, w)| w).sum();
            let worlds = entries
                .iter()
                .map(|(mask, w)| (inst.world_from_mask(inst.endogenous(), *mask), Probability::new(ratio(*w, total)).unwrap()))
                .collect();
            let pdb = Pdb::explicit(Arc::clone(&inst), worlds);
            prop_assert!(pdb.validate().is_empty());
            let enumerated = pdb.enumerate_worlds().unwrap();
            let sum: Rational = enumerated.iter().map(|w| &w.mass).sum();
            prop_assert!(sum.is_one());
            for i in 0..6 {
                let via: Rational = enumerated.iter().filter(|w| w.world.contains(i)).map(|w| &w.mass).sum();
                prop_assert_eq!(via, pdb.tuple_probability(i).unwrap());
            }
        }
    }
}
