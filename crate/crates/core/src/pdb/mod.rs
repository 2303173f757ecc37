//! Instances, possible-world spaces and their JSON form.

mod instance;
mod json;
mod space;

pub use instance::{
    DomainTag, Instance, Limits, RelationSchema, Schema, TupleId, TupleKind, TupleRecord, TupleSet, Value,
    DEFAULT_MAX_ENDOGENOUS,
};
pub use json::{pdb_from_json, pdb_from_json_with_limits, pdb_to_json};
pub use space::{make_uniform_tid, Diagnostic, ExplicitWorlds, Pdb, Representation, ViolationKind, WeightedWorld};
