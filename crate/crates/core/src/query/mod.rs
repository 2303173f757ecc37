//! Query language, structural analysis, evaluation and probability.

mod analysis;
mod ast;
mod eval;
mod parse;
mod prob;

pub use analysis::{
    classify, components, hierarchy_violation, is_hierarchical, is_self_join_free, Classification, ComponentPartition,
    Verdict,
};
pub use ast::{AggregateOp, Atom, Cq, Query, Term};
pub use eval::{
    eval_aggregate, eval_boolean, eval_query, for_each_homomorphism, minimal_satisfiable_sets, CompiledQuery,
    Conjunction, Disjunction, FnQuery, LinearCombination, MssFamily, QueryOfSet, WorldQuery,
};
pub use parse::{parse_query, parse_query_text};
pub use prob::{
    brute_expectation, expected_value, is_monotone_check, lifted_probability, query_probability, Backend, Evaluation,
    UsedBackend, MONOTONE_CHECK_CAP,
};
