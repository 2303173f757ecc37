use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("malformed number `{0}`")]
    Number(String),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityRange(String),
    #[error("invalid PDB document: {0}")]
    Document(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{predicate}` has arity {expected}, found {found} arguments")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("query has free variables: {}", .0.join(", "))]
    FreeVariables(Vec<String>),
    #[error("duplicate tuple id `{0}`")]
    DuplicateTuple(String),
    #[error("unknown tuple id `{0}`")]
    UnknownTuple(String),
    #[error("non-numeric value `{value}` at aggregate target `{variable}`")]
    NonNumeric { variable: String, value: String },
    #[error("unsupported query form: {0}")]
    QueryForm(String),
    #[error("{needed} endogenous tuples exceed the enumeration cap of {cap}")]
    CapExceeded { cap: usize, needed: usize },
    #[error("lifted evaluation rejected: {0} (non-hierarchical self-join-free BCQs are #P-hard on TIDs)")]
    Dichotomy(String),
    #[error("tuple `{0}` is exogenous; interventions and scores apply to endogenous tuples only")]
    Exogenous(String),
    #[error("intervention needs at least one target tuple")]
    EmptyTargets,
    #[error("tuple `{0}` is forced both in and out")]
    ConflictingTargets(String),
    #[error("no marginal probability for tuple `{0}`")]
    MissingMarginal(String),
    #[error("operation requires a tuple-independent PDB")]
    NotTupleIndependent,
    #[error("operation requires a probability distribution, not a plain instance")]
    NeedsDistribution,
    #[error("the power of a set is defined for proper subsets of the endogenous tuples")]
    NotProperSubset,
}

impl Error {
    /// Input errors are malformed or ill-typed requests; everything else is a
    /// domain-level refusal (dichotomy rejection, caps, unusable distributions).
    pub fn is_input(&self) -> bool {
        !matches!(
            self,
            Error::CapExceeded { .. }
                | Error::Dichotomy(_)
                | Error::MissingMarginal(_)
                | Error::NotTupleIndependent
        )
    }
}
