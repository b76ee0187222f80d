use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("invalid variable id `{0}`")]
    InvalidId(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("variable `{var}`, field `{field}`: {message}")]
    Field {
        var: String,
        field: &'static str,
        message: String,
    },

    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<crate::model::Violation>),

    #[error("graph contains a cycle through `{0}`")]
    Cycle(String),

    #[error("order is not a permutation of the graph's nodes: {0}")]
    NotPermutation(String),

    #[error("`{0}` is not a root variable")]
    NotRoot(String),

    #[error("state {state} out of range for `{var}` (cardinality {cardinality})")]
    StateOutOfRange {
        var: String,
        state: usize,
        cardinality: usize,
    },

    #[error("cardinality mismatch for variable {0}")]
    CardinalityMismatch(usize),

    #[error("graph has {nodes} nodes, above the limit of {limit}")]
    TooLarge { nodes: usize, limit: usize },

    #[error("state space of {0} entries exceeds the enumeration guard")]
    StateSpaceTooLarge(u128),

    #[error("evidence has probability zero")]
    ZeroProbabilityEvidence,

    #[error("world index {world} out of range 1..={worlds}")]
    WorldOutOfRange { world: usize, worlds: usize },

    #[error("invalid cross edge: {0}")]
    InvalidCrossEdge(String),

    #[error("jointree carries no world lifting information")]
    MissingEdgeClass,

    #[error("no admissible root for the jointree lifting")]
    NoAdmissibleRoot,

    #[error("invalid jointree: {0}")]
    InvalidJointree(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
