use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: negative weight {weight} for {fact}")]
    NegativeWeight {
        line: usize,
        fact: String,
        weight: f64,
    },

    #[error("duplicate fact {0}")]
    DuplicateFact(String),

    #[error("literal {0} has arity greater than 2")]
    Arity(String),

    #[error("invalid clause `{clause}`: {reason}")]
    InvalidClause { clause: String, reason: String },

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("undefined predicate `{0}`: it has neither facts nor clauses")]
    UndefinedPredicate(String),

    #[error("unknown type `{0}`")]
    UnknownType(String),

    #[error("constant `{name}` is not in the domain of type `{ty}`")]
    UnknownConstant { name: String, ty: String },

    #[error("index {index} out of range for type `{ty}` of size {size}")]
    IndexOutOfRange { index: usize, ty: String, size: usize },

    #[error("type conflict for {what}: `{first}` vs `{second}`")]
    TypeConflict {
        what: String,
        first: String,
        second: String,
    },

    #[error("clause `{0}` is not polytree-limited")]
    NotPolytree(String),

    #[error("rule id `{0}` is used more than once")]
    DuplicateRuleId(String),

    #[error("bad mode `{0}`")]
    BadMode(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in register `{0}`")]
    NonFinite(String),

    #[error("gradient requested without a recorded tape")]
    NoTape,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("answer distribution is undefined: total weight is zero")]
    UndefinedDistribution,

    #[error("proof enumeration exceeded the budget of {0} proofs")]
    ProofBudget(usize),

    #[error("solution for `{0}` leaves query variables unbound")]
    UnboundSolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
