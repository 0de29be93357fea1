use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("false-message transmission ability is undefined: the graph has no normal nodes")]
    NoNormalNodes,

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("closed form is singular: {0}")]
    Singular(String),

    #[error("relative improvement is undefined for a baseline of {0}")]
    UndefinedImprovement(f64),

    #[error("the underlying undirected graph is not a tree")]
    NotATree,

    #[error("enumeration exceeded its budget of {budget} event-tree nodes")]
    BudgetExceeded { budget: usize },
}

impl Error {
    /// Errors caused by exhausting a bounded resource rather than by bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}
