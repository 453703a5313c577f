use thiserror::Error;

pub type Result<T> = std::result::Result<T, HopacError>;

#[derive(Debug, Error)]
pub enum HopacError {
    /// An argument fell outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested dependence level cannot be reached by the family.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("nesting condition violated between fork {parent} and fork {child}")]
    NestingCondition { parent: usize, child: usize },

    #[error("structures differ: {0}")]
    StructureMismatch(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
