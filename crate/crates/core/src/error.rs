use crate::scenario::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke a structural precondition (connection matrix shape,
    /// routing without a connection, and similar).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid scenario: {}", join_violations(.0))]
    InvalidScenario(Vec<Violation>),

    /// The channel model cannot be linearized or evaluated for the given input.
    #[error("modeling error: {0}")]
    Modeling(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
