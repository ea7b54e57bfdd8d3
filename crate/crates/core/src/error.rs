use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    /// A quadrature needed a node value the sampled function does not provide.
    #[error("missing node value at lattice index i={i}, level n={n}")]
    MissingNode { i: i64, n: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{0}")]
    Domain(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
