use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by knowledge-space construction, estimation and the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A function was used with a space it is not bound to.
    #[error("binding error: {0}")]
    Binding(&'static str),

    #[error("features are linearly dependent ({} near-null direction(s))", null_vectors.len())]
    DependentFeatures { null_vectors: Vec<Vec<f64>> },

    #[error("too few probe points: need at least {needed}, got {got}")]
    TooFewProbes { needed: usize, got: usize },

    #[error("degenerate probe set: rank {probed} on supplied probes, {fresh} on fresh probes")]
    DegenerateProbes { probed: usize, fresh: usize },

    #[error("operator is not positive semidefinite (eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("function is not representable in agent {agent}'s space (residual {residual:e})")]
    NotInAgentSpace { agent: u8, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
