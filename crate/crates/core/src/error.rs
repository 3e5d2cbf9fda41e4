use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({i}, {j}) outside {nx}x{ny} grid")]
    Index { i: usize, j: usize, nx: usize, ny: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("flux magnitude {t} lies on the transition set ū = {ubar}")]
    Transition { t: f64, ubar: f64 },

    #[error("invalid state: {0}")]
    State(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("boundary specification error: {0}")]
    BoundarySpec(String),

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
