use thiserror::Error;

/// Errors raised anywhere in the lab.
#[derive(Debug, Error)]
pub enum MaglabError {
    /// A point or element outside the domain where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("numerical blowup: {0}")]
    NumericalBlowup(String),

    #[error("descent stagnated after {iterations} iterations: {diagnostics}")]
    Stagnation { iterations: usize, diagnostics: String },

    #[error("orbit refinement failed: {0}")]
    Refinement(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl MaglabError {
    /// Process exit code: 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            MaglabError::Input(_)
            | MaglabError::Io { .. }
            | MaglabError::Json { .. }
            | MaglabError::Domain(_)
            | MaglabError::Precondition(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, MaglabError>;
