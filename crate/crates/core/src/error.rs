use thiserror::Error;

pub type Result<T, E = SspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SspError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("policy is improper: goal unreachable from state {state}")]
    ImproperPolicy { state: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: u64, residual: f64 },

    #[error("confidence parameter must lie in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("invalid arguments: {0}")]
    InvalidArgs(String),

    #[error("confidence box admits no distribution")]
    Infeasible,

    #[error("minimum cost is zero; use the restricted (theta) algorithm instead")]
    MinCostZero,

    #[error("doubling cap of {0} rounds exceeded")]
    DoublingCapExceeded(u32),

    #[error("enumeration of {0} policies exceeds the desk-scale limit")]
    TooLarge(u128),

    #[error("no policy satisfies the hitting-time restriction")]
    NoFeasiblePolicy,

    #[error("state-action pair ({state}, {action}) has no samples")]
    InsufficientSamples { state: usize, action: usize },

    #[error("replication with seed {seed} failed: {source}")]
    Replication {
        seed: u64,
        #[source]
        source: Box<SspError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SspError {
    /// Errors caused by malformed input rather than by an algorithm failing.
    pub fn is_input_error(&self) -> bool {
        if let SspError::Replication { source, .. } = self {
            return source.is_input_error();
        }
        matches!(
            self,
            SspError::InvalidModel(_)
                | SspError::ShapeMismatch { .. }
                | SspError::InvalidDelta(_)
                | SspError::InvalidArgs(_)
                | SspError::Io(_)
                | SspError::Json(_)
                | SspError::Csv(_)
        )
    }
}
