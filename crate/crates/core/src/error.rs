use thiserror::Error;

/// Errors raised by the optimizers, problem families, estimators and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or construction parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a precondition (labels, lengths, ...).
    #[error("data error: {0}")]
    Data(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A gradient or iterate became NaN or infinite.
    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: u64 },

    /// An SGD failure inside a homotopy iteration.
    #[error("homotopy iteration {iteration} (lambda = {lambda}): {source}")]
    Homotopy {
        iteration: usize,
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    /// The requested quantity is undefined at this point.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A bound formula has no admissible value for these constants.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
