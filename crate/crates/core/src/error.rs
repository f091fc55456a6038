use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate local operator: image of the state is the zero vector")]
    DegenerateOperator,

    /// A singular value sits too close to the null-space threshold to call.
    #[error(
        "indeterminate null-space dimension for group {group}: singular value {singular_value:e} \
         is within 10x of threshold {threshold:e}"
    )]
    Indeterminate {
        group: String,
        singular_value: f64,
        threshold: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
