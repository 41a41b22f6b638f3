use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not a proper rotation (orthogonality residual {residual:.3e}, det {det:.6})")]
    NotARotation { residual: f64, det: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("kernel basis needs {needed} bytes, over the {budget} byte budget; shrink the config or raise the budget")]
    OverBudget { needed: u64, budget: u64 },

    #[error("equivariance precondition violated: {0}")]
    Precondition(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("training diverged at step {step}: loss is {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("malformed file at byte offset {offset}: {msg}")]
    Malformed { offset: u64, msg: String },

    #[error("config hash mismatch: config hashes to {expected}, params were built for {found}")]
    ConfigHash { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
