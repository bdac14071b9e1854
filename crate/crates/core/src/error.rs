//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument: unknown point id, mismatched lengths, invalid range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scale-restricted supremum has no pairs to range over.
    #[error("empty scale: fewer than {needed} points outside the ball of radius {scale}")]
    EmptyScale { scale: f64, needed: usize },

    /// A builder could not honor its construction contract.
    #[error("construction failed: {0}")]
    Construction(String),

    /// A space with too few points to carry a metric.
    #[error("degenerate space: {0}")]
    DegenerateSpace(String),

    /// Product or cache size exceeds the configured cap.
    #[error("resource cap exceeded: {what} needs {required}, cap is {cap}")]
    ResourceCap {
        what: String,
        required: usize,
        cap: usize,
    },

    /// A vertex is unreachable in a graph metric.
    #[error("connectivity error: vertex {from} cannot reach vertex {to}")]
    Connectivity { from: usize, to: usize },

    /// A stated hypothesis fails on the sample; carries a witness.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Serialized document does not match the expected schema.
    #[error("schema violation: {0}")]
    Schema(String),
}
