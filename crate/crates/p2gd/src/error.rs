//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input matrix contains NaN or infinite entries.
    #[error("matrix contains non-finite entries")]
    NonFiniteInput,

    /// An objective evaluated to NaN or infinity.
    #[error("objective evaluated to a non-finite value")]
    NonFiniteValue,

    /// Requested truncation rank exceeds `min(m, n)`.
    #[error("truncation rank {requested} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange {
        requested: usize,
        rows: usize,
        cols: usize,
    },

    /// The base point has numerical rank above the variety bound `r`.
    #[error("point has numerical rank {rank} but the variety allows at most {r}")]
    RankExceedsVariety { rank: usize, r: usize },

    /// Matrix dimensions do not match the variety (or each other).
    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    /// Solver parameters violate their constraints.
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    /// An iteration map was applied at a stationary point (`s_f(X) = 0`).
    #[error("iteration map applied at a stationary point")]
    StationaryInput,

    /// Backtracking could not satisfy the sufficient-decrease condition
    /// within the configured number of halvings.
    #[error("backtracking failed to satisfy sufficient decrease after {0} reductions")]
    BacktrackFailed(usize),

    /// No scenario is registered under the given name.
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    /// The scenario has no closed-form oracle for the requested variant.
    #[error("scenario `{0}` has no oracle for variant {1}")]
    NoOracle(String, &'static str),
}
