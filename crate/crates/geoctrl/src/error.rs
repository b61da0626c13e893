//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("parse error at {line}:{col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("integration diverged (non-finite state) at t = {t_last}")]
    IntegrationDiverged { t_last: f64 },

    #[error("trajectory left the restriction domain at t = {t_exit}")]
    DomainExit { t_exit: f64 },

    #[error("quotient keep-set must be a proper nonempty subset of coordinates")]
    BadKeepSet,

    #[error("precondition violated: {constraint}")]
    PreconditionViolated { constraint: String },

    #[error("shooting failed to converge; best terminal residual {best_residual}")]
    ShootingFailed { best_residual: f64 },

    #[error("characteristic control degenerate (h1 = h2 = 0) at t = {t}")]
    CharacteristicDegenerate { t: f64 },

    #[error("point is not generic for the prolongation: {msg}")]
    NotAGenericPoint { msg: String },

    #[error("leaf failed to reach the transversal within the flow-time bound; shrink the chart")]
    ChartTooLarge,

    #[error("control is not Lipschitz on the grid: max difference quotient {max_quotient}")]
    NotLipschitz { max_quotient: f64 },

    #[error("map not invertible at sample {index}")]
    NonInvertibleMap { index: usize },

    #[error("unsupported combination: {msg}")]
    Unsupported { msg: String },

    #[error("degenerate frame at the requested point: {msg}")]
    DegeneratePoint { msg: String },
}
