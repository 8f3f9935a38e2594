//! Error types shared by every module of the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, MslabError>;

/// Everything that can go wrong, from parsing an expression to a quadrature
/// hitting an undeclared pole.
#[derive(Debug, Error)]
pub enum MslabError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("evaluation at a pole (z = {at})")]
    PoleHit { at: Complex64 },

    #[error("non-finite value produced at z = {at}")]
    NonFinite { at: Complex64 },

    #[error("integrand blew up at an undeclared singular point near z = {at}")]
    SingularityOnGrid { at: Complex64 },

    #[error("integration path passes through a singular point near z = {at}")]
    SingularityOnPath { at: Complex64 },

    #[error("quadrature failed to converge: {detail}")]
    NonConvergence { detail: String },

    #[error("quantity diverges near parameter {at} (magnitude {value:.3e})")]
    Divergent { at: f64, value: f64 },

    #[error("map leaves the upper half-plane at x = {x}, y = {y} (Im = {im:.3e})")]
    RangeViolation { x: f64, y: f64, im: f64 },

    #[error("operation needs at least two nodes")]
    TooFewPoints,

    #[error("point {at} lies outside the admissible domain: {msg}")]
    DomainViolation { at: Complex64, msg: String },

    #[error("invalid space configuration: {0}")]
    SpaceConfig(String),

    #[error("invalid inner-function configuration: {0}")]
    InnerConfig(String),

    #[error("invalid quadrature settings: {0}")]
    BadQuadratureSpec(String),

    #[error("normalized kernel undefined: the space is degenerate (kernel norm is zero)")]
    DegenerateKernel,

    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:.3e})")]
    NonHermitian { max_asymmetry: f64 },

    #[error("analysis requires a passing verification run: {0}")]
    NotVerified(String),

    #[error("invalid run configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MslabError {
    /// Exit code the command-line tool maps this error to.
    ///
    /// 1 = verification failure, 2 = configuration error, 3 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        use MslabError::*;
        match self {
            NotVerified(_) => 1,
            Syntax { .. } | SpaceConfig(_) | InnerConfig(_) | BadQuadratureSpec(_)
            | Config(_) | TooFewPoints | Io(_) | Json(_) => 2,
            PoleHit { .. } | NonFinite { .. } | SingularityOnGrid { .. }
            | SingularityOnPath { .. } | NonConvergence { .. } | Divergent { .. }
            | RangeViolation { .. } | DomainViolation { .. } | DegenerateKernel
            | NonHermitian { .. } => 3,
        }
    }
}
