//! Numerical workbench for weighted Cauchy-transform spaces on the upper
//! half-plane: boundedness, compactness, and Hilbert-Schmidt criteria for
//! integration and composition operators, cross-checked against direct
//! quadrature.

pub mod composition;
pub mod error;
pub mod hgamma;
pub mod modelspace;
pub mod numerics;
pub mod report;
pub mod symb;
pub mod verdict;
pub mod verify;
pub mod volterra;
pub mod workbench;

pub use error::{MslabError, Result};
