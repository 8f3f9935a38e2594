//! The shared evaluation engine: adaptive quadrature over half-plane regions
//! and lines, supremum scans over a height parameter, contour integration
//! along segments, and a small Hermitian eigensolver.
//!
//! All estimates are deterministic: subdivision follows a fixed priority
//! order and results are resummed in creation order before being reported.

pub mod eigen;
pub mod gauss;
mod path;
mod quad1d;
mod quad2d;
pub mod supscan;

pub use path::{integrate_polyline, integrate_segment};
pub use quad1d::{integrate_line, integrate_line_subdivided, LineDomain};
pub use quad2d::integrate_area;
pub use supscan::{sup_over_y, ProbeValue, SupOutcome, SupScanConfig};

use num_complex::Complex64;

use crate::error::{MslabError, Result};

/// Integration domain in the closed upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]` with `y0 >= 0`.
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// `{ r_lo <= |z| <= r_hi, Im z >= 0 }`; `r_hi` may be infinite.
    HalfAnnulus { r_lo: f64, r_hi: f64 },
    /// The whole upper half-plane (improper).
    UpperHalfPlane,
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        let mut reasons = Vec::new();
        match *self {
            Region::Rectangle { x0, x1, y0, y1 } => {
                if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
                    reasons.push("rectangle bounds must be finite".to_string());
                }
                if x0 >= x1 {
                    reasons.push(format!("rectangle needs x0 < x1 (got {x0} >= {x1})"));
                }
                if y0 < 0.0 {
                    reasons.push(format!("rectangle needs y0 >= 0 (got {y0})"));
                }
                if y0 >= y1 {
                    reasons.push(format!("rectangle needs y0 < y1 (got {y0} >= {y1})"));
                }
            }
            Region::HalfAnnulus { r_lo, r_hi } => {
                if !r_lo.is_finite() || r_lo < 0.0 {
                    reasons.push(format!("half-annulus needs finite r_lo >= 0 (got {r_lo})"));
                }
                if r_lo >= r_hi {
                    reasons.push(format!("half-annulus needs r_lo < r_hi (got {r_lo} >= {r_hi})"));
                }
            }
            Region::UpperHalfPlane => {}
        }
        if reasons.is_empty() {
            Ok(())
        } else {
            Err(MslabError::BadQuadratureSpec(reasons.join("; ")))
        }
    }

    /// Membership in the closed region.
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            Region::Rectangle { x0, x1, y0, y1 } => {
                z.re >= x0 && z.re <= x1 && z.im >= y0 && z.im <= y1
            }
            Region::HalfAnnulus { r_lo, r_hi } => {
                let r = z.norm();
                z.im >= 0.0 && r >= r_lo && r <= r_hi
            }
            Region::UpperHalfPlane => z.im >= 0.0,
        }
    }

    /// True if the region extends to infinity.
    pub fn is_improper(&self) -> bool {
        match *self {
            Region::Rectangle { .. } => false,
            Region::HalfAnnulus { r_hi, .. } => !r_hi.is_finite(),
            Region::UpperHalfPlane => true,
        }
    }
}

/// Tolerances and budgets for the quadrature engine.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    /// Truncation radius at which improper tails start doubling.
    pub tail_radius: f64,
    pub tail_doubling_rounds: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_depth: 24,
            tail_radius: 64.0,
            tail_doubling_rounds: 28,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let mut reasons = Vec::new();
        if !(self.rel_tol > 0.0) {
            reasons.push(format!("rel_tol must be > 0 (got {})", self.rel_tol));
        }
        if !(self.abs_tol > 0.0) {
            reasons.push(format!("abs_tol must be > 0 (got {})", self.abs_tol));
        }
        if self.max_depth < 1 {
            reasons.push("max_depth must be >= 1".to_string());
        }
        if !(self.tail_radius > 0.0) {
            reasons.push(format!("tail_radius must be > 0 (got {})", self.tail_radius));
        }
        if reasons.is_empty() {
            Ok(())
        } else {
            Err(MslabError::BadQuadratureSpec(reasons.join("; ")))
        }
    }

    /// The acceptance threshold for a value of the given magnitude.
    pub fn threshold(&self, magnitude: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * magnitude)
    }
}

/// Outcome of one quadrature call.
#[derive(Debug, Clone, Copy)]
pub struct IntegralResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evaluations: u64,
}

impl IntegralResult {
    /// Real part of the value; criterion integrands are real.
    pub fn real(&self) -> f64 {
        self.value.re
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.value *= c;
        self.error_estimate *= c.abs();
        self
    }

    pub fn map_err_to_nonconvergence(self, what: &str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(MslabError::NonConvergence {
                detail: format!(
                    "{what}: error estimate {:.3e} above tolerance after budget exhaustion",
                    self.error_estimate
                ),
            })
        }
    }
}

/// A point the integrand is known to blow up at. Evaluation is skipped inside
/// the exclusion disc and, where geometry allows, a polar patch around the
/// point is integrated separately.
#[derive(Debug, Clone, Copy)]
pub struct SingularPoint {
    pub at: Complex64,
    pub exclusion: f64,
}

impl SingularPoint {
    pub const DEFAULT_EXCLUSION: f64 = 1e-6;

    pub fn new(at: Complex64) -> Self {
        SingularPoint { at, exclusion: Self::DEFAULT_EXCLUSION }
    }

    pub fn with_exclusion(at: Complex64, exclusion: f64) -> Self {
        SingularPoint { at, exclusion }
    }
}
