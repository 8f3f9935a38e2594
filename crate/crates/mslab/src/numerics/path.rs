//! Contour integrals along straight segments and polylines.

use num_complex::Complex64;

use super::quad1d::{integrate_line, LineDomain};
use super::{IntegralResult, QuadratureSpec};
use crate::error::{MslabError, Result};

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sqr();
    if len_sq == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * ab.re + (p - a).im * ab.im) / len_sq;
    let t = t.clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Contour integral of `f` along the straight segment from `a` to `b`.
/// Known poles closer to the segment than `1e-9 * (1 + length)` are
/// rejected up front.
pub fn integrate_segment<F: FnMut(Complex64) -> Complex64>(
    mut f: F,
    a: Complex64,
    b: Complex64,
    poles: &[Complex64],
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    let dz = b - a;
    let len = dz.norm();
    if len == 0.0 {
        return Ok(IntegralResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            converged: true,
            evaluations: 0,
        });
    }
    for &p in poles {
        if point_segment_distance(p, a, b) < 1e-9 * (1.0 + len) {
            return Err(MslabError::SingularityOnPath { at: p });
        }
    }
    let out = integrate_line(
        |t| f(a + dz * t) * dz,
        0.0,
        LineDomain::Interval(0.0, 1.0),
        spec,
    );
    match out {
        Err(MslabError::SingularityOnGrid { at }) => {
            Err(MslabError::SingularityOnGrid { at: a + dz * at.re })
        }
        other => other,
    }
}

/// Contour integral along the polyline through `points`, in order.
pub fn integrate_polyline<F: FnMut(Complex64) -> Complex64>(
    mut f: F,
    points: &[Complex64],
    poles: &[Complex64],
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    if points.len() < 2 {
        return Err(MslabError::TooFewPoints);
    }
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut converged = true;
    let mut evaluations = 0;
    for w in points.windows(2) {
        let seg = integrate_segment(&mut f, w[0], w[1], poles, spec)?;
        value += seg.value;
        error += seg.error_estimate;
        converged &= seg.converged;
        evaluations += seg.evaluations;
    }
    Ok(IntegralResult { value, error_estimate: error, converged, evaluations })
}
