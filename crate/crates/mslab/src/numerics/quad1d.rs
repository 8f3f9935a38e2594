//! Adaptive integration along horizontal lines.
//!
//! Finite intervals are covered by Gauss-Kronrod 7/15 panels refined
//! worst-first; unbounded domains get a truncated core plus dyadically
//! doubled tail windows until the newest window is negligible.
//!
//! Integrands are plain closures returning `Complex64`. Callers mapping a
//! fallible evaluator should return NaN on failure; a non-finite sample is
//! reported as `SingularityOnGrid` at that abscissa.

use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::gauss::kronrod15;
use super::{IntegralResult, QuadratureSpec};
use crate::error::{MslabError, Result};

/// Domain of a line integral at fixed height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineDomain {
    /// `[a, b]` with finite endpoints.
    Interval(f64, f64),
    /// `[a, +inf)`.
    HalfLine(f64),
    /// All of the real axis.
    FullLine,
}

const MAX_PANELS: usize = 16_384;
const GROWTH_FACTOR: f64 = 1.3;

struct Guard<F> {
    f: F,
    evaluations: u64,
    bad: Option<f64>,
}

impl<F: FnMut(f64) -> Complex64> Guard<F> {
    fn eval(&mut self, x: f64) -> Complex64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            if self.bad.is_none() {
                self.bad = Some(x);
            }
            Complex64::new(0.0, 0.0)
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    depth: u32,
    value: Complex64,
    error: f64,
    alive: bool,
}

#[derive(PartialEq)]
struct HeapEntry {
    error: f64,
    id: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct IntervalOutcome {
    value: Complex64,
    error: f64,
    converged: bool,
}

/// Worst-first panel refinement over the segments delimited by `edges`.
fn adaptive_interval<F: FnMut(f64) -> Complex64>(
    guard: &mut Guard<F>,
    edges: &[f64],
    spec: &QuadratureSpec,
) -> IntervalOutcome {
    let mut pieces: Vec<Piece> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;

    for w in edges.windows(2) {
        let est = kronrod15(|x| guard.eval(x), w[0], w[1]);
        value += est.value;
        error += est.error;
        heap.push(HeapEntry { error: est.error, id: pieces.len() });
        pieces.push(Piece { a: w[0], b: w[1], depth: 0, value: est.value, error: est.error, alive: true });
    }

    let mut capped = false;
    while error > spec.threshold(value.norm()) {
        let Some(top) = heap.pop() else { break };
        let (a, b, depth) = {
            let p = &pieces[top.id];
            (p.a, p.b, p.depth)
        };
        if depth >= spec.max_depth {
            continue;
        }
        if pieces.len() + 2 > MAX_PANELS {
            capped = true;
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            continue;
        }
        let left = kronrod15(|x| guard.eval(x), a, mid);
        let right = kronrod15(|x| guard.eval(x), mid, b);
        value += left.value + right.value - pieces[top.id].value;
        error += left.error + right.error - pieces[top.id].error;
        pieces[top.id].alive = false;
        for est in [(a, mid, left), (mid, b, right)].map(|(lo, hi, e)| Piece {
            a: lo,
            b: hi,
            depth: depth + 1,
            value: e.value,
            error: e.error,
            alive: true,
        }) {
            heap.push(HeapEntry { error: est.error, id: pieces.len() });
            pieces.push(est);
        }
    }

    // Resum in spatial order so the outcome does not depend on refinement
    // history roundoff.
    let mut alive: Vec<&Piece> = pieces.iter().filter(|p| p.alive).collect();
    alive.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = alive.iter().fold(Complex64::new(0.0, 0.0), |acc, p| acc + p.value);
    let error = alive.iter().fold(0.0, |acc, p| acc + p.error);
    IntervalOutcome {
        value,
        error,
        converged: !capped && error <= spec.threshold(value.norm()),
    }
}

fn interior_breaks(a: f64, b: f64, init_subdiv: &[f64]) -> Vec<f64> {
    let mut edges = vec![a];
    let mut interior: Vec<f64> = init_subdiv.iter().copied().filter(|&x| x > a && x < b).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    edges.extend(interior);
    edges.push(b);
    edges
}

/// `integrate_line` with initial panel boundaries at `init_subdiv`, for
/// integrands with known sharp features.
pub fn integrate_line_subdivided<F: FnMut(f64) -> Complex64>(
    f: F,
    line_im: f64,
    domain: LineDomain,
    init_subdiv: &[f64],
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    spec.validate()?;
    let mut guard = Guard { f, evaluations: 0, bad: None };

    let fail_on_bad = |guard: &Guard<F>| -> Result<()> {
        match guard.bad {
            Some(x) => Err(MslabError::SingularityOnGrid { at: Complex64::new(x, line_im) }),
            None => Ok(()),
        }
    };

    match domain {
        LineDomain::Interval(a, b) => {
            if !a.is_finite() || !b.is_finite() || a >= b {
                return Err(MslabError::BadQuadratureSpec(format!(
                    "interval needs finite a < b (got [{a}, {b}])"
                )));
            }
            let edges = interior_breaks(a, b, init_subdiv);
            let out = adaptive_interval(&mut guard, &edges, spec);
            fail_on_bad(&guard)?;
            Ok(IntegralResult {
                value: out.value,
                error_estimate: out.error,
                converged: out.converged,
                evaluations: guard.evaluations,
            })
        }
        LineDomain::HalfLine(a) => {
            if !a.is_finite() {
                return Err(MslabError::BadQuadratureSpec(format!(
                    "half-line origin must be finite (got {a})"
                )));
            }
            let extent = init_subdiv
                .iter()
                .fold(spec.tail_radius, |m, &x| m.max(2.0 * (x - a).abs() + 1.0));
            let core = adaptive_interval(&mut guard, &interior_breaks(a, a + extent, init_subdiv), spec);
            fail_on_bad(&guard)?;
            extend_tails(&mut guard, core, extent, spec, line_im, |w, v| vec![(a + w, a + v)])
        }
        LineDomain::FullLine => {
            let extent = init_subdiv
                .iter()
                .fold(spec.tail_radius, |m, &x| m.max(2.0 * x.abs() + 1.0));
            let core =
                adaptive_interval(&mut guard, &interior_breaks(-extent, extent, init_subdiv), spec);
            fail_on_bad(&guard)?;
            extend_tails(&mut guard, core, extent, spec, line_im, |w, v| {
                vec![(-v, -w), (w, v)]
            })
        }
    }
}

/// Adaptive integral of `f` along `domain` at height `line_im` (the height is
/// used only to locate failures).
pub fn integrate_line<F: FnMut(f64) -> Complex64>(
    f: F,
    line_im: f64,
    domain: LineDomain,
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    integrate_line_subdivided(f, line_im, domain, &[], spec)
}

fn extend_tails<F: FnMut(f64) -> Complex64>(
    guard: &mut Guard<F>,
    core: IntervalOutcome,
    extent: f64,
    spec: &QuadratureSpec,
    line_im: f64,
    windows: impl Fn(f64, f64) -> Vec<(f64, f64)>,
) -> Result<IntegralResult> {
    let mut value = core.value;
    let mut error = core.error;
    let mut converged = core.converged;
    let mut w = extent;
    let mut magnitudes: Vec<f64> = Vec::new();
    let mut settled = false;

    for _ in 0..spec.tail_doubling_rounds {
        let next = 2.0 * w;
        let mut round_value = Complex64::new(0.0, 0.0);
        for (lo, hi) in windows(w, next) {
            let ring = adaptive_interval(guard, &[lo, hi], spec);
            if guard.bad.is_some() {
                let x = guard.bad.unwrap();
                return Err(MslabError::SingularityOnGrid { at: Complex64::new(x, line_im) });
            }
            round_value += ring.value;
            error += ring.error;
            converged &= ring.converged;
        }
        value += round_value;
        let mag = round_value.norm();
        magnitudes.push(mag);
        if mag < spec.threshold(value.norm()) {
            error += mag;
            settled = true;
            break;
        }
        let n = magnitudes.len();
        if n >= 3
            && magnitudes[n - 1] >= GROWTH_FACTOR * magnitudes[n - 2]
            && magnitudes[n - 2] >= GROWTH_FACTOR * magnitudes[n - 3]
        {
            return Err(MslabError::Divergent { at: next, value: value.norm() });
        }
        w = next;
    }

    if !settled {
        converged = false;
        if let Some(&last) = magnitudes.last() {
            error += 4.0 * last;
        }
    }

    Ok(IntegralResult {
        value,
        error_estimate: error,
        converged,
        evaluations: guard.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn interval_matches_closed_form() {
        let r = integrate_line(
            |x| Complex64::new((2.0 * x).sin(), 0.0),
            0.0,
            LineDomain::Interval(0.0, std::f64::consts::PI),
            &spec(),
        )
        .unwrap();
        assert_relative_eq!(r.value.re, 0.0, epsilon = 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn full_line_lorentzian_gives_pi() {
        let r = integrate_line(
            |x| Complex64::new(1.0 / (1.0 + x * x), 0.0),
            0.0,
            LineDomain::FullLine,
            &spec(),
        )
        .unwrap();
        // Tail truncation is allowed to cost up to rel_tol of the value,
        // and the estimate must cover the actual deficit.
        assert_relative_eq!(r.value.re, std::f64::consts::PI, max_relative = 1e-5);
        assert!((std::f64::consts::PI - r.value.re).abs() <= r.error_estimate);
        assert!(r.converged);
    }

    #[test]
    fn half_line_exponential_decay() {
        let r = integrate_line(
            |x| Complex64::new((-x).exp(), 0.0),
            0.0,
            LineDomain::HalfLine(0.0),
            &spec(),
        )
        .unwrap();
        assert_relative_eq!(r.value.re, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn growing_tail_is_divergent() {
        let err = integrate_line(
            |x| Complex64::new(x.abs().sqrt() / (1.0 + x * x).sqrt(), 0.0),
            0.0,
            LineDomain::FullLine,
            &spec(),
        )
        .unwrap_err();
        assert!(matches!(err, MslabError::Divergent { .. }));
    }

    #[test]
    fn nan_sample_is_reported_with_location() {
        let err = integrate_line(
            |x| Complex64::new(1.0 / x, 0.0),
            2.5,
            LineDomain::Interval(-1.0, 1.0),
            &spec(),
        );
        match err {
            Err(MslabError::SingularityOnGrid { at }) => {
                assert_eq!(at.im, 2.5);
                assert_eq!(at.re, 0.0);
            }
            other => panic!("expected singularity report, got {other:?}"),
        }
    }

    #[test]
    fn init_subdiv_respects_sharp_feature() {
        // Narrow Lorentzian spike at x = 0.3 of width 1e-6.
        let eps = 1e-6;
        let f = |x: f64| Complex64::new(eps / ((x - 0.3) * (x - 0.3) + eps * eps), 0.0);
        let hinted = integrate_line_subdivided(
            f,
            0.0,
            LineDomain::Interval(-4.0, 4.0),
            &[0.3 - eps, 0.3, 0.3 + eps, 0.3 - 4.0 * eps, 0.3 + 4.0 * eps],
            &spec(),
        )
        .unwrap();
        // atan is nearly pi/2 on both sides at this width.
        assert_relative_eq!(hinted.value.re, std::f64::consts::PI, max_relative = 1e-5);
    }
}
