//! Supremum of a nonnegative quantity over horizontal lines.
//!
//! Probes a dyadic grid of heights (including the boundary line), then
//! refines around the best bracket by golden-section search. Values above
//! the ceiling, probes that hit a singularity, and probes whose own
//! integral diverges all surface as `Divergent` at the offending height.
//! The reported supremum is a maximum of probe values, so it never falls
//! below anything actually sampled.

use crate::error::{MslabError, Result};

/// Probe grid and refinement budget for a sup scan.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SupScanConfig {
    pub y_min: f64,
    pub y_max: f64,
    /// A probe above this is treated as divergent.
    pub ceiling: f64,
    pub refine_iters: u32,
}

impl Default for SupScanConfig {
    fn default() -> Self {
        SupScanConfig {
            y_min: (2.0f64).powi(-10),
            y_max: 65_536.0,
            ceiling: 1e9,
            refine_iters: 160,
        }
    }
}

impl SupScanConfig {
    pub fn validate(&self) -> Result<()> {
        let mut reasons = Vec::new();
        if !(self.y_min > 0.0) {
            reasons.push(format!("y_min must be > 0 (got {})", self.y_min));
        }
        if !(self.y_max > self.y_min) {
            reasons.push(format!(
                "y_max must exceed y_min (got {} <= {})",
                self.y_max, self.y_min
            ));
        }
        if !(self.ceiling > 0.0) {
            reasons.push(format!("ceiling must be > 0 (got {})", self.ceiling));
        }
        if reasons.is_empty() {
            Ok(())
        } else {
            Err(MslabError::Config(reasons.join("; ")))
        }
    }
}

/// One probe of the scanned quantity at a fixed height.
#[derive(Debug, Clone, Copy)]
pub struct ProbeValue {
    pub value: f64,
    pub converged: bool,
}

/// Result of a completed scan.
#[derive(Debug, Clone, Copy)]
pub struct SupOutcome {
    pub sup: f64,
    pub arg_y: f64,
    /// The grid maximum sat on the outermost height, so the scan cannot
    /// rule out further growth beyond `y_max`.
    pub not_decided_at_tail: bool,
    pub probes: u64,
    /// The probe attaining the supremum did not converge internally.
    pub max_probe_unconverged: bool,
}

struct Tracker<F> {
    probe: F,
    ceiling: f64,
    count: u64,
    best: f64,
    best_y: f64,
    best_unconverged: bool,
}

impl<F: FnMut(f64) -> Result<ProbeValue>> Tracker<F> {
    fn sample(&mut self, y: f64) -> Result<f64> {
        self.count += 1;
        let pv = match (self.probe)(y) {
            Ok(pv) => pv,
            Err(MslabError::SingularityOnGrid { .. }) | Err(MslabError::PoleHit { .. }) => {
                return Err(MslabError::Divergent { at: y, value: f64::INFINITY });
            }
            Err(MslabError::Divergent { value, .. }) => {
                return Err(MslabError::Divergent { at: y, value });
            }
            Err(e) => return Err(e),
        };
        if !pv.value.is_finite() || pv.value > self.ceiling {
            return Err(MslabError::Divergent { at: y, value: pv.value });
        }
        if pv.value > self.best {
            self.best = pv.value;
            self.best_y = y;
            self.best_unconverged = !pv.converged;
        }
        Ok(pv.value)
    }
}

/// Scan `probe` over heights `y >= 0` and return its largest observed value
/// after local refinement. `hint` extends the dyadic grid beyond the
/// configured `y_max` when the caller knows the relevant scale is larger.
pub fn sup_over_y<F: FnMut(f64) -> Result<ProbeValue>>(
    probe: F,
    hint: f64,
    cfg: &SupScanConfig,
) -> Result<SupOutcome> {
    cfg.validate()?;
    let mut tracker = Tracker {
        probe,
        ceiling: cfg.ceiling,
        count: 0,
        best: f64::NEG_INFINITY,
        best_y: 0.0,
        best_unconverged: false,
    };

    let top = cfg.y_max.max(2.0 * hint);
    let mut grid = vec![0.0];
    let mut y = cfg.y_min;
    while y <= top {
        grid.push(y);
        y *= 2.0;
    }

    let mut values = Vec::with_capacity(grid.len());
    for &y in &grid {
        values.push(tracker.sample(y)?);
    }

    let mut best_idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best_idx] {
            best_idx = i;
        }
    }
    let not_decided_at_tail = best_idx == grid.len() - 1;

    let lo = if best_idx == 0 { grid[0] } else { grid[best_idx - 1] };
    let hi = if best_idx == grid.len() - 1 { grid[best_idx] } else { grid[best_idx + 1] };

    if hi > lo {
        golden_refine(&mut tracker, lo, hi, cfg.refine_iters)?;
    }

    Ok(SupOutcome {
        sup: tracker.best,
        arg_y: tracker.best_y,
        not_decided_at_tail,
        probes: tracker.count,
        max_probe_unconverged: tracker.best_unconverged,
    })
}

fn golden_refine<F: FnMut(f64) -> Result<ProbeValue>>(
    tracker: &mut Tracker<F>,
    mut lo: f64,
    mut hi: f64,
    iters: u32,
) -> Result<()> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = tracker.sample(x1)?;
    let mut f2 = tracker.sample(x2)?;
    for _ in 0..iters {
        if hi - lo < 1e-12 * (1.0 + hi) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = tracker.sample(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = tracker.sample(x1)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ok(value: f64) -> Result<ProbeValue> {
        Ok(ProbeValue { value, converged: true })
    }

    #[test]
    fn finds_interior_maximum() {
        let out = sup_over_y(|y| ok(y * (-y).exp()), 0.0, &SupScanConfig::default()).unwrap();
        assert_relative_eq!(out.sup, (-1.0f64).exp(), max_relative = 1e-9);
        assert_relative_eq!(out.arg_y, 1.0, max_relative = 1e-4);
        assert!(!out.not_decided_at_tail);
    }

    #[test]
    fn boundary_maximum_is_kept() {
        let out = sup_over_y(|y| ok(1.0 / (1.0 + y)), 0.0, &SupScanConfig::default()).unwrap();
        assert_relative_eq!(out.sup, 1.0, max_relative = 1e-12);
        assert_eq!(out.arg_y, 0.0);
    }

    #[test]
    fn pole_between_grid_points_is_hunted_down() {
        let err = sup_over_y(
            |y| ok(1.0 / ((y - 3.0) * (y - 3.0))),
            0.0,
            &SupScanConfig::default(),
        )
        .unwrap_err();
        match err {
            MslabError::Divergent { at, .. } => assert!((at - 3.0).abs() < 0.5, "at = {at}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rising_tail_is_flagged() {
        let out = sup_over_y(|y| ok(y.atan()), 0.0, &SupScanConfig::default()).unwrap();
        assert!(out.not_decided_at_tail);
    }

    #[test]
    fn probe_errors_propagate() {
        let err = sup_over_y(
            |y| {
                if y > 1.0 {
                    Err(MslabError::RangeViolation { x: 0.0, y, im: -1.0 })
                } else {
                    ok(y)
                }
            },
            0.0,
            &SupScanConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MslabError::RangeViolation { .. }));
    }
}
