//! Decay verdicts shared by the criterion profiles.
//!
//! Every compactness-style criterion here produces a finite sequence of
//! nonnegative values and asks whether the tail behaves like a vanishing
//! sequence. A truncated sequence can never prove that, so the reading is
//! deliberately three-valued and the thresholds are pinned in one place.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Undecided,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Consistent => write!(f, "consistent"),
            Verdict::Inconsistent => write!(f, "inconsistent"),
            Verdict::Undecided => write!(f, "undecided"),
        }
    }
}

impl Verdict {
    /// Conjunction of two readings: divergence anywhere dominates, and
    /// a joint claim of consistency needs both parts.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Inconsistent, _) | (_, Inconsistent) => Inconsistent,
            (Consistent, Consistent) => Consistent,
            _ => Undecided,
        }
    }
}

/// Read a decay verdict off a finite sequence of criterion values.
///
/// A diverging entry settles the matter; a failed entry leaves it open.
/// Otherwise the tail (up to three final steps) must be non-increasing
/// and the last value must have fallen to half the maximum before the
/// sequence is called consistent with decay; a tail still at its maximum
/// and rising is called inconsistent. Everything else stays undecided.
pub fn read_decay(values: &[f64], any_divergent: bool, any_failed: bool) -> Verdict {
    if any_divergent {
        return Verdict::Inconsistent;
    }
    if any_failed || values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Verdict::Undecided;
    }
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max == 0.0 {
        return Verdict::Consistent;
    }
    if values.len() < 2 {
        return Verdict::Undecided;
    }
    let last = *values.last().unwrap();
    let steps = (values.len() - 1).min(3);
    let tail_decreasing = values.windows(2).rev().take(steps).all(|w| w[1] <= w[0]);
    if tail_decreasing && last <= 0.5 * max {
        Verdict::Consistent
    } else if last >= 0.9 * max && last >= values[values.len() - 2] {
        Verdict::Inconsistent
    } else {
        Verdict::Undecided
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_dominates() {
        assert_eq!(read_decay(&[1.0, 0.1], true, false), Verdict::Inconsistent);
        assert_eq!(Verdict::Consistent.and(Verdict::Inconsistent), Verdict::Inconsistent);
    }

    #[test]
    fn failures_leave_it_open() {
        assert_eq!(read_decay(&[1.0, 0.1], false, true), Verdict::Undecided);
        assert_eq!(read_decay(&[1.0, f64::NAN], false, false), Verdict::Undecided);
        assert_eq!(Verdict::Consistent.and(Verdict::Undecided), Verdict::Undecided);
    }

    #[test]
    fn threshold_rules() {
        assert_eq!(read_decay(&[], false, false), Verdict::Undecided);
        assert_eq!(read_decay(&[0.0, 0.0], false, false), Verdict::Consistent);
        assert_eq!(read_decay(&[5.0], false, false), Verdict::Undecided);
        assert_eq!(read_decay(&[1.0, 0.6, 0.3], false, false), Verdict::Consistent);
        assert_eq!(read_decay(&[1.0, 0.9, 0.8], false, false), Verdict::Undecided);
        assert_eq!(read_decay(&[0.5, 0.7, 1.0], false, false), Verdict::Inconsistent);
        assert_eq!(read_decay(&[1.0, 0.2, 0.6], false, false), Verdict::Undecided);
        assert_eq!(Verdict::Consistent.and(Verdict::Consistent), Verdict::Consistent);
    }
}
