//! Weighted Cauchy-transform spaces built on a finite point set in the
//! closed upper half-plane: admissibility and sparseness diagnostics, the
//! modulus partition of the half-plane into half-annular cells, evaluation,
//! reproducing kernels, the orthonormal basis, and the kernel-sum splitting
//! comparison.
//!
//! Functions have the form `f(z) = sum_n a_n v_n / (z - gamma_n)` with
//! squared norm `sum_n |a_n|^2 v_n`. The truncation carries explicit tail
//! flags because numeric tail bounds require declared behaviour beyond the
//! stored points.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MslabError, Result};
use crate::numerics::Region;
use crate::symb::Expr;

/// Declared behaviour of the weight sequence beyond the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailModel {
    pub v_bounded: bool,
    pub v_over_gamma_sq_summable: bool,
}

impl Default for TailModel {
    fn default() -> Self {
        TailModel { v_bounded: true, v_over_gamma_sq_summable: true }
    }
}

/// On-disk shape of a space description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub gammas: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub tail: TailModel,
}

/// A point set with weights, ordered by increasing modulus, together with
/// the derived partition radii and sparseness ratio.
#[derive(Debug, Clone)]
pub struct SpacePair {
    gammas: Vec<Complex64>,
    weights: Vec<f64>,
    radii: Vec<f64>,
    q: f64,
    tail: TailModel,
}

/// Truncated admissibility sum with an optional geometric tail bound.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityReport {
    pub partial_sum: f64,
    /// Bound on the unseen tail; present when the observed sparseness
    /// exceeds one and the weights are declared bounded.
    pub tail_bound: Option<f64>,
    /// Later terms are no larger than earlier ones; a failed flag signals
    /// a sequence with no hope of admissibility.
    pub terms_decay: bool,
}

/// Exact kernel sum against its cellwise splitting surrogate.
#[derive(Debug, Clone, Copy)]
pub struct SplitComparison {
    pub exact: f64,
    pub split: f64,
    /// 1-based index of the cell containing the probe point.
    pub cell_m: usize,
    pub ratio: f64,
}

/// Membership profile for the pointwise summability set.
#[derive(Debug, Clone, Copy)]
pub struct StarProfile {
    pub partial: f64,
    pub tail_bound: Option<f64>,
}

impl StarProfile {
    pub fn total(&self) -> f64 {
        self.partial + self.tail_bound.unwrap_or(0.0)
    }
}

/// `sum_n a_n v_n / (z - gamma_n)` for arbitrary point data, with no
/// ordering requirements. Construction of a `SpacePair` enforces strict
/// modulus ordering, so ad-hoc sums over tied-modulus points go through
/// this function directly.
pub fn weighted_cauchy_sum(
    gammas: &[Complex64],
    weights: &[f64],
    coeffs: &[Complex64],
    z: Complex64,
) -> Result<Complex64> {
    if gammas.len() != weights.len() || gammas.len() != coeffs.len() {
        return Err(MslabError::Config(format!(
            "mismatched lengths: {} points, {} weights, {} coefficients",
            gammas.len(),
            weights.len(),
            coeffs.len()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for ((&g, &v), &a) in gammas.iter().zip(weights).zip(coeffs) {
        let d = z - g;
        if d == Complex64::new(0.0, 0.0) {
            return Err(MslabError::PoleHit { at: z });
        }
        acc += a * v / d;
    }
    Ok(acc)
}

impl SpacePair {
    /// Build a space from points and weights. Points are sorted by
    /// modulus; zero points, lower half-plane points, tied moduli,
    /// duplicates, and non-positive weights are rejected.
    pub fn new(gammas: Vec<Complex64>, weights: Vec<f64>, tail: TailModel) -> Result<SpacePair> {
        if gammas.is_empty() {
            return Err(MslabError::SpaceConfig("at least one point is required".to_string()));
        }
        if gammas.len() != weights.len() {
            return Err(MslabError::SpaceConfig(format!(
                "{} points but {} weights",
                gammas.len(),
                weights.len()
            )));
        }
        for (k, g) in gammas.iter().enumerate() {
            if !g.is_finite() {
                return Err(MslabError::SpaceConfig(format!("point {} is not finite", k + 1)));
            }
            if g.im < 0.0 {
                return Err(MslabError::SpaceConfig(format!(
                    "point {} lies in the lower half-plane",
                    k + 1
                )));
            }
            if g.norm() == 0.0 {
                return Err(MslabError::SpaceConfig(format!("point {} is zero", k + 1)));
            }
        }
        for (k, &v) in weights.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(MslabError::SpaceConfig(format!(
                    "weight {} must be positive and finite (got {v})",
                    k + 1
                )));
            }
        }

        let mut order: Vec<usize> = (0..gammas.len()).collect();
        order.sort_by(|&a, &b| gammas[a].norm().total_cmp(&gammas[b].norm()));
        let gammas: Vec<Complex64> = order.iter().map(|&i| gammas[i]).collect();
        let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();

        for w in gammas.windows(2) {
            if w[0] == w[1] {
                return Err(MslabError::SpaceConfig(format!(
                    "duplicate point {}",
                    w[0]
                )));
            }
            if w[0].norm() == w[1].norm() {
                return Err(MslabError::SpaceConfig(format!(
                    "points {} and {} share a modulus; the partition radii must be strictly increasing",
                    w[0], w[1]
                )));
            }
        }

        let radii: Vec<f64> = gammas
            .windows(2)
            .map(|w| 0.5 * (w[0].norm() + w[1].norm()))
            .collect();
        let q = gammas
            .windows(2)
            .map(|w| w[1].norm() / w[0].norm())
            .fold(f64::INFINITY, f64::min);

        Ok(SpacePair { gammas, weights, radii, q, tail })
    }

    pub fn from_config(config: &SpaceConfig) -> Result<SpacePair> {
        let gammas = config
            .gammas
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        SpacePair::new(gammas, config.weights.clone(), config.tail)
    }

    pub fn from_json_str(text: &str) -> Result<SpacePair> {
        let config: SpaceConfig = serde_json::from_str(text)?;
        SpacePair::from_config(&config)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<SpacePair> {
        SpacePair::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_config(&self) -> SpaceConfig {
        SpaceConfig {
            gammas: self.gammas.iter().map(|g| [g.re, g.im]).collect(),
            weights: self.weights.clone(),
            tail: self.tail,
        }
    }

    /// Hex digest of the canonical (sorted) description, for report echoes.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.to_config()).expect("space config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn gammas(&self) -> &[Complex64] {
        &self.gammas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Partition radii `m_1 < ... < m_{N-1}`.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn has_real_nodes(&self) -> bool {
        self.gammas.iter().any(|g| g.im == 0.0)
    }

    pub fn has_interior_nodes(&self) -> bool {
        self.gammas.iter().any(|g| g.im > 0.0)
    }

    /// Smallest modulus ratio of consecutive points.
    pub fn sparseness_ratio(&self) -> Result<f64> {
        if self.len() < 2 {
            return Err(MslabError::TooFewPoints);
        }
        Ok(self.q)
    }

    /// Sparseness with the single-point convention `q = +inf`.
    pub fn sparseness_or_infinite(&self) -> f64 {
        self.q
    }

    pub fn admissibility(&self) -> AdmissibilityReport {
        let terms: Vec<f64> = self
            .gammas
            .iter()
            .zip(&self.weights)
            .map(|(g, &v)| v / (1.0 + g.norm_sqr()))
            .collect();
        let partial_sum = terms.iter().sum();
        let tail_bound = self.geometric_tail_bound();
        let terms_decay = terms.last() <= terms.first();
        AdmissibilityReport { partial_sum, tail_bound, terms_decay }
    }

    /// `v_max / (|gamma_N|^2 (q^2 - 1))`: a bound on every unseen term sum
    /// of the form `sum_{n>N} v_n / |gamma_n|^2`, valid when the observed
    /// sparseness persists and the weights stay bounded by their maximum.
    fn geometric_tail_bound(&self) -> Option<f64> {
        if self.len() < 2 || !(self.q > 1.0) || !self.tail.v_bounded {
            return None;
        }
        let v_max = self.weights.iter().copied().fold(0.0f64, f64::max);
        let last = self.gammas.last().unwrap().norm();
        Some(v_max / (last * last * (self.q * self.q - 1.0)))
    }

    /// 1-based index of the half-annular cell containing `z`. Cells are
    /// closed on their inner radius; the last cell is unbounded.
    pub fn partition_index(&self, z: Complex64) -> Result<usize> {
        if z.im < 0.0 {
            return Err(MslabError::DomainViolation {
                at: z,
                msg: "partition cells cover the closed upper half-plane".to_string(),
            });
        }
        let r = z.norm();
        Ok(1 + self.radii.iter().filter(|&&m| m <= r).count())
    }

    /// The cell with 1-based index `n` as an integration region.
    pub fn cell_region(&self, n: usize) -> Region {
        assert!(n >= 1 && n <= self.len(), "cell index {n} out of 1..={}", self.len());
        let r_lo = if n == 1 { 0.0 } else { self.radii[n - 2] };
        let r_hi = if n == self.len() { f64::INFINITY } else { self.radii[n - 1] };
        Region::HalfAnnulus { r_lo, r_hi }
    }

    /// `sum_n a_n v_n / (z - gamma_n)`.
    pub fn evaluate(&self, coeffs: &[Complex64], z: Complex64) -> Result<Complex64> {
        weighted_cauchy_sum(&self.gammas, &self.weights, coeffs, z)
    }

    /// Squared norm `sum_n |a_n|^2 v_n`.
    pub fn norm_sq(&self, coeffs: &[Complex64]) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(MslabError::Config(format!(
                "{} coefficients for a space of {} points",
                coeffs.len(),
                self.len()
            )));
        }
        Ok(coeffs
            .iter()
            .zip(&self.weights)
            .map(|(a, &v)| a.norm_sqr() * v)
            .sum())
    }

    /// Coefficients of the reproducing kernel at `lambda`:
    /// `b_n = 1 / conj(lambda - gamma_n)`.
    pub fn kernel_coeffs(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        self.gammas
            .iter()
            .map(|&g| {
                let d = (lambda - g).conj();
                if d == Complex64::new(0.0, 0.0) {
                    Err(MslabError::PoleHit { at: lambda })
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect()
    }

    /// `sum_n v_n / |lambda - gamma_n|^2`, the squared kernel norm.
    pub fn kernel_norm_sq(&self, lambda: Complex64) -> Result<f64> {
        let b = self.kernel_coeffs(lambda)?;
        Ok(self.evaluate(&b, lambda)?.re)
    }

    /// The normalized basis element `e_n(z) = sqrt(v_n) / (z - gamma_n)`
    /// (1-based), as an expression with its pole registered.
    pub fn basis_fn(&self, n: usize) -> Expr {
        assert!(n >= 1 && n <= self.len(), "basis index {n} out of 1..={}", self.len());
        let v = self.weights[n - 1];
        Expr::real(v.sqrt()).div(&Expr::z().sub(&Expr::constant(self.gammas[n - 1])))
    }

    /// Exact kernel sum at `z` against the cellwise splitting that freezes
    /// each term at its dominant scale: points in earlier cells contribute
    /// `v_n/|z|^2`, the own-cell point keeps its exact term, and points in
    /// later cells contribute `v_n/|gamma_n|^2`.
    pub fn kernel_sum_split(&self, z: Complex64) -> Result<SplitComparison> {
        let m = self.partition_index(z)?;
        let z_sq = z.norm_sqr();
        let mut exact = 0.0;
        let mut split = 0.0;
        for (k, (&g, &v)) in self.gammas.iter().zip(&self.weights).enumerate() {
            let n = k + 1;
            let d = (z - g).norm_sqr();
            if d == 0.0 {
                return Err(MslabError::PoleHit { at: z });
            }
            exact += v / d;
            split += if n < m {
                v / z_sq
            } else if n == m {
                v / d
            } else {
                v / g.norm_sqr()
            };
        }
        Ok(SplitComparison { exact, split, cell_m: m, ratio: exact / split })
    }

    /// Partial sum `sum_n v_n / |z - gamma_n|^2` with a geometric bound on
    /// the modeled tail when one is computable.
    pub fn star_membership(&self, z: Complex64) -> Result<StarProfile> {
        let mut partial = 0.0;
        for (&g, &v) in self.gammas.iter().zip(&self.weights) {
            let d = (z - g).norm_sqr();
            if d == 0.0 {
                return Err(MslabError::PoleHit { at: z });
            }
            partial += v / d;
        }
        let tail_bound = match self.geometric_tail_bound() {
            Some(base) => {
                let last = self.gammas.last().unwrap().norm();
                let margin = 1.0 - z.norm() / (self.q * last);
                if margin > 0.0 {
                    Some(base / (margin * margin))
                } else {
                    None
                }
            }
            None => None,
        };
        Ok(StarProfile { partial, tail_bound })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dyadic_space(n: usize) -> SpacePair {
        let gammas: Vec<Complex64> = (1..=n).map(|k| cx((2.0f64).powi(k as i32), 0.0)).collect();
        let weights = vec![1.0; n];
        SpacePair::new(gammas, weights, TailModel::default()).unwrap()
    }

    #[test]
    fn admissibility_of_the_dyadic_space() {
        let report = dyadic_space(20).admissibility();
        // Direct summation of v_n/(1+4^n).
        assert_relative_eq!(report.partial_sum, 0.279400262405657, max_relative = 1e-13);
        assert!(report.terms_decay);
        let bound = report.tail_bound.unwrap();
        assert!(bound > 0.0 && bound < 1e-12);
    }

    #[test]
    fn growing_weights_are_flagged() {
        let gammas: Vec<Complex64> = (1..=10).map(|k| cx((2.0f64).powi(k), 0.0)).collect();
        let weights: Vec<f64> = (1..=10).map(|k| (4.0f64).powi(k)).collect();
        let space = SpacePair::new(gammas, weights, TailModel::default()).unwrap();
        let report = space.admissibility();
        assert!(!report.terms_decay);
        assert!(report.partial_sum > 5.0);
    }

    #[test]
    fn single_point_admissibility() {
        let space = SpacePair::new(vec![cx(1.0, 0.0)], vec![2.0], TailModel::default()).unwrap();
        assert_relative_eq!(space.admissibility().partial_sum, 1.0, epsilon = 1e-15);
        assert!(space.admissibility().tail_bound.is_none());
        assert!(matches!(space.sparseness_ratio(), Err(MslabError::TooFewPoints)));
        assert_eq!(space.sparseness_or_infinite(), f64::INFINITY);
    }

    #[test]
    fn sparseness_ratios() {
        assert_relative_eq!(dyadic_space(8).sparseness_ratio().unwrap(), 2.0);
        let triadic: Vec<Complex64> = (1..=5).map(|k| cx((3.0f64).powi(k), 0.0)).collect();
        let space = SpacePair::new(triadic, vec![1.0; 5], TailModel::default()).unwrap();
        assert_relative_eq!(space.sparseness_ratio().unwrap(), 3.0);
        let linear: Vec<Complex64> = (1..=10).map(|k| cx(k as f64, 0.0)).collect();
        let space = SpacePair::new(linear, vec![1.0; 10], TailModel::default()).unwrap();
        assert_relative_eq!(space.sparseness_ratio().unwrap(), 10.0 / 9.0);
    }

    #[test]
    fn partition_follows_midpoint_radii() {
        let space = dyadic_space(3); // radii 3 and 6
        assert_eq!(space.partition_index(cx(0.0, 2.5)).unwrap(), 1);
        assert_eq!(space.partition_index(cx(0.0, 4.0)).unwrap(), 2);
        assert_eq!(space.partition_index(cx(0.0, 6.0)).unwrap(), 3);
        assert!(space.partition_index(cx(0.0, -1.0)).is_err());
        assert_eq!(
            space.cell_region(2),
            Region::HalfAnnulus { r_lo: 3.0, r_hi: 6.0 }
        );
        assert_eq!(
            space.cell_region(3),
            Region::HalfAnnulus { r_lo: 6.0, r_hi: f64::INFINITY }
        );
    }

    #[test]
    fn partition_indices_are_monotone_in_modulus() {
        let space = dyadic_space(6);
        let mut last = 0;
        for k in 0..200 {
            let r = 0.1 * (1.06f64).powi(k);
            let idx = space.partition_index(cx(0.0, r)).unwrap();
            assert!(idx >= last);
            last = idx;
        }
        assert_eq!(last, 6);
    }

    #[test]
    fn evaluation_matches_hand_values() {
        let space = SpacePair::new(vec![cx(2.0, 0.0)], vec![1.0], TailModel::default()).unwrap();
        let v = space.evaluate(&[cx(1.0, 0.0)], cx(2.0, 1.0)).unwrap();
        assert_relative_eq!((v - cx(0.0, -1.0)).norm(), 0.0, epsilon = 1e-15);

        // Tied moduli are fine for the raw sum even though a SpacePair
        // would reject them.
        let v = weighted_cauchy_sum(
            &[cx(1.0, 0.0), cx(-1.0, 0.0)],
            &[1.0, 1.0],
            &[cx(1.0, 0.0), cx(1.0, 0.0)],
            cx(0.0, 1.0),
        )
        .unwrap();
        assert_relative_eq!((v - cx(0.0, -1.0)).norm(), 0.0, epsilon = 1e-15);

        assert_eq!(
            space.evaluate(&[cx(0.0, 0.0)], cx(5.0, 5.0)).unwrap(),
            cx(0.0, 0.0)
        );
        assert!(matches!(
            space.evaluate(&[cx(1.0, 0.0)], cx(2.0, 0.0)),
            Err(MslabError::PoleHit { .. })
        ));
    }

    #[test]
    fn norms_are_weighted_sums() {
        let space = SpacePair::new(
            vec![cx(1.0, 0.0), cx(3.0, 0.0)],
            vec![2.0, 5.0],
            TailModel::default(),
        )
        .unwrap();
        assert_relative_eq!(
            space.norm_sq(&[cx(1.0, 0.0), cx(1.0, 0.0)]).unwrap(),
            7.0
        );
        assert_eq!(space.norm_sq(&[cx(0.0, 0.0), cx(0.0, 0.0)]).unwrap(), 0.0);
        assert!(space.norm_sq(&[cx(1.0, 0.0)]).is_err());
    }

    #[test]
    fn kernel_values_match_hand_algebra() {
        let space = SpacePair::new(vec![cx(1.0, 0.0)], vec![2.0], TailModel::default()).unwrap();
        let b = space.kernel_coeffs(cx(1.0, 1.0)).unwrap();
        assert_relative_eq!((b[0] - cx(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);
        let v = space.evaluate(&b, cx(1.0, 1.0)).unwrap();
        assert_relative_eq!(v.re, 2.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
        assert_relative_eq!(space.kernel_norm_sq(cx(1.0, 1.0)).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn reproducing_property_holds_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d73_6c61_62);
        for _ in 0..20 {
            let n = rng.random_range(1..8usize);
            let mut gammas = Vec::new();
            let mut seen = std::collections::BTreeSet::new();
            while gammas.len() < n {
                let re: f64 = rng.random_range(0.5..50.0);
                let key = (re * 1e6) as i64;
                if seen.insert(key) {
                    gammas.push(cx(re, 0.0));
                }
            }
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
            let space = match SpacePair::new(gammas, weights, TailModel::default()) {
                Ok(s) => s,
                Err(_) => continue, // tied moduli from rounding; skip
            };
            let a: Vec<Complex64> = (0..n)
                .map(|_| cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let lambda = cx(rng.random_range(-5.0..5.0), rng.random_range(0.1..5.0));
            let b = space.kernel_coeffs(lambda).unwrap();
            let pairing: Complex64 = a
                .iter()
                .zip(&b)
                .zip(space.weights())
                .map(|((&an, &bn), &vn)| an * bn.conj() * vn)
                .sum();
            let direct = space.evaluate(&a, lambda).unwrap();
            assert!(
                (pairing - direct).norm() <= 1e-10 * (1.0 + direct.norm()),
                "pairing {pairing} vs direct {direct}"
            );
        }
    }

    #[test]
    fn basis_functions_are_orthonormal_in_coefficients() {
        let space = dyadic_space(4);
        for n in 1..=4 {
            let e = space.basis_fn(n);
            let g = space.gammas()[n - 1];
            let v = space.weights()[n - 1];
            let val = e.eval(g + cx(1.0, 0.0)).unwrap();
            assert_relative_eq!((val - cx(v.sqrt(), 0.0)).norm(), 0.0, epsilon = 1e-15);
            assert_eq!(e.poles().len(), 1);
            // Coefficient vector of e_n is delta_n / sqrt(v_n).
            let mut coeffs = vec![cx(0.0, 0.0); 4];
            coeffs[n - 1] = cx(1.0 / v.sqrt(), 0.0);
            assert_relative_eq!(space.norm_sq(&coeffs).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn splitting_matches_hand_arithmetic() {
        let space = SpacePair::new(
            vec![cx(4.0, 0.0), cx(16.0, 0.0), cx(64.0, 0.0)],
            vec![1.0; 3],
            TailModel::default(),
        )
        .unwrap();
        let s = space.kernel_sum_split(cx(0.0, 4.0)).unwrap();
        assert_eq!(s.cell_m, 1);
        assert_relative_eq!(s.exact, 1.0 / 32.0 + 1.0 / 272.0 + 1.0 / 4112.0, epsilon = 1e-15);
        assert_relative_eq!(s.split, 1.0 / 32.0 + 1.0 / 256.0 + 1.0 / 4096.0, epsilon = 1e-15);
        assert!(s.ratio > 1.0 / 8.0 && s.ratio < 8.0);

        let single = SpacePair::new(vec![cx(1.0, 0.0)], vec![3.0], TailModel::default()).unwrap();
        let s = single.kernel_sum_split(cx(2.0, 2.0)).unwrap();
        assert_eq!(s.exact, s.split);
        assert_relative_eq!(s.ratio, 1.0);
    }

    #[test]
    fn splitting_ratio_is_two_sided_for_sparse_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in [4.0f64, 6.0, 10.0] {
            let gammas: Vec<Complex64> = (1..=6).map(|k| cx(q.powi(k), 0.0)).collect();
            let weights: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..3.0)).collect();
            let space = SpacePair::new(gammas, weights, TailModel::default()).unwrap();
            for _ in 0..100 {
                let r = rng.random_range(0.5..(q.powi(6) * 1.5));
                let phi = rng.random_range(0.05..std::f64::consts::PI - 0.05);
                let z = Complex64::from_polar(r, phi);
                let s = space.kernel_sum_split(z).unwrap();
                assert!(
                    s.ratio >= 1.0 / 8.0 && s.ratio <= 8.0,
                    "ratio {} at z = {z} for q = {q}",
                    s.ratio
                );
            }
        }
    }

    #[test]
    fn star_profile_matches_split_exact_part() {
        let space = dyadic_space(4);
        let z = cx(1.5, 2.0);
        let star = space.star_membership(z).unwrap();
        let split = space.kernel_sum_split(z).unwrap();
        assert_relative_eq!(star.partial, split.exact, epsilon = 1e-15);
        assert!(star.tail_bound.unwrap() > 0.0);

        let single = SpacePair::new(vec![cx(3.0, 0.0)], vec![4.0], TailModel::default()).unwrap();
        let star = single.star_membership(cx(5.0, 0.0)).unwrap();
        assert_relative_eq!(star.partial, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn construction_rejects_bad_input() {
        let tail = TailModel::default();
        assert!(SpacePair::new(vec![], vec![], tail).is_err());
        assert!(SpacePair::new(vec![cx(1.0, 0.0)], vec![], tail).is_err());
        assert!(SpacePair::new(vec![cx(0.0, 0.0)], vec![1.0], tail).is_err());
        assert!(SpacePair::new(vec![cx(1.0, -1.0)], vec![1.0], tail).is_err());
        assert!(SpacePair::new(vec![cx(1.0, 0.0)], vec![0.0], tail).is_err());
        assert!(SpacePair::new(vec![cx(1.0, 0.0), cx(1.0, 0.0)], vec![1.0, 1.0], tail).is_err());
        // Tied moduli, distinct points.
        assert!(SpacePair::new(vec![cx(1.0, 0.0), cx(-1.0, 0.0)], vec![1.0, 1.0], tail).is_err());
    }

    #[test]
    fn json_roundtrip_and_hash_stability() {
        let text = r#"{
            "gammas": [[4.0, 0.0], [16.0, 0.0]],
            "weights": [0.5, 0.25],
            "tail": {"v_bounded": true, "v_over_gamma_sq_summable": true}
        }"#;
        let space = SpacePair::from_json_str(text).unwrap();
        assert_eq!(space.len(), 2);
        assert_relative_eq!(space.sparseness_ratio().unwrap(), 4.0);
        let h1 = space.hash();
        let space2 = SpacePair::from_config(&space.to_config()).unwrap();
        assert_eq!(h1, space2.hash());
        assert_eq!(h1.len(), 64);

        assert!(SpacePair::from_json_str("{\"gammas\": []}").is_err());
        assert!(SpacePair::from_json_str("not json").is_err());
    }
}
