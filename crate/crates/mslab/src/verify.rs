//! Pre-flight verification of the numerical core against closed forms,
//! and the token file recording a successful run.
//!
//! Analysis runs refuse to start without a fresh token: the token pins
//! the package version and the area constant it was verified with, so a
//! rebuilt binary or a different `c_lp` forces re-verification. The
//! checks are small but sharp: each one has an answer known exactly, and
//! each exercises a different pillar the criteria evaluators stand on.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MslabError, Result};
use crate::hgamma::{SpacePair, TailModel};
use crate::numerics::{integrate_area, QuadratureSpec, Region};
use crate::symb::Expr;
use crate::volterra::{lp_norm_sq, LpConfig};

pub const TOKEN_FILE: &str = ".mslab-verify-token";
const SEED: u64 = 0x6d73_6c61_62;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub checks: Vec<CheckResult>,
    pub c_lp: f64,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_verify(c_lp: f64, spec: &QuadratureSpec) -> Result<VerifyOutcome> {
    let cfg = LpConfig { c_lp };
    cfg.validate()?;
    spec.validate()?;
    let checks = vec![
        check_lp_constant(&cfg, spec)?,
        check_reproducing(),
        check_splitting(),
        check_partition(spec)?,
    ];
    Ok(VerifyOutcome { checks, c_lp })
}

/// The area constant: boundary norms must equal area norms for
/// functions whose both sides are known in closed form. A wrong `c_lp`
/// shifts every ratio by the same factor and fails all three.
fn check_lp_constant(cfg: &LpConfig, spec: &QuadratureSpec) -> Result<CheckResult> {
    let sources = ["1/(z+1i)", "1/(z+2i)", "1/(z+1i)^2"];
    let mut ratios = Vec::new();
    let mut worst: f64 = 0.0;
    for src in sources {
        let f: Expr = src.parse()?;
        let norms = lp_norm_sq(&f, cfg, spec)?;
        let ratio = norms.ratio();
        worst = worst.max((ratio - 1.0).abs());
        ratios.push(format!("{src}: {ratio:.6} (measured constant {:.3})", cfg.c_lp * ratio));
    }
    Ok(CheckResult {
        name: "lp_constant",
        passed: worst <= 0.01,
        detail: format!(
            "boundary/area ratios must be 1 within 1% (c_lp = {}): {}",
            cfg.c_lp,
            ratios.join(", ")
        ),
    })
}

/// The reproducing identity: pairing random coefficients against kernel
/// coefficients must reproduce pointwise evaluation exactly.
fn check_reproducing() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut cases = 0;
    let mut attempts = 0;
    let mut worst: f64 = 0.0;
    while cases < 20 && attempts < 200 {
        attempts += 1;
        let n = rng.random_range(1..8usize);
        let mut gammas = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        while gammas.len() < n {
            let re: f64 = rng.random_range(0.5..50.0);
            let key = (re * 1e6) as i64;
            if seen.insert(key) {
                gammas.push(Complex64::new(re, 0.0));
            }
        }
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
        let space = match SpacePair::new(gammas, weights, TailModel::default()) {
            Ok(s) => s,
            Err(_) => continue, // tied moduli from rounding; resample
        };
        let a: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let lambda =
            Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(0.1..5.0));
        let b = match space.kernel_coeffs(lambda) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let pairing: Complex64 = a
            .iter()
            .zip(&b)
            .zip(space.weights())
            .map(|((&an, &bn), &vn)| an * bn.conj() * vn)
            .sum();
        let direct = match space.evaluate(&a, lambda) {
            Ok(v) => v,
            Err(_) => continue,
        };
        worst = worst.max((pairing - direct).norm() / (1.0 + direct.norm()));
        cases += 1;
    }
    CheckResult {
        name: "reproducing",
        passed: cases == 20 && worst <= 1e-10,
        detail: format!(
            "{cases}/20 random pairings; worst relative residual {worst:.3e} (limit 1e-10)"
        ),
    }
}

/// The kernel-sum splitting: the cellwise frozen form must stay within a
/// factor of 8 of the exact sum across sparse spaces and probe points.
fn check_splitting() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x51);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut failures = 0;
    for q in [4.0f64, 6.0, 10.0] {
        let gammas: Vec<Complex64> =
            (1..=6).map(|k| Complex64::new(q.powi(k), 0.0)).collect();
        let weights: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..3.0)).collect();
        let space = SpacePair::new(gammas, weights, TailModel::default())
            .expect("strictly increasing moduli");
        for _ in 0..200 {
            let r = rng.random_range(0.5..(q.powi(6) * 1.5));
            let phi = rng.random_range(0.05..std::f64::consts::PI - 0.05);
            let z = Complex64::from_polar(r, phi);
            match space.kernel_sum_split(z) {
                Ok(s) => {
                    min_ratio = min_ratio.min(s.ratio);
                    max_ratio = max_ratio.max(s.ratio);
                    if !(s.ratio >= 0.125 && s.ratio <= 8.0) {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    CheckResult {
        name: "splitting",
        passed: failures == 0,
        detail: format!(
            "600 probes across q in {{4, 6, 10}}: ratio range [{min_ratio:.4}, {max_ratio:.4}] \
             within [0.125, 8] ({failures} outside)"
        ),
    }
}

/// Partition exhaustion: integrating one weight over each cell must add
/// up to the integral over their union, or cells overlap or leak.
fn check_partition(spec: &QuadratureSpec) -> Result<CheckResult> {
    let space = SpacePair::new(
        vec![
            Complex64::new(4.0, 0.0),
            Complex64::new(16.0, 0.0),
            Complex64::new(64.0, 0.0),
        ],
        vec![1.0; 3],
        TailModel::default(),
    )
    .expect("fixed admissible space");
    let g: Expr = "log(z+1i)".parse()?;
    let gp = g.derivative();
    let integrand = |z: Complex64| {
        let d = match gp.eval(z) {
            Ok(d) => d,
            Err(_) => return Complex64::new(f64::NAN, 0.0),
        };
        Complex64::new(d.norm_sqr() * z.im, 0.0)
    };
    let mut cell_sum = 0.0;
    for n in 1..=2 {
        cell_sum += integrate_area(integrand, space.cell_region(n), &[], spec)?
            .value
            .re;
    }
    let union = Region::HalfAnnulus { r_lo: 0.0, r_hi: space.radii()[1] };
    let whole = integrate_area(integrand, union, &[], spec)?.value.re;
    let rel = (cell_sum - whole).abs() / whole.abs().max(1e-300);
    Ok(CheckResult {
        name: "partition",
        passed: rel <= 1e-4,
        detail: format!(
            "cells 1+2 integrate to {cell_sum:.12} vs their union {whole:.12} \
             (relative gap {rel:.3e}, limit 1e-4)"
        ),
    })
}

/// Contents of the verification token.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyToken {
    pub version: String,
    pub c_lp: f64,
}

pub fn token_path(dir: &Path) -> PathBuf {
    dir.join(TOKEN_FILE)
}

pub fn write_token(dir: &Path, c_lp: f64) -> Result<PathBuf> {
    let token = VerifyToken { version: env!("CARGO_PKG_VERSION").to_string(), c_lp };
    let path = token_path(dir);
    let mut text = serde_json::to_string_pretty(&token)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Fail with `NotVerified` unless a token for this version and exactly
/// this `c_lp` is present.
pub fn check_token(dir: &Path, c_lp: f64) -> Result<()> {
    let path = token_path(dir);
    let text = std::fs::read_to_string(&path).map_err(|_| {
        MslabError::NotVerified(format!(
            "no verification token at {}; run `mslab verify` first",
            path.display()
        ))
    })?;
    let token: VerifyToken = serde_json::from_str(&text).map_err(|_| {
        MslabError::NotVerified(format!(
            "verification token at {} is unreadable; re-run `mslab verify`",
            path.display()
        ))
    })?;
    let version = env!("CARGO_PKG_VERSION");
    if token.version != version {
        return Err(MslabError::NotVerified(format!(
            "verification token was written by version {}, this is {}; re-run `mslab verify`",
            token.version, version
        )));
    }
    if token.c_lp != c_lp {
        return Err(MslabError::NotVerified(format!(
            "verification token pins c_lp = {}, this run uses c_lp = {}; re-run `mslab verify`",
            token.c_lp, c_lp
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_passes_with_the_plane_area_constant() {
        let outcome = run_verify(4.0, &QuadratureSpec::default()).unwrap();
        assert!(outcome.passed(), "checks: {:?}", outcome.checks);
        assert_eq!(outcome.checks.len(), 4);
    }

    #[test]
    fn verify_rejects_the_wrong_area_constant() {
        let outcome = run_verify(2.0, &QuadratureSpec::default()).unwrap();
        assert!(!outcome.passed());
        let lp = outcome.checks.iter().find(|c| c.name == "lp_constant").unwrap();
        assert!(!lp.passed);
        // The other pillars are independent of c_lp and still pass.
        for check in &outcome.checks {
            if check.name != "lp_constant" {
                assert!(check.passed, "{}: {}", check.name, check.detail);
            }
        }
    }

    #[test]
    fn token_round_trip_and_mismatches() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            check_token(dir.path(), 4.0),
            Err(MslabError::NotVerified(_))
        ));
        write_token(dir.path(), 4.0).unwrap();
        check_token(dir.path(), 4.0).unwrap();
        assert!(matches!(
            check_token(dir.path(), 2.0),
            Err(MslabError::NotVerified(_))
        ));
        std::fs::write(token_path(dir.path()), "{not json").unwrap();
        assert!(matches!(
            check_token(dir.path(), 4.0),
            Err(MslabError::NotVerified(_))
        ));
    }
}
