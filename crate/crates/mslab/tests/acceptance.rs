//! Acceptance gate for the criteria evaluators.
//!
//! Each test checks one end-to-end property of the library against pinned
//! tolerances and prints a single `acceptance NN (name): PASS|FAIL (detail)`
//! line (visible with `--nocapture`, or automatically when a test fails).
//! Tolerances and golden values are constants below; they are not read from
//! configuration, so a regression cannot be silenced by editing a fixture.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mslab::composition::{self, TermOutcome};
use mslab::hgamma::{SpacePair, TailModel};
use mslab::modelspace::{self, InnerFunction};
use mslab::numerics::{integrate_area, QuadratureSpec, Region, SupScanConfig};
use mslab::report;
use mslab::symb::Expr;
use mslab::volterra::{self, LpConfig};

const SEED: u64 = 0xacce_97;

/// Relative tolerance against frozen dense-grid values.
const GOLDEN_REL: f64 = 1e-3;
/// Window for split-route vs direct-route comparisons.
const RATIO_WINDOW: (f64, f64) = (0.125, 8.0);
/// Norm-identity constant check: raw boundary/area ratio.
const LP_TARGET: f64 = 4.0;
const LP_TOL: f64 = 0.004;
/// Reproducing-property residual bound.
const REPRODUCING_TOL: f64 = 1e-10;
/// Symbol-doubling scale factor and its tolerance.
const SCALING_TOL: f64 = 1e-6;
/// Pullback exactness bounds for the two closed-form maps.
const PULLBACK_TOL_AFFINE: f64 = 1e-8;
const PULLBACK_TOL_SHIFT: f64 = 1e-6;

/// Frozen values for the golden configuration
/// (`gamma_n = 4^n`, `v_n = 1`, `N = 6`, `g = log(z + i)`).
const GOLDEN_S_LOCAL: f64 = 0.8797720359621913;
const GOLDEN_S_GLOBAL: f64 = 0.3246846057240675;
const GOLDEN_HS_DIRECT: f64 = 4.858321173910722;
const GOLDEN_G11: f64 = 3.3853884953294466;
const GOLDEN_TRUNCATED_NORMS: [f64; 6] = [
    1.8399425250070847,
    1.9626284331784198,
    1.9790359687840524,
    1.9808462840469383,
    1.981022877952491,
    1.981038852207033,
];

fn golden_space() -> SpacePair {
    let gammas: Vec<Complex64> = (1..=6).map(|n| Complex64::new(4f64.powi(n), 0.0)).collect();
    SpacePair::new(gammas, vec![1.0; 6], TailModel::default()).expect("golden space is valid")
}

fn golden_symbol() -> Expr {
    "log(z + 1i)".parse().expect("golden symbol parses")
}

/// Prints the gate line and fails the test when `ok` is false.
fn gate(number: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("acceptance {number:02} ({name}): {tag} ({detail})");
    assert!(ok, "acceptance {number:02} ({name}) failed: {detail}");
}

fn rel_err(value: f64, golden: f64) -> f64 {
    (value - golden).abs() / golden.abs()
}

#[test]
fn criterion_01_norm_identity_constant() {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let raw = LpConfig { c_lp: 1.0 };
    let mut ratios = Vec::new();
    for src in ["1/(z + 1i)", "1/(z + 2i)", "1/(z + 1i)^2"] {
        let f: Expr = src.parse().expect("closed-form symbol parses");
        let norms = volterra::lp_norm_sq(&f, &raw, &spec).expect("both norm routes converge");
        ratios.push(norms.ratio());
    }
    let ok_ratios = ratios.iter().all(|r| (r - LP_TARGET).abs() <= LP_TOL);

    let warnings = report::standard_warnings(None, true);
    let flagged = warnings
        .iter()
        .any(|w| w.contains("c_lp = 4") && w.contains("c_lp = 2"));
    let elapsed = start.elapsed();

    gate(
        1,
        "norm-identity constant",
        ok_ratios && flagged && elapsed < Duration::from_secs(10),
        &format!(
            "boundary/area = {:.4}, {:.4}, {:.4} (target {LP_TARGET} +- {LP_TOL}); \
             convention note flagged: {flagged}; {:.2?}",
            ratios[0], ratios[1], ratios[2], elapsed
        ),
    );
}

#[test]
fn criterion_02_reproducing_property() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut attempts = 0;
    while cases < 50 && attempts < 500 {
        attempts += 1;
        let n = rng.random_range(1..=8usize);
        let mut gammas = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        while gammas.len() < n {
            let re: f64 = rng.random_range(0.5..50.0);
            if seen.insert((re * 1e6) as i64) {
                gammas.push(Complex64::new(re, 0.0));
            }
        }
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
        let space = match SpacePair::new(gammas, weights, TailModel::default()) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let a: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let lambda = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(0.1..5.0));
        let coeffs = space.kernel_coeffs(lambda).expect("lambda is in the evaluation domain");
        let pairing: Complex64 = a
            .iter()
            .zip(&coeffs)
            .zip(space.weights())
            .map(|((&an, &bn), &vn)| an * bn.conj() * vn)
            .sum();
        let direct = space.evaluate(&a, lambda).expect("evaluation converges");
        worst = worst.max((pairing - direct).norm() / (1.0 + direct.norm()));
        cases += 1;
    }
    let elapsed = start.elapsed();
    gate(
        2,
        "reproducing property",
        cases == 50 && worst <= REPRODUCING_TOL && elapsed < Duration::from_secs(5),
        &format!(
            "{cases}/50 random pairings; worst relative residual {worst:.3e} \
             (limit {REPRODUCING_TOL:.0e}); {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_03_kernel_splitting_window() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x3);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut outside = 0;
    for q in [4.0f64, 6.0, 10.0] {
        let gammas: Vec<Complex64> = (1..=6).map(|k| Complex64::new(q.powi(k), 0.0)).collect();
        let weights: Vec<f64> = (0..6).map(|_| rng.random_range(0.2..3.0)).collect();
        let space = SpacePair::new(gammas, weights, TailModel::default())
            .expect("strictly increasing moduli");
        for _ in 0..200 {
            let r = rng.random_range(0.5..(q.powi(6) * 1.5));
            let phi = rng.random_range(0.05..std::f64::consts::PI - 0.05);
            let z = Complex64::from_polar(r, phi);
            let split = space.kernel_sum_split(z).expect("both kernel routes are finite");
            min_ratio = min_ratio.min(split.ratio);
            max_ratio = max_ratio.max(split.ratio);
            if !(split.ratio >= RATIO_WINDOW.0 && split.ratio <= RATIO_WINDOW.1) {
                outside += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    gate(
        3,
        "kernel splitting window",
        outside == 0 && elapsed < Duration::from_secs(5),
        &format!(
            "600 probes, exact/split range [{min_ratio:.4}, {max_ratio:.4}] within \
             [{}, {}] ({outside} outside); {elapsed:.2?}",
            RATIO_WINDOW.0, RATIO_WINDOW.1
        ),
    );
}

#[test]
fn criterion_04_hilbert_schmidt_cross_check() {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let space = golden_space();
    let g = golden_symbol();

    let local = volterra::local_condition_terms(&space, &g, &spec).expect("local terms converge");
    let pq = volterra::pq_cell_integrals(&space, &g, &spec).expect("cell integrals converge");
    let hs = volterra::hs_from_parts(&space, local, pq);
    let direct = volterra::hs_direct(&space, &g, &LpConfig::default(), &spec)
        .expect("direct sums converge");

    let split_total = hs.s_local + hs.s_global;
    let ratio = direct.total / split_total;
    let errs = [
        rel_err(hs.s_local, GOLDEN_S_LOCAL),
        rel_err(hs.s_global, GOLDEN_S_GLOBAL),
        rel_err(direct.total, GOLDEN_HS_DIRECT),
    ];
    let elapsed = start.elapsed();
    gate(
        4,
        "hilbert-schmidt cross-check",
        errs.iter().all(|e| *e <= GOLDEN_REL)
            && ratio >= RATIO_WINDOW.0
            && ratio <= RATIO_WINDOW.1
            && elapsed < Duration::from_secs(120),
        &format!(
            "S_local {:.6} / S_global {:.6} / direct {:.6} vs frozen (rel errs \
             {:.1e}, {:.1e}, {:.1e}); direct/split = {ratio:.4}; {elapsed:.2?}",
            hs.s_local, hs.s_global, direct.total, errs[0], errs[1], errs[2]
        ),
    );
}

#[test]
fn criterion_05_model_kernel_boundary_norm() {
    let start = Instant::now();
    // Boundary traces of kernel products oscillate; the default relative
    // target spends quadratic effort for accuracy far beyond the gate.
    let spec = QuadratureSpec { rel_tol: 1e-4, ..QuadratureSpec::default() };
    let atom = InnerFunction::parse("atom:1").expect("atom inner parses");
    let blaschke = InnerFunction::new(
        vec![Complex64::new(0.0, 1.0), Complex64::new(-1.0, 2.0)],
        0.0,
        0.0,
    )
    .expect("two-zero product is valid");

    let mut worst: f64 = 0.0;
    let mut points = 0;
    for inner in [&atom, &blaschke] {
        for re in [-1.0, 0.0, 1.0] {
            for im in [0.5, 1.0, 2.0] {
                let w = Complex64::new(re, im);
                let closed = modelspace::kernel_norm_sq(inner, w).expect("Im w > 0");
                let quad = modelspace::boundary_norm_sq(inner, w, &spec)
                    .expect("boundary trace converges");
                worst = worst.max(rel_err(quad.value.re, closed));
                points += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    gate(
        5,
        "model kernel boundary norm",
        points == 18 && worst <= GOLDEN_REL && elapsed < Duration::from_secs(30),
        &format!(
            "18 anchors x two inner functions: worst |quad - closed|/closed = \
             {worst:.2e} (limit {GOLDEN_REL:.0e}); {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_06_degenerate_and_scaling() {
    let spec = QuadratureSpec::default();
    let space = golden_space();

    let constant: Expr = "3".parse().expect("constant parses");
    let local = volterra::local_condition_terms(&space, &constant, &spec).unwrap();
    let pq = volterra::pq_cell_integrals(&space, &constant, &spec).unwrap();
    let global = volterra::global_terms_from_pq(&space, &pq);
    let hs = volterra::hs_from_parts(&space, local.clone(), pq);
    let direct = volterra::hs_direct(&space, &constant, &LpConfig::default(), &spec).unwrap();
    let zeros_exact = local.sup == 0.0
        && global.sup == 0.0
        && hs.s_local + hs.s_global == 0.0
        && direct.total == 0.0;

    let g = golden_symbol();
    let doubled: Expr = "2 * log(z + 1i)".parse().expect("doubled symbol parses");
    let base_local = volterra::local_condition_terms(&space, &g, &spec).unwrap();
    let base_pq = volterra::pq_cell_integrals(&space, &g, &spec).unwrap();
    let base_global = volterra::global_terms_from_pq(&space, &base_pq);
    let base_hs = volterra::hs_from_parts(&space, base_local.clone(), base_pq);
    let base_direct = volterra::hs_direct(&space, &g, &LpConfig::default(), &spec).unwrap();

    let two_local = volterra::local_condition_terms(&space, &doubled, &spec).unwrap();
    let two_pq = volterra::pq_cell_integrals(&space, &doubled, &spec).unwrap();
    let two_global = volterra::global_terms_from_pq(&space, &two_pq);
    let two_hs = volterra::hs_from_parts(&space, two_local.clone(), two_pq);
    let two_direct = volterra::hs_direct(&space, &doubled, &LpConfig::default(), &spec).unwrap();

    let scale_ratios = [
        two_local.sup / base_local.sup,
        two_global.sup / base_global.sup,
        (two_hs.s_local + two_hs.s_global) / (base_hs.s_local + base_hs.s_global),
        two_direct.total / base_direct.total,
    ];
    let scaling_ok = scale_ratios.iter().all(|r| (r - 4.0).abs() <= SCALING_TOL);

    gate(
        6,
        "degenerate and scaling",
        zeros_exact && scaling_ok,
        &format!(
            "constant symbol gives exact zeros: {zeros_exact}; doubling scales \
             sup/global/split/direct by {:.8}, {:.8}, {:.8}, {:.8} (4 +- {SCALING_TOL:.0e})",
            scale_ratios[0], scale_ratios[1], scale_ratios[2], scale_ratios[3]
        ),
    );
}

#[test]
fn criterion_07_pullback_exactness() {
    let spec = QuadratureSpec::default();
    let cell = Region::HalfAnnulus { r_lo: 0.0, r_hi: 10.0 };
    let one = |_: Complex64| 1.0;

    let doubling: Expr = "2 * z".parse().unwrap();
    let length = composition::pullback_integral(&doubling, 0.0, &cell, &one, &[], &spec)
        .expect("affine pullback converges");
    let err_doubling = (length.value - 10.0).abs();

    let shift: Expr = "z + 1i".parse().unwrap();
    let chord = composition::pullback_integral(&shift, 0.0, &cell, &one, &[], &spec)
        .expect("shifted pullback converges");
    let expected = 2.0 * 99.0f64.sqrt();
    let err_shift = (chord.value - expected).abs();

    gate(
        7,
        "pullback exactness",
        err_doubling <= PULLBACK_TOL_AFFINE && err_shift <= PULLBACK_TOL_SHIFT,
        &format!(
            "2z slice of the radius-10 cell: {:.12} (err {err_doubling:.2e} <= \
             {PULLBACK_TOL_AFFINE:.0e}); z+i slice: {:.10} vs 2*sqrt(99) \
             (err {err_shift:.2e} <= {PULLBACK_TOL_SHIFT:.0e})",
            length.value, chord.value
        ),
    );
}

#[test]
fn criterion_08_divergence_detection() {
    let spec = QuadratureSpec::default();
    let scan = SupScanConfig::default();
    let space = SpacePair::new(vec![Complex64::new(0.0, 4.0)], vec![1.0], TailModel::default())
        .expect("single-point space is valid");
    let psi: Expr = "z + 1i".parse().unwrap();

    let local = composition::local_terms(&space, &psi, &scan, &spec)
        .expect("scan completes with a verdict");
    let (ok, detail) = match local.terms[0].outcome {
        TermOutcome::Divergent { near_y, value } => (
            (near_y - 3.0).abs() <= 0.25 && value >= scan.ceiling,
            format!(
                "scan reports divergence near y = {near_y:.4} (expected 3 +- 0.25) \
                 with value {value:.2e} above the {:.0e} ceiling",
                scan.ceiling
            ),
        ),
        TermOutcome::Finite { sup, arg_y, .. } => (
            false,
            format!("scan settled on a finite maximum {sup:.4} at y = {arg_y:.4}"),
        ),
    };
    gate(8, "divergence detection", ok, &detail);
}

#[test]
fn criterion_09_gram_truncation_monotone() {
    let spec = QuadratureSpec::default();
    let space = golden_space();
    let g = golden_symbol();

    let (gram, truncated) =
        volterra::truncated_norm_profile(&space, &g, &LpConfig::default(), &spec, 6)
            .expect("Gram entries converge");

    let monotone = truncated
        .norms
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-10 * (1.0 + w[0].abs()));
    let psd = truncated.min_eigenvalue >= -1e-8 * truncated.trace.abs().max(1.0);
    let hermitian = gram.max_diag_imag <= 1e-8 && !gram.any_failed;
    let g11_err = rel_err(gram.entry(0, 0).re, GOLDEN_G11);
    let norm_err = truncated
        .norms
        .iter()
        .zip(GOLDEN_TRUNCATED_NORMS)
        .map(|(n, frozen)| rel_err(*n, frozen))
        .fold(0.0f64, f64::max);

    gate(
        9,
        "gram truncation monotone",
        monotone && psd && hermitian && g11_err <= GOLDEN_REL && norm_err <= GOLDEN_REL,
        &format!(
            "truncated norms nondecreasing: {monotone}; min eigenvalue {:.2e} >= \
             -1e-8 * trace: {psd}; G(1,1) rel err {g11_err:.1e}; worst norm rel err \
             {norm_err:.1e} (limit {GOLDEN_REL:.0e})",
            truncated.min_eigenvalue
        ),
    );
}

#[test]
fn criterion_10_region_exhaustion() {
    let spec = QuadratureSpec::default();
    let space = golden_space();
    let g = golden_symbol();
    let gp = g.derivative();

    let pq = volterra::pq_cell_integrals(&space, &g, &spec).expect("cell integrals converge");
    let mut cell_sum = 0.0;
    let mut cell_err = 0.0;
    for slot in pq.p.iter().take(5) {
        let term = slot.as_ref().expect("interior cells carry a value");
        cell_sum += term.value;
        cell_err += term.error_estimate;
    }

    let outer = space.radii()[4];
    let sings: Vec<_> = gp
        .poles()
        .into_iter()
        .map(mslab::numerics::SingularPoint::new)
        .collect();
    let whole = integrate_area(
        |z| match gp.eval(z) {
            Ok(v) => Complex64::new(v.norm_sqr() * z.im, 0.0),
            Err(_) => Complex64::new(f64::NAN, 0.0),
        },
        Region::HalfAnnulus { r_lo: 0.0, r_hi: outer },
        &sings,
        &spec,
    )
    .expect("half-disc integral converges");

    let diff = (cell_sum - whole.value.re).abs();
    let budget = cell_err + whole.error_estimate;
    gate(
        10,
        "region exhaustion",
        diff <= budget,
        &format!(
            "five cells sum to {cell_sum:.8}, half-disc of radius {outer} gives \
             {:.8}; |diff| = {diff:.2e} within combined error estimates {budget:.2e}",
            whole.value.re
        ),
    );
}
