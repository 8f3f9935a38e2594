//! Criteria for composition with a holomorphic self-map of the upper
//! half-plane, acting from a weighted Cauchy-transform space into the
//! Hardy space. Everything reduces to pullback integrals along
//! horizontal lines: for a height `y` and a partition cell, the set
//! `{x : psi(x + iy) in cell}` is resolved by root-bracketing the
//! modulus of the image against the cell radii, a weight is integrated
//! over it, and a scanner takes the supremum over heights.
//!
//! Suprema over a half-line of heights cannot be sampled safely: the
//! weights develop line singularities when the image line sweeps
//! through a node. The scanner's ceiling-and-refine protocol turns
//! those into explicit divergence outcomes instead of finite maxima.

use num_complex::Complex64;

use crate::error::{MslabError, Result};
use crate::hgamma::SpacePair;
use crate::numerics::{
    integrate_line_subdivided, sup_over_y, LineDomain, ProbeValue, QuadratureSpec, Region,
    SupScanConfig,
};
use crate::symb::Expr;
use crate::verdict::{read_decay, Verdict};

/// Distance below which an image-line pass through a weight pole is
/// treated as exact (relative to the pole's scale).
const POLE_CONTACT_SCALE: f64 = 1e-13;

/// Relative slack in the image range check: heights are allowed to
/// touch the real axis but not cross it.
const RANGE_SLACK: f64 = 1e-12;

const SEGMENT_SAMPLES: usize = 1024;
const BISECT_ITERS: u32 = 90;
const MIN_REFINE_ITERS: u32 = 60;

/// One pullback integral at a fixed height.
#[derive(Debug, Clone, Copy)]
pub struct PullbackResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evaluations: u64,
}

/// Outcome of a supremum scan for one criterion term.
#[derive(Debug, Clone, Copy)]
pub enum TermOutcome {
    Finite {
        sup: f64,
        arg_y: f64,
        /// The scan maximum sat on the outermost sampled height.
        not_decided_at_tail: bool,
    },
    Divergent {
        near_y: f64,
        value: f64,
    },
}

impl TermOutcome {
    pub fn is_divergent(&self) -> bool {
        matches!(self, TermOutcome::Divergent { .. })
    }

    /// The term's value with divergence mapped to `+inf`.
    pub fn value_or_inf(&self) -> f64 {
        match self {
            TermOutcome::Finite { sup, .. } => *sup,
            TermOutcome::Divergent { .. } => f64::INFINITY,
        }
    }

    fn scaled(self, c: f64) -> TermOutcome {
        match self {
            TermOutcome::Finite { sup, arg_y, not_decided_at_tail } => {
                TermOutcome::Finite { sup: c * sup, arg_y, not_decided_at_tail }
            }
            TermOutcome::Divergent { near_y, value } => {
                TermOutcome::Divergent { near_y, value: c * value }
            }
        }
    }
}

/// One per-cell supremum term.
#[derive(Debug, Clone, Copy)]
pub struct CellSup {
    /// 1-based cell index.
    pub index: usize,
    pub outcome: TermOutcome,
    /// Every probe behind the reported supremum converged internally.
    pub probes_converged: bool,
    /// Completed height probes (0 when the scan aborted divergent).
    pub probes: u64,
    /// Map evaluations across all probes, including an aborted one.
    pub evaluations: u64,
}

#[derive(Debug, Clone)]
pub struct LocalSups {
    pub terms: Vec<CellSup>,
    /// `+inf` when any term diverged.
    pub sup: f64,
    pub any_failed: bool,
}

struct LinePullback<'a> {
    psi: &'a Expr,
    y: f64,
    /// `None` integrates over the whole line; `Some((lo, hi))` restricts
    /// to `{x : lo <= |psi(x+iy)| < hi}`.
    band: Option<(f64, f64)>,
    weight: &'a dyn Fn(Complex64) -> f64,
    /// Points the weight blows up at; the integrator refines around the
    /// image line's closest approaches to them.
    attractors: &'a [Complex64],
    spec: &'a QuadratureSpec,
    evaluations: u64,
}

impl LinePullback<'_> {
    fn phi(&mut self, x: f64) -> Result<Complex64> {
        self.evaluations += 1;
        let z = Complex64::new(x, self.y);
        let w = self
            .psi
            .eval(z)
            .map_err(|_| MslabError::SingularityOnGrid { at: z })?;
        if w.im < -RANGE_SLACK * (1.0 + w.norm()) {
            return Err(MslabError::RangeViolation { x, y: self.y, im: w.im });
        }
        Ok(w)
    }

    fn is_in(&self, w: Complex64) -> bool {
        match self.band {
            None => true,
            Some((lo, hi)) => {
                let r = w.norm();
                lo <= r && r < hi
            }
        }
    }

    /// Root of `|phi(x)| - r` inside a sign-changing bracket.
    fn bisect_radius(&mut self, mut lo: f64, mut hi: f64, r: f64, h_lo: f64) -> Result<f64> {
        let mut sign_lo = h_lo < 0.0;
        for _ in 0..BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let h_mid = self.phi(mid)?.norm() - r;
            if (h_mid < 0.0) == sign_lo {
                lo = mid;
                sign_lo = h_mid < 0.0;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Distance from the image of `[a, b]` to `gamma`, minimized by a
    /// sampled bracket plus golden-section refinement. Returns the
    /// minimizing `x` and the distance.
    fn closest_approach(
        &mut self,
        a: f64,
        b: f64,
        gamma: Complex64,
        coarse: usize,
    ) -> Result<(f64, f64)> {
        let mut best_x = a;
        let mut best_d = f64::INFINITY;
        let n = coarse.max(8);
        let step = (b - a) / n as f64;
        for j in 0..=n {
            let x = a + step * j as f64;
            let d = (self.phi(x)? - gamma).norm();
            if d < best_d {
                best_d = d;
                best_x = x;
            }
        }
        let mut lo = (best_x - step).max(a);
        let mut hi = (best_x + step).min(b);
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut d1 = (self.phi(x1)? - gamma).norm();
        let mut d2 = (self.phi(x2)? - gamma).norm();
        for _ in 0..MIN_REFINE_ITERS {
            if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
                break;
            }
            if d1 <= d2 {
                hi = x2;
                x2 = x1;
                d2 = d1;
                x1 = hi - INV_PHI * (hi - lo);
                d1 = (self.phi(x1)? - gamma).norm();
            } else {
                lo = x1;
                x1 = x2;
                d1 = d2;
                x2 = lo + INV_PHI * (hi - lo);
                d2 = (self.phi(x2)? - gamma).norm();
            }
        }
        let mid = 0.5 * (lo + hi);
        let d_mid = (self.phi(mid)? - gamma).norm();
        if d_mid < best_d {
            best_x = mid;
            best_d = d_mid;
        }
        Ok((best_x, best_d))
    }

    /// Integrate the weight over one in-band interval. Near-pole passes
    /// get geometric subdivision seeded at the closest approach.
    fn integrate_in_interval(&mut self, p: f64, q: f64) -> Result<(f64, f64, bool)> {
        let mut subdiv: Vec<f64> = Vec::new();
        for &gamma in self.attractors {
            let (x_star, dist) = self.closest_approach(p, q, gamma, 32)?;
            if dist <= POLE_CONTACT_SCALE * (1.0 + gamma.norm()) {
                return Err(MslabError::SingularityOnGrid {
                    at: Complex64::new(x_star, self.y),
                });
            }
            if dist < q - p {
                let mut offset = dist;
                while offset < q - p {
                    for cut in [x_star - offset, x_star + offset] {
                        if cut > p && cut < q {
                            subdiv.push(cut);
                        }
                    }
                    offset *= 4.0;
                }
            }
        }

        let psi = self.psi;
        let y = self.y;
        let weight = self.weight;
        let evals = std::cell::Cell::new(0u64);
        let violation = std::cell::Cell::new(None::<(f64, f64)>);
        let res = integrate_line_subdivided(
            |x| {
                evals.set(evals.get() + 1);
                let w = match psi.eval(Complex64::new(x, y)) {
                    Ok(w) => w,
                    Err(_) => return Complex64::new(f64::NAN, 0.0),
                };
                if w.im < -RANGE_SLACK * (1.0 + w.norm()) {
                    if violation.get().is_none() {
                        violation.set(Some((x, w.im)));
                    }
                    return Complex64::new(f64::NAN, 0.0);
                }
                Complex64::new(weight(w), 0.0)
            },
            y,
            LineDomain::Interval(p, q),
            &subdiv,
            self.spec,
        );
        self.evaluations += evals.get();
        if let Some((x, im)) = violation.get() {
            return Err(MslabError::RangeViolation { x, y, im });
        }
        let res = res?;
        Ok((res.value.re, res.error_estimate, res.converged))
    }

    /// One sampled window segment: locate band crossings, then integrate
    /// the in-band pieces.
    fn segment(&mut self, a: f64, b: f64) -> Result<(f64, f64, bool)> {
        let n = SEGMENT_SAMPLES;
        let step = (b - a) / n as f64;
        let mut radii: Vec<f64> = Vec::with_capacity(n + 1);
        for j in 0..=n {
            radii.push(self.phi(a + step * j as f64)?.norm());
        }
        let mut edges = vec![a];
        if let Some((lo, hi)) = self.band {
            let mut bounds = vec![lo];
            if hi.is_finite() {
                bounds.push(hi);
            }
            for j in 0..n {
                let (xa, xb) = (a + step * j as f64, a + step * (j + 1) as f64);
                for &r in &bounds {
                    let (ha, hb) = (radii[j] - r, radii[j + 1] - r);
                    if ha == 0.0 {
                        edges.push(xa);
                    } else if ha * hb < 0.0 {
                        edges.push(self.bisect_radius(xa, xb, r, ha)?);
                    }
                }
            }
        }
        edges.push(b);
        edges.sort_by(f64::total_cmp);

        let mut value = 0.0;
        let mut error = 0.0;
        let mut converged = true;
        for pair in edges.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            if q - p <= 1e-13 * (1.0 + q.abs()) {
                continue;
            }
            let mid = self.phi(0.5 * (p + q))?;
            if !self.is_in(mid) {
                continue;
            }
            let (v, e, c) = self.integrate_in_interval(p, q)?;
            value += v;
            error += e;
            converged &= c;
        }
        Ok((value, error, converged))
    }

    fn initial_half_width(&self) -> f64 {
        // The window must start beyond every feature scale: the cell
        // radii, the weight poles, and the probe height itself (the
        // image line's geometry varies on the scale of y, and tail
        // decay only sets in past it).
        let mut w = self.spec.tail_radius.max(4.0 * self.y);
        if let Some((lo, hi)) = self.band {
            if lo.is_finite() {
                w = w.max(4.0 * lo);
            }
            if hi.is_finite() {
                w = w.max(4.0 * hi);
            }
        }
        for gamma in self.attractors {
            w = w.max(2.0 * gamma.norm());
        }
        w
    }

    fn run(&mut self) -> Result<PullbackResult> {
        self.spec.validate()?;
        let mut half = self.initial_half_width();
        let first = self.segment(-half, half)?;
        let mut value = first.0;
        let mut error = first.1;
        let mut converged = first.2;

        let mut quiet_rounds = 0u32;
        let mut history: Vec<f64> = Vec::new();
        let mut settled = false;
        for _ in 0..self.spec.tail_doubling_rounds {
            let left = self.segment(-2.0 * half, -half)?;
            let right = self.segment(half, 2.0 * half)?;
            let added = left.0 + right.0;
            value += added;
            error += left.1 + right.1;
            converged &= left.2 && right.2;
            half *= 2.0;

            let threshold = self.spec.threshold(value.abs());
            if added.abs() <= threshold {
                quiet_rounds += 1;
                if quiet_rounds >= 2 {
                    settled = true;
                    error += added.abs();
                    break;
                }
            } else {
                quiet_rounds = 0;
            }
            history.push(added.abs());
            let k = history.len();
            if k >= 4 {
                let growing = (k - 3..k).all(|i| history[i] >= 1.3 * history[i - 1]);
                if growing && history[k - 1] > threshold {
                    return Err(MslabError::Divergent { at: half, value });
                }
            }
        }
        if !settled {
            if let Some(last) = history.last() {
                error += 4.0 * last;
            }
            converged = false;
        }
        Ok(PullbackResult {
            value,
            error_estimate: error,
            converged,
            evaluations: self.evaluations,
        })
    }
}

fn band_of(cell: &Region) -> Result<(f64, f64)> {
    match cell {
        Region::HalfAnnulus { r_lo, r_hi } => Ok((*r_lo, *r_hi)),
        Region::UpperHalfPlane => Ok((0.0, f64::INFINITY)),
        other => Err(MslabError::Config(format!(
            "pullback cells are half-annuli, got {other:?}"
        ))),
    }
}

fn check_map(psi: &Expr) -> Result<()> {
    if psi.as_constant().is_some() {
        return Err(MslabError::Config(
            "pullbacks through a constant map are degenerate".to_string(),
        ));
    }
    Ok(())
}

/// `int_{x : psi(x+iy) in cell} weight(psi(x+iy)) dx`.
///
/// `attractors` lists the points where the weight blows up, so the
/// integrator can refine the image line's closest approaches; an exact
/// pass through one is reported as a line singularity.
pub fn pullback_integral(
    psi: &Expr,
    y: f64,
    cell: &Region,
    weight: &dyn Fn(Complex64) -> f64,
    attractors: &[Complex64],
    spec: &QuadratureSpec,
) -> Result<PullbackResult> {
    check_map(psi)?;
    if !(y >= 0.0) {
        return Err(MslabError::DomainViolation {
            at: Complex64::new(0.0, y),
            msg: "pullback heights must satisfy y >= 0".to_string(),
        });
    }
    let band = band_of(cell)?;
    LinePullback {
        psi,
        y,
        band: Some(band),
        weight,
        attractors,
        spec,
        evaluations: 0,
    }
    .run()
}

/// Whole-line variant (no cell indicator) for direct sums.
pub fn full_line_pullback(
    psi: &Expr,
    y: f64,
    weight: &dyn Fn(Complex64) -> f64,
    attractors: &[Complex64],
    spec: &QuadratureSpec,
) -> Result<PullbackResult> {
    check_map(psi)?;
    if !(y >= 0.0) {
        return Err(MslabError::DomainViolation {
            at: Complex64::new(0.0, y),
            msg: "pullback heights must satisfy y >= 0".to_string(),
        });
    }
    LinePullback { psi, y, band: None, weight, attractors, spec, evaluations: 0 }.run()
}

/// Scan the supremum over heights of one pullback family.
fn sup_term(
    index: usize,
    psi: &Expr,
    band: Option<(f64, f64)>,
    weight: &dyn Fn(Complex64) -> f64,
    attractors: &[Complex64],
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<CellSup> {
    let mut hint: f64 = 0.0;
    if let Some((lo, hi)) = band {
        if lo.is_finite() {
            hint = hint.max(0.5 * lo);
        }
        if hi.is_finite() {
            hint = hint.max(0.5 * hi);
        }
    }
    for gamma in attractors {
        hint = hint.max(gamma.norm());
    }
    let evals = std::cell::Cell::new(0u64);
    let probe = |y: f64| -> Result<ProbeValue> {
        let mut pullback =
            LinePullback { psi, y, band, weight, attractors, spec, evaluations: 0 };
        let res = pullback.run();
        if let Ok(r) = &res {
            evals.set(evals.get() + r.evaluations);
        }
        let res = res?;
        Ok(ProbeValue { value: res.value, converged: res.converged })
    };
    match sup_over_y(probe, hint, scan) {
        Ok(out) => Ok(CellSup {
            index,
            outcome: TermOutcome::Finite {
                sup: out.sup,
                arg_y: out.arg_y,
                not_decided_at_tail: out.not_decided_at_tail,
            },
            probes_converged: !out.max_probe_unconverged,
            probes: out.probes,
            evaluations: evals.get(),
        }),
        Err(MslabError::Divergent { at, value }) => Ok(CellSup {
            index,
            outcome: TermOutcome::Divergent { near_y: at, value },
            probes_converged: false,
            probes: 0,
            evaluations: evals.get(),
        }),
        Err(e) => Err(e),
    }
}

fn collect_sups(terms: Vec<CellSup>) -> LocalSups {
    let sup = terms
        .iter()
        .map(|t| t.outcome.value_or_inf())
        .fold(0.0f64, f64::max);
    let any_failed = terms
        .iter()
        .any(|t| !t.probes_converged && !t.outcome.is_divergent());
    LocalSups { terms, sup, any_failed }
}

/// Local terms: for each cell,
/// `T_n = sup_y v_n int_{x : psi(x+iy) in cell n} dx / |psi(x+iy) - gamma_n|^2`.
/// The weight `v_n` stays outside the scan, so terms are exactly linear
/// in it.
pub fn local_terms(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<LocalSups> {
    check_map(psi)?;
    let mut terms = Vec::with_capacity(space.len());
    for n in 1..=space.len() {
        let gamma = space.gammas()[n - 1];
        let v = space.weights()[n - 1];
        let band = band_of(&space.cell_region(n))?;
        let weight = move |w: Complex64| 1.0 / (w - gamma).norm_sqr();
        let term = sup_term(n, psi, Some(band), &weight, &[gamma], scan, spec)?;
        terms.push(CellSup { outcome: term.outcome.scaled(v), ..term });
    }
    Ok(collect_sups(terms))
}

/// The two per-cell sup families entering the global terms: the
/// inverse-square image integrals (slot 1 is never used and never
/// computed) and the cumulative image measures of the discs `|z| < m_n`
/// (the last slot is never used; its measure is typically infinite).
#[derive(Debug, Clone)]
pub struct GlobalParts {
    pub inverse_square: Vec<Option<CellSup>>,
    pub joint_measure: Vec<Option<CellSup>>,
}

/// `sup_y int_{x : psi(x+iy) in cell k} dx / |psi(x+iy)|^2` for
/// `k = 2..N`.
pub fn inverse_square_sups(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<Vec<Option<CellSup>>> {
    check_map(psi)?;
    let weight = |w: Complex64| 1.0 / w.norm_sqr();
    let mut out = Vec::with_capacity(space.len());
    for k in 1..=space.len() {
        if k == 1 {
            out.push(None);
            continue;
        }
        let band = band_of(&space.cell_region(k))?;
        out.push(Some(sup_term(k, psi, Some(band), &weight, &[], scan, spec)?));
    }
    Ok(out)
}

/// `sup_y m({x : |psi(x+iy)| < m_n})` for `n = 1..N-1`: the cumulative
/// measure of the first `n` cells' pullbacks at a shared height.
pub fn joint_measure_sups(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<Vec<Option<CellSup>>> {
    check_map(psi)?;
    let weight = |_: Complex64| 1.0;
    let mut out = Vec::with_capacity(space.len());
    for n in 1..=space.len() {
        if n == space.len() {
            out.push(None);
            continue;
        }
        let band = (0.0, space.radii()[n - 1]);
        out.push(Some(sup_term(n, psi, Some(band), &weight, &[], scan, spec)?));
    }
    Ok(out)
}

/// One assembled global term.
#[derive(Debug, Clone, Copy)]
pub struct GlobalTermValue {
    /// 1-based index.
    pub index: usize,
    pub value: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone)]
pub struct GlobalSups {
    pub b: Vec<GlobalTermValue>,
    pub parts: GlobalParts,
    pub sup: f64,
    pub any_failed: bool,
}

/// Global terms assembled from the two sup families:
/// `B_n = (sum_{l<=n} v_l)(sum_{k>n} U_k)
///      + (sum_{l>n} v_l/|gamma_l|^2) M_n`,
/// with `U_k` the inverse-square sups and `M_n` the joint measure sups.
/// `B_N` is exactly zero (empty-sum coefficients).
pub fn global_terms_from_parts(space: &SpacePair, parts: &GlobalParts) -> GlobalSups {
    let n_cells = space.len();
    let mut weight_prefix = vec![0.0; n_cells + 1];
    for k in 1..=n_cells {
        weight_prefix[k] = weight_prefix[k - 1] + space.weights()[k - 1];
    }
    let mut decay_suffix = vec![0.0; n_cells + 2];
    for k in (1..=n_cells).rev() {
        decay_suffix[k] =
            decay_suffix[k + 1] + space.weights()[k - 1] / space.gammas()[k - 1].norm_sqr();
    }
    let mut b = Vec::with_capacity(n_cells);
    for n in 1..=n_cells {
        if n == n_cells {
            b.push(GlobalTermValue { index: n, value: 0.0, divergent: false });
            continue;
        }
        let mut value = 0.0;
        let mut divergent = false;
        for k in (n + 1)..=n_cells {
            let term = parts.inverse_square[k - 1]
                .as_ref()
                .expect("inverse-square sups computed for k >= 2");
            divergent |= term.outcome.is_divergent();
            value += weight_prefix[n] * term.outcome.value_or_inf();
        }
        let measure = parts.joint_measure[n - 1]
            .as_ref()
            .expect("joint measures computed for n < N");
        divergent |= measure.outcome.is_divergent();
        value += decay_suffix[n + 1] * measure.outcome.value_or_inf();
        if divergent {
            value = f64::INFINITY;
        }
        b.push(GlobalTermValue { index: n, value, divergent });
    }
    let sup = b.iter().map(|t| t.value).fold(0.0f64, f64::max);
    let any_failed = parts
        .inverse_square
        .iter()
        .chain(parts.joint_measure.iter())
        .flatten()
        .any(|t| !t.probes_converged && !t.outcome.is_divergent());
    GlobalSups { b, parts: parts.clone(), sup, any_failed }
}

pub fn global_terms(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<GlobalSups> {
    let parts = GlobalParts {
        inverse_square: inverse_square_sups(space, psi, scan, spec)?,
        joint_measure: joint_measure_sups(space, psi, scan, spec)?,
    };
    Ok(global_terms_from_parts(space, &parts))
}

#[derive(Debug, Clone)]
pub struct CompactnessReading {
    pub local: LocalSups,
    pub global: GlobalSups,
    pub verdict: Verdict,
}

pub fn compact_profile(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<CompactnessReading> {
    let local = local_terms(space, psi, scan, spec)?;
    let global = global_terms(space, psi, scan, spec)?;
    let verdict = compactness_verdict(&local, &global);
    Ok(CompactnessReading { local, global, verdict })
}

pub fn compactness_verdict(local: &LocalSups, global: &GlobalSups) -> Verdict {
    let l_values: Vec<f64> = local.terms.iter().map(|t| t.outcome.value_or_inf()).collect();
    let l = read_decay(
        &l_values,
        local.terms.iter().any(|t| t.outcome.is_divergent()),
        local.any_failed,
    );
    let b_values: Vec<f64> = global.b.iter().map(|t| t.value).collect();
    let b = read_decay(
        &b_values,
        global.b.iter().any(|t| t.divergent),
        global.any_failed,
    );
    l.and(b)
}

/// Hilbert-Schmidt sums: the local sum over cells, the global splitting
/// analogue, and the direct sum over the basis (whole-line pullbacks).
#[derive(Debug, Clone)]
pub struct HsSums {
    /// `sum_k T_k`; `+inf` when a constituent diverged.
    pub h_local: f64,
    /// `sum_m (sum_{n<m} v_n) U_m + sum_m (sum_{n>m} v_n/|gamma_n|^2) M_m`
    /// with per-cell (not cumulative) measure sups `M_m`.
    pub h_global: f64,
    /// `sum_n sup_y v_n int_R dx / |psi(x+iy) - gamma_n|^2`.
    pub h_direct: f64,
    pub local: LocalSups,
    pub inverse_square: Vec<Option<CellSup>>,
    pub cell_measure: Vec<Option<CellSup>>,
    pub direct: Vec<CellSup>,
}

/// `sup_y m({x : psi(x+iy) in cell m})` for `m = 1..N-1`.
pub fn cell_measure_sups(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<Vec<Option<CellSup>>> {
    check_map(psi)?;
    let weight = |_: Complex64| 1.0;
    let mut out = Vec::with_capacity(space.len());
    for m in 1..=space.len() {
        if m == space.len() {
            out.push(None);
            continue;
        }
        let band = band_of(&space.cell_region(m))?;
        out.push(Some(sup_term(m, psi, Some(band), &weight, &[], scan, spec)?));
    }
    Ok(out)
}

/// Whole-line direct terms `sup_y v_n int_R dx / |psi(x+iy) - gamma_n|^2`.
pub fn direct_sups(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<Vec<CellSup>> {
    check_map(psi)?;
    let mut out = Vec::with_capacity(space.len());
    for n in 1..=space.len() {
        let gamma = space.gammas()[n - 1];
        let v = space.weights()[n - 1];
        let weight = move |w: Complex64| 1.0 / (w - gamma).norm_sqr();
        let term = sup_term(n, psi, None, &weight, &[gamma], scan, spec)?;
        out.push(CellSup { outcome: term.outcome.scaled(v), ..term });
    }
    Ok(out)
}

pub fn hs_sums_from_parts(
    space: &SpacePair,
    local: LocalSups,
    inverse_square: Vec<Option<CellSup>>,
    cell_measure: Vec<Option<CellSup>>,
    direct: Vec<CellSup>,
) -> HsSums {
    let h_local = local.terms.iter().map(|t| t.outcome.value_or_inf()).sum();
    let n_cells = space.len();
    let mut weight_prefix = vec![0.0; n_cells + 1];
    for k in 1..=n_cells {
        weight_prefix[k] = weight_prefix[k - 1] + space.weights()[k - 1];
    }
    let mut decay_suffix = vec![0.0; n_cells + 2];
    for k in (1..=n_cells).rev() {
        decay_suffix[k] =
            decay_suffix[k + 1] + space.weights()[k - 1] / space.gammas()[k - 1].norm_sqr();
    }
    let mut h_global = 0.0;
    for m in 1..=n_cells {
        if let Some(term) = &inverse_square[m - 1] {
            h_global += weight_prefix[m - 1] * term.outcome.value_or_inf();
        }
        if let Some(term) = &cell_measure[m - 1] {
            h_global += decay_suffix[m + 1] * term.outcome.value_or_inf();
        }
    }
    let h_direct = direct.iter().map(|t| t.outcome.value_or_inf()).sum();
    HsSums { h_local, h_global, h_direct, local, inverse_square, cell_measure, direct }
}

pub fn hs_sums(
    space: &SpacePair,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<HsSums> {
    let local = local_terms(space, psi, scan, spec)?;
    let inverse_square = inverse_square_sups(space, psi, scan, spec)?;
    let cell_measure = cell_measure_sups(space, psi, scan, spec)?;
    let direct = direct_sups(space, psi, scan, spec)?;
    Ok(hs_sums_from_parts(space, local, inverse_square, cell_measure, direct))
}

/// `sup_y int_R |f(psi(x+iy))|^2 dx`, the image-line Hardy norm of the
/// composed function.
pub fn pointwise_image_norm(
    f: &Expr,
    psi: &Expr,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<TermOutcome> {
    check_map(psi)?;
    if f.is_zero() {
        return Ok(TermOutcome::Finite { sup: 0.0, arg_y: 0.0, not_decided_at_tail: false });
    }
    let weight = |w: Complex64| match f.eval(w) {
        Ok(v) => v.norm_sqr(),
        Err(_) => f64::NAN,
    };
    let attractors = f.poles();
    Ok(sup_term(0, psi, None, &weight, &attractors, scan, spec)?.outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgamma::TailModel;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn golden_space(n: usize) -> SpacePair {
        SpacePair::new(
            (1..=n).map(|k| cx((4.0f64).powi(k as i32), 0.0)).collect(),
            vec![1.0; n],
            TailModel::default(),
        )
        .unwrap()
    }

    fn unit_weight() -> impl Fn(Complex64) -> f64 {
        |_| 1.0
    }

    #[test]
    fn pullback_lengths_match_hand_values() {
        let spec = QuadratureSpec::default();
        let cell = Region::HalfAnnulus { r_lo: 0.0, r_hi: 10.0 };

        let double: Expr = "2*z".parse().unwrap();
        let res = pullback_integral(&double, 0.0, &cell, &unit_weight(), &[], &spec).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.value, 10.0, epsilon = 1e-8);

        let shift: Expr = "z+1i".parse().unwrap();
        let res = pullback_integral(&shift, 0.0, &cell, &unit_weight(), &[], &spec).unwrap();
        assert_relative_eq!(res.value, 2.0 * 99.0f64.sqrt(), epsilon = 1e-6);

        let res = pullback_integral(&shift, 0.0, &cell, &|_| 0.0, &[], &spec).unwrap();
        assert_eq!(res.value, 0.0);

        // The image line at height 20 misses the cell entirely.
        let res = pullback_integral(&shift, 20.0, &cell, &unit_weight(), &[], &spec).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(res.converged);
    }

    #[test]
    fn pullback_rejects_bad_input() {
        let spec = QuadratureSpec::default();
        let cell = Region::HalfAnnulus { r_lo: 0.0, r_hi: 10.0 };
        let constant = Expr::real(3.0);
        assert!(pullback_integral(&constant, 0.0, &cell, &unit_weight(), &[], &spec).is_err());

        let shift: Expr = "z+1i".parse().unwrap();
        assert!(pullback_integral(&shift, -1.0, &cell, &unit_weight(), &[], &spec).is_err());
        let rect = Region::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        assert!(pullback_integral(&shift, 0.0, &rect, &unit_weight(), &[], &spec).is_err());

        let down: Expr = "z-1i".parse().unwrap();
        assert!(matches!(
            pullback_integral(&down, 0.0, &cell, &unit_weight(), &[], &spec),
            Err(MslabError::RangeViolation { .. })
        ));
    }

    #[test]
    fn partitioned_pullback_sums_to_window_measure() {
        // The pullback of a partition is a partition: cell measures at a
        // shared height add up to the measure of the pulled-back disc.
        let space = golden_space(3);
        let spec = QuadratureSpec::default();
        let psi: Expr = "2*z".parse().unwrap();
        let y = 1.5;
        let mut total = 0.0;
        for n in 1..=2 {
            let res = pullback_integral(
                &psi,
                y,
                &space.cell_region(n),
                &unit_weight(),
                &[],
                &spec,
            )
            .unwrap();
            total += res.value;
        }
        let disc = Region::HalfAnnulus { r_lo: 0.0, r_hi: space.radii()[1] };
        let whole = pullback_integral(&psi, y, &disc, &unit_weight(), &[], &spec).unwrap();
        assert_relative_eq!(total, whole.value, max_relative = 1e-8);
        // Affine exactness: the disc pullback is an explicit interval.
        let expected = 2.0 * ((space.radii()[1] / 2.0).powi(2) - y * y).sqrt();
        assert_relative_eq!(whole.value, expected, max_relative = 1e-8);
    }

    #[test]
    fn inverse_square_sups_match_closed_forms() {
        // For psi = 2z and a cell [a, b), the scanned supremum is
        // acos(a/b)/a, attained at height a/2; the unbounded tail cell
        // gives (pi/2)/a.
        let space = golden_space(3);
        let spec = QuadratureSpec::default();
        let scan = SupScanConfig::default();
        let psi: Expr = "2*z".parse().unwrap();
        let sups = inverse_square_sups(&space, &psi, &scan, &spec).unwrap();
        assert!(sups[0].is_none());
        let (a, b) = (space.radii()[0], space.radii()[1]);
        match sups[1].as_ref().unwrap().outcome {
            TermOutcome::Finite { sup, arg_y, .. } => {
                assert_relative_eq!(sup, (a / b).acos() / a, max_relative = 1e-5);
                assert_relative_eq!(arg_y, a / 2.0, max_relative = 1e-2);
            }
            other => panic!("expected a finite sup, got {other:?}"),
        }
        match sups[2].as_ref().unwrap().outcome {
            TermOutcome::Finite { sup, .. } => {
                assert_relative_eq!(sup, (PI / 2.0) / b, max_relative = 1e-5);
            }
            other => panic!("expected a finite sup, got {other:?}"),
        }
    }

    #[test]
    fn global_terms_match_goldens() {
        let space = golden_space(6);
        let spec = QuadratureSpec::default();
        let scan = SupScanConfig::default();
        let psi: Expr = "2*z".parse().unwrap();
        let global = global_terms(&space, &psi, &scan, &spec).unwrap();
        let golden = [
            0.2173425081561869,
            0.09814505915175861,
            0.03533765266910379,
            0.011341093009209893,
            0.003220549431020724,
            0.0,
        ];
        for (term, want) in global.b.iter().zip(golden) {
            if want == 0.0 {
                assert_eq!(term.value, 0.0);
            } else {
                assert_relative_eq!(term.value, want, max_relative = 1e-4);
            }
        }
        assert!(!global.any_failed);
    }

    #[test]
    fn local_terms_scale_linearly_and_identity_map_diverges() {
        let spec = QuadratureSpec::default();
        let scan = SupScanConfig::default();

        // psi = z + 10i pushes the line well away from a real node: the
        // supremum is finite and linear in the weight.
        let psi: Expr = "z+10i".parse().unwrap();
        let space = SpacePair::new(vec![cx(0.0, 4.0)], vec![1.0], TailModel::default()).unwrap();
        let local = local_terms(&space, &psi, &scan, &spec).unwrap();
        match local.terms[0].outcome {
            TermOutcome::Finite { sup, arg_y, .. } => {
                assert_relative_eq!(sup, PI / 6.0, max_relative = 1e-5);
                assert!(arg_y.abs() < 1e-6);
            }
            other => panic!("expected a finite sup, got {other:?}"),
        }

        let heavier =
            SpacePair::new(vec![cx(0.0, 4.0)], vec![2.0], TailModel::default()).unwrap();
        let local2 = local_terms(&heavier, &psi, &scan, &spec).unwrap();
        assert_eq!(
            local2.terms[0].outcome.value_or_inf(),
            2.0 * local.terms[0].outcome.value_or_inf()
        );

        // The identity map sweeps through every real node as y -> 0:
        // the height-zero probe passes exactly through the pole.
        let space = SpacePair::new(vec![cx(4.0, 0.0)], vec![1.0], TailModel::default()).unwrap();
        let ident: Expr = "z".parse().unwrap();
        let local = local_terms(&space, &ident, &scan, &spec).unwrap();
        assert!(local.terms[0].outcome.is_divergent());
        assert_eq!(local.sup, f64::INFINITY);
    }

    #[test]
    fn blowup_between_grid_heights_is_hunted_down() {
        // psi = z + i against the node 4i: the direct integral is
        // pi/|y - 3|, which blows past the ceiling only near y = 3,
        // strictly between the scanner's dyadic grid heights.
        let spec = QuadratureSpec::default();
        let scan = SupScanConfig::default();
        let space = SpacePair::new(vec![cx(0.0, 4.0)], vec![1.0], TailModel::default()).unwrap();
        let psi: Expr = "z+1i".parse().unwrap();
        let sums = hs_sums(&space, &psi, &scan, &spec).unwrap();
        match sums.local.terms[0].outcome {
            TermOutcome::Divergent { near_y, .. } => {
                assert!((near_y - 3.0).abs() < 0.25, "diverged at y = {near_y}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert_eq!(sums.h_local, f64::INFINITY);
        assert_eq!(sums.h_global, 0.0);
        assert!(sums.direct[0].outcome.is_divergent());
    }

    #[test]
    fn vertical_shift_keeps_direct_terms_flat_but_basis_decays() {
        // With psi = z + 2i every direct term equals pi/2 (the node is
        // real, the integral is translation invariant, and the sup sits
        // at height zero) while the sampled basis functions still vanish
        // pointwise along the node sequence.
        let spec = QuadratureSpec::default();
        let scan = SupScanConfig::default();
        let space = golden_space(3);
        let psi: Expr = "z+2i".parse().unwrap();
        let direct = direct_sups(&space, &psi, &scan, &spec).unwrap();
        for term in &direct {
            match term.outcome {
                TermOutcome::Finite { sup, .. } => {
                    assert_relative_eq!(sup, PI / 2.0, max_relative = 1e-5);
                }
                other => panic!("expected a finite sup, got {other:?}"),
            }
        }
        let z0 = cx(0.0, 3.0);
        let mut samples = Vec::new();
        for n in 1..=3 {
            let e = space.basis_fn(n);
            samples.push(e.eval(z0).unwrap().norm());
        }
        assert!(samples[0] > samples[1] && samples[1] > samples[2]);
    }

    #[test]
    fn image_norms_match_closed_forms() {
        let spec = QuadratureSpec::default();
        let scan = SupScanConfig::default();
        let f: Expr = "1/(z+1i)".parse().unwrap();

        let ident: Expr = "z".parse().unwrap();
        match pointwise_image_norm(&f, &ident, &scan, &spec).unwrap() {
            TermOutcome::Finite { sup, arg_y, .. } => {
                assert_relative_eq!(sup, PI, max_relative = 1e-5);
                assert!(arg_y.abs() < 1e-6);
            }
            other => panic!("expected a finite sup, got {other:?}"),
        }

        let shift: Expr = "z+1i".parse().unwrap();
        match pointwise_image_norm(&f, &shift, &scan, &spec).unwrap() {
            TermOutcome::Finite { sup, .. } => {
                assert_relative_eq!(sup, PI / 2.0, max_relative = 1e-5);
            }
            other => panic!("expected a finite sup, got {other:?}"),
        }

        match pointwise_image_norm(&Expr::real(0.0), &shift, &scan, &spec).unwrap() {
            TermOutcome::Finite { sup, .. } => assert_eq!(sup, 0.0),
            other => panic!("expected zero, got {other:?}"),
        }
    }

    #[test]
    fn single_point_hs_reduces_to_direct() {
        let spec = QuadratureSpec::default();
        let scan = SupScanConfig::default();
        let space = SpacePair::new(vec![cx(0.0, 4.0)], vec![1.0], TailModel::default()).unwrap();
        let psi: Expr = "z+10i".parse().unwrap();
        let sums = hs_sums(&space, &psi, &scan, &spec).unwrap();
        assert_eq!(sums.h_global, 0.0);
        assert_relative_eq!(sums.h_local, sums.h_direct, max_relative = 1e-9);
        assert_relative_eq!(sums.h_local, PI / 6.0, max_relative = 1e-5);
    }
}
