//! Adaptive area integration over half-plane regions.
//!
//! The region is mapped onto parameter rectangles (directly, or through
//! polar or log-polar charts) and covered by tensor Gauss cells refined
//! worst-first. Declared singular points are removed from the main chart by
//! a smooth cutoff and re-integrated on their own log-polar patches, which
//! descend far below the caller's exclusion radius; the mass of the
//! innermost shells also drives a divergence check, so a non-integrable
//! point yields an error instead of a silently truncated value.
//!
//! Unbounded regions get a truncated core plus dyadically doubled annular
//! tail windows with the same settle-or-diverge rule as the line engine.

use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::gauss::{cached_rule, GaussRule};
use super::{IntegralResult, QuadratureSpec, Region, SingularPoint};
use crate::error::{MslabError, Result};

const MAX_CELLS: usize = 40_000;
const GROWTH_FACTOR: f64 = 1.3;
const SHELL_DIVERGENCE_RATIO: f64 = 0.9;
const SHELL_NOISE_FLOOR: f64 = 1e-280;
const PATCH_FLOOR_SCALE: f64 = 1e-12;

fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Smooth cutoff that vanishes for `d <= s/2` and equals one for `d >= s`.
fn cutoff(d: f64, s: f64) -> f64 {
    smootherstep((d - 0.5 * s) / (0.5 * s))
}

struct Mollifier {
    at: Complex64,
    radius: f64,
}

struct Guard<F> {
    f: F,
    exclusions: Vec<SingularPoint>,
    mollifiers: Vec<Mollifier>,
    evaluations: u64,
    bad: Option<Complex64>,
}

impl<F: FnMut(Complex64) -> Complex64> Guard<F> {
    fn raw(&mut self, z: Complex64) -> Complex64 {
        self.evaluations += 1;
        let v = (self.f)(z);
        if v.is_finite() {
            v
        } else {
            if self.bad.is_none() {
                self.bad = Some(z);
            }
            Complex64::new(0.0, 0.0)
        }
    }

    /// Main-chart integrand: zero inside exclusion discs, smoothly cut off
    /// around every patched pole.
    fn main(&mut self, z: Complex64) -> Complex64 {
        for s in &self.exclusions {
            if (z - s.at).norm() < s.exclusion {
                return Complex64::new(0.0, 0.0);
            }
        }
        let mut m = 1.0;
        for moll in &self.mollifiers {
            let t = cutoff((z - moll.at).norm(), moll.radius);
            if t == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            m *= t;
        }
        if m == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.raw(z) * m
    }

    /// Patch integrand for mollifier `k`: the complementary cutoff weight.
    /// Bypasses exclusion discs so the puncture mass is recovered.
    fn patch(&mut self, z: Complex64, k: usize) -> Complex64 {
        let moll = &self.mollifiers[k];
        let t = 1.0 - cutoff((z - moll.at).norm(), moll.radius);
        if t == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.raw(z) * t
    }
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

struct Cell {
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
    depth: u32,
    value: Complex64,
    error: f64,
    alive: bool,
}

struct CellEstimate {
    value: Complex64,
    error: f64,
}

fn tensor<G: FnMut(f64, f64) -> Complex64>(
    g: &mut G,
    rule: &GaussRule,
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
) -> (Complex64, f64) {
    let sc = 0.5 * (s0 + s1);
    let sh = 0.5 * (s1 - s0);
    let tc = 0.5 * (t0 + t1);
    let th = 0.5 * (t1 - t0);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut acc_abs = 0.0;
    for (i, &xi) in rule.nodes.iter().enumerate() {
        let s = sc + sh * xi;
        for (j, &xj) in rule.nodes.iter().enumerate() {
            let w = rule.weights[i] * rule.weights[j];
            let v = g(s, tc + th * xj);
            acc += w * v;
            acc_abs += w * v.norm();
        }
    }
    let jac = sh * th;
    (acc * jac, acc_abs * jac)
}

fn estimate_cell<G: FnMut(f64, f64) -> Complex64>(
    g: &mut G,
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
) -> CellEstimate {
    let (low, _) = tensor(g, cached_rule(4), s0, s1, t0, t1);
    let (high, resabs) = tensor(g, cached_rule(8), s0, s1, t0, t1);
    let raw = (high - low).norm();
    let floor = 50.0 * f64::EPSILON * resabs;
    CellEstimate { value: high, error: raw.max(floor) }
}

struct ChartOutcome {
    value: Complex64,
    error: f64,
    converged: bool,
}

/// Worst-first refinement of `g` over the parameter rectangle. Splitting is
/// aspect-aware relative to the initial spans so long thin charts subdivide
/// along their long axis first.
fn adaptive_param<G: FnMut(f64, f64) -> Complex64>(
    g: &mut G,
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
    rel_tol: f64,
    abs_budget: f64,
    max_depth: u32,
) -> ChartOutcome {
    let s_span = s1 - s0;
    let t_span = t1 - t0;
    let mut cells: Vec<Cell> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut value;
    let mut error;

    {
        let est = estimate_cell(g, s0, s1, t0, t1);
        value = est.value;
        error = est.error;
        heap.push(HeapEntry { error: est.error, id: 0 });
        cells.push(Cell { s0, s1, t0, t1, depth: 0, value: est.value, error: est.error, alive: true });
    }

    let threshold = |v: f64| abs_budget.max(rel_tol * v);
    let mut capped = false;

    while error > threshold(value.norm()) {
        let Some(top) = heap.pop() else { break };
        let (cs0, cs1, ct0, ct1, depth) = {
            let c = &cells[top.id];
            (c.s0, c.s1, c.t0, c.t1, c.depth)
        };
        if depth >= max_depth {
            continue;
        }
        if cells.len() + 4 > MAX_CELLS {
            capped = true;
            break;
        }
        let sm = 0.5 * (cs0 + cs1);
        let tm = 0.5 * (ct0 + ct1);
        if (sm <= cs0 && tm <= ct0) || (sm >= cs1 && tm >= ct1) {
            continue;
        }
        let rs = (cs1 - cs0) / s_span;
        let rt = (ct1 - ct0) / t_span;
        let children: Vec<(f64, f64, f64, f64)> = if rs > 2.0 * rt && sm > cs0 && sm < cs1 {
            vec![(cs0, sm, ct0, ct1), (sm, cs1, ct0, ct1)]
        } else if rt > 2.0 * rs && tm > ct0 && tm < ct1 {
            vec![(cs0, cs1, ct0, tm), (cs0, cs1, tm, ct1)]
        } else {
            vec![
                (cs0, sm, ct0, tm),
                (sm, cs1, ct0, tm),
                (cs0, sm, tm, ct1),
                (sm, cs1, tm, ct1),
            ]
        };
        value -= cells[top.id].value;
        error -= cells[top.id].error;
        cells[top.id].alive = false;
        for (a, b, c, d) in children {
            let est = estimate_cell(g, a, b, c, d);
            value += est.value;
            error += est.error;
            heap.push(HeapEntry { error: est.error, id: cells.len() });
            cells.push(Cell {
                s0: a,
                s1: b,
                t0: c,
                t1: d,
                depth: depth + 1,
                value: est.value,
                error: est.error,
                alive: true,
            });
        }
    }

    // Deterministic resummation in creation order.
    let value = cells
        .iter()
        .filter(|c| c.alive)
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc + c.value);
    let error = cells.iter().filter(|c| c.alive).fold(0.0, |acc, c| acc + c.error);
    ChartOutcome { value, error, converged: !capped && error <= threshold(value.norm()) }
}

#[derive(Clone, Copy, PartialEq)]
enum PoleClass {
    Boundary,
    Interior,
}

struct Patch {
    center: Complex64,
    class: PoleClass,
    radius: f64,
    floor: f64,
}

fn boundary_clearance(region: &Region, c: Complex64, class: PoleClass) -> f64 {
    match *region {
        Region::Rectangle { x0, x1, y0, y1 } => {
            let mut d = (c.re - x0).min(x1 - c.re).min(y1 - c.im);
            if class == PoleClass::Interior {
                d = d.min(c.im - y0);
            }
            d
        }
        Region::HalfAnnulus { r_lo, r_hi } => {
            let r = c.norm();
            let mut d = f64::INFINITY;
            if r_lo > 0.0 {
                d = d.min(r - r_lo);
            }
            if r_hi.is_finite() {
                d = d.min(r_hi - r);
            }
            d
        }
        Region::UpperHalfPlane => f64::INFINITY,
    }
}

fn plan_patches(
    region: &Region,
    sings: &[SingularPoint],
) -> (Vec<SingularPoint>, Vec<Patch>, bool) {
    // Merge duplicates, keep the widest exclusion, drop points outside.
    let mut kept: Vec<SingularPoint> = Vec::new();
    for s in sings {
        if !region.contains(s.at) {
            continue;
        }
        match kept
            .iter_mut()
            .find(|k| (k.at - s.at).norm() <= 1e-12 * (1.0 + s.at.norm()))
        {
            Some(k) => k.exclusion = k.exclusion.max(s.exclusion),
            None => kept.push(*s),
        }
    }

    let mut patches = Vec::new();
    let mut unpatched = false;
    for (i, s) in kept.iter().enumerate() {
        let scale = 1.0 + s.at.norm();
        let class = if s.at.im.abs() <= 1e-9 * scale {
            PoleClass::Boundary
        } else {
            PoleClass::Interior
        };
        let center = match class {
            PoleClass::Boundary => Complex64::new(s.at.re, 0.0),
            PoleClass::Interior => s.at,
        };
        let mut radius = 1.0f64.max(0.2 * scale);
        for (j, other) in kept.iter().enumerate() {
            if i != j {
                radius = radius.min(0.45 * (other.at - s.at).norm());
            }
        }
        if class == PoleClass::Interior {
            radius = radius.min(0.9 * s.at.im);
        }
        radius = radius.min(0.9 * boundary_clearance(region, center, class));
        let floor = PATCH_FLOOR_SCALE * scale;
        if radius < 4.0 * floor.max(s.exclusion) {
            // Too cramped for a clean patch: leave the pole to the main
            // chart and report non-convergence.
            unpatched = true;
        } else {
            patches.push(Patch { center, class, radius, floor });
        }
    }
    (kept, patches, unpatched)
}

fn probe_shell_mass<F: FnMut(Complex64) -> Complex64>(
    guard: &mut Guard<F>,
    k: usize,
    u0: f64,
    u1: f64,
    phi1: f64,
) -> f64 {
    let rule = cached_rule(8);
    let center = guard.mollifiers[k].at;
    let uc = 0.5 * (u0 + u1);
    let uh = 0.5 * (u1 - u0);
    let pc = 0.5 * phi1;
    let ph = 0.5 * phi1;
    let mut acc = 0.0;
    for (i, &xi) in rule.nodes.iter().enumerate() {
        let u = uc + uh * xi;
        for (j, &xj) in rule.nodes.iter().enumerate() {
            let phi = pc + ph * xj;
            let z = center + Complex64::from_polar(u.exp(), phi);
            let w = rule.weights[i] * rule.weights[j];
            acc += w * guard.patch(z, k).norm() * (2.0 * u).exp();
        }
    }
    acc * uh * ph
}

/// Integral of `f` over `region` with declared singular points handled by
/// exclusion discs plus local log-polar refinement. A point whose innermost
/// shells carry non-decaying mass produces `Divergent`; a non-finite sample
/// anywhere produces `SingularityOnGrid`.
pub fn integrate_area<F: FnMut(Complex64) -> Complex64>(
    f: F,
    region: Region,
    sings: &[SingularPoint],
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    region.validate()?;
    spec.validate()?;

    let (kept, patches, unpatched) = plan_patches(&region, sings);
    let mollifiers: Vec<Mollifier> = patches
        .iter()
        .map(|p| Mollifier { at: p.center, radius: p.radius })
        .collect();
    let mut guard = Guard {
        f,
        exclusions: kept,
        mollifiers,
        evaluations: 0,
        bad: None,
    };

    let pieces = 1 + patches.len();
    let abs_budget = spec.abs_tol / pieces as f64;

    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut converged = !unpatched;

    // Main chart(s).
    let main = integrate_main_chart(&mut guard, &region, spec, abs_budget)?;
    if let Some(at) = guard.bad {
        return Err(MslabError::SingularityOnGrid { at });
    }
    value += main.value;
    error += main.error;
    converged &= main.converged;

    // Pole patches.
    for (k, patch) in patches.iter().enumerate() {
        let phi1 = match patch.class {
            PoleClass::Boundary => std::f64::consts::PI,
            PoleClass::Interior => 2.0 * std::f64::consts::PI,
        };
        let u_lo = patch.floor.ln();
        let u_hi = patch.radius.ln();

        let ln2 = std::f64::consts::LN_2;
        let m_a = probe_shell_mass(&mut guard, k, u_lo, u_lo + ln2, phi1);
        let m_b = probe_shell_mass(&mut guard, k, u_lo + ln2, u_lo + 2.0 * ln2, phi1);
        if let Some(at) = guard.bad {
            return Err(MslabError::SingularityOnGrid { at });
        }
        if m_a > SHELL_NOISE_FLOOR {
            let rho = m_a / m_b;
            if !rho.is_finite() || rho >= SHELL_DIVERGENCE_RATIO {
                return Err(MslabError::Divergent { at: patch.center.norm(), value: m_a });
            }
            if rho > 0.0 {
                error += m_a * rho / (1.0 - rho);
            }
        }

        let center = patch.center;
        let out = adaptive_param(
            &mut |u: f64, phi: f64| {
                let z = center + Complex64::from_polar(u.exp(), phi);
                guard.patch(z, k) * (2.0 * u).exp()
            },
            u_lo,
            u_hi,
            0.0,
            phi1,
            spec.rel_tol,
            abs_budget,
            spec.max_depth,
        );
        if let Some(at) = guard.bad {
            return Err(MslabError::SingularityOnGrid { at });
        }
        value += out.value;
        error += out.error;
        converged &= out.converged;
    }

    Ok(IntegralResult {
        value,
        error_estimate: error,
        converged,
        evaluations: guard.evaluations,
    })
}

struct MainOutcome {
    value: Complex64,
    error: f64,
    converged: bool,
}

fn half_annulus_chart<F: FnMut(Complex64) -> Complex64>(
    guard: &mut Guard<F>,
    r_lo: f64,
    r_hi: f64,
    spec: &QuadratureSpec,
    abs_budget: f64,
) -> ChartOutcome {
    let pi = std::f64::consts::PI;
    if r_lo > 0.0 && r_hi / r_lo >= 8.0 {
        adaptive_param(
            &mut |u: f64, phi: f64| {
                let z = Complex64::from_polar(u.exp(), phi);
                guard.main(z) * (2.0 * u).exp()
            },
            r_lo.ln(),
            r_hi.ln(),
            0.0,
            pi,
            spec.rel_tol,
            abs_budget,
            spec.max_depth,
        )
    } else {
        adaptive_param(
            &mut |r: f64, phi: f64| {
                let z = Complex64::from_polar(r, phi);
                guard.main(z) * r
            },
            r_lo,
            r_hi,
            0.0,
            pi,
            spec.rel_tol,
            abs_budget,
            spec.max_depth,
        )
    }
}

fn integrate_main_chart<F: FnMut(Complex64) -> Complex64>(
    guard: &mut Guard<F>,
    region: &Region,
    spec: &QuadratureSpec,
    abs_budget: f64,
) -> Result<MainOutcome> {
    match *region {
        Region::Rectangle { x0, x1, y0, y1 } => {
            let out = adaptive_param(
                &mut |x: f64, y: f64| guard.main(Complex64::new(x, y)),
                x0,
                x1,
                y0,
                y1,
                spec.rel_tol,
                abs_budget,
                spec.max_depth,
            );
            Ok(MainOutcome { value: out.value, error: out.error, converged: out.converged })
        }
        Region::HalfAnnulus { r_lo, r_hi } if r_hi.is_finite() => {
            let out = half_annulus_chart(guard, r_lo, r_hi, spec, abs_budget);
            Ok(MainOutcome { value: out.value, error: out.error, converged: out.converged })
        }
        Region::HalfAnnulus { r_lo, .. } => improper_chart(guard, r_lo, spec, abs_budget),
        Region::UpperHalfPlane => improper_chart(guard, 0.0, spec, abs_budget),
    }
}

fn improper_chart<F: FnMut(Complex64) -> Complex64>(
    guard: &mut Guard<F>,
    r_lo: f64,
    spec: &QuadratureSpec,
    abs_budget: f64,
) -> Result<MainOutcome> {
    let far_point = guard
        .exclusions
        .iter()
        .map(|s| s.at.norm())
        .fold(0.0f64, f64::max);
    let r0 = spec
        .tail_radius
        .max(2.0 * far_point + 2.0)
        .max(2.0 * r_lo + 2.0);

    // Keep the near chart at tail-radius scale; a patch seam at radius
    // ~|s.at| inside a chart that also contains the origin needs cell sizes
    // out of proportion to the chart span, so far exclusions get their own
    // log-polar chart instead.
    let near_outer = spec.tail_radius.max(2.0 * r_lo + 2.0).min(r0);
    let core = half_annulus_chart(guard, r_lo, near_outer, spec, abs_budget);
    let mut value = core.value;
    let mut error = core.error;
    let mut converged = core.converged;
    if r0 > near_outer {
        let far = half_annulus_chart(guard, near_outer, r0, spec, abs_budget);
        value += far.value;
        error += far.error;
        converged &= far.converged;
    }

    let mut r = r0;
    let mut magnitudes: Vec<f64> = Vec::new();
    let mut settled = false;
    for _ in 0..spec.tail_doubling_rounds {
        let next = 2.0 * r;
        let ring = half_annulus_chart(guard, r, next, spec, abs_budget);
        value += ring.value;
        error += ring.error;
        converged &= ring.converged;
        let mag = ring.value.norm();
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
        r = next;
    }
    if !settled {
        converged = false;
        if let Some(&last) = magnitudes.last() {
            error += 4.0 * last;
        }
    }
    Ok(MainOutcome { value, error, converged })
}
