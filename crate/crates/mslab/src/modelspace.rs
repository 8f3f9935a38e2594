//! Inner functions on the upper half-plane, reproducing kernels of the
//! associated star-invariant subspaces of the Hardy space, and the three
//! integral criteria (boundedness, compactness along a ray, and the
//! Hilbert-Schmidt class) for integration operators acting on those
//! subspaces.
//!
//! An inner function here is a finite Blaschke product times a point mass
//! at infinity and a constant phase:
//! `I(z) = e^{i phase} e^{i atom z} prod_k (z - w_k)/(z - conj w_k)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MslabError, Result};
use crate::numerics::{
    integrate_area, integrate_line, IntegralResult, LineDomain, QuadratureSpec, Region,
    SingularPoint,
};
use crate::symb::Expr;
use crate::verdict::{read_decay, Verdict};

/// Finite-Blaschke-and-atom inner function.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFunction {
    zeros: Vec<Complex64>,
    atom: f64,
    phase: f64,
}

impl InnerFunction {
    pub fn new(zeros: Vec<Complex64>, atom: f64, phase: f64) -> Result<InnerFunction> {
        for (k, w) in zeros.iter().enumerate() {
            if !w.is_finite() || !(w.im > 0.0) {
                return Err(MslabError::InnerConfig(format!(
                    "zero {} must lie strictly in the upper half-plane (got {w})",
                    k + 1
                )));
            }
        }
        if !atom.is_finite() || atom < 0.0 {
            return Err(MslabError::InnerConfig(format!(
                "atom must be a nonnegative real (got {atom})"
            )));
        }
        if !phase.is_finite() {
            return Err(MslabError::InnerConfig("phase must be finite".to_string()));
        }
        Ok(InnerFunction { zeros, atom, phase })
    }

    /// Parse a `blaschke:<re>,<im>;...;atom:<a>;phase:<t>` description.
    /// Every segment is optional but the string must not be empty; `atom`
    /// and `phase` may appear at most once.
    pub fn parse(text: &str) -> Result<InnerFunction> {
        let mut zeros = Vec::new();
        let mut atom: Option<f64> = None;
        let mut phase: Option<f64> = None;
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(MslabError::InnerConfig(
                "empty inner description; a constant inner function is `phase:0`".to_string(),
            ));
        }
        for segment in trimmed.split(';') {
            let segment = segment.trim();
            let (kind, rest) = segment.split_once(':').ok_or_else(|| {
                MslabError::InnerConfig(format!("segment `{segment}` is missing a `:`"))
            })?;
            let parse_real = |field: &str, what: &str| -> Result<f64> {
                field.trim().parse::<f64>().map_err(|_| {
                    MslabError::InnerConfig(format!("cannot read {what} from `{field}`"))
                })
            };
            match kind.trim() {
                "blaschke" => {
                    let (re, im) = rest.split_once(',').ok_or_else(|| {
                        MslabError::InnerConfig(format!(
                            "blaschke segment `{rest}` needs `re,im`"
                        ))
                    })?;
                    zeros.push(Complex64::new(
                        parse_real(re, "a zero's real part")?,
                        parse_real(im, "a zero's imaginary part")?,
                    ));
                }
                "atom" => {
                    if atom.replace(parse_real(rest, "the atom")?).is_some() {
                        return Err(MslabError::InnerConfig("atom given twice".to_string()));
                    }
                }
                "phase" => {
                    if phase.replace(parse_real(rest, "the phase")?).is_some() {
                        return Err(MslabError::InnerConfig("phase given twice".to_string()));
                    }
                }
                other => {
                    return Err(MslabError::InnerConfig(format!(
                        "unknown segment kind `{other}`"
                    )))
                }
            }
        }
        InnerFunction::new(zeros, atom.unwrap_or(0.0), phase.unwrap_or(0.0))
    }

    pub fn to_config_string(&self) -> String {
        let mut parts: Vec<String> = self
            .zeros
            .iter()
            .map(|w| format!("blaschke:{},{}", w.re, w.im))
            .collect();
        parts.push(format!("atom:{}", self.atom));
        parts.push(format!("phase:{}", self.phase));
        parts.join(";")
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn atom(&self) -> f64 {
        self.atom
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// A constant unimodular function spans no model space at all.
    pub fn is_degenerate(&self) -> bool {
        self.zeros.is_empty() && self.atom == 0.0
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let mut val = Complex64::from_polar(1.0, self.phase);
        if self.atom != 0.0 {
            val *= (Complex64::i() * self.atom * z).exp();
        }
        for &w in &self.zeros {
            let den = z - w.conj();
            if den == Complex64::new(0.0, 0.0) {
                return Err(MslabError::PoleHit { at: z });
            }
            val *= (z - w) / den;
        }
        if !val.is_finite() {
            return Err(MslabError::NonFinite { at: z });
        }
        Ok(val)
    }
}

/// Reproducing kernel `K_w(z) = (i/2pi) (1 - conj(I(w)) I(z)) / (z - conj w)`.
pub fn kernel_value(inner: &InnerFunction, w: Complex64, z: Complex64) -> Result<Complex64> {
    let den = z - w.conj();
    if den == Complex64::new(0.0, 0.0) {
        return Err(MslabError::PoleHit { at: z });
    }
    let iw = inner.eval(w)?;
    let iz = inner.eval(z)?;
    Ok(Complex64::i() / (2.0 * PI) * (1.0 - iw.conj() * iz) / den)
}

/// Squared kernel norm in closed form: `(1 - |I(w)|^2) / (4 pi Im w)`.
pub fn kernel_norm_sq(inner: &InnerFunction, w: Complex64) -> Result<f64> {
    if !(w.im > 0.0) {
        return Err(MslabError::DomainViolation {
            at: w,
            msg: "kernel norms need Im w > 0".to_string(),
        });
    }
    let iw = inner.eval(w)?;
    Ok((1.0 - iw.norm_sqr()) / (4.0 * PI * w.im))
}

/// Unit-norm kernel `k_w(z)`; fails for a degenerate inner function,
/// whose kernel vanishes identically.
pub fn normalized_kernel_value(
    inner: &InnerFunction,
    w: Complex64,
    z: Complex64,
) -> Result<Complex64> {
    let nrm = kernel_norm_sq(inner, w)?;
    if nrm <= 0.0 {
        return Err(MslabError::DegenerateKernel);
    }
    Ok(kernel_value(inner, w, z)? / nrm.sqrt())
}

/// `int_R |K_w(x)|^2 dx`, the quadrature route to the kernel norm.
pub fn boundary_norm_sq(
    inner: &InnerFunction,
    w: Complex64,
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    if !(w.im > 0.0) {
        return Err(MslabError::DomainViolation {
            at: w,
            msg: "kernel norms need Im w > 0".to_string(),
        });
    }
    let inner = inner.clone();
    integrate_line(
        |x| {
            let z = Complex64::new(x, 0.0);
            match kernel_value(&inner, w, z) {
                Ok(k) => Complex64::new(k.norm_sqr(), 0.0),
                Err(_) => Complex64::new(f64::NAN, 0.0),
            }
        },
        0.0,
        LineDomain::FullLine,
        spec,
    )
}

/// One entry of a criterion table.
#[derive(Debug, Clone)]
pub struct CriterionPoint {
    pub w: Complex64,
    /// Criterion value; `+inf` when the integral diverged.
    pub value: f64,
    pub converged: bool,
    pub divergent: bool,
    pub detail: Option<String>,
    pub evaluations: u64,
}

#[derive(Debug, Clone)]
pub struct CriterionTable {
    pub points: Vec<CriterionPoint>,
    /// Largest finite entry (0 when there is none).
    pub sup: f64,
    pub any_failed: bool,
}

#[derive(Debug, Clone)]
pub struct DecayProfile {
    pub table: CriterionTable,
    pub verdict: Verdict,
}

fn criterion_point(
    inner: &InnerFunction,
    gp: &Expr,
    sings: &[SingularPoint],
    w: Complex64,
    spec: &QuadratureSpec,
) -> Result<CriterionPoint> {
    let nrm = kernel_norm_sq(inner, w)?;
    if nrm <= 0.0 {
        return Err(MslabError::DegenerateKernel);
    }
    let iw_conj = inner.eval(w)?.conj();
    let w_conj = w.conj();
    let scale = 1.0 / (4.0 * PI * PI * nrm);
    let outcome = integrate_area(
        |z| {
            let iz = match inner.eval(z) {
                Ok(v) => v,
                Err(_) => return Complex64::new(f64::NAN, 0.0),
            };
            let gpz = match gp.eval(z) {
                Ok(v) => v,
                Err(_) => return Complex64::new(f64::NAN, 0.0),
            };
            let numer = (1.0 - iw_conj * iz).norm_sqr();
            let k_sq = scale * numer / (z - w_conj).norm_sqr();
            Complex64::new(k_sq * gpz.norm_sqr() * z.im, 0.0)
        },
        Region::UpperHalfPlane,
        sings,
        spec,
    );
    Ok(match outcome {
        Ok(res) => CriterionPoint {
            w,
            value: res.value.re,
            converged: res.converged,
            divergent: false,
            detail: (!res.converged).then(|| {
                format!(
                    "unconverged; error estimate {:.3e} after {} evaluations",
                    res.error_estimate, res.evaluations
                )
            }),
            evaluations: res.evaluations,
        },
        Err(MslabError::Divergent { at, value }) => CriterionPoint {
            w,
            value: f64::INFINITY,
            converged: false,
            divergent: true,
            detail: Some(format!("diverges near |z| = {at:.3e} (partial sum {value:.3e})")),
            evaluations: 0,
        },
        Err(e) => CriterionPoint {
            w,
            value: f64::NAN,
            converged: false,
            divergent: false,
            detail: Some(e.to_string()),
            evaluations: 0,
        },
    })
}

fn table_from_points(points: Vec<CriterionPoint>) -> CriterionTable {
    let sup = points
        .iter()
        .filter(|p| p.value.is_finite())
        .map(|p| p.value)
        .fold(0.0f64, f64::max);
    let any_failed = points.iter().any(|p| !p.converged || p.detail.is_some());
    CriterionTable { points, sup, any_failed }
}

/// Boundedness criterion table: for each grid point `w`,
/// `Q(w) = int_{UHP} |k_w(z)|^2 |g'(z)|^2 Im z dA(z)`. Per-point
/// integration failures are recorded in the table, not raised.
pub fn bounded_criterion(
    inner: &InnerFunction,
    g: &Expr,
    w_grid: &[Complex64],
    spec: &QuadratureSpec,
) -> Result<CriterionTable> {
    if inner.is_degenerate() {
        return Err(MslabError::DegenerateKernel);
    }
    for &w in w_grid {
        if !(w.im > 0.0) {
            return Err(MslabError::DomainViolation {
                at: w,
                msg: "criterion grid points need Im w > 0".to_string(),
            });
        }
    }
    let gp = g.derivative();
    if gp.is_zero() {
        return Ok(table_from_points(
            w_grid
                .iter()
                .map(|&w| CriterionPoint {
                    w,
                    value: 0.0,
                    converged: true,
                    divergent: false,
                    detail: None,
                    evaluations: 0,
                })
                .collect(),
        ));
    }
    let sings: Vec<SingularPoint> = gp.poles().into_iter().map(SingularPoint::new).collect();
    let points = w_grid
        .iter()
        .map(|&w| criterion_point(inner, &gp, &sings, w, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(table_from_points(points))
}

fn decay_verdict(points: &[CriterionPoint]) -> Verdict {
    let values: Vec<f64> = points.iter().map(|p| p.value).collect();
    let any_divergent = points.iter().any(|p| p.divergent);
    let any_failed = points.iter().any(|p| !p.converged && !p.divergent);
    read_decay(&values, any_divergent, any_failed)
}

/// Criterion values along a ray exiting the half-plane, with a decay
/// verdict at the truncation. The verdict never claims more than the
/// sampled ray shows.
pub fn compact_profile(
    inner: &InnerFunction,
    g: &Expr,
    w_ray: &[Complex64],
    spec: &QuadratureSpec,
) -> Result<DecayProfile> {
    let table = bounded_criterion(inner, g, w_ray, spec)?;
    let verdict = decay_verdict(&table.points);
    Ok(DecayProfile { table, verdict })
}

/// Hilbert-Schmidt criterion `int_{UHP} |g'(z)|^2 (1 - |I(z)|^2) dA(z)`.
pub fn hs_criterion(
    inner: &InnerFunction,
    g: &Expr,
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    let gp = g.derivative();
    if gp.is_zero() {
        return Ok(IntegralResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            converged: true,
            evaluations: 0,
        });
    }
    let sings: Vec<SingularPoint> = gp.poles().into_iter().map(SingularPoint::new).collect();
    integrate_area(
        |z| {
            let iz = match inner.eval(z) {
                Ok(v) => v,
                Err(_) => return Complex64::new(f64::NAN, 0.0),
            };
            let gpz = match gp.eval(z) {
                Ok(v) => v,
                Err(_) => return Complex64::new(f64::NAN, 0.0),
            };
            Complex64::new(gpz.norm_sqr() * (1.0 - iz.norm_sqr()), 0.0)
        },
        Region::UpperHalfPlane,
        &sings,
        spec,
    )
}

/// Rectangular sampling window for the sublevel-set diagnostic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridWindow {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridWindow {
    fn validate(&self) -> Result<()> {
        let all_finite =
            self.x0.is_finite() && self.x1.is_finite() && self.y0.is_finite() && self.y1.is_finite();
        if !all_finite || self.x1 <= self.x0 || self.y1 <= self.y0 || self.y0 < 0.0 {
            return Err(MslabError::Config(format!(
                "bad sampling window [{}, {}] x [{}, {}]",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(MslabError::Config(
                "sampling window needs at least 2 points per axis".to_string(),
            ));
        }
        Ok(())
    }
}

/// Count connected components (4-neighbour) of the sampled sublevel set
/// `{|I| < delta}` inside the window. A sampling diagnostic, not a proof:
/// components thinner than the grid step are missed or merged.
pub fn one_component_diagnostic(
    inner: &InnerFunction,
    delta: f64,
    window: &GridWindow,
) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MslabError::Config(format!(
            "sublevel threshold must sit in (0, 1), got {delta}"
        )));
    }
    window.validate()?;
    let (nx, ny) = (window.nx, window.ny);
    let dx = (window.x1 - window.x0) / (nx - 1) as f64;
    let dy = (window.y1 - window.y0) / (ny - 1) as f64;
    let mut below = vec![false; nx * ny];
    for j in 0..ny {
        let y = window.y0 + dy * j as f64;
        for i in 0..nx {
            let x = window.x0 + dx * i as f64;
            let v = inner.eval(Complex64::new(x, y))?;
            below[j * nx + i] = v.norm() < delta;
        }
    }
    let mut seen = vec![false; nx * ny];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..nx * ny {
        if !below[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(cell) = stack.pop() {
            let (i, j) = (cell % nx, cell / nx);
            let mut push = |idx: usize| {
                if below[idx] && !seen[idx] {
                    seen[idx] = true;
                    stack.push(idx);
                }
            };
            if i > 0 {
                push(cell - 1);
            }
            if i + 1 < nx {
                push(cell + 1);
            }
            if j > 0 {
                push(cell - nx);
            }
            if j + 1 < ny {
                push(cell + nx);
            }
        }
    }
    Ok(components)
}
