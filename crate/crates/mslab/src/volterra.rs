//! Criteria for the integration operator `f -> int f g'` acting from a
//! weighted Cauchy-transform space into the Hardy space of the upper
//! half-plane: the derivative-based norm identity, per-cell local and
//! global condition terms, Hilbert-Schmidt sums with a direct
//! cross-check, and Gram-matrix truncated operator norms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MslabError, Result};
use crate::hgamma::SpacePair;
use crate::numerics::eigen::hermitian_eigenvalues;
use crate::numerics::{
    integrate_area, integrate_line, integrate_segment, IntegralResult, LineDomain,
    QuadratureSpec, Region, SingularPoint,
};
use crate::symb::Expr;
use crate::verdict::{read_decay, Verdict};

/// Relative radius of the guard disc around a cell's own node.
const NODE_EXCLUSION_SCALE: f64 = 1e-4;

/// Constant tying the squared Hardy norm to the derivative area integral:
/// `||f||^2 = c_lp * int |f'|^2 Im z dA` with plane Lebesgue area measure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LpConfig {
    pub c_lp: f64,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig { c_lp: 4.0 }
    }
}

impl LpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_lp > 0.0) || !self.c_lp.is_finite() {
            return Err(MslabError::Config(format!(
                "the norm identity constant must be positive and finite (got {})",
                self.c_lp
            )));
        }
        Ok(())
    }
}

/// Both routes to the squared Hardy norm.
#[derive(Debug, Clone, Copy)]
pub struct LpNorms {
    pub area_based: IntegralResult,
    pub boundary_based: IntegralResult,
}

impl LpNorms {
    /// boundary / area; the verify suite pins this at 1 for the correct
    /// constant (the raw derivative integral runs 1/c_lp of the boundary
    /// integral).
    pub fn ratio(&self) -> f64 {
        self.boundary_based.value.re / self.area_based.value.re
    }
}

/// `area_based = c_lp * int_{UHP} |f'|^2 Im z dA`,
/// `boundary_based = int_R |f(x)|^2 dx`.
pub fn lp_norm_sq(f: &Expr, cfg: &LpConfig, spec: &QuadratureSpec) -> Result<LpNorms> {
    cfg.validate()?;
    let zero = IntegralResult {
        value: Complex64::new(0.0, 0.0),
        error_estimate: 0.0,
        converged: true,
        evaluations: 0,
    };
    if f.is_zero() {
        return Ok(LpNorms { area_based: zero, boundary_based: zero });
    }
    let fp = f.derivative();
    let area_based = if fp.is_zero() {
        zero
    } else {
        let sings: Vec<SingularPoint> = fp.poles().into_iter().map(SingularPoint::new).collect();
        integrate_area(
            |z| match fp.eval(z) {
                Ok(v) => Complex64::new(v.norm_sqr() * z.im, 0.0),
                Err(_) => Complex64::new(f64::NAN, 0.0),
            },
            Region::UpperHalfPlane,
            &sings,
            spec,
        )?
        .scaled(cfg.c_lp)
    };
    let boundary_based = integrate_line(
        |x| match f.eval(Complex64::new(x, 0.0)) {
            Ok(v) => Complex64::new(v.norm_sqr(), 0.0),
            Err(_) => Complex64::new(f64::NAN, 0.0),
        },
        0.0,
        LineDomain::FullLine,
        spec,
    )?;
    Ok(LpNorms { area_based, boundary_based })
}

/// `int_base^z f g' dw` along the straight segment.
pub fn vg_pointwise(
    f: &Expr,
    g: &Expr,
    base: Complex64,
    z: Complex64,
    spec: &QuadratureSpec,
) -> Result<Complex64> {
    let gp = g.derivative();
    if f.is_zero() || gp.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut poles = f.poles();
    poles.extend(gp.poles());
    let res = integrate_segment(
        |w| match (f.eval(w), gp.eval(w)) {
            (Ok(a), Ok(b)) => a * b,
            _ => Complex64::new(f64::NAN, f64::NAN),
        },
        base,
        z,
        &poles,
        spec,
    )?;
    Ok(res.value)
}

/// One per-cell criterion integral.
#[derive(Debug, Clone)]
pub struct CellTerm {
    /// 1-based cell index.
    pub index: usize,
    /// Term value; `+inf` when the integral diverged.
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub divergent: bool,
    pub detail: Option<String>,
    pub evaluations: u64,
}

fn cell_term(
    index: usize,
    scale: f64,
    outcome: Result<IntegralResult>,
) -> Result<CellTerm> {
    Ok(match outcome {
        Ok(res) => {
            let res = res.scaled(scale);
            CellTerm {
                index,
                value: res.value.re,
                error_estimate: res.error_estimate,
                converged: res.converged,
                divergent: false,
                detail: (!res.converged).then(|| {
                    format!(
                        "unconverged; error estimate {:.3e} after {} evaluations",
                        res.error_estimate, res.evaluations
                    )
                }),
                evaluations: res.evaluations,
            }
        }
        Err(MslabError::Divergent { at, value }) => CellTerm {
            index,
            value: f64::INFINITY,
            error_estimate: f64::INFINITY,
            converged: false,
            divergent: true,
            detail: Some(format!(
                "diverges near |z| = {at:.3e} (partial sum {value:.3e})"
            )),
            evaluations: 0,
        },
        Err(e) => return Err(e),
    })
}

fn exact_zero_term(index: usize) -> CellTerm {
    CellTerm {
        index,
        value: 0.0,
        error_estimate: 0.0,
        converged: true,
        divergent: false,
        detail: None,
        evaluations: 0,
    }
}

/// A sequence of per-cell terms with its supremum.
#[derive(Debug, Clone)]
pub struct LocalTerms {
    pub terms: Vec<CellTerm>,
    /// `+inf` when any term diverged.
    pub sup: f64,
    pub any_failed: bool,
}

fn collect_terms(terms: Vec<CellTerm>) -> LocalTerms {
    let sup = terms.iter().map(|t| t.value).fold(0.0f64, f64::max);
    let any_failed = terms.iter().any(|t| !t.converged);
    LocalTerms { terms, sup, any_failed }
}

fn gp_singularities(gp: &Expr) -> Vec<SingularPoint> {
    gp.poles().into_iter().map(SingularPoint::new).collect()
}

/// Local condition terms
/// `L_n = v_n int_{cell n} |g'(z)|^2 Im z / |z - gamma_n|^2 dA`.
///
/// The weight is kept outside the quadrature, so the terms are exactly
/// linear in `v_n`. A node with positive imaginary part makes its own
/// term genuinely divergent (the integrand has a second-order pole with
/// no vanishing factor); that is reported per cell, not raised.
pub fn local_condition_terms(
    space: &SpacePair,
    g: &Expr,
    spec: &QuadratureSpec,
) -> Result<LocalTerms> {
    let gp = g.derivative();
    if gp.is_zero() {
        return Ok(collect_terms(
            (1..=space.len()).map(exact_zero_term).collect(),
        ));
    }
    let base_sings = gp_singularities(&gp);
    let mut terms = Vec::with_capacity(space.len());
    for n in 1..=space.len() {
        let gamma = space.gammas()[n - 1];
        let v = space.weights()[n - 1];
        let mut sings = base_sings.clone();
        sings.push(SingularPoint::with_exclusion(
            gamma,
            NODE_EXCLUSION_SCALE * gamma.norm(),
        ));
        let outcome = integrate_area(
            |z| match gp.eval(z) {
                Ok(d) => {
                    let den = (z - gamma).norm_sqr();
                    Complex64::new(d.norm_sqr() * z.im / den, 0.0)
                }
                Err(_) => Complex64::new(f64::NAN, 0.0),
            },
            space.cell_region(n),
            &sings,
            spec,
        );
        terms.push(cell_term(n, v, outcome)?);
    }
    Ok(collect_terms(terms))
}

/// Cellwise integrals of `|g'|^2 Im z` (the `p` column) and
/// `|g'|^2 Im z / |z|^2` (the `q` column). The slots that only ever
/// carry a zero coefficient in the global sums are never computed:
/// `p` over the unbounded last cell (that integral genuinely diverges
/// for symbols of interest) and `q` over the first cell.
#[derive(Debug, Clone)]
pub struct PqTable {
    pub p: Vec<Option<CellTerm>>,
    pub q: Vec<Option<CellTerm>>,
}

pub fn pq_cell_integrals(
    space: &SpacePair,
    g: &Expr,
    spec: &QuadratureSpec,
) -> Result<PqTable> {
    let n_cells = space.len();
    let gp = g.derivative();
    if gp.is_zero() {
        let p = (1..=n_cells)
            .map(|m| (m < n_cells).then(|| exact_zero_term(m)))
            .collect();
        let q = (1..=n_cells)
            .map(|m| (m > 1).then(|| exact_zero_term(m)))
            .collect();
        return Ok(PqTable { p, q });
    }
    let sings = gp_singularities(&gp);
    let mut p = Vec::with_capacity(n_cells);
    let mut q = Vec::with_capacity(n_cells);
    for m in 1..=n_cells {
        let region = space.cell_region(m);
        if m < n_cells {
            let outcome = integrate_area(
                |z| match gp.eval(z) {
                    Ok(d) => Complex64::new(d.norm_sqr() * z.im, 0.0),
                    Err(_) => Complex64::new(f64::NAN, 0.0),
                },
                region,
                &sings,
                spec,
            );
            p.push(Some(cell_term(m, 1.0, outcome)?));
        } else {
            p.push(None);
        }
        if m > 1 {
            let outcome = integrate_area(
                |z| match gp.eval(z) {
                    Ok(d) => Complex64::new(d.norm_sqr() * z.im / z.norm_sqr(), 0.0),
                    Err(_) => Complex64::new(f64::NAN, 0.0),
                },
                region,
                &sings,
                spec,
            );
            q.push(Some(cell_term(m, 1.0, outcome)?));
        } else {
            q.push(None);
        }
    }
    Ok(PqTable { p, q })
}

/// One global condition term, assembled from the cell integrals.
#[derive(Debug, Clone)]
pub struct GlobalTerm {
    /// 1-based index.
    pub index: usize,
    pub value: f64,
    pub error_estimate: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone)]
pub struct GlobalTerms {
    pub b: Vec<GlobalTerm>,
    pub pq: PqTable,
    pub sup: f64,
    pub any_failed: bool,
}

/// Prefix sums of weights and suffix sums of `v_n / |gamma_n|^2`.
fn coefficient_sums(space: &SpacePair) -> (Vec<f64>, Vec<f64>) {
    let n = space.len();
    let mut weight_prefix = vec![0.0; n + 1];
    for k in 1..=n {
        weight_prefix[k] = weight_prefix[k - 1] + space.weights()[k - 1];
    }
    let mut decay_suffix = vec![0.0; n + 2];
    for k in (1..=n).rev() {
        decay_suffix[k] =
            decay_suffix[k + 1] + space.weights()[k - 1] / space.gammas()[k - 1].norm_sqr();
    }
    (weight_prefix, decay_suffix)
}

/// Global condition terms assembled from a precomputed cell table:
/// `B_n = (sum_{l<=n} v_l)(sum_{m>n} Q_m)
///      + (sum_{l>n} v_l/|gamma_l|^2)(sum_{m<=n} P_m)`.
/// `B_N` is exactly zero: both factors that would need unavailable
/// integrals carry empty-sum coefficients.
pub fn global_terms_from_pq(space: &SpacePair, pq: &PqTable) -> GlobalTerms {
    let n_cells = space.len();
    let (weight_prefix, decay_suffix) = coefficient_sums(space);
    let mut b = Vec::with_capacity(n_cells);
    for n in 1..=n_cells {
        if n == n_cells {
            b.push(GlobalTerm { index: n, value: 0.0, error_estimate: 0.0, divergent: false });
            continue;
        }
        let mut value = 0.0;
        let mut error = 0.0;
        let mut divergent = false;
        let q_coeff = weight_prefix[n];
        for m in (n + 1)..=n_cells {
            let term = pq.q[m - 1].as_ref().expect("q computed for m >= 2");
            divergent |= term.divergent;
            value += q_coeff * term.value;
            error += q_coeff * term.error_estimate;
        }
        let p_coeff = decay_suffix[n + 1];
        for m in 1..=n {
            let term = pq.p[m - 1].as_ref().expect("p computed for m < N");
            divergent |= term.divergent;
            value += p_coeff * term.value;
            error += p_coeff * term.error_estimate;
        }
        b.push(GlobalTerm { index: n, value, error_estimate: error, divergent });
    }
    let sup = b.iter().map(|t| t.value).fold(0.0f64, f64::max);
    let any_failed = pq
        .p
        .iter()
        .chain(pq.q.iter())
        .flatten()
        .any(|t| !t.converged);
    GlobalTerms { b, pq: pq.clone(), sup, any_failed }
}

pub fn global_condition_terms(
    space: &SpacePair,
    g: &Expr,
    spec: &QuadratureSpec,
) -> Result<GlobalTerms> {
    let pq = pq_cell_integrals(space, g, spec)?;
    Ok(global_terms_from_pq(space, &pq))
}

/// Local and global sequences with a joint decay reading at the
/// truncation.
#[derive(Debug, Clone)]
pub struct CompactnessReport {
    pub local: LocalTerms,
    pub global: GlobalTerms,
    pub verdict: Verdict,
}

pub fn compactness_profile(
    space: &SpacePair,
    g: &Expr,
    spec: &QuadratureSpec,
) -> Result<CompactnessReport> {
    let local = local_condition_terms(space, g, spec)?;
    let global = global_condition_terms(space, g, spec)?;
    let verdict = compactness_verdict(&local, &global);
    Ok(CompactnessReport { local, global, verdict })
}

pub fn compactness_verdict(local: &LocalTerms, global: &GlobalTerms) -> Verdict {
    let l_values: Vec<f64> = local.terms.iter().map(|t| t.value).collect();
    let l_verdict = read_decay(
        &l_values,
        local.terms.iter().any(|t| t.divergent),
        local.any_failed,
    );
    let b_values: Vec<f64> = global.b.iter().map(|t| t.value).collect();
    let b_verdict = read_decay(
        &b_values,
        global.b.iter().any(|t| t.divergent),
        global.any_failed,
    );
    l_verdict.and(b_verdict)
}

/// Hilbert-Schmidt sums of the two criterion families.
#[derive(Debug, Clone)]
pub struct HsSums {
    /// `sum_n L_n`; `+inf` when a constituent diverged.
    pub s_local: f64,
    /// `sum_m (sum_{n<m} v_n) Q_m + sum_m (sum_{n>m} v_n/|gamma_n|^2) P_m`.
    pub s_global: f64,
    pub local: LocalTerms,
    pub pq: PqTable,
}

pub fn hs_from_parts(space: &SpacePair, local: LocalTerms, pq: PqTable) -> HsSums {
    let s_local = local.terms.iter().map(|t| t.value).sum();
    let (weight_prefix, decay_suffix) = coefficient_sums(space);
    let mut s_global = 0.0;
    for m in 1..=space.len() {
        if let Some(term) = &pq.q[m - 1] {
            s_global += weight_prefix[m - 1] * term.value;
        }
        if let Some(term) = &pq.p[m - 1] {
            s_global += decay_suffix[m + 1] * term.value;
        }
    }
    HsSums { s_local, s_global, local, pq }
}

pub fn hs_criterion(space: &SpacePair, g: &Expr, spec: &QuadratureSpec) -> Result<HsSums> {
    let local = local_condition_terms(space, g, spec)?;
    let pq = pq_cell_integrals(space, g, spec)?;
    Ok(hs_from_parts(space, local, pq))
}

/// Direct Hilbert-Schmidt sum over the basis:
/// `sum_n c_lp v_n int_{UHP} |g'(z)|^2 Im z / |z - gamma_n|^2 dA`.
#[derive(Debug, Clone)]
pub struct DirectSum {
    /// `+inf` when a constituent diverged.
    pub total: f64,
    pub per_basis: Vec<CellTerm>,
}

pub fn hs_direct(
    space: &SpacePair,
    g: &Expr,
    cfg: &LpConfig,
    spec: &QuadratureSpec,
) -> Result<DirectSum> {
    cfg.validate()?;
    let gp = g.derivative();
    if gp.is_zero() {
        return Ok(DirectSum {
            total: 0.0,
            per_basis: (1..=space.len()).map(exact_zero_term).collect(),
        });
    }
    let base_sings = gp_singularities(&gp);
    let mut per_basis = Vec::with_capacity(space.len());
    for n in 1..=space.len() {
        let gamma = space.gammas()[n - 1];
        let v = space.weights()[n - 1];
        let mut sings = base_sings.clone();
        sings.push(SingularPoint::with_exclusion(
            gamma,
            NODE_EXCLUSION_SCALE * gamma.norm(),
        ));
        let outcome = integrate_area(
            |z| match gp.eval(z) {
                Ok(d) => {
                    let den = (z - gamma).norm_sqr();
                    Complex64::new(d.norm_sqr() * z.im / den, 0.0)
                }
                Err(_) => Complex64::new(f64::NAN, 0.0),
            },
            Region::UpperHalfPlane,
            &sings,
            spec,
        );
        per_basis.push(cell_term(n, cfg.c_lp * v, outcome)?);
    }
    let total = per_basis.iter().map(|t| t.value).sum();
    Ok(DirectSum { total, per_basis })
}

/// Polarized norm Gram matrix
/// `G_{jk} = c_lp sqrt(v_j v_k) int_{UHP}
///     |g'(z)|^2 Im z / ((z - gamma_j) conj(z - gamma_k)) dA`,
/// stored row-major, exactly Hermitian by construction (entries computed
/// for `j <= k` and mirrored).
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub n: usize,
    pub entries: Vec<Complex64>,
    /// Largest imaginary residue found on the diagonal before it was
    /// realified.
    pub max_diag_imag: f64,
    pub any_failed: bool,
    pub evaluations: u64,
}

impl GramMatrix {
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.entries[j * self.n + k]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|j| self.entry(j, j).re).sum()
    }
}

pub fn gram_matrix(
    space: &SpacePair,
    g: &Expr,
    cfg: &LpConfig,
    spec: &QuadratureSpec,
    n_sub: usize,
) -> Result<GramMatrix> {
    cfg.validate()?;
    if n_sub == 0 || n_sub > space.len() {
        return Err(MslabError::Config(format!(
            "Gram truncation {n_sub} out of 1..={}",
            space.len()
        )));
    }
    let gp = g.derivative();
    let mut entries = vec![Complex64::new(0.0, 0.0); n_sub * n_sub];
    if gp.is_zero() {
        return Ok(GramMatrix {
            n: n_sub,
            entries,
            max_diag_imag: 0.0,
            any_failed: false,
            evaluations: 0,
        });
    }
    let base_sings = gp_singularities(&gp);
    let mut max_diag_imag = 0.0f64;
    let mut any_failed = false;
    let mut evaluations = 0u64;
    for j in 0..n_sub {
        for k in j..n_sub {
            let gamma_j = space.gammas()[j];
            let gamma_k = space.gammas()[k];
            let scale = cfg.c_lp * (space.weights()[j] * space.weights()[k]).sqrt();
            let mut sings = base_sings.clone();
            sings.push(SingularPoint::with_exclusion(
                gamma_j,
                NODE_EXCLUSION_SCALE * gamma_j.norm(),
            ));
            if k != j {
                sings.push(SingularPoint::with_exclusion(
                    gamma_k,
                    NODE_EXCLUSION_SCALE * gamma_k.norm(),
                ));
            }
            let res = integrate_area(
                |z| match gp.eval(z) {
                    Ok(d) => {
                        let den = (z - gamma_j) * (z - gamma_k).conj();
                        d.norm_sqr() * z.im / den
                    }
                    Err(_) => Complex64::new(f64::NAN, f64::NAN),
                },
                Region::UpperHalfPlane,
                &sings,
                spec,
            )?
            .scaled(scale);
            any_failed |= !res.converged;
            evaluations += res.evaluations;
            let mut value = res.value;
            if k == j {
                let tol = 1e-8 * value.re.abs().max(1.0);
                if value.im.abs() > tol {
                    return Err(MslabError::NonHermitian { max_asymmetry: value.im.abs() });
                }
                max_diag_imag = max_diag_imag.max(value.im.abs());
                value = Complex64::new(value.re, 0.0);
            }
            entries[j * n_sub + k] = value;
            entries[k * n_sub + j] = value.conj();
        }
    }
    Ok(GramMatrix { n: n_sub, entries, max_diag_imag, any_failed, evaluations })
}

/// Truncated operator norms from one Gram matrix: for each leading
/// principal submatrix, the square root of its largest eigenvalue.
/// Interlacing makes the sequence nondecreasing.
#[derive(Debug, Clone)]
pub struct TruncatedNorms {
    pub norms: Vec<f64>,
    /// Smallest eigenvalue of the full matrix (positive semidefiniteness
    /// check).
    pub min_eigenvalue: f64,
    pub trace: f64,
}

pub fn truncated_norms_from_gram(gram: &GramMatrix) -> Result<TruncatedNorms> {
    let mut norms = Vec::with_capacity(gram.n);
    let mut min_eigenvalue = f64::INFINITY;
    for n_sub in 1..=gram.n {
        let mut sub = Vec::with_capacity(n_sub * n_sub);
        for j in 0..n_sub {
            for k in 0..n_sub {
                sub.push(gram.entry(j, k));
            }
        }
        let eigs = hermitian_eigenvalues(&sub, n_sub, 1e-9 * (1.0 + gram.trace().abs()))?;
        norms.push(eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt());
        if n_sub == gram.n {
            min_eigenvalue = eigs.first().copied().unwrap_or(0.0);
        }
    }
    Ok(TruncatedNorms { norms, min_eigenvalue, trace: gram.trace() })
}

pub fn truncated_norm_profile(
    space: &SpacePair,
    g: &Expr,
    cfg: &LpConfig,
    spec: &QuadratureSpec,
    n_sub_max: usize,
) -> Result<(GramMatrix, TruncatedNorms)> {
    let gram = gram_matrix(space, g, cfg, spec, n_sub_max)?;
    let norms = truncated_norms_from_gram(&gram)?;
    Ok((gram, norms))
}

/// Single-truncation norm; the profile form is cheaper when several
/// truncations are wanted.
pub fn truncated_operator_norm(
    space: &SpacePair,
    g: &Expr,
    cfg: &LpConfig,
    spec: &QuadratureSpec,
    n_sub: usize,
) -> Result<f64> {
    let (_, norms) = truncated_norm_profile(space, g, cfg, spec, n_sub)?;
    Ok(*norms.norms.last().expect("n_sub >= 1 is validated"))
}
