//! Run configurations and full report assembly.
//!
//! One entry point per operator kind builds the complete JSON report for
//! that analysis, and [`run_report`] dispatches a parsed [`RunConfig`] to
//! the right one. The command-line front end and the C interface are both
//! thin shells over this module.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

use crate::composition;
use crate::error::{MslabError, Result};
use crate::hgamma::{SpaceConfig, SpacePair};
use crate::modelspace::{self, GridWindow, InnerFunction};
use crate::numerics::{QuadratureSpec, SupScanConfig};
use crate::report;
use crate::symb::Expr;
use crate::volterra::{self, LpConfig};

/// On-disk shape of a run configuration.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: String,
    /// Inline space description, or the path of a JSON file holding one
    /// (resolved relative to the run configuration file).
    #[serde(default)]
    pub space: Option<SpaceInput>,
    /// Symbol `g` for the integration operator and the model criteria.
    #[serde(default)]
    pub symbol: Option<String>,
    /// Self-map of the upper half-plane for composition.
    #[serde(default)]
    pub map: Option<String>,
    /// Inner function description for the model criteria.
    #[serde(default)]
    pub inner: Option<String>,
    /// Kernel anchor points `[re, im]` for the boundedness table.
    #[serde(default)]
    pub w_grid: Option<Vec<[f64; 2]>>,
    /// Kernel anchor ray for the decay profile.
    #[serde(default)]
    pub w_ray: Option<Vec<[f64; 2]>>,
    /// Leading Gram truncation size; 0 skips the Gram section.
    #[serde(default)]
    pub n_sub_max: Option<usize>,
    #[serde(default)]
    pub c_lp: Option<f64>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub sup_scan: Option<SupScanConfig>,
    #[serde(default)]
    pub one_component: Option<OneComponentConfig>,
    /// Default report destination.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Area constant in effect for this run.
    pub fn area_constant(&self) -> f64 {
        self.c_lp.unwrap_or(4.0)
    }
}

/// A space given inline or by reference to another file.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SpaceInput {
    Path(PathBuf),
    Inline(SpaceConfig),
}

#[derive(Debug, Deserialize)]
pub struct OneComponentConfig {
    pub delta: f64,
    pub window: GridWindow,
}

fn require<'a, T>(field: &'a Option<T>, name: &str, operator: &str) -> Result<&'a T> {
    field.as_ref().ok_or_else(|| {
        MslabError::Config(format!("operator {operator:?} requires the {name:?} field"))
    })
}

/// Builds the full report for the integration-operator criteria on one
/// space: local and global condition terms, both Hilbert-Schmidt routes,
/// and (unless `n_sub_max` is zero) the truncated Gram profile.
pub fn volterra_report(
    space: &SpacePair,
    symbol_src: &str,
    c_lp: f64,
    n_sub_max: Option<usize>,
    spec: &QuadratureSpec,
) -> Result<Value> {
    let g: Expr = symbol_src.parse()?;
    let cfg = LpConfig { c_lp };
    cfg.validate()?;

    let local = volterra::local_condition_terms(space, &g, spec)?;
    let pq = volterra::pq_cell_integrals(space, &g, spec)?;
    let global = volterra::global_terms_from_pq(space, &pq);
    let compactness = volterra::compactness_verdict(&local, &global);
    let hs = volterra::hs_from_parts(space, local.clone(), pq);
    let direct = volterra::hs_direct(space, &g, &cfg, spec)?;

    let n_sub = n_sub_max.unwrap_or(space.len()).min(space.len());
    let gram = if n_sub == 0 {
        None
    } else {
        Some(volterra::truncated_norm_profile(space, &g, &cfg, spec, n_sub)?)
    };
    let gram_refs = gram.as_ref().map(|(g, t)| (g, t));

    let evaluations = local.terms.iter().map(|t| t.evaluations).sum::<u64>()
        + hs.pq
            .p
            .iter()
            .chain(hs.pq.q.iter())
            .flatten()
            .map(|t| t.evaluations)
            .sum::<u64>()
        + direct.per_basis.iter().map(|t| t.evaluations).sum::<u64>()
        + gram_refs.map_or(0, |(g, _)| g.evaluations);

    let verdicts = report::volterra_verdicts(compactness, &hs, &direct, gram_refs);
    let warnings = report::standard_warnings(Some(space), true);
    Ok(report::assemble(
        "volterra",
        vec![
            ("space", report::space_section(space)),
            ("quadrature", report::quadrature_section(spec)),
            (
                "volterra",
                report::volterra_section(symbol_src, c_lp, &local, &global, &hs, &direct, gram_refs),
            ),
        ],
        &verdicts,
        &warnings,
        report::cost_json(evaluations, 0),
    ))
}

/// Builds the full report for the composition-operator criteria: local
/// sups, assembled global terms, and the three Hilbert-Schmidt sums.
pub fn composition_report(
    space: &SpacePair,
    map_src: &str,
    scan: &SupScanConfig,
    spec: &QuadratureSpec,
) -> Result<Value> {
    let psi: Expr = map_src.parse()?;
    scan.validate()?;

    let local = composition::local_terms(space, &psi, scan, spec)?;
    let inverse_square = composition::inverse_square_sups(space, &psi, scan, spec)?;
    let joint_measure = composition::joint_measure_sups(space, &psi, scan, spec)?;
    let parts = composition::GlobalParts { inverse_square, joint_measure };
    let global = composition::global_terms_from_parts(space, &parts);
    let cell_measure = composition::cell_measure_sups(space, &psi, scan, spec)?;
    let direct = composition::direct_sups(space, &psi, scan, spec)?;
    let hs = composition::hs_sums_from_parts(
        space,
        local.clone(),
        parts.inverse_square.clone(),
        cell_measure,
        direct,
    );

    let all_sups = || {
        local
            .terms
            .iter()
            .chain(hs.direct.iter())
            .chain(global.parts.inverse_square.iter().flatten())
            .chain(global.parts.joint_measure.iter().flatten())
            .chain(hs.cell_measure.iter().flatten())
    };
    let evaluations: u64 = all_sups().map(|t| t.evaluations).sum();
    let probes: u64 = all_sups().map(|t| t.probes).sum();

    let verdicts = report::composition_verdicts(&local, &global, &hs);
    let warnings = report::standard_warnings(Some(space), false);
    Ok(report::assemble(
        "composition",
        vec![
            ("space", report::space_section(space)),
            ("quadrature", report::quadrature_section(spec)),
            ("sup_scan", report::sup_scan_section(scan)),
            ("composition", report::composition_section(map_src, &local, &global, &hs)),
        ],
        &verdicts,
        &warnings,
        report::cost_json(evaluations, probes),
    ))
}

/// Builds the full report for the model-space criteria: the boundedness
/// table over `w_grid`, the decay profile over `w_ray`, the Hilbert-Schmidt
/// integral, and optionally the sublevel-set component count.
pub fn model_report(
    inner_src: &str,
    symbol_src: &str,
    w_grid: &[Complex64],
    w_ray: &[Complex64],
    one_component: Option<(f64, &GridWindow)>,
    spec: &QuadratureSpec,
) -> Result<Value> {
    let inner = InnerFunction::parse(inner_src)?;
    let g: Expr = symbol_src.parse()?;

    let grid = modelspace::bounded_criterion(&inner, &g, w_grid, spec)?;
    let ray = modelspace::compact_profile(&inner, &g, w_ray, spec)?;
    // A divergent criterion integral is a result; anything else aborts.
    let hs = match modelspace::hs_criterion(&inner, &g, spec) {
        Err(e) if !matches!(e, MslabError::Divergent { .. }) => return Err(e),
        other => other,
    };
    let one_component = match one_component {
        Some((delta, window)) => {
            Some((delta, modelspace::one_component_diagnostic(&inner, delta, window)?))
        }
        None => None,
    };

    let evaluations = grid.points.iter().map(|p| p.evaluations).sum::<u64>()
        + ray.table.points.iter().map(|p| p.evaluations).sum::<u64>()
        + hs.as_ref().map_or(0, |r| r.evaluations);

    let verdicts = report::model_verdicts(Some(&ray));
    let warnings = report::standard_warnings(None, false);
    Ok(report::assemble(
        "model",
        vec![
            ("quadrature", report::quadrature_section(spec)),
            (
                "model",
                report::model_section(&inner, symbol_src, Some(&grid), Some(&ray), Some(&hs), one_component),
            ),
        ],
        &verdicts,
        &warnings,
        report::cost_json(evaluations, 0),
    ))
}

fn points_of(list: &[[f64; 2]]) -> Vec<Complex64> {
    list.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Default anchor grid: three real offsets crossed with three heights.
fn default_grid() -> Vec<Complex64> {
    let mut grid = Vec::new();
    for re in [-1.0, 0.0, 1.0] {
        for im in [0.5, 1.0, 2.0] {
            grid.push(Complex64::new(re, im));
        }
    }
    grid
}

/// Default decay ray: five dyadic heights up the imaginary axis.
fn default_ray() -> Vec<Complex64> {
    (0..5).map(|k| Complex64::new(0.0, (2.0f64).powi(k))).collect()
}

/// Dispatches one parsed run configuration. `base_dir` anchors a relative
/// space path (usually the directory of the configuration file).
pub fn run_report(config: &RunConfig, base_dir: &Path) -> Result<Value> {
    let spec = config.quadrature.unwrap_or_default();
    spec.validate()?;

    let space: Option<SpaceConfig> = match &config.space {
        None => None,
        Some(SpaceInput::Inline(sc)) => Some(sc.clone()),
        Some(SpaceInput::Path(rel)) => {
            let text = std::fs::read_to_string(base_dir.join(rel))?;
            Some(serde_json::from_str(&text)?)
        }
    };

    match config.operator.as_str() {
        "volterra" => {
            let space = SpacePair::from_config(require(&space, "space", "volterra")?)?;
            let symbol = require(&config.symbol, "symbol", "volterra")?;
            volterra_report(&space, symbol, config.area_constant(), config.n_sub_max, &spec)
        }
        "composition" => {
            let space = SpacePair::from_config(require(&space, "space", "composition")?)?;
            let map = require(&config.map, "map", "composition")?;
            let scan = config.sup_scan.unwrap_or_default();
            composition_report(&space, map, &scan, &spec)
        }
        "model" => {
            let inner = require(&config.inner, "inner", "model")?;
            let symbol = require(&config.symbol, "symbol", "model")?;
            let w_grid = config.w_grid.as_deref().map_or_else(default_grid, points_of);
            let w_ray = config.w_ray.as_deref().map_or_else(default_ray, points_of);
            let one_component =
                config.one_component.as_ref().map(|oc| (oc.delta, &oc.window));
            model_report(inner, symbol, &w_grid, &w_ray, one_component, &spec)
        }
        other => Err(MslabError::Config(format!(
            "unknown operator {other:?}; expected \"volterra\", \"composition\" or \"model\""
        ))),
    }
}
