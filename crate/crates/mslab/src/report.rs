//! JSON analysis reports.
//!
//! Every analysis run renders to a single self-describing document:
//! configuration echoes, per-term tables, assembled sums, cross-check
//! verdicts with pointers to the sections they were derived from, and
//! fixed warning texts about the conventions in force. Values that are
//! not finite numbers (divergent terms, failed probes) serialize as
//! `null`; the accompanying boolean flags carry the reason, so nothing
//! is lost to JSON's number model.
//!
//! Reports carry no timestamps or wall-clock figures: two runs over the
//! same input must produce byte-identical documents.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::composition;
use crate::hgamma::SpacePair;
use crate::modelspace::{CriterionPoint, CriterionTable, DecayProfile, InnerFunction};
use crate::numerics::{IntegralResult, QuadratureSpec, SupScanConfig};
use crate::verdict::Verdict;
use crate::volterra::{
    CellTerm, DirectSum, GlobalTerms, GramMatrix, HsSums, LocalTerms, TruncatedNorms,
};
use crate::error::MslabError;

pub const SCHEMA: &str = "mslab/1";

/// Ratio window for agreement between an assembled splitting and the
/// direct computation it bounds; the slack absorbs the splitting
/// constants and the area-measure convention.
pub const SPLIT_RATIO_WINDOW: (f64, f64) = (0.125, 8.0);

pub const WARN_AREA_CONSTANT: &str = "c_lp = 4 corresponds to plane Lebesgue area \
     measure; conventions that normalize the area measure differently quote c_lp = 2, \
     which rescales every area-based quantity by the same factor.";

pub const WARN_GLOBAL_INDEXING: &str = "global terms pair cumulative coefficient sums \
     with complementary integrals: term n adds (sum of the first n weights) times the \
     tail integrals beyond n to (sum of the weights beyond n, each divided by \
     |gamma|^2) times the head quantity at n; the first tail slot and the last head \
     slot never enter any term and are stored as null.";

pub const WARN_INTERIOR_NODES: &str = "at least one node lies strictly inside the \
     upper half-plane; the integrand is not locally integrable there, so that node's \
     own local and direct terms diverge and are reported as divergent rather than \
     failing the run.";

pub const WARN_HS_RATIO_SCALE: &str = "the direct Hilbert-Schmidt sum carries the \
     c_lp area constant while the split local/global sums do not, so their ratio is \
     meaningful only up to that constant times the splitting slack.";

/// A named cross-check outcome, pointing at the report sections it was
/// computed from.
#[derive(Debug, Clone)]
pub struct VerdictEntry {
    pub name: String,
    pub verdict: Verdict,
    pub derived_from: Vec<String>,
}

impl VerdictEntry {
    pub fn new(name: &str, verdict: Verdict, derived_from: &[&str]) -> VerdictEntry {
        VerdictEntry {
            name: name.to_string(),
            verdict,
            derived_from: derived_from.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "verdict": self.verdict.to_string(),
            "derived_from": self.derived_from,
        })
    }
}

pub fn complex_json(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn integral_json(r: &IntegralResult) -> Value {
    json!({
        "value": r.value.re,
        "error_estimate": r.error_estimate,
        "converged": r.converged,
        "evaluations": r.evaluations,
    })
}

fn cell_term_json(t: &CellTerm) -> Value {
    json!({
        "index": t.index,
        "value": t.value,
        "error_estimate": t.error_estimate,
        "converged": t.converged,
        "divergent": t.divergent,
        "detail": t.detail,
        "evaluations": t.evaluations,
    })
}

fn optional_terms_json(slots: &[Option<CellTerm>]) -> Value {
    Value::Array(
        slots
            .iter()
            .map(|s| s.as_ref().map_or(Value::Null, cell_term_json))
            .collect(),
    )
}

fn local_terms_json(local: &LocalTerms) -> Value {
    json!({
        "terms": local.terms.iter().map(cell_term_json).collect::<Vec<_>>(),
        "sup": local.sup,
        "any_failed": local.any_failed,
    })
}

/// Finite positive ratio of two totals, `null` otherwise.
fn ratio_json(direct: f64, split: f64) -> Value {
    if direct.is_finite() && split.is_finite() && split > 0.0 {
        Value::from(direct / split)
    } else {
        Value::Null
    }
}

pub fn space_section(space: &SpacePair) -> Value {
    let adm = space.admissibility();
    json!({
        "config": serde_json::to_value(space.to_config()).expect("space config serializes"),
        "hash": space.hash(),
        "n": space.len(),
        "sparseness": space.sparseness_or_infinite(),
        "cell_radii": space.radii(),
        "has_real_nodes": space.has_real_nodes(),
        "has_interior_nodes": space.has_interior_nodes(),
        "admissibility": {
            "partial_sum": adm.partial_sum,
            "tail_bound": adm.tail_bound,
            "terms_decay": adm.terms_decay,
        },
    })
}

pub fn quadrature_section(spec: &QuadratureSpec) -> Value {
    serde_json::to_value(spec).expect("quadrature spec serializes")
}

pub fn sup_scan_section(cfg: &SupScanConfig) -> Value {
    serde_json::to_value(cfg).expect("sup scan config serializes")
}

pub fn volterra_section(
    symbol_src: &str,
    c_lp: f64,
    local: &LocalTerms,
    global: &GlobalTerms,
    hs: &HsSums,
    direct: &DirectSum,
    gram: Option<(&GramMatrix, &TruncatedNorms)>,
) -> Value {
    let hs_total = hs.s_local + hs.s_global;
    let gram_json = gram.map_or(Value::Null, |(g, t)| {
        let rows: Vec<Value> = (0..g.n)
            .map(|j| {
                Value::Array((0..g.n).map(|k| complex_json(g.entry(j, k))).collect())
            })
            .collect();
        json!({
            "n": g.n,
            "entries": rows,
            "max_diag_imag": g.max_diag_imag,
            "any_failed": g.any_failed,
            "evaluations": g.evaluations,
            "truncated_norms": t.norms,
            "min_eigenvalue": t.min_eigenvalue,
            "trace": t.trace,
        })
    });
    json!({
        "symbol": symbol_src,
        "c_lp": c_lp,
        "local": local_terms_json(local),
        "global": {
            "terms": global.b.iter().map(|t| json!({
                "index": t.index,
                "value": t.value,
                "error_estimate": t.error_estimate,
                "divergent": t.divergent,
            })).collect::<Vec<_>>(),
            "sup": global.sup,
            "any_failed": global.any_failed,
        },
        "pq": {
            "p": optional_terms_json(&global.pq.p),
            "q": optional_terms_json(&global.pq.q),
        },
        "hs": {
            "s_local": hs.s_local,
            "s_global": hs.s_global,
            "total": hs_total,
            "direct_total": direct.total,
            "ratio": ratio_json(direct.total, hs_total),
        },
        "direct": {
            "total": direct.total,
            "per_basis": direct.per_basis.iter().map(cell_term_json).collect::<Vec<_>>(),
        },
        "gram": gram_json,
    })
}

/// Agreement between an assembled splitting and the direct computation
/// it bounds, judged on their ratio.
pub fn split_vs_direct_verdict(split_total: f64, direct_total: f64, any_failed: bool) -> Verdict {
    if any_failed || split_total.is_nan() || direct_total.is_nan() {
        return Verdict::Undecided;
    }
    if split_total == 0.0 && direct_total == 0.0 {
        return Verdict::Consistent;
    }
    if split_total.is_infinite() && direct_total.is_infinite() {
        return Verdict::Consistent;
    }
    if split_total.is_infinite() != direct_total.is_infinite() {
        return Verdict::Inconsistent;
    }
    if split_total == 0.0 || direct_total == 0.0 {
        return Verdict::Inconsistent;
    }
    let ratio = direct_total / split_total;
    let (lo, hi) = SPLIT_RATIO_WINDOW;
    if ratio >= lo && ratio <= hi {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    }
}

/// Truncated operator norms must grow monotonically to their limit and
/// the full matrix must be positive semidefinite up to rounding.
pub fn gram_growth_verdict(gram: &GramMatrix, trunc: &TruncatedNorms) -> Verdict {
    if gram.any_failed {
        return Verdict::Undecided;
    }
    let monotone = trunc
        .norms
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-10 * (1.0 + w[0].abs()));
    let psd = trunc.min_eigenvalue >= -1e-8 * trunc.trace.abs().max(1.0);
    if monotone && psd {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    }
}

pub fn volterra_verdicts(
    compactness: Verdict,
    hs: &HsSums,
    direct: &DirectSum,
    gram: Option<(&GramMatrix, &TruncatedNorms)>,
) -> Vec<VerdictEntry> {
    let mut out = vec![VerdictEntry::new(
        "compactness_decay",
        compactness,
        &["volterra.local", "volterra.global"],
    )];
    let split_failed =
        hs.local.any_failed || direct.per_basis.iter().any(|t| !t.converged && !t.divergent);
    out.push(VerdictEntry::new(
        "hilbert_schmidt_split_vs_direct",
        split_vs_direct_verdict(hs.s_local + hs.s_global, direct.total, split_failed),
        &["volterra.hs", "volterra.direct"],
    ));
    if let Some((g, t)) = gram {
        out.push(VerdictEntry::new(
            "gram_truncation_growth",
            gram_growth_verdict(g, t),
            &["volterra.gram"],
        ));
    }
    out
}

fn outcome_json(outcome: &composition::TermOutcome) -> Value {
    match outcome {
        composition::TermOutcome::Finite { sup, arg_y, not_decided_at_tail } => json!({
            "divergent": false,
            "sup": *sup,
            "arg_y": *arg_y,
            "not_decided_at_tail": *not_decided_at_tail,
            "near_y": Value::Null,
        }),
        composition::TermOutcome::Divergent { near_y, value } => json!({
            "divergent": true,
            "sup": Value::Null,
            "arg_y": Value::Null,
            "not_decided_at_tail": false,
            "near_y": *near_y,
            "value_at_divergence": *value,
        }),
    }
}

fn cell_sup_json(t: &composition::CellSup) -> Value {
    let mut obj = match outcome_json(&t.outcome) {
        Value::Object(m) => m,
        _ => unreachable!("outcome serializes to an object"),
    };
    obj.insert("index".to_string(), json!(t.index));
    obj.insert("probes_converged".to_string(), json!(t.probes_converged));
    obj.insert("probes".to_string(), json!(t.probes));
    Value::Object(obj)
}

fn optional_sups_json(slots: &[Option<composition::CellSup>]) -> Value {
    Value::Array(
        slots
            .iter()
            .map(|s| s.as_ref().map_or(Value::Null, cell_sup_json))
            .collect(),
    )
}

fn local_sups_json(local: &composition::LocalSups) -> Value {
    json!({
        "terms": local.terms.iter().map(cell_sup_json).collect::<Vec<_>>(),
        "sup": local.sup,
        "any_failed": local.any_failed,
    })
}

pub fn composition_section(
    map_src: &str,
    local: &composition::LocalSups,
    global: &composition::GlobalSups,
    hs: &composition::HsSums,
) -> Value {
    json!({
        "map": map_src,
        "local": local_sups_json(local),
        "global": {
            "terms": global.b.iter().map(|t| json!({
                "index": t.index,
                "value": t.value,
                "divergent": t.divergent,
            })).collect::<Vec<_>>(),
            "sup": global.sup,
            "any_failed": global.any_failed,
        },
        "inverse_square": optional_sups_json(&global.parts.inverse_square),
        "joint_measure": optional_sups_json(&global.parts.joint_measure),
        "cell_measure": optional_sups_json(&hs.cell_measure),
        "hs": {
            "h_local": hs.h_local,
            "h_global": hs.h_global,
            "h_direct": hs.h_direct,
            "ratio": ratio_json(hs.h_direct, hs.h_local + hs.h_global),
        },
        "direct": {
            "terms": hs.direct.iter().map(cell_sup_json).collect::<Vec<_>>(),
        },
    })
}

/// Cell-restricted suprema integrate over subsets of the full line, so
/// the local sum can never exceed the direct sum; and the splitting
/// bounds the direct sum, so a divergent direct sum against finite
/// split sums is contradictory.
pub fn composition_hs_verdict(
    h_local: f64,
    h_global: f64,
    h_direct: f64,
    any_failed: bool,
) -> Verdict {
    if any_failed || h_local.is_nan() || h_global.is_nan() || h_direct.is_nan() {
        return Verdict::Undecided;
    }
    if h_direct.is_infinite() && (h_local + h_global).is_finite() {
        return Verdict::Inconsistent;
    }
    if h_local > h_direct * (1.0 + 1e-6) + 1e-12 {
        return Verdict::Inconsistent;
    }
    Verdict::Consistent
}

pub fn composition_verdicts(
    local: &composition::LocalSups,
    global: &composition::GlobalSups,
    hs: &composition::HsSums,
) -> Vec<VerdictEntry> {
    let compactness = composition::compactness_verdict(local, global);
    let hs_failed = hs.local.any_failed
        || hs
            .direct
            .iter()
            .any(|t| !t.probes_converged && !t.outcome.is_divergent());
    vec![
        VerdictEntry::new(
            "compactness_decay",
            compactness,
            &["composition.local", "composition.global"],
        ),
        VerdictEntry::new(
            "hilbert_schmidt_nesting",
            composition_hs_verdict(hs.h_local, hs.h_global, hs.h_direct, hs_failed),
            &["composition.hs", "composition.direct"],
        ),
    ]
}

fn criterion_point_json(p: &CriterionPoint) -> Value {
    json!({
        "w": complex_json(p.w),
        "value": p.value,
        "converged": p.converged,
        "divergent": p.divergent,
        "detail": p.detail,
        "evaluations": p.evaluations,
    })
}

fn criterion_table_json(table: &CriterionTable) -> Value {
    json!({
        "points": table.points.iter().map(criterion_point_json).collect::<Vec<_>>(),
        "sup": table.sup,
        "any_divergent": table.points.iter().any(|p| p.divergent),
        "any_failed": table.any_failed,
    })
}

pub fn model_section(
    inner: &InnerFunction,
    symbol_src: &str,
    grid: Option<&CriterionTable>,
    ray: Option<&DecayProfile>,
    hs: Option<&std::result::Result<IntegralResult, MslabError>>,
    one_component: Option<(f64, usize)>,
) -> Value {
    let hs_json = match hs {
        None => Value::Null,
        Some(Ok(r)) => {
            let mut obj = match integral_json(r) {
                Value::Object(m) => m,
                _ => unreachable!(),
            };
            obj.insert("divergent".to_string(), json!(false));
            Value::Object(obj)
        }
        Some(Err(MslabError::Divergent { at, value })) => json!({
            "divergent": true,
            "at": at,
            "value": value,
        }),
        Some(Err(e)) => json!({
            "divergent": false,
            "error": e.to_string(),
        }),
    };
    json!({
        "inner": inner.to_config_string(),
        "degenerate": inner.is_degenerate(),
        "symbol": symbol_src,
        "grid": grid.map_or(Value::Null, criterion_table_json),
        "ray": ray.map_or(Value::Null, |p| {
            let mut obj = match criterion_table_json(&p.table) {
                Value::Object(m) => m,
                _ => unreachable!(),
            };
            obj.insert("verdict".to_string(), json!(p.verdict.to_string()));
            Value::Object(obj)
        }),
        "hs": hs_json,
        "one_component": one_component.map_or(Value::Null, |(delta, count)| json!({
            "delta": delta,
            "components": count,
        })),
    })
}

pub fn model_verdicts(ray: Option<&DecayProfile>) -> Vec<VerdictEntry> {
    ray.map_or_else(Vec::new, |p| {
        vec![VerdictEntry::new("compactness_decay", p.verdict, &["model.ray"])]
    })
}

/// Warnings that apply to every run against the given space and area
/// constant.
pub fn standard_warnings(space: Option<&SpacePair>, uses_area_constant: bool) -> Vec<String> {
    let mut out = Vec::new();
    if uses_area_constant {
        out.push(WARN_AREA_CONSTANT.to_string());
        out.push(WARN_HS_RATIO_SCALE.to_string());
    }
    if space.is_some() {
        out.push(WARN_GLOBAL_INDEXING.to_string());
    }
    if let Some(space) = space {
        if space.has_interior_nodes() {
            out.push(WARN_INTERIOR_NODES.to_string());
        }
    }
    out
}

pub fn cost_json(integrand_evaluations: u64, sup_probes: u64) -> Value {
    json!({
        "integrand_evaluations": integrand_evaluations,
        "sup_probes": sup_probes,
    })
}

/// Assemble the top-level document. `sections` are inserted in order
/// under their given keys; rendering sorts keys, so insertion order
/// only matters for readability of the code.
pub fn assemble(
    operator: &str,
    sections: Vec<(&str, Value)>,
    verdicts: &[VerdictEntry],
    warnings: &[String],
    cost: Value,
) -> Value {
    let mut root = Map::new();
    root.insert("schema".to_string(), json!(SCHEMA));
    root.insert("operator".to_string(), json!(operator));
    for (key, value) in sections {
        root.insert(key.to_string(), value);
    }
    root.insert(
        "verdicts".to_string(),
        Value::Array(verdicts.iter().map(VerdictEntry::to_json).collect()),
    );
    root.insert("warnings".to_string(), json!(warnings));
    root.insert("cost".to_string(), cost);
    Value::Object(root)
}

pub fn render(report: &Value) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgamma::TailModel;
    use crate::verdict::Verdict;

    fn term(index: usize, value: f64) -> CellTerm {
        CellTerm {
            index,
            value,
            error_estimate: 0.0,
            converged: value.is_finite(),
            divergent: value.is_infinite(),
            detail: None,
            evaluations: 10,
        }
    }

    #[test]
    fn assemble_produces_stable_self_describing_json() {
        let local = LocalTerms {
            terms: vec![term(1, 0.5), term(2, f64::INFINITY)],
            sup: f64::INFINITY,
            any_failed: false,
        };
        let section = json!({ "local": local_terms_json(&local) });
        let report = assemble(
            "volterra",
            vec![("volterra", section)],
            &[VerdictEntry::new("compactness_decay", Verdict::Undecided, &["volterra.local"])],
            &[WARN_AREA_CONSTANT.to_string()],
            cost_json(10, 0),
        );
        let text = render(&report);
        assert!(text.ends_with('\n'));
        assert_eq!(text, render(&report));

        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["schema"], json!(SCHEMA));
        assert_eq!(parsed["operator"], json!("volterra"));
        assert_eq!(parsed["verdicts"][0]["verdict"], json!("undecided"));
        assert_eq!(parsed["verdicts"][0]["derived_from"][0], json!("volterra.local"));
        assert!(parsed["warnings"][0].as_str().unwrap().contains("c_lp = 4"));
        // Non-finite values become null; the flags carry the reason.
        let terms = &parsed["volterra"]["local"]["terms"];
        assert_eq!(terms[0]["value"], json!(0.5));
        assert_eq!(terms[1]["value"], Value::Null);
        assert_eq!(terms[1]["divergent"], json!(true));
    }

    #[test]
    fn split_vs_direct_rules() {
        use Verdict::*;
        assert_eq!(split_vs_direct_verdict(1.0, 4.0, false), Consistent);
        assert_eq!(split_vs_direct_verdict(1.0, 9.0, false), Inconsistent);
        assert_eq!(split_vs_direct_verdict(1.0, 0.1, false), Inconsistent);
        assert_eq!(split_vs_direct_verdict(0.0, 0.0, false), Consistent);
        assert_eq!(split_vs_direct_verdict(0.0, 1.0, false), Inconsistent);
        assert_eq!(
            split_vs_direct_verdict(f64::INFINITY, f64::INFINITY, false),
            Consistent
        );
        assert_eq!(split_vs_direct_verdict(f64::INFINITY, 1.0, false), Inconsistent);
        assert_eq!(split_vs_direct_verdict(1.0, 4.0, true), Undecided);
    }

    #[test]
    fn composition_hs_rules() {
        use Verdict::*;
        assert_eq!(composition_hs_verdict(1.0, 0.5, 1.2, false), Consistent);
        assert_eq!(composition_hs_verdict(2.0, 0.5, 1.0, false), Inconsistent);
        assert_eq!(
            composition_hs_verdict(1.0, 0.5, f64::INFINITY, false),
            Inconsistent
        );
        assert_eq!(
            composition_hs_verdict(f64::INFINITY, 0.5, f64::INFINITY, false),
            Consistent
        );
        assert_eq!(composition_hs_verdict(1.0, 0.5, 1.2, true), Undecided);
    }

    #[test]
    fn standard_warnings_follow_configuration() {
        let space = SpacePair::new(
            vec![Complex64::new(4.0, 0.0), Complex64::new(0.0, 16.0)],
            vec![1.0, 1.0],
            TailModel::default(),
        )
        .unwrap();
        let warnings = standard_warnings(Some(&space), true);
        assert!(warnings.iter().any(|w| w == WARN_AREA_CONSTANT));
        assert!(warnings.iter().any(|w| w == WARN_INTERIOR_NODES));
        let warnings = standard_warnings(None, false);
        assert!(warnings.is_empty());
    }
}
