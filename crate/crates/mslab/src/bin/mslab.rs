//! Command-line front end: verify the numerical core, analyze an
//! operator described by a JSON run configuration, and flatten report
//! tables to CSV.
//!
//! Exit codes: 0 for a completed run (divergent criterion values are
//! results, not failures), 1 when verification fails or is missing,
//! 2 for configuration problems, 3 for numerical failures.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::Value;

use mslab::error::{MslabError, Result};
use mslab::numerics::QuadratureSpec;
use mslab::report;
use mslab::verify;
use mslab::workbench::{self, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "mslab", about = "criteria workbench for weighted Cauchy-transform spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the closed-form verification suite and write the token that
    /// unlocks `analyze`.
    Verify {
        /// Area constant to verify against.
        #[arg(long, default_value_t = 4.0)]
        c_lp: f64,
        /// Directory the token file is written to.
        #[arg(long, default_value = ".")]
        token_dir: PathBuf,
    },
    /// Analyze the operator described by a JSON run configuration and
    /// write a report.
    Analyze {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Report destination; overrides the configuration's `out`.
        /// Without either, the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory holding the verification token.
        #[arg(long, default_value = ".")]
        token_dir: PathBuf,
    },
    /// Flatten the tables of a report into CSV files.
    Export {
        /// Report produced by `analyze`.
        #[arg(long)]
        report: PathBuf,
        /// Directory the CSV files are written to.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Verify { c_lp, token_dir } => run_verify(c_lp, &token_dir),
        Command::Analyze { config, out, token_dir } => run_analyze(&config, out, &token_dir),
        Command::Export { report, out } => run_export(&report, &out),
    }
}

fn run_verify(c_lp: f64, token_dir: &Path) -> Result<()> {
    let outcome = verify::run_verify(c_lp, &QuadratureSpec::default())?;
    for check in &outcome.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("check {} ... {} ({})", check.name, tag, check.detail);
    }
    if !outcome.passed() {
        let failed: Vec<&str> =
            outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        return Err(MslabError::NotVerified(format!(
            "verification failed: {}",
            failed.join(", ")
        )));
    }
    let path = verify::write_token(token_dir, c_lp)?;
    println!("verified; token written to {}", path.display());
    Ok(())
}

fn run_analyze(config_path: &Path, out: Option<PathBuf>, token_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let config: RunConfig = serde_json::from_str(&text)?;
    verify::check_token(token_dir, config.area_constant())?;

    let base_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    let report = workbench::run_report(&config, base_dir)?;

    let rendered = report::render(&report);
    match out.or(config.out) {
        Some(path) => {
            std::fs::write(&path, rendered)?;
            println!("report written to {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

// --- CSV export ---------------------------------------------------------

/// A number cell: finite numbers print plainly, null prints per the
/// `divergent` flag of its row ("inf") or empty when the slot is absent.
fn csv_num(v: &Value) -> String {
    match v {
        Value::Number(n) => format!("{n}"),
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::String(s) => s.replace(',', ";"),
        _ => String::new(),
    }
}

fn csv_num_or_inf(v: &Value, divergent: bool) -> String {
    if v.is_null() && divergent {
        "inf".to_string()
    } else {
        csv_num(v)
    }
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn term_rows(terms: &[Value]) -> Vec<String> {
    terms
        .iter()
        .map(|t| {
            let divergent = t["divergent"].as_bool().unwrap_or(false);
            format!(
                "{},{},{},{},{},{}",
                csv_num(&t["index"]),
                csv_num_or_inf(&t["value"], divergent),
                csv_num(&t["error_estimate"]),
                csv_num(&t["converged"]),
                divergent,
                csv_num(&t["evaluations"]),
            )
        })
        .collect()
}

const TERM_HEADER: &str = "index,value,error_estimate,converged,divergent,evaluations";

fn sup_rows(terms: &[Value]) -> Vec<String> {
    terms
        .iter()
        .map(|t| {
            let divergent = t["divergent"].as_bool().unwrap_or(false);
            format!(
                "{},{},{},{},{},{},{}",
                csv_num(&t["index"]),
                csv_num_or_inf(&t["sup"], divergent),
                csv_num(&t["arg_y"]),
                divergent,
                csv_num(&t["near_y"]),
                csv_num(&t["not_decided_at_tail"]),
                csv_num(&t["probes"]),
            )
        })
        .collect()
}

const SUP_HEADER: &str = "index,sup,arg_y,divergent,near_y,not_decided_at_tail,probes";

fn array<'a>(value: &'a Value, path: &[&str]) -> &'a [Value] {
    let mut cur = value;
    for key in path {
        cur = &cur[*key];
    }
    cur.as_array().map(Vec::as_slice).unwrap_or(&[])
}

fn run_export(report_path: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(report_path)?;
    let report: Value = serde_json::from_str(&text)?;
    let operator = report["operator"].as_str().ok_or_else(|| {
        MslabError::Config("report has no operator field; was it produced by analyze?".to_string())
    })?;
    std::fs::create_dir_all(out_dir)?;

    match operator {
        "volterra" => export_volterra(&report, out_dir),
        "composition" => export_composition(&report, out_dir),
        "model" => export_model(&report, out_dir),
        other => Err(MslabError::Config(format!("unknown operator {other:?} in report"))),
    }
}

fn export_volterra(report: &Value, out: &Path) -> Result<()> {
    write_csv(
        &out.join("volterra_local.csv"),
        TERM_HEADER,
        &term_rows(array(report, &["volterra", "local", "terms"])),
    )?;

    let global_rows: Vec<String> = array(report, &["volterra", "global", "terms"])
        .iter()
        .map(|t| {
            let divergent = t["divergent"].as_bool().unwrap_or(false);
            format!(
                "{},{},{},{}",
                csv_num(&t["index"]),
                csv_num_or_inf(&t["value"], divergent),
                csv_num(&t["error_estimate"]),
                divergent,
            )
        })
        .collect();
    write_csv(
        &out.join("volterra_global.csv"),
        "index,value,error_estimate,divergent",
        &global_rows,
    )?;

    let p = array(report, &["volterra", "pq", "p"]);
    let q = array(report, &["volterra", "pq", "q"]);
    let pq_rows: Vec<String> = p
        .iter()
        .zip(q)
        .enumerate()
        .map(|(i, (pi, qi))| {
            let cell = |t: &Value| {
                if t.is_null() {
                    ",,".to_string()
                } else {
                    let divergent = t["divergent"].as_bool().unwrap_or(false);
                    format!(
                        "{},{},{}",
                        csv_num_or_inf(&t["value"], divergent),
                        csv_num(&t["error_estimate"]),
                        csv_num(&t["converged"]),
                    )
                }
            };
            format!("{},{},{}", i + 1, cell(pi), cell(qi))
        })
        .collect();
    write_csv(
        &out.join("volterra_pq.csv"),
        "index,p_value,p_error,p_converged,q_value,q_error,q_converged",
        &pq_rows,
    )?;

    let gram = &report["volterra"]["gram"];
    if !gram.is_null() {
        let n = gram["n"].as_u64().unwrap_or(0) as usize;
        let entries = gram["entries"].as_array().map(Vec::as_slice).unwrap_or(&[]);
        let mut rows = Vec::new();
        for (j, row) in entries.iter().enumerate().take(n) {
            let row = row.as_array().map(Vec::as_slice).unwrap_or(&[]);
            for (k, entry) in row.iter().enumerate().take(n) {
                rows.push(format!(
                    "{},{},{},{}",
                    j + 1,
                    k + 1,
                    csv_num(&entry["re"]),
                    csv_num(&entry["im"]),
                ));
            }
        }
        write_csv(&out.join("gram.csv"), "j,k,re,im", &rows)?;

        let norm_rows: Vec<String> = array(report, &["volterra", "gram", "truncated_norms"])
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{},{}", i + 1, csv_num(v)))
            .collect();
        write_csv(&out.join("gram_norms.csv"), "n,truncated_norm", &norm_rows)?;
    }
    Ok(())
}

fn export_composition(report: &Value, out: &Path) -> Result<()> {
    write_csv(
        &out.join("composition_local.csv"),
        SUP_HEADER,
        &sup_rows(array(report, &["composition", "local", "terms"])),
    )?;

    let global_rows: Vec<String> = array(report, &["composition", "global", "terms"])
        .iter()
        .map(|t| {
            let divergent = t["divergent"].as_bool().unwrap_or(false);
            format!(
                "{},{},{}",
                csv_num(&t["index"]),
                csv_num_or_inf(&t["value"], divergent),
                divergent,
            )
        })
        .collect();
    write_csv(&out.join("composition_global.csv"), "index,value,divergent", &global_rows)?;

    write_csv(
        &out.join("composition_direct.csv"),
        SUP_HEADER,
        &sup_rows(array(report, &["composition", "direct", "terms"])),
    )?;
    Ok(())
}

fn point_rows(points: &[Value]) -> Vec<String> {
    points
        .iter()
        .map(|p| {
            let divergent = p["divergent"].as_bool().unwrap_or(false);
            format!(
                "{},{},{},{},{},{}",
                csv_num(&p["w"]["re"]),
                csv_num(&p["w"]["im"]),
                csv_num_or_inf(&p["value"], divergent),
                csv_num(&p["converged"]),
                divergent,
                csv_num(&p["evaluations"]),
            )
        })
        .collect()
}

const POINT_HEADER: &str = "re,im,value,converged,divergent,evaluations";

fn export_model(report: &Value, out: &Path) -> Result<()> {
    write_csv(
        &out.join("model_grid.csv"),
        POINT_HEADER,
        &point_rows(array(report, &["model", "grid", "points"])),
    )?;
    write_csv(
        &out.join("model_ray.csv"),
        POINT_HEADER,
        &point_rows(array(report, &["model", "ray", "points"])),
    )?;
    Ok(())
}
