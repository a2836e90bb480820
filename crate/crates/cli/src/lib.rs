//! Scenario runner for the `klspec` library: reads a versioned JSON scenario,
//! runs one operation, writes `<kind>.csv` and `summary.json`.

pub mod error;
pub mod run;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub use error::CliError;
pub use run::{run, Outcome, Table};
pub use scenario::{Inputs, Kind, Scenario, SCENARIO_SCHEMA, SUMMARY_SCHEMA};

/// Options that come from the command line rather than the scenario.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub input: PathBuf,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

pub fn summary(kind: Kind, inv: &Invocation, body: Result<&Outcome, &CliError>) -> Value {
    let mut doc = json!({
        "schema": SUMMARY_SCHEMA,
        "kind": kind.name(),
    });
    if let Some(seed) = inv.seed {
        doc["seed"] = json!(seed);
    }
    match body {
        Ok(o) => {
            doc["status"] = json!("ok");
            doc["tolerance"] = json!({"rel": o.tolerance.rel, "abs": o.tolerance.abs});
            doc["result"] = o.result.clone();
        }
        Err(e) => {
            doc["status"] = json!(if matches!(e, CliError::Refused(_)) { "refused" } else { "error" });
            doc["error"] = json!({"class": e.label(), "message": e.to_string()});
        }
    }
    doc
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(out)?;
    w.write_record(&table.header).map_err(out)?;
    for row in &table.rows {
        w.write_record(row).map_err(out)?;
    }
    w.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn write_summary(path: &Path, doc: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(doc).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Loads, runs and writes. Returns the process exit status.
pub fn execute(kind: Kind, inv: &Invocation) -> Result<Outcome, CliError> {
    let scenario = Scenario::load(&inv.input)?;
    let out_dir = inv
        .out
        .clone()
        .or_else(|| scenario.output.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set \"output\"".into()))?;
    let base = inv.input.parent().map(Path::to_path_buf).unwrap_or_default();
    let outcome = run(kind, &scenario, &base, inv.tol);
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Output(format!("{}: {e}", out_dir.display())))?;
    write_summary(&out_dir.join("summary.json"), &summary(kind, inv, outcome.as_ref()))?;
    let outcome = outcome?;
    write_csv(&out_dir.join(format!("{}.csv", kind.name())), &outcome.table)?;
    Ok(outcome)
}
