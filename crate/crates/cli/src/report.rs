use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{pretty, MANIFEST, SCHEMA};

pub const REPORT: &str = "report.json";

#[derive(Default)]
struct Entry {
    runs: usize,
    failures: usize,
    checked: usize,
    artifacts: Vec<String>,
    measured: Vec<Value>,
}

/// Summary of every statement found in the JSON artifacts of `dir`.
pub fn run(dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let listing = fs::read_dir(dir).map_err(|e| CliError::config(format!("cannot read {}: {e}", dir.display())))?;
    let mut names: Vec<String> = listing
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != MANIFEST && n != REPORT && (n.ends_with(".json") || n.ends_with(".csv")))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::config(format!("no artifacts in {}", dir.display())));
    }
    let mut statements: BTreeMap<String, Entry> = BTreeMap::new();
    for name in names.iter().filter(|n| n.ends_with(".json")) {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("artifact {} is not JSON: {e}", path.display())))?;
        if v.get("schema").and_then(Value::as_str) != Some(SCHEMA) {
            return Err(CliError::config(format!("artifact {name} has an unknown schema")));
        }
        for s in v.get("statements").and_then(Value::as_array).into_iter().flatten() {
            let Some(id) = s.get("id").and_then(Value::as_str) else { continue };
            let e = statements.entry(id.to_string()).or_default();
            e.runs += 1;
            if let Some(p) = s.get("passed").and_then(Value::as_bool) {
                e.checked += 1;
                if !p {
                    e.failures += 1;
                }
            }
            e.artifacts.push(name.clone());
            e.measured.push(s.get("measured").cloned().unwrap_or(Value::Null));
        }
    }
    let summary: BTreeMap<String, Value> = statements
        .into_iter()
        .map(|(id, e)| {
            let passed = if e.checked == 0 { Value::Null } else { Value::Bool(e.failures == 0) };
            let v = json!({
                "passed": passed, "runs": e.runs, "failures": e.failures,
                "artifacts": e.artifacts, "measured": e.measured,
            });
            (id, v)
        })
        .collect();
    let report = json!({ "schema": SCHEMA, "artifacts": names, "statements": summary });
    let text = pretty(&report)?;
    match out {
        Some(o) => {
            fs::create_dir_all(o).map_err(|e| CliError::io(format!("cannot create {}: {e}", o.display())))?;
            let path = o.join(REPORT);
            fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
