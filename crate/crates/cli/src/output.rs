use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::error::CliError;

pub const SCHEMA: &str = "1";
pub const MANIFEST: &str = "manifest.json";

/// One pass/fail or measured-constant line, aggregated by `report`.
#[derive(Debug, Clone, Serialize)]
pub struct Statement {
    pub id: String,
    pub passed: Option<bool>,
    pub measured: Value,
}

impl Statement {
    pub fn check(id: &str, passed: bool, measured: Value) -> Self {
        Self { id: id.to_string(), passed: Some(passed), measured }
    }

    pub fn measure(id: &str, measured: Value) -> Self {
        Self { id: id.to_string(), passed: None, measured }
    }
}

pub enum Artifact {
    Json { name: String, value: Value },
    Csv { name: String, text: String },
}

impl Artifact {
    /// Standard JSON envelope of a subcommand.
    pub fn json(
        command: &str,
        name: String,
        cfg: &Resolved,
        results: impl Serialize,
        statements: Vec<Statement>,
    ) -> Result<Self, CliError> {
        let value = json!({
            "schema": SCHEMA,
            "command": command,
            "config": cfg,
            "results": to_value(results)?,
            "statements": to_value(statements)?,
        });
        Ok(Artifact::Json { name, value })
    }

    fn name(&self) -> &str {
        match self {
            Artifact::Json { name, .. } | Artifact::Csv { name, .. } => name,
        }
    }

    fn render(&self) -> Result<String, CliError> {
        match self {
            Artifact::Json { value, .. } => Ok(pretty(value)?),
            Artifact::Csv { text, .. } => Ok(text.clone()),
        }
    }
}

pub fn to_value(v: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::io(format!("serialization failed: {e}")))
}

pub fn pretty(v: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::io(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes the artifact into the output directory and records it in the
/// manifest, or prints it when no directory is set.
pub fn emit(artifact: Artifact, cfg: &Resolved, command: &str) -> Result<(), CliError> {
    let text = artifact.render()?;
    let Some(dir) = &cfg.out else {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(format!("cannot write to stdout: {e}")))?;
        return Ok(());
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(artifact.name());
    fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    update_manifest(dir, artifact.name(), command, cfg)
}

fn update_manifest(dir: &Path, name: &str, command: &str, cfg: &Resolved) -> Result<(), CliError> {
    let path = dir.join(MANIFEST);
    let mut entries: BTreeMap<String, Value> = match fs::read_to_string(&path) {
        Ok(text) => {
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("corrupt manifest {}: {e}", path.display())))?;
            serde_json::from_value(v.get("artifacts").cloned().unwrap_or(json!({})))
                .map_err(|e| CliError::config(format!("corrupt manifest {}: {e}", path.display())))?
        }
        Err(_) => BTreeMap::new(),
    };
    entries.insert(name.to_string(), json!({ "command": command, "model": cfg.model, "seed": cfg.seed }));
    let manifest = json!({ "schema": SCHEMA, "artifacts": entries });
    fs::write(&path, pretty(&manifest)?).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}
