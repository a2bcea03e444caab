use std::path::{Path, PathBuf};

use cramer_core::{MeasureModel, ModelDescriptor};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub samples: Option<usize>,
    pub reps: Option<usize>,
    pub directions: Option<usize>,
    pub test_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub cramer: Option<f64>,
    pub inclusion: Option<f64>,
    pub depth: Option<f64>,
}

/// Contents of a `--config` file. Every field can be overridden by a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelDescriptor>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Settings after merging flags over the config file.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub model: ModelDescriptor,
    pub seed: u64,
    pub budgets: Budgets,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20240101;

impl Resolved {
    pub fn build_model(&self) -> Result<MeasureModel, CliError> {
        Ok(self.model.to_model()?)
    }

    pub fn samples(&self, default: usize) -> usize {
        self.budgets.samples.unwrap_or(default)
    }

    pub fn reps(&self, default: usize) -> usize {
        self.budgets.reps.unwrap_or(default)
    }

    pub fn directions(&self, default: usize) -> usize {
        self.budgets.directions.unwrap_or(default)
    }

    pub fn test_points(&self, default: usize) -> usize {
        self.budgets.test_points.unwrap_or(default)
    }
}
