//! Run configuration, read from JSON with unknown keys rejected.

use std::path::{Path, PathBuf};

use nervereg::refine::RefineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    /// Row identifier column; row numbers are used when it is absent.
    pub id_column: String,
    pub response_columns: Vec<String>,
    /// Explicit feature columns; otherwise every column starting with `feature_prefix`.
    pub feature_columns: Option<Vec<String>>,
    pub feature_prefix: String,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            id_column: "id".into(),
            response_columns: vec!["y".into()],
            feature_columns: None,
            feature_prefix: "x".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub enabled: bool,
    pub level: f64,
    pub n_samples: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            level: 0.9,
            n_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub data: DataSpec,
    pub task: Task,
    /// Declared class order for classification; inferred from labels when absent.
    pub classes: Option<Vec<String>>,
    pub k: usize,
    pub max_dim: usize,
    /// Seeds the eigensolver start vectors, credible-band draws and CV folds.
    pub seed: u64,
    pub folds: usize,
    pub refine: RefineConfig,
    pub band: BandConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            data: DataSpec::default(),
            task: Task::Regression,
            classes: None,
            k: 10,
            max_dim: 2,
            seed: 0,
            folds: 5,
            refine: RefineConfig::default(),
            band: BandConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical serialization: every field, defaults filled in.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.k == 0 {
            return Err(CliError::Config("k must be at least 1".into()));
        }
        if !(1..=2).contains(&self.max_dim) {
            return Err(CliError::Config(format!("max_dim must be 1 or 2, got {}", self.max_dim)));
        }
        if self.folds < 2 {
            return Err(CliError::Config("folds must be at least 2".into()));
        }
        if self.data.response_columns.is_empty() {
            return Err(CliError::Config("at least one response column is required".into()));
        }
        if self.task == Task::Classification && self.data.response_columns.len() != 1 {
            return Err(CliError::Config("classification takes exactly one label column".into()));
        }
        if !(self.band.level > 0.0 && self.band.level < 1.0) {
            return Err(CliError::Config(format!("band level {} outside (0, 1)", self.band.level)));
        }
        if self.band.n_samples < 100 {
            return Err(CliError::Config("band.n_samples must be at least 100".into()));
        }
        self.refine.validate()?;
        Ok(())
    }

    /// Refinement settings with the run seed applied to the eigensolver.
    pub fn refine_config(&self) -> RefineConfig {
        let mut r = self.refine.clone();
        r.eigen.seed = self.seed;
        r
    }
}
