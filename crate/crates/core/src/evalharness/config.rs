use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SplitSpec;
use crate::baselines::{MlpConfig, RfConfig};
use crate::featurize::ATOM_FEATURE_DIM;
use crate::potentialnet::{Architecture, ModelConfig};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "ADMET_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config field {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Potentialnet,
    PotentialnetSingletask,
    Gcnn,
    RfSklearn,
    RfMix,
    Mlp,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Potentialnet => "potentialnet",
            MethodKind::PotentialnetSingletask => "potentialnet_singletask",
            MethodKind::Gcnn => "gcnn",
            MethodKind::RfSklearn => "rf_sklearn",
            MethodKind::RfMix => "rf_mix",
            MethodKind::Mlp => "mlp",
        }
    }

    pub fn is_graph_model(self) -> bool {
        matches!(
            self,
            MethodKind::Potentialnet | MethodKind::PotentialnetSingletask | MethodKind::Gcnn
        )
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_gcnn() -> ModelConfig {
    ModelConfig {
        architecture: Architecture::Gcnn,
        ..ModelConfig::default()
    }
}

fn default_rf_sklearn() -> RfConfig {
    RfConfig::sklearn(0)
}

fn default_rf_mix() -> RfConfig {
    RfConfig::mix(0)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV path, relative to the config file's directory unless absolute.
    pub dataset: PathBuf,
    pub split: SplitSpec,
    pub methods: Vec<MethodKind>,
    #[serde(default)]
    pub potentialnet: ModelConfig,
    #[serde(default = "default_gcnn")]
    pub gcnn: ModelConfig,
    #[serde(default = "default_rf_sklearn")]
    pub rf_sklearn: RfConfig,
    #[serde(default = "default_rf_mix")]
    pub rf_mix: RfConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Restricts the run to these assays; all assays when absent.
    #[serde(default)]
    pub assays: Option<Vec<String>>,
}

/// A validated config with paths made absolute and every model seed set
/// from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    /// "config" or "env:ADMET_SEED".
    pub seed_source: String,
}

impl RunConfig {
    /// Reads `path`; `env_seed` is the raw value of [`SEED_ENV`], if set.
    pub fn load(path: &Path, env_seed: Option<&str>) -> Result<ResolvedConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base, env_seed)
    }

    pub fn from_json(
        text: &str,
        base_dir: &Path,
        env_seed: Option<&str>,
    ) -> Result<ResolvedConfig, ConfigError> {
        let run: RunConfig = serde_json::from_str(text)?;
        run.resolve(base_dir, env_seed)
    }

    pub fn resolve(
        mut self,
        base_dir: &Path,
        env_seed: Option<&str>,
    ) -> Result<ResolvedConfig, ConfigError> {
        let seed_source = match env_seed {
            Some(s) => {
                self.seed = s
                    .trim()
                    .parse()
                    .map_err(|_| invalid(SEED_ENV, format!("not an unsigned integer: {s:?}")))?;
                format!("env:{SEED_ENV}")
            }
            None => "config".to_string(),
        };
        for p in [&mut self.dataset, &mut self.output_dir] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        self.potentialnet.seed = self.seed;
        self.gcnn.seed = self.seed;
        self.rf_sklearn.seed = self.seed;
        self.rf_mix.seed = self.seed;
        self.mlp.seed = self.seed;
        self.validate()?;
        Ok(ResolvedConfig {
            run: self,
            seed_source,
        })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !self.dataset.is_file() {
            return Err(invalid(
                "dataset",
                format!("{} does not exist", self.dataset.display()),
            ));
        }
        self.split
            .validate()
            .map_err(|e| invalid("split", e.to_string()))?;
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method is required"));
        }
        let distinct: BTreeSet<_> = self.methods.iter().collect();
        if distinct.len() != self.methods.len() {
            return Err(invalid("methods", "methods must be distinct"));
        }
        if self.potentialnet.architecture != Architecture::PotentialNet {
            return Err(invalid(
                "potentialnet.architecture",
                "must be potential_net",
            ));
        }
        if self.gcnn.architecture != Architecture::Gcnn {
            return Err(invalid("gcnn.architecture", "must be gcnn"));
        }
        for (field, cfg) in [("potentialnet", &self.potentialnet), ("gcnn", &self.gcnn)] {
            cfg.validate(ATOM_FEATURE_DIM)
                .map_err(|e| invalid(field, e.to_string()))?;
        }
        for (field, rf) in [("rf_sklearn", &self.rf_sklearn), ("rf_mix", &self.rf_mix)] {
            if rf.n_trees == 0 || rf.min_leaf == 0 {
                return Err(invalid(field, "n_trees and min_leaf must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.mlp.dropout)
            || self.mlp.batch_size == 0
            || self.mlp.hidden.contains(&0)
        {
            return Err(invalid(
                "mlp",
                "dropout must lie in [0, 1); batch_size and widths must be positive",
            ));
        }
        if let Some(a) = &self.assays {
            if a.is_empty() {
                return Err(invalid("assays", "list is empty"));
            }
        }
        Ok(())
    }
}

impl ResolvedConfig {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
