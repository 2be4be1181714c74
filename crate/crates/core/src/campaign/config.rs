use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::dataflow::{validate_model, Model, SimConfig};
use crate::lang::{parse_model, parse_stl};
use crate::mutation::{Params, ALL_OPERATORS};
use crate::stl::StlFormula;

pub const CONFIG_SCHEMA: &str = "pbmt.campaign/v1";

/// Environment variable holding the default worker count.
pub const PARALLELISM_ENV: &str = "PBMT_PARALLELISM";

fn default_schema() -> String {
    CONFIG_SCHEMA.into()
}

/// One test-generation step of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    /// Registered strategy name (`ART`, `FT`, `SBTG`, `brute-force-oracle`).
    pub name: String,
    /// Suite label, used in test ids; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub params: serde_json::Value,
    pub seed: u64,
}

impl StrategySpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

/// A campaign description. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub model: PathBuf,
    pub property: PathBuf,
    pub sim: SimConfig,
    pub q_t: usize,
    /// Operators to apply; all registered operators when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operators: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Params>,
    pub mutation_seed: u64,
    pub strategies: Vec<StrategySpec>,
    /// Per-sample tolerance for weak and strong kills.
    #[serde(default)]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self, CampaignError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if self.schema != CONFIG_SCHEMA {
            return bad(format!("unsupported schema `{}`", self.schema));
        }
        if self.q_t == 0 {
            return bad("q_t must be at least 1".into());
        }
        self.sim.check().map_err(|e| CampaignError::Config(e.to_string()))?;
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be a finite nonnegative number".into());
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be at least 1".into());
        }
        let mut labels = BTreeSet::new();
        for s in &self.strategies {
            if !labels.insert(s.label()) {
                return bad(format!("duplicate strategy label `{}`", s.label()));
            }
        }
        Ok(())
    }

    pub fn operator_names(&self) -> Vec<String> {
        match &self.operators {
            Some(ops) => ops.clone(),
            None => ALL_OPERATORS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// A config together with its parsed model and property.
#[derive(Debug, Clone)]
pub struct LoadedCampaign {
    pub config: CampaignConfig,
    pub model_source: String,
    pub property_source: String,
    pub model: Model,
    pub phi: StlFormula,
    /// Directory the config's relative paths resolve against.
    pub base_dir: PathBuf,
}

fn read(path: &Path) -> Result<String, CampaignError> {
    std::fs::read_to_string(path)
        .map_err(|e| CampaignError::Io { path: path.display().to_string(), message: e.to_string() })
}

impl LoadedCampaign {
    /// Reads a config file and the model and property it references.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CampaignError> {
        let path = path.as_ref();
        let config = CampaignConfig::from_json(&read(path)?)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |p: &Path| base_dir.join(p);
        let model_source = read(&resolve(&config.model))
            .map_err(|e| CampaignError::Config(format!("model file: {e}")))?;
        let property_source = read(&resolve(&config.property))
            .map_err(|e| CampaignError::Config(format!("property file: {e}")))?;
        let mut loaded = Self::from_sources(config, model_source, property_source)?;
        loaded.base_dir = base_dir;
        Ok(loaded)
    }

    pub fn from_sources(
        config: CampaignConfig,
        model_source: String,
        property_source: String,
    ) -> Result<Self, CampaignError> {
        config.check()?;
        let model = parse_model(&model_source)?;
        let diags = validate_model(&model);
        if !diags.is_empty() {
            return Err(CampaignError::InvalidModel(diags));
        }
        let phi = parse_stl(&property_source, &model)?;
        Ok(Self { config, model_source, property_source, model, phi, base_dir: PathBuf::new() })
    }

    /// Output directory: the configured one (relative to the config) or `out`.
    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(self.config.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")))
    }
}

/// Worker count: the explicit value, else the environment variable, else
/// the number of available cores.
pub fn resolve_parallelism(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(PARALLELISM_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
