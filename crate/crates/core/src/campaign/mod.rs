//! End-to-end campaigns: parse, mutate, generate tests, simulate every
//! `(test, variant)` pair, score, and write artifacts.
//!
//! A campaign's report embeds the model and property sources and the mutant
//! manifest, so any cell can be re-simulated from the report alone.

mod config;
mod plot;
mod run;

use std::path::Path;

use thiserror::Error;

pub use config::{
    resolve_parallelism, CampaignConfig, LoadedCampaign, StrategySpec, CONFIG_SCHEMA, PARALLELISM_ENV,
};
pub use plot::{emit_plot_data, emit_plot_data_with};
pub use run::{
    run_campaign, run_campaign_with, CampaignReport, CellFailure, Invariants, Reduction, Registries, StrategyScore,
    Timing, REPORT_SCHEMA,
};

use crate::dataflow::Diagnostic;
use crate::lang::{ModelParseError, StlParseError};
use crate::mutation::MutationError;
use crate::scoring::ScoringError;
use crate::stl::StlError;
use crate::testgen::StrategyError;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("model: {0}")]
    ModelParse(#[from] ModelParseError),
    #[error("model is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Diagnostic>),
    #[error("property: {0}")]
    Property(#[from] StlParseError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error("strategy {strategy}: {source}")]
    Strategy { strategy: String, source: StrategyError },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("no cell for mutant `{mutant}` and test `{test}`")]
    UnknownCell { mutant: String, test: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CampaignError {
    /// Stable machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            CampaignError::Config(_) => "ConfigError",
            CampaignError::Io { .. } => "IoError",
            CampaignError::ModelParse(_) | CampaignError::InvalidModel(_) => "ModelError",
            CampaignError::Property(_) => "PropertyError",
            CampaignError::Mutation(_) => "MutationError",
            CampaignError::Strategy { .. } => "StrategyError",
            CampaignError::Scoring(_) | CampaignError::Stl(_) => "ScoringError",
            CampaignError::Simulation(_) => "SimulationError",
            CampaignError::UnknownCell { .. } => "UnknownCell",
            CampaignError::Csv(_) => "IoError",
        }
    }
}

/// Writes `report.json`, `manifest.json`, `killmatrix.csv` and one
/// `suite-<label>.json` per suite into `dir`.
pub fn write_artifacts(report: &CampaignReport, dir: &Path) -> Result<(), CampaignError> {
    let io = |p: &Path, e: std::io::Error| CampaignError::Io { path: p.display().to_string(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| io(&p, e))
    };
    write("report.json", report.to_json())?;
    write("manifest.json", serde_json::to_string_pretty(&report.manifest).expect("manifest serializes"))?;
    write("killmatrix.csv", report.matrix.to_csv_string())?;
    for s in &report.suites {
        write(&format!("suite-{}.json", s.strategy), serde_json::to_string_pretty(s).expect("suite serializes"))?;
    }
    Ok(())
}
