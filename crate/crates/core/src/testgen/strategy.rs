use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::art::art_generate;
use super::oracle::{brute_force_phi_killable, Grid, OracleError, OracleVerdict};
use super::search::{
    falsify_with, sbtg_with, KillProblem, SearchBudget, SearchError, SearchLog, UpdateRegistry, UpdateRule,
};
use crate::dataflow::{Model, SimConfig, Simulator, TestCase};
use crate::mutation::MutantModel;
use crate::stl::StlFormula;
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("unknown strategy `{0}`")]
    Unknown(String),
    #[error("bad parameters for {strategy}: {message}")]
    Params { strategy: String, message: String },
    #[error("unknown update rule `{0}`")]
    UnknownUpdate(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Shared inputs of every strategy.
pub struct StrategyContext<'a> {
    pub model: &'a Model,
    pub mutants: &'a [MutantModel],
    pub phi: &'a StlFormula,
    pub cfg: SimConfig,
    pub q_t: usize,
    pub updates: &'a UpdateRegistry,
}

impl StrategyContext<'_> {
    fn rule(&self, name: &str) -> Result<Arc<dyn UpdateRule>, StrategyError> {
        self.updates.get(name).ok_or_else(|| StrategyError::UnknownUpdate(name.into()))
    }
}

/// A targeted strategy's conclusion about one mutant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimOutcome {
    /// A test φ-killing the mutant was found.
    Killable,
    /// Every search run ended without a φ-killing test.
    Exhausted,
    /// The exhaustive grid holds no φ-killing test.
    NotKillableOnGrid,
    /// Falsification found a test violating φ on the mutant.
    Violated,
    /// Falsification found no violating test.
    NotViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantClaim {
    pub outcome: ClaimOutcome,
    pub runs: usize,
    /// Search log of the returned run, or of the run reaching the best value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<SearchLog>,
}

#[derive(Debug, Clone, Default)]
pub struct StrategyOutput {
    pub tests: Vec<(TestCase, Option<String>)>,
    /// Per-mutant claims of targeted strategies, keyed by mutant id.
    pub claims: BTreeMap<String, MutantClaim>,
}

/// A named test-generation strategy with JSON parameters.
pub trait TestStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn generate(
        &self,
        ctx: &StrategyContext<'_>,
        params: &serde_json::Value,
        seed: u64,
    ) -> Result<StrategyOutput, StrategyError>;
}

fn params<T: DeserializeOwned + Default>(strategy: &str, v: &serde_json::Value) -> Result<T, StrategyError> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone())
        .map_err(|e| StrategyError::Params { strategy: strategy.into(), message: e.to_string() })
}

fn default_update() -> String {
    "drift".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ArtParams {
    n: usize,
    candidates: usize,
}

impl Default for ArtParams {
    fn default() -> Self {
        Self { n: 30, candidates: 10 }
    }
}

pub struct Art;

impl TestStrategy for Art {
    fn name(&self) -> &'static str {
        "ART"
    }

    fn generate(&self, ctx: &StrategyContext<'_>, p: &serde_json::Value, seed: u64) -> Result<StrategyOutput, StrategyError> {
        let p: ArtParams = params(self.name(), p)?;
        let tests = art_generate(&ctx.model.inputs(), ctx.q_t, p.n, p.candidates, seed)?;
        Ok(StrategyOutput { tests: tests.into_iter().map(|t| (t, None)).collect(), claims: BTreeMap::new() })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SearchParams {
    runs: usize,
    population_size: usize,
    max_iterations: usize,
    #[serde(default = "default_update")]
    update: String,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { runs: 30, population_size: 10, max_iterations: 50, update: default_update() }
    }
}

fn run_seed(seed: u64, mutant: usize, run: usize) -> u64 {
    derive_seed(derive_seed(seed, mutant as u64), run as u64)
}

/// Falsification: per mutant, minimize the mutant's robustness.
pub struct Falsification;

impl TestStrategy for Falsification {
    fn name(&self) -> &'static str {
        "FT"
    }

    fn generate(&self, ctx: &StrategyContext<'_>, p: &serde_json::Value, seed: u64) -> Result<StrategyOutput, StrategyError> {
        let p: SearchParams = params(self.name(), p)?;
        let rule = ctx.rule(&p.update)?;
        let results: Vec<Result<(Option<TestCase>, MutantClaim), StrategyError>> = ctx
            .mutants
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let sim = Simulator::new(&m.model).map_err(SearchError::from)?;
                let budget = SearchBudget::new(p.population_size, p.max_iterations, run_seed(seed, i, 0));
                let out = falsify_with(&sim, ctx.phi, &ctx.cfg, ctx.q_t, &budget, rule.as_ref())?;
                let outcome = if out.test.is_some() { ClaimOutcome::Violated } else { ClaimOutcome::NotViolated };
                Ok((out.test, MutantClaim { outcome, runs: 1, log: Some(out.log) }))
            })
            .collect();
        collect_targeted(ctx, results)
    }
}

fn collect_targeted(
    ctx: &StrategyContext<'_>,
    results: Vec<Result<(Option<TestCase>, MutantClaim), StrategyError>>,
) -> Result<StrategyOutput, StrategyError> {
    let mut out = StrategyOutput::default();
    for (m, r) in ctx.mutants.iter().zip(results) {
        let (test, claim) = r?;
        if let Some(t) = test {
            out.tests.push((t, Some(m.descriptor.id.clone())));
        }
        out.claims.insert(m.descriptor.id.clone(), claim);
    }
    Ok(out)
}

/// The φ-kill search: per mutant, up to `runs` independent searches.
pub struct Sbtg;

impl TestStrategy for Sbtg {
    fn name(&self) -> &'static str {
        "SBTG"
    }

    fn generate(&self, ctx: &StrategyContext<'_>, p: &serde_json::Value, seed: u64) -> Result<StrategyOutput, StrategyError> {
        let p: SearchParams = params(self.name(), p)?;
        let rule = ctx.rule(&p.update)?;
        let results: Vec<_> = ctx
            .mutants
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let problem = KillProblem::new(ctx.model, m, ctx.phi, &ctx.cfg)?;
                let mut best_log: Option<SearchLog> = None;
                for run in 0..p.runs {
                    let budget = SearchBudget::new(p.population_size, p.max_iterations, run_seed(seed, i, run));
                    let out = sbtg_with(&problem, ctx.q_t, &budget, rule.as_ref())?;
                    if out.test.is_some() {
                        let claim = MutantClaim { outcome: ClaimOutcome::Killable, runs: run + 1, log: Some(out.log) };
                        return Ok((out.test, claim));
                    }
                    let better = best_log.as_ref().is_none_or(|b| {
                        out.log.best_per_iteration.last() > b.best_per_iteration.last()
                    });
                    if better {
                        best_log = Some(out.log);
                    }
                }
                Ok((None, MutantClaim { outcome: ClaimOutcome::Exhausted, runs: p.runs, log: best_log }))
            })
            .collect();
        collect_targeted(ctx, results)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OracleParams {
    levels: usize,
    q_t: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { levels: 3, q_t: 2 }
    }
}

/// Exhaustive grid search per mutant; uses its own (small) `q_t`.
pub struct GridOracle;

impl TestStrategy for GridOracle {
    fn name(&self) -> &'static str {
        "brute-force-oracle"
    }

    fn generate(&self, ctx: &StrategyContext<'_>, p: &serde_json::Value, _seed: u64) -> Result<StrategyOutput, StrategyError> {
        let p: OracleParams = params(self.name(), p)?;
        let grid = Grid::uniform(&ctx.model.inputs(), p.levels);
        let results: Vec<_> = ctx
            .mutants
            .iter()
            .map(|m| {
                let problem = KillProblem::new(ctx.model, m, ctx.phi, &ctx.cfg)?;
                Ok(match brute_force_phi_killable(&problem, &grid, p.q_t)? {
                    OracleVerdict::KillableOnGrid { witness, .. } => {
                        (Some(witness), MutantClaim { outcome: ClaimOutcome::Killable, runs: 1, log: None })
                    }
                    OracleVerdict::NotKillableOnGrid { .. } => {
                        (None, MutantClaim { outcome: ClaimOutcome::NotKillableOnGrid, runs: 1, log: None })
                    }
                })
            })
            .collect();
        collect_targeted(ctx, results)
    }
}

/// Strategies by name.
#[derive(Clone)]
pub struct StrategyRegistry {
    strategies: BTreeMap<&'static str, Arc<dyn TestStrategy>>,
}

impl StrategyRegistry {
    pub fn standard() -> Self {
        let mut r = Self { strategies: BTreeMap::new() };
        r.register(Art);
        r.register(Falsification);
        r.register(Sbtg);
        r.register(GridOracle);
        r
    }

    pub fn register(&mut self, s: impl TestStrategy + 'static) {
        self.strategies.insert(s.name(), Arc::new(s));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn TestStrategy>, StrategyError> {
        self.strategies.get(name).cloned().ok_or_else(|| StrategyError::Unknown(name.into()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
