use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{resolve_parallelism, CampaignConfig, LoadedCampaign};
use super::CampaignError;
use crate::dataflow::{SimError, Simulator, Trace};
use crate::mutation::{Manifest, MutationSettings, OperatorRegistry};
use crate::scoring::{
    classify, counts_for, dynamic_subsumption, greedy_reduce, killed_set, operator_table, Evidence, KillMatrix,
    KillMode, KillVerdict, OperatorRow, ScoreCounts, Subsumption,
};
use crate::testgen::{
    ClaimOutcome, MutantClaim, Provenance, StrategyContext, StrategyRegistry, SuiteTest, TestSuite, UpdateRegistry,
};
use crate::util::digest_f64;

pub const REPORT_SCHEMA: &str = "pbmt.report/v1";

/// Strategies whose evidence labels mutants rather than measuring a suite.
const LABELING_STRATEGIES: [&str; 2] = ["SBTG", "brute-force-oracle"];

/// Registries a campaign resolves names against.
#[derive(Clone, Default)]
pub struct Registries {
    pub operators: OperatorRegistry,
    pub strategies: StrategyRegistry,
    pub updates: UpdateRegistry,
}

impl Registries {
    pub fn standard() -> Self {
        Self {
            operators: OperatorRegistry::standard(),
            strategies: StrategyRegistry::standard(),
            updates: UpdateRegistry::standard(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyScore {
    pub strategy: String,
    pub tests: usize,
    pub counts: ScoreCounts,
    #[serde(with = "crate::util::real::option")]
    pub ms: Option<f64>,
    #[serde(with = "crate::util::real::option")]
    pub ms_phi: Option<f64>,
    pub ms_percent: Option<f64>,
    pub ms_phi_percent: Option<f64>,
}

impl StrategyScore {
    fn new(km: &KillMatrix, strategy: &str, tests: &[usize]) -> Self {
        let counts = counts_for(km, tests);
        let ratio = |n: usize, d: usize| (d > 0).then(|| n as f64 / d as f64);
        let ms = ratio(counts.killed, counts.killable);
        let ms_phi = ratio(counts.phi_killed, counts.phi_killable);
        Self {
            strategy: strategy.into(),
            tests: tests.len(),
            counts,
            ms,
            ms_phi,
            ms_percent: ms.map(crate::scoring::percent_2dp),
            ms_phi_percent: ms_phi.map(crate::scoring::percent_2dp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub strategy: String,
    pub full: usize,
    /// Greedy reduction by φ-kills.
    pub phi: Vec<String>,
    /// Greedy reduction by strong kills.
    pub strong: Vec<String>,
    /// Reduced suites kill the same mutants as the full suite.
    pub sound: bool,
}

/// A simulation that aborted; `variant` is `None` for the original model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub test: String,
    pub variant: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    /// Cells breaking `phi ⇒ strong ⇒ weak`.
    pub hierarchy_violations: usize,
    /// Every φ-killed mutant is also strongly killed.
    pub kd_phi_subset_kd: bool,
    pub counts_consistent: bool,
    /// Targeted tests returned by SBTG, and how many φ-kill their target on re-simulation.
    pub sbtg_returned: usize,
    pub sbtg_reverified: usize,
    pub search_logs_monotone: bool,
    pub reductions_sound: bool,
}

impl Invariants {
    pub fn all_hold(&self) -> bool {
        self.hierarchy_violations == 0
            && self.kd_phi_subset_kd
            && self.counts_consistent
            && self.sbtg_returned == self.sbtg_reverified
            && self.search_logs_monotone
            && self.reductions_sound
    }
}

/// Wall-clock measurements; excluded from reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mutation_seconds: f64,
    pub generation_seconds: BTreeMap<String, f64>,
    pub execution_seconds: f64,
    pub total_seconds: f64,
    pub simulations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema: String,
    pub config: CampaignConfig,
    pub model_source: String,
    pub property_source: String,
    pub manifest: Manifest,
    pub suites: Vec<TestSuite>,
    pub matrix: KillMatrix,
    pub scores: Vec<StrategyScore>,
    pub combined: StrategyScore,
    pub operator_table: Vec<OperatorRow>,
    pub reductions: Vec<Reduction>,
    pub subsumption: Subsumption,
    /// Targeted-strategy claims per suite label, then mutant id.
    pub claims: BTreeMap<String, BTreeMap<String, MutantClaim>>,
    pub failures: Vec<CellFailure>,
    pub invariants: Invariants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON without timing: identical for identical configs and seeds.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.timing = None;
        r.to_json()
    }

    /// Row indices of the tests in the suite labelled `label`.
    pub fn suite_rows(&self, label: &str) -> Vec<usize> {
        let mut offset = 0;
        for s in &self.suites {
            if s.strategy == label {
                return (offset..offset + s.len()).collect();
            }
            offset += s.len();
        }
        Vec::new()
    }

    pub fn find_test(&self, id: &str) -> Option<&SuiteTest> {
        self.suites.iter().flat_map(|s| &s.tests).find(|t| t.id == id)
    }
}

fn outputs_digest(trace: &Trace, outputs: &[String]) -> u64 {
    digest_f64(outputs.iter().flat_map(|o| trace.signal(o).unwrap_or(&[]).iter().copied()))
}

fn sim_message(e: &SimError) -> String {
    e.to_string()
}

/// Runs a campaign with the standard registries.
pub fn run_campaign(loaded: &LoadedCampaign, parallelism: Option<usize>) -> Result<CampaignReport, CampaignError> {
    run_campaign_with(loaded, &Registries::standard(), parallelism)
}

/// Parses, mutates, generates tests, simulates every `(test, variant)` pair
/// and scores. Work runs on a dedicated pool of `parallelism` workers (see
/// [`resolve_parallelism`]); results are merged by job index, so the report
/// does not depend on the worker count.
pub fn run_campaign_with(
    loaded: &LoadedCampaign,
    registries: &Registries,
    parallelism: Option<usize>,
) -> Result<CampaignReport, CampaignError> {
    let threads = resolve_parallelism(parallelism.or(loaded.config.parallelism));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CampaignError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(loaded, registries))
}

fn run_inner(loaded: &LoadedCampaign, reg: &Registries) -> Result<CampaignReport, CampaignError> {
    let cfg = &loaded.config;
    let model = &loaded.model;
    let start = Instant::now();

    let ops = cfg.operator_names();
    let op_refs: Vec<&str> = ops.iter().map(String::as_str).collect();
    let settings = MutationSettings { sim: cfg.sim, q_t: cfg.q_t, overrides: cfg.overrides.clone() };
    let set = reg.operators.generate(model, &op_refs, cfg.mutation_seed, &settings)?;
    let manifest = set.manifest(model);
    let mutation_seconds = start.elapsed().as_secs_f64();

    let ctx = StrategyContext {
        model,
        mutants: &set.mutants,
        phi: &loaded.phi,
        cfg: cfg.sim,
        q_t: cfg.q_t,
        updates: &reg.updates,
    };
    let mut suites = Vec::new();
    let mut claims = BTreeMap::new();
    let mut generation_seconds = BTreeMap::new();
    for spec in &cfg.strategies {
        let t0 = Instant::now();
        let strategy = reg.strategies.get(&spec.name).map_err(|e| CampaignError::Config(e.to_string()))?;
        let out = strategy
            .generate(&ctx, &spec.params, spec.seed)
            .map_err(|source| CampaignError::Strategy { strategy: spec.label().into(), source })?;
        let tests = out
            .tests
            .into_iter()
            .enumerate()
            .map(|(k, (test, target))| SuiteTest {
                id: format!("{}-{k:03}", spec.label()),
                provenance: Provenance { strategy: spec.name.clone(), seed: spec.seed, target },
                test,
            })
            .collect();
        suites.push(TestSuite::new(spec.label(), tests));
        if !out.claims.is_empty() {
            claims.insert(spec.label().to_string(), out.claims);
        }
        generation_seconds.insert(spec.label().to_string(), t0.elapsed().as_secs_f64());
    }

    let t_exec = Instant::now();
    let all_tests: Vec<&SuiteTest> = suites.iter().flat_map(|s| &s.tests).collect();
    let outputs = model.outputs();
    let original = Simulator::new(model).map_err(|e| CampaignError::Config(e.to_string()))?;
    let mutant_sims = set
        .mutants
        .iter()
        .map(|m| Simulator::new(&m.model))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    let orig_traces: Vec<Result<Trace, SimError>> =
        all_tests.par_iter().map(|t| original.run(&t.test, &cfg.sim)).collect();

    let n_m = set.mutants.len();
    let jobs: Vec<(usize, usize)> = (0..all_tests.len()).flat_map(|t| (0..n_m).map(move |m| (t, m))).collect();
    let results: Vec<Result<(Option<(KillVerdict, u64)>, Option<String>), CampaignError>> = jobs
        .par_iter()
        .map(|&(t, m)| {
            let Ok(orig) = &orig_traces[t] else { return Ok((None, None)) };
            match mutant_sims[m].run(&all_tests[t].test, &cfg.sim) {
                Ok(tr) => {
                    let v = classify(orig, &tr, &set.mutants[m].mutated_signal, &outputs, &loaded.phi, &cfg.sim, cfg.tolerance)?;
                    Ok((Some((v, outputs_digest(&tr, &outputs))), None))
                }
                Err(e) => Ok((None, Some(sim_message(&e)))),
            }
        })
        .collect();

    let mut failures = Vec::new();
    for (t, r) in orig_traces.iter().enumerate() {
        if let Err(e) = r {
            failures.push(CellFailure { test: all_tests[t].id.clone(), variant: None, message: sim_message(e) });
        }
    }
    let mut cells = vec![vec![None; n_m]; all_tests.len()];
    let mut digests = vec![vec![None; n_m]; all_tests.len()];
    for (&(t, m), r) in jobs.iter().zip(results) {
        let (cell, failure) = r?;
        if let Some((v, d)) = cell {
            cells[t][m] = Some(v);
            digests[t][m] = Some(d);
        }
        if let Some(message) = failure {
            failures.push(CellFailure {
                test: all_tests[t].id.clone(),
                variant: Some(set.mutants[m].descriptor.id.clone()),
                message,
            });
        }
    }
    let execution_seconds = t_exec.elapsed().as_secs_f64();

    let test_ids: Vec<String> = all_tests.iter().map(|t| t.id.clone()).collect();
    let mutant_ids: Vec<String> = set.mutants.iter().map(|m| m.descriptor.id.clone()).collect();
    let mut km = KillMatrix::new(test_ids, mutant_ids, cells).with_digests(digests);
    let mut evidence: BTreeMap<String, Evidence> = BTreeMap::new();
    for per_mutant in claims.values() {
        for (id, c) in per_mutant {
            let e = evidence.entry(id.clone()).or_default();
            match c.outcome {
                ClaimOutcome::Exhausted => e.sbtg_exhausted = true,
                ClaimOutcome::NotKillableOnGrid => e.oracle_not_killable = true,
                _ => {}
            }
        }
    }
    km.assign_labels(&evidence);

    let simulations = all_tests.len() * (n_m + 1);
    let report = assemble(loaded, manifest, suites, km, claims, failures);
    Ok(CampaignReport {
        timing: Some(Timing {
            mutation_seconds,
            generation_seconds,
            execution_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
            simulations,
        }),
        ..report
    })
}

fn assemble(
    loaded: &LoadedCampaign,
    manifest: Manifest,
    suites: Vec<TestSuite>,
    km: KillMatrix,
    claims: BTreeMap<String, BTreeMap<String, MutantClaim>>,
    failures: Vec<CellFailure>,
) -> CampaignReport {
    let mut rows: Vec<(String, Vec<usize>)> = Vec::new();
    let mut offset = 0;
    for s in &suites {
        rows.push((s.strategy.clone(), (offset..offset + s.len()).collect()));
        offset += s.len();
    }
    let all: Vec<usize> = (0..km.tests.len()).collect();
    let scores: Vec<StrategyScore> = rows.iter().map(|(l, r)| StrategyScore::new(&km, l, r)).collect();
    let combined = StrategyScore::new(&km, "all", &all);

    let operators: Vec<String> = manifest.mutants.iter().map(|d| d.operator.clone()).collect();
    let labeling = |label: &str| {
        loaded.config.strategies.iter().any(|s| s.label() == label && LABELING_STRATEGIES.contains(&s.name.as_str()))
    };
    let measured: Vec<(String, Vec<usize>)> = rows.iter().filter(|(l, _)| !labeling(l)).cloned().collect();
    let op_table = operator_table(&km, &operators, &measured);

    let mut reductions = Vec::new();
    for (label, r) in rows.iter().chain(std::iter::once(&("all".to_string(), all.clone()))) {
        let sub = km.select_tests(r);
        let phi = greedy_reduce(&sub, KillMode::Phi);
        let strong = greedy_reduce(&sub, KillMode::Strong);
        let full_rows: Vec<usize> = (0..sub.tests.len()).collect();
        let sound = killed_set(&sub, KillMode::Phi, &phi) == killed_set(&sub, KillMode::Phi, &full_rows)
            && killed_set(&sub, KillMode::Strong, &strong) == killed_set(&sub, KillMode::Strong, &full_rows);
        reductions.push(Reduction {
            strategy: label.clone(),
            full: r.len(),
            phi: phi.iter().map(|&t| sub.tests[t].clone()).collect(),
            strong: strong.iter().map(|&t| sub.tests[t].clone()).collect(),
            sound,
        });
    }

    let phi_killed = killed_set(&km, KillMode::Phi, &all);
    let strong_killed = killed_set(&km, KillMode::Strong, &all);
    let mut sbtg_returned = 0;
    let mut sbtg_reverified = 0;
    for (t, test) in suites.iter().flat_map(|s| &s.tests).enumerate() {
        if test.provenance.strategy != "SBTG" {
            continue;
        }
        let Some(target) = &test.provenance.target else { continue };
        sbtg_returned += 1;
        if let Some(m) = km.mutants.iter().position(|id| id == target) {
            if km.phi_killed_by(t, m) {
                sbtg_reverified += 1;
            }
        }
    }
    let search_logs_monotone =
        claims.values().flat_map(|c| c.values()).filter_map(|c| c.log.as_ref()).all(|l| l.is_monotone());
    let invariants = Invariants {
        hierarchy_violations: km.hierarchy_violations().len(),
        kd_phi_subset_kd: phi_killed.is_subset(&strong_killed),
        counts_consistent: scores.iter().chain(std::iter::once(&combined)).all(|s| s.counts.consistent()),
        sbtg_returned,
        sbtg_reverified,
        search_logs_monotone,
        reductions_sound: reductions.iter().all(|r| r.sound),
    };

    CampaignReport {
        schema: REPORT_SCHEMA.into(),
        config: loaded.config.clone(),
        model_source: loaded.model_source.clone(),
        property_source: loaded.property_source.clone(),
        manifest,
        subsumption: dynamic_subsumption(&km),
        suites,
        matrix: km,
        scores,
        combined,
        operator_table: op_table,
        reductions,
        claims,
        failures,
        invariants,
        timing: None,
    }
}
