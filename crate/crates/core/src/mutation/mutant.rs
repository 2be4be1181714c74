use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::operators::{OperatorKind, OperatorRegistry, Params, SiteContext, Target};
use crate::dataflow::{validate_model, BlockKind, Diagnostic, Model, SimConfig, Simulator, TestCase};
use crate::util::{derive_seed, keyed_rng};

pub const MANIFEST_SCHEMA: &str = "pbmt.manifest/v1";

/// Where a mutation applies: a line (by its path-qualified destination port)
/// or an atomic block (by its path).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Site {
    Line(String),
    Block(String),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Line(id) => write!(f, "line {id}"),
            Site::Block(id) => write!(f, "block {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MutationError {
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("{site} does not exist")]
    UnknownSite { site: Site },
    #[error("{operator} is not applicable to {site}: {reason}")]
    IncompatibleSite { operator: String, site: Site, reason: String },
    #[error("nominal probe simulation failed: {0}")]
    Probe(String),
}

/// Everything needed to rebuild one first-order mutant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantDescriptor {
    pub id: String,
    pub operator: String,
    pub site: Site,
    pub params: Params,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct MutantModel {
    pub base: Arc<Model>,
    pub descriptor: MutantDescriptor,
    pub model: Model,
    /// Trace signal carrying the mutated value `s′`.
    pub mutated_signal: String,
}

/// A mutant rejected by static validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidMutant {
    pub descriptor: MutantDescriptor,
    pub diagnostics: Vec<Diagnostic>,
}

/// Settings for default parameter draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationSettings {
    /// Simulation used for the nominal probe run.
    pub sim: SimConfig,
    pub q_t: usize,
    /// Per-operator parameter values that replace the drawn defaults.
    #[serde(default)]
    pub overrides: BTreeMap<String, Params>,
}

impl Default for MutationSettings {
    fn default() -> Self {
        Self { sim: SimConfig { sample_time: 0.01, horizon: 10.0 }, q_t: 10, overrides: BTreeMap::new() }
    }
}

#[derive(Debug, Clone)]
pub struct MutantSet {
    pub master_seed: u64,
    pub operators: Vec<String>,
    pub mutants: Vec<MutantModel>,
    pub invalid: Vec<InvalidMutant>,
}

/// JSON manifest: enough to regenerate every mutant from the base model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub model: String,
    pub master_seed: u64,
    pub operators: Vec<String>,
    pub mutants: Vec<MutantDescriptor>,
    pub invalid: Vec<InvalidMutant>,
}

impl MutantSet {
    pub fn manifest(&self, model: &Model) -> Manifest {
        Manifest {
            schema: MANIFEST_SCHEMA.into(),
            model: model.name.clone(),
            master_seed: self.master_seed,
            operators: self.operators.clone(),
            mutants: self.mutants.iter().map(|m| m.descriptor.clone()).collect(),
            invalid: self.invalid.clone(),
        }
    }
}

fn block_signal(path: &str) -> String {
    format!("{path}.out1")
}

impl OperatorRegistry {
    /// Every compatible `(operator, site)` pair: line operators over every
    /// line, block operators over every accepting block. Ordered by operator
    /// (as given), then site.
    pub fn enumerate_sites(&self, model: &Model, ops: &[&str]) -> Result<Vec<(String, Site)>, MutationError> {
        let lines = model.all_lines();
        let blocks = model.all_blocks();
        let mut out = Vec::new();
        for name in ops {
            let op = self.get(name).ok_or_else(|| MutationError::UnknownOperator(name.to_string()))?;
            match op.kind() {
                OperatorKind::Line => {
                    out.extend(lines.iter().map(|(id, _)| (name.to_string(), Site::Line(id.clone()))))
                }
                OperatorKind::Block => out.extend(
                    blocks
                        .iter()
                        .filter(|(_, b)| op.accepts(&b.kind))
                        .map(|(id, _)| (name.to_string(), Site::Block(id.clone()))),
                ),
            }
        }
        Ok(out)
    }

    /// Rebuilds the mutant described by `d`. Pure in `(model, d)`.
    pub fn apply(&self, model: &Model, d: &MutantDescriptor) -> Result<MutantModel, MutationError> {
        let op = self.get(&d.operator).ok_or_else(|| MutationError::UnknownOperator(d.operator.clone()))?;
        let incompatible = |reason: String| MutationError::IncompatibleSite {
            operator: d.operator.clone(),
            site: d.site.clone(),
            reason,
        };
        let unknown = || MutationError::UnknownSite { site: d.site.clone() };
        let mut mutated = model.clone();
        let signal = match (&d.site, op.kind()) {
            (Site::Line(id), OperatorKind::Line) => {
                let (owner, local) = split_path(id);
                let sub = resolve_owner(&mut mutated, owner).ok_or_else(unknown)?;
                let line = sub.lines.iter_mut().find(|l| l.id() == local).ok_or_else(unknown)?;
                op.apply(Target::Line(line), &d.params, d.seed).map_err(incompatible)?;
                id.clone()
            }
            (Site::Block(id), OperatorKind::Block) => {
                let (owner, local) = split_path(id);
                let sub = resolve_owner(&mut mutated, owner).ok_or_else(unknown)?;
                let block = sub.block_mut(local).ok_or_else(unknown)?;
                if !op.accepts(&block.kind) {
                    return Err(incompatible(format!("block kind {}", block.kind.name())));
                }
                op.apply(Target::Block(&mut block.kind), &d.params, d.seed).map_err(incompatible)?;
                block_signal(id)
            }
            (site, kind) => return Err(incompatible(format!("{kind:?} operator on {site}"))),
        };
        Ok(MutantModel { base: Arc::new(model.clone()), descriptor: d.clone(), model: mutated, mutated_signal: signal })
    }

    /// One mutant per enumerated site. Parameters are drawn from `master_seed`
    /// after one nominal probe simulation that measures each site's signal
    /// range; mutants failing static validation are returned separately.
    pub fn generate(
        &self,
        model: &Model,
        ops: &[&str],
        master_seed: u64,
        settings: &MutationSettings,
    ) -> Result<MutantSet, MutationError> {
        let sites = self.enumerate_sites(model, ops)?;
        let nominal = probe(model, master_seed, settings)?;
        let base = Arc::new(model.clone());
        let mut set = MutantSet {
            master_seed,
            operators: ops.iter().map(|s| s.to_string()).collect(),
            mutants: Vec::new(),
            invalid: Vec::new(),
        };
        for (index, (name, site)) in sites.into_iter().enumerate() {
            let op = self.get(&name).expect("enumerated operators exist");
            let block = match &site {
                Site::Block(id) => block_kind(model, id),
                Site::Line(_) => None,
            };
            let signal = match &site {
                Site::Line(id) => id.clone(),
                Site::Block(id) => block_signal(id),
            };
            let ctx = SiteContext { block, nominal: nominal.get(&signal).copied() };
            let mut rng = keyed_rng(master_seed, index as u64);
            let mut params = op.draw_params(&ctx, &mut rng);
            if let Some(o) = settings.overrides.get(&name) {
                params.extend(o.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
            let descriptor = MutantDescriptor {
                id: format!("m{index:04}"),
                operator: name,
                site,
                params,
                seed: derive_seed(master_seed, index as u64),
            };
            let mut mutant = self.apply(model, &descriptor)?;
            mutant.base = Arc::clone(&base);
            let diagnostics = validate_model(&mutant.model);
            if diagnostics.is_empty() {
                set.mutants.push(mutant);
            } else {
                set.invalid.push(InvalidMutant { descriptor, diagnostics });
            }
        }
        Ok(set)
    }
}

fn split_path(id: &str) -> (Option<&str>, &str) {
    match id.rsplit_once('/') {
        Some((owner, local)) => (Some(owner), local),
        None => (None, id),
    }
}

fn resolve_owner<'a>(model: &'a mut Model, owner: Option<&str>) -> Option<&'a mut Model> {
    let Some(path) = owner else { return Some(model) };
    let mut cur = model;
    for seg in path.split('/') {
        cur = match &mut cur.block_mut(seg)?.kind {
            BlockKind::Subsystem(inner) => inner.as_mut(),
            _ => return None,
        };
    }
    Some(cur)
}

fn block_kind<'a>(model: &'a Model, path: &'a str) -> Option<&'a BlockKind> {
    let (owner, local) = model.resolve_path(path)?;
    owner.block(local).map(|b| &b.kind)
}

/// Observed `(min, max)` of every signal in one run on a random in-range test.
fn probe(
    model: &Model,
    master_seed: u64,
    settings: &MutationSettings,
) -> Result<BTreeMap<String, (f64, f64)>, MutationError> {
    let sim = Simulator::new(model).map_err(|e| MutationError::Probe(e.to_string()))?;
    let mut rng = keyed_rng(master_seed, u64::MAX);
    let test = TestCase::new(
        sim.inputs()
            .iter()
            .map(|(name, r)| (name.clone(), (0..settings.q_t).map(|_| rng.random_range(r.lo..=r.hi)).collect()))
            .collect(),
    );
    let trace = sim.run(&test, &settings.sim).map_err(|e| MutationError::Probe(e.to_string()))?;
    Ok(trace
        .signal_names()
        .map(|name| {
            let s = trace.signal(name).expect("listed signal");
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (name.to_string(), (lo, hi))
        })
        .collect())
}

/// [`OperatorRegistry::enumerate_sites`] with the standard operators.
pub fn enumerate_sites(model: &Model, ops: &[&str]) -> Result<Vec<(String, Site)>, MutationError> {
    OperatorRegistry::standard().enumerate_sites(model, ops)
}

/// [`OperatorRegistry::apply`] with the standard operators.
pub fn apply_mutation(model: &Model, d: &MutantDescriptor) -> Result<MutantModel, MutationError> {
    OperatorRegistry::standard().apply(model, d)
}

/// [`OperatorRegistry::generate`] with the standard operators.
pub fn generate_mutants(
    model: &Model,
    ops: &[&str],
    master_seed: u64,
    settings: &MutationSettings,
) -> Result<MutantSet, MutationError> {
    OperatorRegistry::standard().generate(model, ops, master_seed, settings)
}
