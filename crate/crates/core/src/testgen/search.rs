use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::{signal_distance, InputRange, Model, SimConfig, SimError, Simulator, TestCase};
use crate::mutation::MutantModel;
use crate::stl::{robustness, StlFormula};
use crate::util::keyed_rng;

/// Feasibility barrier separating every feasible point from every infeasible one.
pub const BARRIER: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub population_size: usize,
    pub max_iterations: usize,
    #[serde(default)]
    pub wall_clock_limit: Option<f64>,
    pub seed: u64,
}

impl SearchBudget {
    pub fn new(population_size: usize, max_iterations: usize, seed: u64) -> Self {
        Self { population_size, max_iterations, wall_clock_limit: None, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("population size must be positive")]
    EmptyPopulation,
    #[error("q_T must be at least 1")]
    NoControlPoints,
    #[error("model input `{0}` has no finite range")]
    UnboundedInput(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Objective terms of one candidate test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    #[serde(with = "crate::util::real")]
    pub distance: f64,
    #[serde(with = "crate::util::real")]
    pub rho_orig: f64,
    #[serde(with = "crate::util::real")]
    pub rho_mut: f64,
    #[serde(with = "crate::util::real")]
    pub penalized_value: f64,
    pub feasible: bool,
}

impl FitnessBreakdown {
    fn non_finite() -> Self {
        Self {
            distance: f64::NAN,
            rho_orig: f64::NAN,
            rho_mut: f64::NAN,
            penalized_value: f64::NEG_INFINITY,
            feasible: false,
        }
    }
}

/// Penalty weights `(w1, w2)` for the two robustness constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub w1: f64,
    pub w2: f64,
}

impl PenaltyWeights {
    /// `100 ×` the diameter `sqrt(Σ (hi − lo)²)` of the input box.
    pub fn for_inputs(inputs: &[(String, InputRange)]) -> Self {
        let d = inputs.iter().map(|(_, r)| r.width() * r.width()).sum::<f64>().sqrt();
        Self { w1: 100.0 * d, w2: 100.0 * d }
    }
}

/// The search space `[0,1]^(inputs × q_T)`, mapped affinely onto input ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpace {
    pub inputs: Vec<(String, InputRange)>,
    pub q_t: usize,
}

impl ControlSpace {
    pub fn new(inputs: Vec<(String, InputRange)>, q_t: usize) -> Result<Self, SearchError> {
        if q_t == 0 {
            return Err(SearchError::NoControlPoints);
        }
        if let Some((name, _)) = inputs.iter().find(|(_, r)| !(r.lo.is_finite() && r.hi.is_finite())) {
            return Err(SearchError::UnboundedInput(name.clone()));
        }
        Ok(Self { inputs, q_t })
    }

    pub fn dims(&self) -> usize {
        self.inputs.len() * self.q_t
    }

    pub fn decode(&self, unit: &[f64]) -> TestCase {
        let x: Vec<f64> = unit
            .iter()
            .enumerate()
            .map(|(d, u)| {
                let r = &self.inputs[d / self.q_t].1;
                r.clamp(r.lo + u.clamp(0.0, 1.0) * r.width())
            })
            .collect();
        TestCase::from_vector(&self.inputs, self.q_t, &x)
    }

    pub fn encode(&self, test: &TestCase) -> Vec<f64> {
        let x = test.to_vector(&self.inputs);
        x.iter()
            .enumerate()
            .map(|(d, v)| {
                let r = &self.inputs[d / self.q_t].1;
                if r.width() > 0.0 {
                    (v - r.lo) / r.width()
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn random_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dims()).map(|_| rng.random::<f64>()).collect()
    }
}

/// Population update rule `k_new = Update(k)`. Works in unit coordinates.
pub trait UpdateRule: Send + Sync {
    fn name(&self) -> &'static str;
    fn update(&self, k: &[f64], best: &[f64], population: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// `clip(k + F·(best − k) + F·(r1 − r2))` with random members `r1, r2`, then
/// each coordinate resampled uniformly with probability `mutation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftUpdate {
    pub f: f64,
    pub mutation: f64,
}

impl Default for DriftUpdate {
    fn default() -> Self {
        Self { f: 0.5, mutation: 0.1 }
    }
}

impl UpdateRule for DriftUpdate {
    fn name(&self) -> &'static str {
        "drift"
    }

    fn update(&self, k: &[f64], best: &[f64], population: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let r1 = &population[rng.random_range(0..population.len())];
        let r2 = &population[rng.random_range(0..population.len())];
        (0..k.len())
            .map(|d| {
                if rng.random::<f64>() < self.mutation {
                    rng.random::<f64>()
                } else {
                    (k[d] + self.f * (best[d] - k[d]) + self.f * (r1[d] - r2[d])).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

/// Uniform resampling of every coordinate: pure random search.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomRestart;

impl UpdateRule for RandomRestart {
    fn name(&self) -> &'static str {
        "random"
    }

    fn update(&self, k: &[f64], _best: &[f64], _population: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..k.len()).map(|_| rng.random::<f64>()).collect()
    }
}

/// Update rules by name. `drift` is the default.
#[derive(Clone)]
pub struct UpdateRegistry {
    rules: BTreeMap<&'static str, Arc<dyn UpdateRule>>,
}

impl Default for UpdateRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl UpdateRegistry {
    pub fn standard() -> Self {
        let mut r = Self { rules: BTreeMap::new() };
        r.register(DriftUpdate::default());
        r.register(RandomRestart);
        r
    }

    pub fn register(&mut self, rule: impl UpdateRule + 'static) {
        self.rules.insert(rule.name(), Arc::new(rule));
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn UpdateRule>> {
        self.rules.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rules.keys().copied().collect()
    }
}

/// One evaluated candidate: maximize `value`; `done` stops the search.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub value: f64,
    pub done: bool,
    pub detail: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    /// Best value after the initial population and after each iteration.
    #[serde(with = "crate::util::real::vec")]
    pub best_per_iteration: Vec<f64>,
    pub evaluations: usize,
}

impl SearchLog {
    pub fn is_monotone(&self) -> bool {
        self.best_per_iteration.windows(2).all(|w| w[1] >= w[0] || (w[0].is_nan() && w[1].is_nan()))
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult<T> {
    pub best: Vec<f64>,
    pub best_eval: Evaluation<T>,
    pub log: SearchLog,
}

/// Population search: random initial population, then repeated `Update` of
/// every member with greedy replacement, tracking the global best. Stops when
/// the best candidate is `done` or the budget runs out. Candidates are
/// evaluated in parallel; updates and selection run in index order.
pub fn optimize<T, F>(
    dims: usize,
    budget: &SearchBudget,
    rule: &dyn UpdateRule,
    evaluate: F,
) -> Result<SearchResult<T>, SearchError>
where
    T: Clone + Send,
    F: Fn(&[f64]) -> Evaluation<T> + Sync,
{
    if budget.population_size == 0 {
        return Err(SearchError::EmptyPopulation);
    }
    let start = Instant::now();
    let mut rng = keyed_rng(budget.seed, 0);
    let mut population: Vec<Vec<f64>> =
        (0..budget.population_size).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()).collect();
    let mut evals: Vec<Evaluation<T>> = population.par_iter().map(|x| evaluate(x)).collect();
    let mut best_idx = 0;
    for (i, e) in evals.iter().enumerate() {
        if e.value > evals[best_idx].value {
            best_idx = i;
        }
    }
    let mut best = population[best_idx].clone();
    let mut best_eval = evals[best_idx].clone();
    let mut log = SearchLog { best_per_iteration: vec![best_eval.value], evaluations: population.len() };

    for _ in 0..budget.max_iterations {
        if best_eval.done {
            break;
        }
        if budget.wall_clock_limit.is_some_and(|limit| start.elapsed().as_secs_f64() >= limit) {
            break;
        }
        let candidates: Vec<Vec<f64>> =
            population.iter().map(|k| rule.update(k, &best, &population, &mut rng)).collect();
        let cand_evals: Vec<Evaluation<T>> = candidates.par_iter().map(|x| evaluate(x)).collect();
        log.evaluations += candidates.len();
        for (i, (x, e)) in candidates.into_iter().zip(cand_evals).enumerate() {
            if e.value > best_eval.value {
                best = x.clone();
                best_eval = e.clone();
            }
            if e.value >= evals[i].value {
                population[i] = x;
                evals[i] = e;
            }
        }
        log.best_per_iteration.push(best_eval.value);
    }
    Ok(SearchResult { best, best_eval, log })
}

/// Compiled original/mutant pair plus everything needed to score a test.
pub struct KillProblem<'a> {
    pub original: Simulator,
    pub mutant: Simulator,
    pub mutated_signal: &'a str,
    pub phi: &'a StlFormula,
    pub cfg: SimConfig,
    pub weights: PenaltyWeights,
}

impl<'a> KillProblem<'a> {
    pub fn new(model: &Model, mutant: &'a MutantModel, phi: &'a StlFormula, cfg: &SimConfig) -> Result<Self, SearchError> {
        let original = Simulator::new(model)?;
        let weights = PenaltyWeights::for_inputs(original.inputs());
        Ok(Self {
            original,
            mutant: Simulator::new(&mutant.model)?,
            mutated_signal: &mutant.mutated_signal,
            phi,
            cfg: *cfg,
            weights,
        })
    }

    pub fn with_weights(self, weights: PenaltyWeights) -> Self {
        Self { weights, ..self }
    }

    pub fn inputs(&self) -> &[(String, InputRange)] {
        self.original.inputs()
    }

    /// Penalized objective; a non-finite simulation yields `−∞`.
    pub fn evaluate(&self, t: &TestCase) -> FitnessBreakdown {
        let (Ok(a), Ok(b)) = (self.original.run(t, &self.cfg), self.mutant.run(t, &self.cfg)) else {
            return FitnessBreakdown::non_finite();
        };
        let (Ok(ro), Ok(rm)) = (robustness(&a, self.phi, &self.cfg), robustness(&b, self.phi, &self.cfg)) else {
            return FitnessBreakdown::non_finite();
        };
        let (s, s2) = match (a.signal(self.mutated_signal), b.signal(self.mutated_signal)) {
            (Some(s), Some(s2)) => (s, s2),
            _ => return FitnessBreakdown::non_finite(),
        };
        let distance = signal_distance(s, s2).unwrap_or(f64::NAN);
        let (rho_orig, rho_mut) = (ro.value, rm.value);
        let feasible = rho_orig > 0.0 && rho_mut < 0.0;
        let penalized_value = if feasible {
            distance
        } else {
            distance
                - self.weights.w1 * (-rho_orig).max(0.0)
                - self.weights.w2 * rho_mut.max(0.0)
                - BARRIER
        };
        FitnessBreakdown { distance, rho_orig, rho_mut, penalized_value, feasible }
    }

    /// `ρ(O(t, M′), φ)`, or `None` if the mutant simulation is non-finite.
    pub fn mutant_robustness(&self, t: &TestCase) -> Option<f64> {
        let trace = self.mutant.run(t, &self.cfg).ok()?;
        robustness(&trace, self.phi, &self.cfg).ok().map(|r| r.value)
    }
}

/// Scores one test for the φ-kill search problem.
pub fn fitness(
    t: &TestCase,
    model: &Model,
    mutant: &MutantModel,
    phi: &StlFormula,
    cfg: &SimConfig,
    weights: PenaltyWeights,
) -> Result<FitnessBreakdown, SearchError> {
    Ok(KillProblem::new(model, mutant, phi, cfg)?.with_weights(weights).evaluate(t))
}

#[derive(Debug, Clone)]
pub struct SbtgOutcome {
    /// The best test, present only when it satisfies both constraints.
    pub test: Option<TestCase>,
    pub best: FitnessBreakdown,
    pub log: SearchLog,
}

/// Search for a test passing φ on the original and failing it on the mutant,
/// maximizing the distance between the original and mutated signals.
pub fn sbtg_with(
    problem: &KillProblem<'_>,
    q_t: usize,
    budget: &SearchBudget,
    rule: &dyn UpdateRule,
) -> Result<SbtgOutcome, SearchError> {
    let space = ControlSpace::new(problem.inputs().to_vec(), q_t)?;
    let result = optimize(space.dims(), budget, rule, |x| {
        let f = problem.evaluate(&space.decode(x));
        Evaluation { value: f.penalized_value, done: f.feasible, detail: f }
    })?;
    let best = result.best_eval.detail;
    Ok(SbtgOutcome { test: best.feasible.then(|| space.decode(&result.best)), best, log: result.log })
}

pub fn sbtg(
    model: &Model,
    mutant: &MutantModel,
    phi: &StlFormula,
    cfg: &SimConfig,
    q_t: usize,
    budget: &SearchBudget,
) -> Result<SbtgOutcome, SearchError> {
    let problem = KillProblem::new(model, mutant, phi, cfg)?;
    sbtg_with(&problem, q_t, budget, &DriftUpdate::default())
}

#[derive(Debug, Clone)]
pub struct FalsifyOutcome {
    pub test: Option<TestCase>,
    pub log: SearchLog,
}

/// Search for a test violating φ on the mutant by minimizing its robustness.
pub fn falsify_with(
    mutant: &Simulator,
    phi: &StlFormula,
    cfg: &SimConfig,
    q_t: usize,
    budget: &SearchBudget,
    rule: &dyn UpdateRule,
) -> Result<FalsifyOutcome, SearchError> {
    let space = ControlSpace::new(mutant.inputs().to_vec(), q_t)?;
    let result = optimize(space.dims(), budget, rule, |x| {
        let rho = mutant
            .run(&space.decode(x), cfg)
            .ok()
            .and_then(|t| robustness(&t, phi, cfg).ok())
            .map_or(f64::NEG_INFINITY, |r| -r.value);
        Evaluation { value: rho, done: rho > 0.0, detail: () }
    })?;
    Ok(FalsifyOutcome { test: result.best_eval.done.then(|| space.decode(&result.best)), log: result.log })
}

pub fn falsify(
    mutant: &MutantModel,
    phi: &StlFormula,
    cfg: &SimConfig,
    q_t: usize,
    budget: &SearchBudget,
) -> Result<FalsifyOutcome, SearchError> {
    falsify_with(&Simulator::new(&mutant.model)?, phi, cfg, q_t, budget, &DriftUpdate::default())
}
