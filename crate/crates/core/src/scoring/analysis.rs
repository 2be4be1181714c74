use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::matrix::{KillMatrix, Label};
use super::score::percent_2dp;

/// Which verdict counts as a kill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KillMode {
    Phi,
    Strong,
}

fn kills(km: &KillMatrix, mode: KillMode, t: usize, m: usize) -> bool {
    match mode {
        KillMode::Phi => km.phi_killed_by(t, m),
        KillMode::Strong => km.strongly_killed_by(t, m),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsumption {
    /// Groups (of size ≥ 2) of mutants with the same φ-kill vector and, when
    /// digests are known, identical outputs on every test.
    pub duplicates: Vec<Vec<String>>,
    /// `(p_i, p_j)`: p_i is φ-killed by some test and every test φ-killing
    /// p_i also φ-kills p_j.
    pub subsumes: Vec<(String, String)>,
    /// Whether output digests took part in duplicate detection.
    pub traces_compared: bool,
}

/// Dynamic subsumption over the executed suite.
pub fn dynamic_subsumption(km: &KillMatrix) -> Subsumption {
    let n_t = km.tests.len();
    let vectors: Vec<Vec<bool>> =
        (0..km.mutants.len()).map(|m| (0..n_t).map(|t| km.phi_killed_by(t, m)).collect()).collect();
    let traces_compared =
        n_t > 0 && (0..n_t).all(|t| (0..km.mutants.len()).all(|m| km.cell(t, m).is_none() || km.digest(t, m).is_some()));

    let mut groups: BTreeMap<(Vec<bool>, Vec<Option<u64>>), Vec<usize>> = BTreeMap::new();
    for (m, v) in vectors.iter().enumerate() {
        let trace_key = if traces_compared { (0..n_t).map(|t| km.digest(t, m)).collect() } else { Vec::new() };
        groups.entry((v.clone(), trace_key)).or_default().push(m);
    }
    let mut duplicates: Vec<Vec<String>> = groups
        .into_values()
        .filter(|g| g.len() > 1)
        .map(|g| g.into_iter().map(|m| km.mutants[m].clone()).collect())
        .collect();
    duplicates.sort();

    let mut subsumes = Vec::new();
    for (i, vi) in vectors.iter().enumerate() {
        if !vi.iter().any(|&k| k) {
            continue;
        }
        for (j, vj) in vectors.iter().enumerate() {
            if i != j && vi.iter().zip(vj).all(|(&a, &b)| !a || b) {
                subsumes.push((km.mutants[i].clone(), km.mutants[j].clone()));
            }
        }
    }
    Subsumption { duplicates, subsumes, traces_compared }
}

/// Greedy reduction: repeatedly takes the test killing the most mutants not
/// yet covered (lowest index on ties) until no test adds coverage. Returns
/// test indices in selection order.
pub fn greedy_reduce(km: &KillMatrix, mode: KillMode) -> Vec<usize> {
    let mut covered = vec![false; km.mutants.len()];
    let mut chosen = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for t in 0..km.tests.len() {
            let gain = (0..km.mutants.len()).filter(|&m| !covered[m] && kills(km, mode, t, m)).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((t, gain));
            }
        }
        let Some((t, _)) = best else { break };
        for (m, c) in covered.iter_mut().enumerate() {
            *c |= kills(km, mode, t, m);
        }
        chosen.push(t);
    }
    chosen
}

/// Mutants killed by at least one of `tests`.
pub fn killed_set(km: &KillMatrix, mode: KillMode, tests: &[usize]) -> BTreeSet<usize> {
    (0..km.mutants.len()).filter(|&m| tests.iter().any(|&t| kills(km, mode, t, m))).collect()
}

/// One column of the per-operator breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRow {
    pub operator: String,
    pub generated: usize,
    pub phi_trivially_different: usize,
    pub phi_trivially_different_percent: Option<f64>,
    pub ntd_phi: usize,
    pub ntd_phi_percent: Option<f64>,
    /// MS_φ percentage per strategy, `None` when the operator has no NTD_φ mutant.
    pub ms_phi_percent: BTreeMap<String, Option<f64>>,
    /// NTD_φ mutants φ-killed by none of the listed strategies.
    pub not_killed: usize,
    pub not_killed_percent: Option<f64>,
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| percent_2dp(num as f64 / den as f64))
}

/// Per-operator breakdown. `operators[m]` is mutant `m`'s operator; each
/// entry of `suites` names a strategy and its test indices. Operators appear
/// in first-seen order.
pub fn operator_table(km: &KillMatrix, operators: &[String], suites: &[(String, Vec<usize>)]) -> Vec<OperatorRow> {
    let mut order: Vec<&str> = Vec::new();
    for op in operators {
        if !order.contains(&op.as_str()) {
            order.push(op);
        }
    }
    let union: Vec<usize> = suites.iter().flat_map(|(_, t)| t.iter().copied()).collect::<BTreeSet<_>>().into_iter().collect();
    order
        .into_iter()
        .map(|op| {
            let ms: Vec<usize> = (0..km.mutants.len()).filter(|&m| operators[m] == op).collect();
            let generated = ms.len();
            let ptd = ms
                .iter()
                .filter(|&&m| matches!(km.labels[m].label, Label::Equivalent | Label::PhiTriviallyDifferent))
                .count();
            let ntd: Vec<usize> = ms.iter().copied().filter(|&m| km.labels[m].label == Label::NtdPhi).collect();
            let phi_killed = |tests: &[usize]| ntd.iter().filter(|&&m| tests.iter().any(|&t| km.phi_killed_by(t, m))).count();
            let ms_phi_percent = suites
                .iter()
                .map(|(name, tests)| (name.clone(), pct(phi_killed(tests), ntd.len())))
                .collect();
            let not_killed = ntd.len() - phi_killed(&union);
            OperatorRow {
                operator: op.to_string(),
                generated,
                phi_trivially_different: ptd,
                phi_trivially_different_percent: pct(ptd, generated),
                ntd_phi: ntd.len(),
                ntd_phi_percent: pct(ntd.len(), generated),
                ms_phi_percent,
                not_killed,
                not_killed_percent: pct(not_killed, ntd.len()),
            }
        })
        .collect()
}
