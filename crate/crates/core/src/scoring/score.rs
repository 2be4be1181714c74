use serde::{Deserialize, Serialize};

use super::matrix::{KillMatrix, Label};
use super::verdict::ScoringError;

/// The count rows of a mutation-testing results table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCounts {
    pub mutants: usize,
    /// Valid mutants that are not equivalent.
    pub killable: usize,
    pub killed: usize,
    /// NTD_φ mutants.
    pub phi_killable: usize,
    pub phi_killed: usize,
}

impl ScoreCounts {
    /// `φ-killed ≤ killed ≤ killable ≤ mutants` and `φ-killed ≤ φ-killable ≤ killable`.
    pub fn consistent(&self) -> bool {
        self.phi_killed <= self.killed
            && self.killed <= self.killable
            && self.killable <= self.mutants
            && self.phi_killed <= self.phi_killable
            && self.phi_killable <= self.killable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub counts: ScoreCounts,
    pub ms: f64,
    pub ms_phi: f64,
    /// `ms` as a percentage truncated to two decimals.
    pub ms_percent: f64,
    pub ms_phi_percent: f64,
}

/// `ratio` as a percentage truncated (not rounded) to two decimals.
pub fn percent_2dp(ratio: f64) -> f64 {
    (ratio * 10_000.0 + 1e-6).floor() / 100.0
}

impl ScoreReport {
    pub fn from_counts(counts: ScoreCounts) -> Result<Self, ScoringError> {
        if counts.killable == 0 {
            return Err(ScoringError::ZeroDenominator("number of killable mutants"));
        }
        if counts.phi_killable == 0 {
            return Err(ScoringError::ZeroDenominator("number of φ-killable mutants"));
        }
        let ms = counts.killed as f64 / counts.killable as f64;
        let ms_phi = counts.phi_killed as f64 / counts.phi_killable as f64;
        Ok(Self { counts, ms, ms_phi, ms_percent: percent_2dp(ms), ms_phi_percent: percent_2dp(ms_phi) })
    }
}

/// Counts over the tests with indices in `tests`.
pub fn counts_for(km: &KillMatrix, tests: &[usize]) -> ScoreCounts {
    let mut c = ScoreCounts { mutants: km.mutants.len(), ..Default::default() };
    for (m, l) in km.labels.iter().enumerate() {
        if matches!(l.label, Label::Equivalent | Label::Invalid) {
            continue;
        }
        c.killable += 1;
        if tests.iter().any(|&t| km.strongly_killed_by(t, m)) {
            c.killed += 1;
        }
        if l.label == Label::NtdPhi {
            c.phi_killable += 1;
            if tests.iter().any(|&t| km.phi_killed_by(t, m)) {
                c.phi_killed += 1;
            }
        }
    }
    c
}

/// MS and MS_φ of the whole suite in `km`; labels must already be assigned.
pub fn mutation_score(km: &KillMatrix) -> Result<ScoreReport, ScoringError> {
    let all: Vec<usize> = (0..km.tests.len()).collect();
    ScoreReport::from_counts(counts_for(km, &all))
}

/// MS and MS_φ of a sub-suite.
pub fn score_tests(km: &KillMatrix, tests: &[usize]) -> Result<ScoreReport, ScoringError> {
    ScoreReport::from_counts(counts_for(km, tests))
}
