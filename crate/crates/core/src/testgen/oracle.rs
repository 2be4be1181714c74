use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::search::KillProblem;
use crate::dataflow::{InputRange, TestCase};

/// Largest number of grid tests the oracle will enumerate.
pub const GRID_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("grid has {size} tests, above the cap of {GRID_CAP}")]
    GridTooLarge { size: u128 },
    #[error("grid levels missing for input `{0}`")]
    MissingLevels(String),
    #[error("q_T must be at least 1")]
    NoControlPoints,
}

/// Candidate control values per input, in model input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub levels: Vec<(String, Vec<f64>)>,
}

impl Grid {
    /// `n` evenly spaced levels over each input's range, endpoints included.
    pub fn uniform(inputs: &[(String, InputRange)], n: usize) -> Self {
        let levels = inputs
            .iter()
            .map(|(name, r)| {
                let v = match n {
                    0 => Vec::new(),
                    1 => vec![(r.lo + r.hi) / 2.0],
                    _ => (0..n).map(|i| r.lo + r.width() * i as f64 / (n - 1) as f64).collect(),
                };
                (name.clone(), v)
            })
            .collect();
        Self { levels }
    }

    /// Adds every control value of `test` to the matching input's levels.
    pub fn with_test(mut self, test: &TestCase) -> Self {
        for (name, levels) in &mut self.levels {
            if let Some(vals) = test.inputs.get(name) {
                for v in vals {
                    if !levels.contains(v) {
                        levels.push(*v);
                    }
                }
                levels.sort_by(f64::total_cmp);
            }
        }
        self
    }

    pub fn size(&self, q_t: usize) -> u128 {
        self.levels
            .iter()
            .map(|(_, l)| (l.len() as u128).saturating_pow(q_t as u32))
            .fold(1u128, u128::saturating_mul)
    }

    /// The `index`-th grid test in mixed-radix order (last control point of
    /// the last input varies fastest).
    pub fn test_at(&self, q_t: usize, mut index: u128) -> TestCase {
        let mut inputs = std::collections::BTreeMap::new();
        for (name, levels) in self.levels.iter().rev() {
            let mut controls = vec![0.0; q_t];
            for slot in controls.iter_mut().rev() {
                let n = levels.len() as u128;
                *slot = levels[(index % n) as usize];
                index /= n;
            }
            inputs.insert(name.clone(), controls);
        }
        TestCase::new(inputs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum OracleVerdict {
    KillableOnGrid { witness: TestCase, index: u64 },
    NotKillableOnGrid { tests: u64 },
}

impl OracleVerdict {
    pub fn is_killable(&self) -> bool {
        matches!(self, OracleVerdict::KillableOnGrid { .. })
    }
}

/// Exhaustively checks every grid test for a φ-kill. The witness is the
/// first killing test in grid order.
pub fn brute_force_phi_killable(problem: &KillProblem<'_>, grid: &Grid, q_t: usize) -> Result<OracleVerdict, OracleError> {
    if q_t == 0 {
        return Err(OracleError::NoControlPoints);
    }
    for (name, _) in problem.inputs() {
        if !grid.levels.iter().any(|(n, l)| n == name && !l.is_empty()) {
            return Err(OracleError::MissingLevels(name.clone()));
        }
    }
    let ordered = Grid {
        levels: problem
            .inputs()
            .iter()
            .map(|(name, _)| grid.levels.iter().find(|(n, _)| n == name).cloned().expect("checked above"))
            .collect(),
    };
    let size = ordered.size(q_t);
    if size > GRID_CAP {
        return Err(OracleError::GridTooLarge { size });
    }
    let hit = (0..size as u64).into_par_iter().find_first(|&i| {
        let f = problem.evaluate(&ordered.test_at(q_t, i as u128));
        f.feasible
    });
    Ok(match hit {
        Some(index) => OracleVerdict::KillableOnGrid { witness: ordered.test_at(q_t, index as u128), index },
        None => OracleVerdict::NotKillableOnGrid { tests: size as u64 },
    })
}
