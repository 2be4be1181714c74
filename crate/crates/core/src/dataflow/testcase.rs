use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::InputRange;

/// Test input: per model input, `q_T` control values held piecewise-constant
/// over uniformly spaced segments of the horizon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestCase {
    pub inputs: BTreeMap<String, Vec<f64>>,
}

impl TestCase {
    pub fn new(inputs: BTreeMap<String, Vec<f64>>) -> Self {
        Self { inputs }
    }

    /// A test holding every input at a constant.
    pub fn constant(values: &[(&str, f64)], q_t: usize) -> Self {
        Self {
            inputs: values.iter().map(|(n, v)| (n.to_string(), vec![*v; q_t])).collect(),
        }
    }

    /// Builds a test from a flat vector laid out input-major in `inputs` order.
    pub fn from_vector(inputs: &[(String, InputRange)], q_t: usize, x: &[f64]) -> Self {
        debug_assert_eq!(x.len(), inputs.len() * q_t);
        Self {
            inputs: inputs
                .iter()
                .enumerate()
                .map(|(i, (name, _))| (name.clone(), x[i * q_t..(i + 1) * q_t].to_vec()))
                .collect(),
        }
    }

    pub fn to_vector(&self, inputs: &[(String, InputRange)]) -> Vec<f64> {
        inputs
            .iter()
            .flat_map(|(name, _)| self.inputs.get(name).cloned().unwrap_or_default())
            .collect()
    }

    pub fn within_ranges(&self, inputs: &[(String, InputRange)]) -> bool {
        inputs.iter().all(|(name, r)| {
            self.inputs
                .get(name)
                .is_some_and(|v| !v.is_empty() && v.iter().all(|x| r.contains(*x)))
        })
    }
}

/// Control-point index feeding sample `j` of a `k`-sample run with `q` points.
pub fn control_index(j: usize, k: usize, q: usize) -> usize {
    ((j * q) / k).min(q - 1)
}

/// Expands control points into a per-sample signal.
pub fn hold_signal(controls: &[f64], k: usize) -> Vec<f64> {
    (0..k).map(|j| controls[control_index(j, k, controls.len())]).collect()
}
