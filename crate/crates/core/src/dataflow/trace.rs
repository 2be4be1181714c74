use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed-step simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Seconds per step.
    pub sample_time: f64,
    /// Total simulated duration in seconds.
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("sample_time must be positive and finite, got {0}")]
    SampleTime(f64),
    #[error("horizon {horizon} with sample_time {sample_time} yields fewer than 2 samples")]
    TooShort { horizon: f64, sample_time: f64 },
}

impl SimConfig {
    pub fn new(sample_time: f64, horizon: f64) -> Result<Self, ConfigError> {
        let cfg = Self { sample_time, horizon };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if !(self.sample_time.is_finite() && self.sample_time > 0.0) {
            return Err(ConfigError::SampleTime(self.sample_time));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) || self.samples() < 2 {
            return Err(ConfigError::TooShort { horizon: self.horizon, sample_time: self.sample_time });
        }
        Ok(())
    }

    /// `k = floor(horizon / sample_time) + 1`; the quotient is nudged by 1e-9
    /// so that e.g. 30 / 0.04 counts 750 whole steps despite rounding.
    pub fn samples(&self) -> usize {
        if !(self.horizon >= 0.0 && self.sample_time > 0.0) {
            return 0;
        }
        (self.horizon / self.sample_time + 1e-9).floor() as usize + 1
    }

    /// Seconds to samples, rounding half up.
    pub fn seconds_to_samples(&self, seconds: f64) -> usize {
        (seconds / self.sample_time + 0.5 + 1e-9).floor() as usize
    }
}

/// Name → column map shared by every trace of one compiled model.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    names: BTreeMap<String, usize>,
    column_names: Vec<String>,
    fast: HashMap<String, usize>,
}

impl SignalTable {
    pub(crate) fn new(names: BTreeMap<String, usize>, columns: usize) -> Self {
        let mut column_names = vec![String::new(); columns];
        for (name, &c) in names.iter().rev() {
            column_names[c] = name.clone();
        }
        let fast = names.iter().map(|(k, v)| (k.clone(), *v)).collect();
        Self { names, column_names, fast }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.fast.get(name).copied()
    }

    pub fn columns(&self) -> usize {
        self.column_names.len()
    }

    /// Canonical (lexicographically first) name of a column.
    pub fn column_name(&self, col: usize) -> &str {
        &self.column_names[col]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.keys().map(String::as_str)
    }
}

/// All signals of one simulation, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    sample_time: f64,
    len: usize,
    table: Arc<SignalTable>,
    data: Vec<f64>,
}

impl Trace {
    pub(crate) fn from_parts(sample_time: f64, len: usize, table: Arc<SignalTable>, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), len * table.columns());
        Self { sample_time, len, table, data }
    }

    /// Builds a trace directly from named sequences (used by monitors and tests).
    pub fn from_signals<I, S>(sample_time: f64, signals: I) -> Result<Self, LengthMismatch>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut names = BTreeMap::new();
        let mut data = Vec::new();
        let mut len = None;
        for (i, (name, values)) in signals.into_iter().enumerate() {
            match len {
                None => len = Some(values.len()),
                Some(k) if k != values.len() => return Err(LengthMismatch { left: k, right: values.len() }),
                _ => {}
            }
            names.insert(name.into(), i);
            data.extend(values);
        }
        let columns = names.len();
        Ok(Self {
            sample_time,
            len: len.unwrap_or(0),
            table: Arc::new(SignalTable::new(names, columns)),
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|j| j as f64 * self.sample_time).collect()
    }

    pub fn table(&self) -> &SignalTable {
        &self.table
    }

    pub fn signal(&self, name: &str) -> Option<&[f64]> {
        self.table.column(name).map(|c| self.column(c))
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.len..(col + 1) * self.len]
    }

    pub fn signal_names(&self) -> impl Iterator<Item = &str> {
        self.table.names()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("signal lengths differ: {left} vs {right}")]
pub struct LengthMismatch {
    pub left: usize,
    pub right: usize,
}

/// Euclidean distance `‖s − s′‖₂` between two equal-length signals.
pub fn signal_distance(s: &[f64], s_prime: &[f64]) -> Result<f64, LengthMismatch> {
    if s.len() != s_prime.len() {
        return Err(LengthMismatch { left: s.len(), right: s_prime.len() });
    }
    Ok(s.iter().zip(s_prime).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}
