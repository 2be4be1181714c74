use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::formula::{Interval, Predicate, StlFormula, Term};
use crate::dataflow::{SimConfig, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StlError {
    #[error("signal `{0}` is not present in the trace")]
    MissingSignal(String),
    #[error("trace is empty")]
    EmptyTrace,
}

/// Robustness of a formula at one sample index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    #[serde(with = "crate::util::real")]
    pub value: f64,
    pub evaluated_at: usize,
}

impl Robustness {
    /// An infinite value only arises from a temporal window lying wholly
    /// past the end of the trace.
    pub fn is_vacuous(&self) -> bool {
        self.value.is_infinite()
    }

    /// `Some(true)` if satisfied, `Some(false)` if violated, `None` when `ρ = 0`.
    pub fn verdict(&self) -> Option<bool> {
        if self.value > 0.0 {
            Some(true)
        } else if self.value < 0.0 {
            Some(false)
        } else {
            None
        }
    }
}

/// Sample-index window `[lo, hi]` relative to the current index; `hi = None`
/// runs to the end of the trace.
#[derive(Debug, Clone, Copy)]
struct Window {
    lo: usize,
    hi: Option<usize>,
}

impl Window {
    fn from_interval(i: &Interval, cfg: &SimConfig) -> Self {
        Self { lo: cfg.seconds_to_samples(i.lo), hi: i.hi.map(|h| cfg.seconds_to_samples(h)) }
    }

    /// Absolute indices for position `j` in a trace of length `k`, or `None`
    /// if the window starts past the end.
    fn at(&self, j: usize, k: usize) -> Option<(usize, usize)> {
        let start = j + self.lo;
        if start >= k {
            return None;
        }
        let end = self.hi.map_or(k - 1, |h| (j + h).min(k - 1));
        Some((start, end))
    }
}

fn term_values(term: &Term, trace: &Trace) -> Result<Vec<f64>, StlError> {
    let get = |s: &str| trace.signal(s).ok_or_else(|| StlError::MissingSignal(s.to_string()));
    Ok(match term {
        Term::Signal(s) => get(s)?.to_vec(),
        Term::AbsDiff(a, b) => get(a)?.iter().zip(get(b)?).map(|(x, y)| (x - y).abs()).collect(),
    })
}

fn predicate_signal(p: &Predicate, trace: &Trace) -> Result<Vec<f64>, StlError> {
    Ok(term_values(&p.term, trace)?.into_iter().map(|x| p.robustness(x)).collect())
}

/// Sliding extremum of `xs` over windows `[j + lo, j + hi]`, using a
/// monotone deque. `better(a, b)` is true when `a` should replace `b`.
fn sliding(xs: &[f64], w: Window, vacuous: f64, better: fn(f64, f64) -> bool) -> Vec<f64> {
    let k = xs.len();
    let mut out = vec![vacuous; k];
    let width = w.hi.map(|h| h - w.lo + 1);
    // best[i] = extremum over [i, i + width - 1] ∩ [0, k - 1], computed right to left.
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut best = vec![vacuous; k];
    for i in (0..k).rev() {
        while deque.back().is_some_and(|&b| !better(xs[b], xs[i]) ) {
            deque.pop_back();
        }
        deque.push_back(i);
        if let Some(width) = width {
            while deque.front().is_some_and(|&f| f >= i + width) {
                deque.pop_front();
            }
        }
        best[i] = xs[*deque.front().expect("just pushed")];
    }
    for (j, o) in out.iter_mut().enumerate() {
        if j + w.lo < k {
            *o = best[j + w.lo];
        }
    }
    out
}

fn signal(phi: &StlFormula, trace: &Trace, cfg: &SimConfig) -> Result<Vec<f64>, StlError> {
    let k = trace.len();
    Ok(match phi {
        StlFormula::Pred(p) => predicate_signal(p, trace)?,
        StlFormula::Rise(p) => {
            let r = predicate_signal(p, trace)?;
            (0..k)
                .map(|j| if j == 0 { f64::NEG_INFINITY } else { r[j].min(-r[j - 1]) })
                .collect()
        }
        StlFormula::Not(a) => signal(a, trace, cfg)?.into_iter().map(|x| -x).collect(),
        StlFormula::And(a, b) => {
            let (x, y) = (signal(a, trace, cfg)?, signal(b, trace, cfg)?);
            x.iter().zip(&y).map(|(p, q)| p.min(*q)).collect()
        }
        StlFormula::Or(a, b) => {
            let (x, y) = (signal(a, trace, cfg)?, signal(b, trace, cfg)?);
            x.iter().zip(&y).map(|(p, q)| p.max(*q)).collect()
        }
        StlFormula::Always(i, a) => {
            sliding(&signal(a, trace, cfg)?, Window::from_interval(i, cfg), f64::INFINITY, |a, b| a < b)
        }
        StlFormula::Eventually(i, a) => {
            sliding(&signal(a, trace, cfg)?, Window::from_interval(i, cfg), f64::NEG_INFINITY, |a, b| a > b)
        }
        StlFormula::Until(i, a, b) => {
            let (x, y) = (signal(a, trace, cfg)?, signal(b, trace, cfg)?);
            let w = Window::from_interval(i, cfg);
            (0..k)
                .map(|j| {
                    let Some((start, end)) = w.at(j, k) else { return f64::NEG_INFINITY };
                    // prefix = min of the left operand over [j, j') before each candidate j'.
                    let mut prefix = x[j..start].iter().copied().fold(f64::INFINITY, f64::min);
                    let mut best = f64::NEG_INFINITY;
                    for jp in start..=end {
                        best = best.max(y[jp].min(prefix));
                        prefix = prefix.min(x[jp]);
                    }
                    best
                })
                .collect()
        }
    })
}

/// Robustness at every sample index.
pub fn robustness_signal(trace: &Trace, phi: &StlFormula, cfg: &SimConfig) -> Result<Vec<f64>, StlError> {
    if trace.is_empty() {
        return Err(StlError::EmptyTrace);
    }
    signal(phi, trace, cfg)
}

/// Quantitative robustness at index 0.
pub fn robustness(trace: &Trace, phi: &StlFormula, cfg: &SimConfig) -> Result<Robustness, StlError> {
    let r = robustness_signal(trace, phi, cfg)?;
    Ok(Robustness { value: r[0], evaluated_at: 0 })
}

fn bool_signal(phi: &StlFormula, trace: &Trace, cfg: &SimConfig) -> Result<Vec<bool>, StlError> {
    let k = trace.len();
    let holds = |p: &Predicate| -> Result<Vec<bool>, StlError> {
        Ok(term_values(&p.term, trace)?.into_iter().map(|x| p.holds(x)).collect())
    };
    Ok(match phi {
        StlFormula::Pred(p) => holds(p)?,
        StlFormula::Rise(p) => {
            let h = holds(p)?;
            (0..k).map(|j| j > 0 && h[j] && !h[j - 1]).collect()
        }
        StlFormula::Not(a) => bool_signal(a, trace, cfg)?.into_iter().map(|x| !x).collect(),
        StlFormula::And(a, b) => {
            let (x, y) = (bool_signal(a, trace, cfg)?, bool_signal(b, trace, cfg)?);
            x.iter().zip(&y).map(|(p, q)| *p && *q).collect()
        }
        StlFormula::Or(a, b) => {
            let (x, y) = (bool_signal(a, trace, cfg)?, bool_signal(b, trace, cfg)?);
            x.iter().zip(&y).map(|(p, q)| *p || *q).collect()
        }
        StlFormula::Always(i, a) => {
            let x = bool_signal(a, trace, cfg)?;
            let w = Window::from_interval(i, cfg);
            (0..k).map(|j| w.at(j, k).is_none_or(|(s, e)| x[s..=e].iter().all(|v| *v))).collect()
        }
        StlFormula::Eventually(i, a) => {
            let x = bool_signal(a, trace, cfg)?;
            let w = Window::from_interval(i, cfg);
            (0..k).map(|j| w.at(j, k).is_some_and(|(s, e)| x[s..=e].iter().any(|v| *v))).collect()
        }
        StlFormula::Until(i, a, b) => {
            let (x, y) = (bool_signal(a, trace, cfg)?, bool_signal(b, trace, cfg)?);
            let w = Window::from_interval(i, cfg);
            (0..k)
                .map(|j| {
                    w.at(j, k)
                        .is_some_and(|(s, e)| (s..=e).any(|jp| y[jp] && x[j..jp].iter().all(|v| *v)))
                })
                .collect()
        }
    })
}

/// Qualitative satisfaction at index 0, evaluated directly on Booleans.
pub fn boolean_sat(trace: &Trace, phi: &StlFormula, cfg: &SimConfig) -> Result<bool, StlError> {
    if trace.is_empty() {
        return Err(StlError::EmptyTrace);
    }
    Ok(bool_signal(phi, trace, cfg)?[0])
}
