use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::{SimConfig, Trace};
use crate::stl::{robustness, StlError, StlFormula};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("traces differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("signal `{0}` missing from a trace")]
    MissingSignal(String),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("{0} is zero")]
    ZeroDenominator(&'static str),
}

/// Outcome of running one test on the original and one mutant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillVerdict {
    /// The mutated signal differs at some sample.
    pub weak: bool,
    /// Some model output differs at some sample.
    pub strong: bool,
    /// φ holds on the original and is violated on the mutant.
    pub phi: bool,
    #[serde(with = "crate::util::real")]
    pub rho_orig: f64,
    #[serde(with = "crate::util::real")]
    pub rho_mut: f64,
}

impl KillVerdict {
    /// `phi ⇒ strong ⇒ weak`.
    pub fn hierarchy_holds(&self) -> bool {
        (!self.phi || self.strong) && (!self.strong || self.weak)
    }
}

fn differs(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).any(|(x, y)| (x - y).abs() > tol)
}

/// Kill verdict of one `(test, mutant)` cell. `outputs` names the model
/// output signals; `tol` is the per-sample difference tolerance.
pub fn classify(
    trace_orig: &Trace,
    trace_mut: &Trace,
    mutated_signal: &str,
    outputs: &[String],
    phi: &StlFormula,
    cfg: &SimConfig,
    tol: f64,
) -> Result<KillVerdict, ScoringError> {
    if trace_orig.len() != trace_mut.len() {
        return Err(ScoringError::LengthMismatch { left: trace_orig.len(), right: trace_mut.len() });
    }
    let pair = |name: &str| -> Result<(&[f64], &[f64]), ScoringError> {
        match (trace_orig.signal(name), trace_mut.signal(name)) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(ScoringError::MissingSignal(name.to_string())),
        }
    };
    let (s, s2) = pair(mutated_signal)?;
    let weak = differs(s, s2, tol);
    let mut strong = false;
    for o in outputs {
        let (a, b) = pair(o)?;
        strong |= differs(a, b, tol);
    }
    let rho_orig = robustness(trace_orig, phi, cfg)?.value;
    let rho_mut = robustness(trace_mut, phi, cfg)?.value;
    Ok(KillVerdict { weak, strong, phi: rho_orig > 0.0 && rho_mut < 0.0, rho_orig, rho_mut })
}
