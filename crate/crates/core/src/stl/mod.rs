//! Signal Temporal Logic over finite, uniformly sampled traces.
//!
//! Robustness follows the usual discrete min/max semantics. Temporal windows
//! are converted from seconds to samples by rounding half up, clipped at the
//! end of the trace, and a window lying wholly beyond the end is vacuous
//! (`+∞` for `always`, `−∞` for `eventually` and `until`). `rise(p)` at
//! sample `j ≥ 1` is `min(ρ(p, j), −ρ(p, j−1))` and `−∞` at sample 0.

mod formula;
mod monitor;

pub use formula::{Interval, Predicate, StlFormula, Term};
pub use monitor::{boolean_sat, robustness, robustness_signal, Robustness, StlError};
