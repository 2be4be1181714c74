//! Property-based mutation testing for discrete-time dataflow models.
//!
//! The crate is organised as a pipeline:
//!
//! - [`dataflow`]: block-diagram models and fixed-step simulation.
//! - [`lang`]: the `.dfm` model format and the `.stl` property language.
//! - [`stl`]: Boolean and quantitative (robustness) monitoring of STL.
//! - [`mutation`]: the fault-operator registry and first-order mutants.
//! - [`testgen`]: test generation strategies (ART, falsification, the
//!   φ-kill search and an exhaustive grid oracle).
//! - [`scoring`]: weak/strong/φ kill verdicts, mutation scores, subsumption
//!   and greedy suite reduction.
//! - [`campaign`]: end-to-end orchestration and report artifacts.
//! - [`bundled`]: the two bundled subject models.

pub mod bundled;
pub mod campaign;
pub mod dataflow;
pub mod lang;
pub mod mutation;
pub mod scoring;
pub mod stl;
pub mod testgen;
pub mod util;
