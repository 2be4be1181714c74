//! Kill verdicts, the kill matrix, mutation scores (MS and MS_φ), dynamic
//! subsumption and greedy suite reduction.
//!
//! A mutant's label comes from the evidence collected in a campaign: any
//! φ-killing test makes it NTD_φ, and only an exhausted SBTG search or an
//! empty oracle grid makes it φ-trivially different.

mod analysis;
mod matrix;
mod score;
mod verdict;

pub use analysis::{
    dynamic_subsumption, greedy_reduce, killed_set, operator_table, KillMode, OperatorRow, Subsumption,
};
pub use matrix::{Evidence, KillMatrix, Label, LabelSource, MatrixCsvError, MutantLabel};
pub use score::{counts_for, mutation_score, percent_2dp, score_tests, ScoreCounts, ScoreReport};
pub use verdict::{classify, KillVerdict, ScoringError};
