//! Test generation.
//!
//! All searches share one population optimizer ([`optimize`]): a uniform
//! random initial population in the unit control space, then repeated
//! [`UpdateRule`] steps with greedy replacement while the global best is
//! tracked. The default rule moves each member towards the best with a
//! random difference term and resamples single coordinates.
//!
//! - [`sbtg`] maximizes `D(s, s′)` subject to `ρ(original) > 0` and
//!   `ρ(mutant) < 0`, using a scalar penalty with a feasibility barrier, and
//!   stops at the first feasible test.
//! - [`falsify`] minimizes the mutant's robustness.
//! - [`art_generate`] is fixed-size-candidate-set adaptive random testing.
//! - [`brute_force_phi_killable`] enumerates a finite grid and decides
//!   φ-killability on that grid exactly.

mod art;
mod oracle;
mod search;
mod strategy;
mod suite;

pub use art::{art_generate, min_pairwise_distance, random_tests};
pub use oracle::{brute_force_phi_killable, Grid, OracleError, OracleVerdict, GRID_CAP};
pub use search::{
    falsify, falsify_with, fitness, optimize, sbtg, sbtg_with, ControlSpace, DriftUpdate, Evaluation,
    FalsifyOutcome, FitnessBreakdown, KillProblem, PenaltyWeights, RandomRestart, SbtgOutcome, SearchBudget,
    SearchError, SearchLog, SearchResult, UpdateRegistry, UpdateRule, BARRIER,
};
pub use strategy::{
    Art, ClaimOutcome, Falsification, GridOracle, MutantClaim, Sbtg, StrategyContext, StrategyError,
    StrategyOutput, StrategyRegistry, TestStrategy,
};
pub use suite::{Provenance, SuiteTest, TestSuite, SUITE_SCHEMA};
