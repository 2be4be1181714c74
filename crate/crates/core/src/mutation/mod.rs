//! First-order mutants of block-diagram models.
//!
//! Line operators (`Noise`, `Bias`, `Negate`, `Absolute`, `StuckAt`,
//! `TimeDelay`, `PackageDrop`) splice a fault onto one line for the whole
//! run. Block operators rewrite one block: `ROR` and `LOR` replace the
//! relational or logical operator, `S2P`/`P2S` turn a Sum into a Product and
//! back, `ASR` inverts every sign of a Sum, and the two lookup-table
//! operators zero one entry or swap an entry with its neighbour.
//!
//! Default parameters come from one nominal probe run on a random in-range
//! test: `Bias` offset uniform in ±10% of the site's observed range, `Noise`
//! σ = 5% of that range, `StuckAt` one of {0, min, max}, `TimeDelay` 5 or 25
//! samples, `PackageDrop` p = 0.1.

mod mutant;
mod operators;

pub use mutant::{
    apply_mutation, enumerate_sites, generate_mutants, InvalidMutant, Manifest, MutantDescriptor, MutantModel,
    MutantSet, MutationError, MutationSettings, Site, MANIFEST_SCHEMA,
};
pub use operators::{FaultOperator, OperatorKind, OperatorRegistry, ParamValue, Params, SiteContext, Target};

/// Names of the fourteen built-in operators, line operators first.
pub const ALL_OPERATORS: [&str; 14] = [
    "Noise",
    "Bias",
    "Negate",
    "Absolute",
    "StuckAt",
    "TimeDelay",
    "PackageDrop",
    "ROR",
    "LOR",
    "S2P",
    "P2S",
    "ASR",
    "LutStuckAtZero",
    "LutSwapNeighbors",
];
