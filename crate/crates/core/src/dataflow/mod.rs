//! Block-diagram models and deterministic fixed-step simulation.
//!
//! A [`Model`] is a graph of blocks joined by lines. Subsystems nest further
//! models and are inlined by [`flatten`] before simulation. Each compiled
//! [`Simulator`] evaluates blocks in a fixed topological order over the graph
//! with delay edges removed; `UnitDelay` and `DiscreteIntegrator` outputs read
//! the state from the previous step.
//!
//! Signal naming in a [`Trace`]:
//! - `blk.outN` for every block output port,
//! - `blk.inN` for the line driving that input (after any line fault),
//! - the bare id of every top-level `Input` and `Output` block.
//!
//! Blocks nested in subsystems use `/`-separated paths (`sub/blk.out1`).

mod flatten;
mod model;
mod sim;
mod testcase;
mod trace;
mod validate;

pub use flatten::{flatten, FlatBlock, FlatLine, FlatModel};
pub use model::{
    format_signs, parse_signs, Block, BlockKind, InputRange, Line, LineFault, LogicOp, Model, Port, PortRef,
    RelOp, Sign,
};
pub use sim::{simulate, SimError, Simulator};
pub use testcase::{control_index, hold_signal, TestCase};
pub use trace::{signal_distance, ConfigError, LengthMismatch, SignalTable, SimConfig, Trace};
pub use validate::{validate_model, Diagnostic};
