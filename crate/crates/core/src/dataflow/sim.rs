use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use super::flatten::{flatten, FlatModel};
use super::model::{BlockKind, InputRange, LineFault, LogicOp, Port, RelOp};
use super::testcase::{hold_signal, TestCase};
use super::trace::{ConfigError, SignalTable, SimConfig, Trace};
use super::validate::{validate_model, Diagnostic};
use super::Model;
use crate::util::keyed_rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("model is invalid: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Diagnostic>),
    #[error("invalid test case: {0}")]
    InvalidTest(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite value on signal `{signal}` at step {step}")]
    NonFiniteSignal { step: usize, signal: String },
}

#[derive(Debug, Clone)]
enum Op {
    Input(usize),
    Output,
    Const(f64),
    Gain(f64),
    Sum(Vec<f64>),
    Product,
    Abs,
    Neg,
    Rel(RelOp),
    And,
    Or,
    Not,
    Switch(f64),
    Saturate(f64, f64),
    UnitDelay,
    Integrator,
    Lookup { breakpoints: Vec<f64>, table: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    inputs: Vec<usize>,
    output: Option<usize>,
    init: f64,
    faulted_lines: Vec<usize>,
}

#[derive(Debug, Clone)]
struct FaultedLine {
    src: usize,
    col: usize,
    fault: LineFault,
}

thread_local! {
    static ROWS: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// A model compiled once into a fixed evaluation schedule; `run` is a pure
/// function of the test and configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    table: Arc<SignalTable>,
    nodes: Vec<Node>,
    faulted: Vec<FaultedLine>,
    /// Nodes holding state across steps, in schedule order.
    stateful: Vec<usize>,
    inputs: Vec<(String, InputRange)>,
}

impl Simulator {
    pub fn new(model: &Model) -> Result<Self, SimError> {
        let diags = validate_model(model);
        if !diags.is_empty() {
            return Err(SimError::InvalidModel(diags));
        }
        Ok(Self::compile(&flatten(model)))
    }

    fn compile(flat: &FlatModel) -> Self {
        let order = flat.schedule().expect("validated model has no algebraic loop");
        let index = flat.block_index();

        let mut names: BTreeMap<String, usize> = BTreeMap::new();
        let mut out_col: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut columns = 0;
        for (bi, b) in flat.blocks.iter().enumerate() {
            for p in 1..=b.kind.output_arity() {
                out_col.insert((bi, p), columns);
                names.insert(format!("{}.out{p}", b.id), columns);
                columns += 1;
            }
        }

        let mut faulted = Vec::new();
        let mut line_col: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut faulted_by_block: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for line in &flat.lines {
            let sb = index[line.src.block.as_str()];
            let db = index[line.dst.block.as_str()];
            let (Port::Out(sp), Port::In(dp)) = (line.src.port, line.dst.port) else {
                unreachable!("validated line direction")
            };
            let src = out_col[&(sb, sp)];
            let col = match &line.fault {
                None => src,
                Some(fault) => {
                    let col = columns;
                    columns += 1;
                    faulted_by_block.entry(sb).or_default().push(faulted.len());
                    faulted.push(FaultedLine { src, col, fault: fault.clone() });
                    col
                }
            };
            names.insert(line.signal.clone(), col);
            line_col.insert((db, dp), col);
        }

        let input_pos: BTreeMap<&str, usize> =
            flat.inputs.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
        for (name, _) in &flat.inputs {
            let bi = index[name.as_str()];
            names.insert(name.clone(), out_col[&(bi, 1)]);
        }
        for name in &flat.outputs {
            let bi = index[name.as_str()];
            names.insert(name.clone(), line_col[&(bi, 1)]);
        }

        let nodes: Vec<Node> = order
            .iter()
            .map(|&bi| {
                let b = &flat.blocks[bi];
                let inputs = (1..=b.kind.input_arity()).map(|p| line_col[&(bi, p)]).collect();
                let mut init = 0.0;
                let op = match &b.kind {
                    BlockKind::Input { .. } => Op::Input(input_pos[b.id.as_str()]),
                    BlockKind::Output => Op::Output,
                    BlockKind::Constant { value } => Op::Const(*value),
                    BlockKind::Gain { k } => Op::Gain(*k),
                    BlockKind::Sum { signs } => Op::Sum(signs.iter().map(|s| s.factor()).collect()),
                    BlockKind::Product { .. } => Op::Product,
                    BlockKind::Abs => Op::Abs,
                    BlockKind::UnaryMinus => Op::Neg,
                    BlockKind::Relational { op } => Op::Rel(*op),
                    BlockKind::Logical { op: LogicOp::And, .. } => Op::And,
                    BlockKind::Logical { op: LogicOp::Or, .. } => Op::Or,
                    BlockKind::Logical { op: LogicOp::Not, .. } => Op::Not,
                    BlockKind::Switch { threshold } => Op::Switch(*threshold),
                    BlockKind::Saturation { lo, hi } => Op::Saturate(*lo, *hi),
                    BlockKind::UnitDelay { init: v } => {
                        init = *v;
                        Op::UnitDelay
                    }
                    BlockKind::DiscreteIntegrator { init: v } => {
                        init = *v;
                        Op::Integrator
                    }
                    BlockKind::Lookup1D { breakpoints, table } => {
                        Op::Lookup { breakpoints: breakpoints.clone(), table: table.clone() }
                    }
                    BlockKind::Subsystem(_) => unreachable!("flattened"),
                };
                Node {
                    op,
                    inputs,
                    output: out_col.get(&(bi, 1)).copied(),
                    init,
                    faulted_lines: faulted_by_block.remove(&bi).unwrap_or_default(),
                }
            })
            .collect();

        let stateful = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::UnitDelay | Op::Integrator))
            .map(|(i, _)| i)
            .collect();
        Self {
            table: Arc::new(SignalTable::new(names, columns)),
            nodes,
            faulted,
            stateful,
            inputs: flat.inputs.clone(),
        }
    }

    pub fn inputs(&self) -> &[(String, InputRange)] {
        &self.inputs
    }

    pub fn signal_table(&self) -> &Arc<SignalTable> {
        &self.table
    }

    pub fn run(&self, test: &TestCase, cfg: &SimConfig) -> Result<Trace, SimError> {
        cfg.check()?;
        let k = cfg.samples();
        let dt = cfg.sample_time;

        let mut held = Vec::with_capacity(self.inputs.len());
        for (name, range) in &self.inputs {
            let controls = test
                .inputs
                .get(name)
                .ok_or_else(|| SimError::InvalidTest(format!("missing input `{name}`")))?;
            if controls.is_empty() {
                return Err(SimError::InvalidTest(format!("input `{name}` has no control points")));
            }
            if let Some(v) = controls.iter().find(|v| !range.contains(**v)) {
                return Err(SimError::InvalidTest(format!(
                    "input `{name}` value {v} outside [{}, {}]",
                    range.lo, range.hi
                )));
            }
            held.push(hold_signal(controls, k));
        }

        let columns = self.table.columns();
        // Row-major while simulating so the current step is one contiguous row.
        // The buffer is reused across runs on the same thread.
        let mut rows = ROWS.with(|r| std::mem::take(&mut *r.borrow_mut()));
        rows.resize(columns * k, 0.0);
        let result = self.fill_rows(&mut rows, &held, k, dt);
        let data = result.map(|()| {
            let mut data = Vec::with_capacity(columns * k);
            for c in 0..columns {
                data.extend(rows[..columns * k].iter().skip(c).step_by(columns));
            }
            data
        });
        ROWS.with(|r| *r.borrow_mut() = rows);
        Ok(Trace::from_parts(dt, k, Arc::clone(&self.table), data?))
    }

    fn fill_rows(&self, rows: &mut [f64], held: &[Vec<f64>], k: usize, dt: f64) -> Result<(), SimError> {
        let columns = self.table.columns();
        let mut state: Vec<f64> = self.nodes.iter().map(|n| n.init).collect();

        for j in 0..k {
            let (past, rest) = rows.split_at_mut(j * columns);
            let cur = &mut rest[..columns];
            for (ni, node) in self.nodes.iter().enumerate() {
                let a = &node.inputs;
                let v = match &node.op {
                    Op::Output => continue,
                    Op::Input(i) => held[*i][j],
                    Op::Const(v) => *v,
                    Op::Gain(g) => g * cur[a[0]],
                    Op::Sum(signs) => signs.iter().zip(a).map(|(s, &c)| s * cur[c]).sum(),
                    Op::Product => a.iter().map(|&c| cur[c]).product(),
                    Op::Abs => cur[a[0]].abs(),
                    Op::Neg => -cur[a[0]],
                    Op::Rel(op) => bool_value(op.eval(cur[a[0]], cur[a[1]])),
                    Op::And => bool_value(a.iter().all(|&c| cur[c] != 0.0)),
                    Op::Or => bool_value(a.iter().any(|&c| cur[c] != 0.0)),
                    Op::Not => bool_value(cur[a[0]] == 0.0),
                    Op::Switch(t) => {
                        if cur[a[1]] >= *t {
                            cur[a[0]]
                        } else {
                            cur[a[2]]
                        }
                    }
                    Op::Saturate(lo, hi) => cur[a[0]].clamp(*lo, *hi),
                    Op::UnitDelay | Op::Integrator => state[ni],
                    Op::Lookup { breakpoints, table } => lookup(breakpoints, table, cur[a[0]]),
                };
                let Some(col) = node.output else { continue };
                if !v.is_finite() {
                    return Err(self.non_finite(j, col));
                }
                cur[col] = v;
                for &fi in &node.faulted_lines {
                    let fl = &self.faulted[fi];
                    let hist = |c: usize, back: usize| past[(j - back) * columns + c];
                    let v = apply_fault(&fl.fault, j, cur[fl.src], |back| hist(fl.src, back), |back| hist(fl.col, back));
                    if !v.is_finite() {
                        return Err(self.non_finite(j, fl.col));
                    }
                    cur[fl.col] = v;
                }
            }
            for &ni in &self.stateful {
                let node = &self.nodes[ni];
                let x = cur[node.inputs[0]];
                match node.op {
                    Op::UnitDelay => state[ni] = x,
                    Op::Integrator => state[ni] += dt * x,
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn non_finite(&self, step: usize, col: usize) -> SimError {
        SimError::NonFiniteSignal { step, signal: self.table.column_name(col).to_string() }
    }
}

/// Simulates `model` once; compile with [`Simulator::new`] to reuse a schedule.
pub fn simulate(model: &Model, test: &TestCase, cfg: &SimConfig) -> Result<Trace, SimError> {
    Simulator::new(model)?.run(test, cfg)
}

fn bool_value(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Linear interpolation with clamping outside the breakpoint range.
pub(crate) fn lookup(breakpoints: &[f64], table: &[f64], x: f64) -> f64 {
    let n = breakpoints.len();
    if x <= breakpoints[0] {
        return table[0];
    }
    if x >= breakpoints[n - 1] {
        return table[n - 1];
    }
    let i = breakpoints.partition_point(|&b| b <= x) - 1;
    let (x0, x1) = (breakpoints[i], breakpoints[i + 1]);
    let (y0, y1) = (table[i], table[i + 1]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Value of a faulted line at step `j`. `src_back(n)` / `own_back(n)` read
/// the source / the line itself `n` steps earlier.
fn apply_fault(
    fault: &LineFault,
    j: usize,
    s: f64,
    src_back: impl Fn(usize) -> f64,
    own_back: impl Fn(usize) -> f64,
) -> f64 {
    match *fault {
        LineFault::Noise { sigma, seed } => {
            let mut rng: ChaCha8Rng = keyed_rng(seed, j as u64);
            let z: f64 = StandardNormal.sample(&mut rng);
            s + sigma * z
        }
        LineFault::Bias { offset } => s + offset,
        LineFault::Negate => -s,
        LineFault::Absolute => s.abs(),
        LineFault::StuckAt { value } => value,
        LineFault::TimeDelay { samples } => {
            if j == 0 || samples == 0 {
                s
            } else {
                src_back(samples.min(j))
            }
        }
        LineFault::PackageDrop { probability, seed } => {
            if j == 0 {
                return s;
            }
            let mut rng: ChaCha8Rng = keyed_rng(seed, j as u64);
            let u: f64 = rand::Rng::random(&mut rng);
            if u < probability {
                own_back(1)
            } else {
                s
            }
        }
    }
}
