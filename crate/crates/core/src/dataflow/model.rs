use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Numeric range of a top-level model input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputRange {
    pub lo: f64,
    pub hi: f64,
}

impl InputRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl RelOp {
    pub const ALL: [RelOp; 6] = [RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge, RelOp::Eq, RelOp::Ne];

    pub fn eval(self, a: f64, b: f64) -> bool {
        match self {
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
        }
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for RelOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "<" => RelOp::Lt,
            "<=" => RelOp::Le,
            ">" => RelOp::Gt,
            ">=" => RelOp::Ge,
            "==" => RelOp::Eq,
            "!=" => RelOp::Ne,
            other => return Err(format!("unknown relational operator `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicOp {
    #[serde(rename = "AND")]
    And,
    #[serde(rename = "OR")]
    Or,
    #[serde(rename = "NOT")]
    Not,
}

impl fmt::Display for LogicOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogicOp::And => "AND",
            LogicOp::Or => "OR",
            LogicOp::Not => "NOT",
        })
    }
}

impl FromStr for LogicOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "AND" => LogicOp::And,
            "OR" => LogicOp::Or,
            "NOT" => LogicOp::Not,
            other => return Err(format!("unknown logical operator `{other}`")),
        })
    }
}

/// Sign of one Sum input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Parses a sign string such as `+-+`.
pub fn parse_signs(s: &str) -> Result<Vec<Sign>, String> {
    s.chars()
        .map(|c| match c {
            '+' => Ok(Sign::Plus),
            '-' => Ok(Sign::Minus),
            other => Err(format!("invalid sign `{other}` in `{s}`")),
        })
        .collect()
}

pub fn format_signs(signs: &[Sign]) -> String {
    signs
        .iter()
        .map(|s| match s {
            Sign::Plus => '+',
            Sign::Minus => '-',
        })
        .collect()
}

/// Block kind together with its kind-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    /// Model (or subsystem) input. Top-level inputs carry a range.
    Input { range: Option<InputRange> },
    Output,
    Constant { value: f64 },
    Gain { k: f64 },
    Sum { signs: Vec<Sign> },
    Product { inputs: usize },
    Abs,
    UnaryMinus,
    Relational { op: RelOp },
    Logical { op: LogicOp, inputs: usize },
    /// Passes `in1` when `in2 >= threshold`, otherwise `in3`.
    Switch { threshold: f64 },
    Saturation { lo: f64, hi: f64 },
    UnitDelay { init: f64 },
    /// Forward Euler: `x[j+1] = x[j] + dt * u[j]`, output `x[j]`.
    DiscreteIntegrator { init: f64 },
    Lookup1D { breakpoints: Vec<f64>, table: Vec<f64> },
    Subsystem(Box<Model>),
}

impl BlockKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Input { .. } => "Input",
            BlockKind::Output => "Output",
            BlockKind::Constant { .. } => "Constant",
            BlockKind::Gain { .. } => "Gain",
            BlockKind::Sum { .. } => "Sum",
            BlockKind::Product { .. } => "Product",
            BlockKind::Abs => "Abs",
            BlockKind::UnaryMinus => "UnaryMinus",
            BlockKind::Relational { .. } => "Relational",
            BlockKind::Logical { .. } => "Logical",
            BlockKind::Switch { .. } => "Switch",
            BlockKind::Saturation { .. } => "Saturation",
            BlockKind::UnitDelay { .. } => "UnitDelay",
            BlockKind::DiscreteIntegrator { .. } => "DiscreteIntegrator",
            BlockKind::Lookup1D { .. } => "Lookup1D",
            BlockKind::Subsystem(_) => "Subsystem",
        }
    }

    pub fn input_arity(&self) -> usize {
        match self {
            BlockKind::Input { .. } | BlockKind::Constant { .. } => 0,
            BlockKind::Output
            | BlockKind::Gain { .. }
            | BlockKind::Abs
            | BlockKind::UnaryMinus
            | BlockKind::Saturation { .. }
            | BlockKind::UnitDelay { .. }
            | BlockKind::DiscreteIntegrator { .. }
            | BlockKind::Lookup1D { .. } => 1,
            BlockKind::Sum { signs } => signs.len(),
            BlockKind::Product { inputs } => *inputs,
            BlockKind::Relational { .. } => 2,
            BlockKind::Logical { op: LogicOp::Not, .. } => 1,
            BlockKind::Logical { inputs, .. } => *inputs,
            BlockKind::Switch { .. } => 3,
            BlockKind::Subsystem(inner) => inner.input_blocks().count(),
        }
    }

    pub fn output_arity(&self) -> usize {
        match self {
            BlockKind::Output => 0,
            BlockKind::Subsystem(inner) => inner.output_blocks().count(),
            _ => 1,
        }
    }

    /// Delay blocks do not read their input within the current step.
    pub fn is_delay(&self) -> bool {
        matches!(self, BlockKind::UnitDelay { .. } | BlockKind::DiscreteIntegrator { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub kind: BlockKind,
}

impl Block {
    pub fn new(id: impl Into<String>, kind: BlockKind) -> Self {
        Self { id: id.into(), kind }
    }
}

/// Port direction and 1-based index: `in2`, `out1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    In(usize),
    Out(usize),
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::In(i) => write!(f, "in{i}"),
            Port::Out(i) => write!(f, "out{i}"),
        }
    }
}

impl FromStr for Port {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_idx = |rest: &str| -> Result<usize, String> {
            match rest.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i),
                _ => Err(format!("invalid port `{s}`")),
            }
        };
        if let Some(rest) = s.strip_prefix("out") {
            parse_idx(rest).map(Port::Out)
        } else if let Some(rest) = s.strip_prefix("in") {
            parse_idx(rest).map(Port::In)
        } else {
            Err(format!("invalid port `{s}`"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub block: String,
    pub port: Port,
}

impl PortRef {
    pub fn new(block: impl Into<String>, port: Port) -> Self {
        Self { block: block.into(), port }
    }

    pub fn input(block: impl Into<String>, idx: usize) -> Self {
        Self::new(block, Port::In(idx))
    }

    pub fn output(block: impl Into<String>, idx: usize) -> Self {
        Self::new(block, Port::Out(idx))
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.block, self.port)
    }
}

impl FromStr for PortRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (block, port) = s
            .rsplit_once('.')
            .ok_or_else(|| format!("expected `<block>.<port>`, found `{s}`"))?;
        if block.is_empty() {
            return Err(format!("missing block name in `{s}`"));
        }
        Ok(PortRef { block: block.to_string(), port: port.parse()? })
    }
}

/// Fault spliced onto a line by a line mutation. Active for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub enum LineFault {
    Noise { sigma: f64, seed: u64 },
    Bias { offset: f64 },
    Negate,
    Absolute,
    StuckAt { value: f64 },
    TimeDelay { samples: usize },
    PackageDrop { probability: f64, seed: u64 },
}

impl LineFault {
    pub fn name(&self) -> &'static str {
        match self {
            LineFault::Noise { .. } => "Noise",
            LineFault::Bias { .. } => "Bias",
            LineFault::Negate => "Negate",
            LineFault::Absolute => "Absolute",
            LineFault::StuckAt { .. } => "StuckAt",
            LineFault::TimeDelay { .. } => "TimeDelay",
            LineFault::PackageDrop { .. } => "PackageDrop",
        }
    }
}

/// A connection from one output port to one input port.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub src: PortRef,
    pub dst: PortRef,
    pub fault: Option<LineFault>,
}

impl Line {
    pub fn new(src: PortRef, dst: PortRef) -> Self {
        Self { src, dst, fault: None }
    }

    /// Lines are identified by their destination port, which has exactly one driver.
    pub fn id(&self) -> String {
        self.dst.to_string()
    }
}

/// A block diagram. Subsystems nest further `Model`s whose `Input`/`Output`
/// blocks become the subsystem ports, numbered in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    pub blocks: Vec<Block>,
    pub lines: Vec<Line>,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), blocks: Vec::new(), lines: Vec::new() }
    }

    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn block_mut(&mut self, id: &str) -> Option<&mut Block> {
        self.blocks.iter_mut().find(|b| b.id == id)
    }

    pub fn input_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| matches!(b.kind, BlockKind::Input { .. }))
    }

    pub fn output_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| matches!(b.kind, BlockKind::Output))
    }

    /// Declared model inputs with their ranges, in declaration order.
    pub fn inputs(&self) -> Vec<(String, InputRange)> {
        self.input_blocks()
            .map(|b| match &b.kind {
                BlockKind::Input { range } => (
                    b.id.clone(),
                    range.unwrap_or(InputRange::new(f64::NEG_INFINITY, f64::INFINITY)),
                ),
                _ => unreachable!(),
            })
            .collect()
    }

    pub fn outputs(&self) -> Vec<String> {
        self.output_blocks().map(|b| b.id.clone()).collect()
    }

    pub fn line_into(&self, dst: &PortRef) -> Option<&Line> {
        self.lines.iter().find(|l| &l.dst == dst)
    }

    /// Resolves a `/`-separated path to the model that owns the last segment.
    pub fn resolve_path<'a>(&'a self, path: &'a str) -> Option<(&'a Model, &'a str)> {
        match path.split_once('/') {
            None => Some((self, path)),
            Some((head, rest)) => match &self.block(head)?.kind {
                BlockKind::Subsystem(inner) => inner.resolve_path(rest),
                _ => None,
            },
        }
    }

    pub fn resolve_path_mut<'a>(&'a mut self, path: &'a str) -> Option<(&'a mut Model, &'a str)> {
        match path.split_once('/') {
            None => Some((self, path)),
            Some((head, rest)) => match &mut self.block_mut(head)?.kind {
                BlockKind::Subsystem(inner) => inner.resolve_path_mut(rest),
                _ => None,
            },
        }
    }

    /// Every line in the hierarchy with its path-qualified id, in a stable order.
    pub fn all_lines(&self) -> Vec<(String, &Line)> {
        let mut out = Vec::new();
        self.collect_lines("", &mut out);
        out
    }

    fn collect_lines<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Line)>) {
        for line in &self.lines {
            out.push((format!("{prefix}{}", line.id()), line));
        }
        for b in &self.blocks {
            if let BlockKind::Subsystem(inner) = &b.kind {
                inner.collect_lines(&format!("{prefix}{}/", b.id), out);
            }
        }
    }

    /// Every atomic block in the hierarchy with its path-qualified id.
    pub fn all_blocks(&self) -> Vec<(String, &Block)> {
        let mut out = Vec::new();
        self.collect_blocks("", &mut out);
        out
    }

    fn collect_blocks<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Block)>) {
        for b in &self.blocks {
            match &b.kind {
                BlockKind::Subsystem(inner) => inner.collect_blocks(&format!("{prefix}{}/", b.id), out),
                _ => out.push((format!("{prefix}{}", b.id), b)),
            }
        }
    }
}
