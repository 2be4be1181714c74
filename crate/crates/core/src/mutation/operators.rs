use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataflow::{BlockKind, Line, LineFault, LogicOp, RelOp, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Line,
    Block,
}

/// A concrete operator parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(r) => Some(*r),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(i) => usize::try_from(*i).ok(),
            ParamValue::Real(r) if r.fract() == 0.0 && *r >= 0.0 => Some(*r as usize),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

/// What an operator sees when drawing parameters for one site.
#[derive(Debug, Clone, Copy)]
pub struct SiteContext<'a> {
    /// The mutated block (block operators only).
    pub block: Option<&'a BlockKind>,
    /// `(min, max)` of the site's signal in the nominal probe run.
    pub nominal: Option<(f64, f64)>,
}

impl SiteContext<'_> {
    /// Width of the observed nominal range, or 1 for a constant signal.
    pub fn scale(&self) -> f64 {
        match self.nominal {
            Some((lo, hi)) if hi > lo => hi - lo,
            _ => 1.0,
        }
    }
}

pub enum Target<'a> {
    Line(&'a mut Line),
    Block(&'a mut BlockKind),
}

/// A mutation operator. Registered by name in an [`OperatorRegistry`].
pub trait FaultOperator: Send + Sync {
    fn name(&self) -> &'static str;
    fn kind(&self) -> OperatorKind;
    /// Block operators: whether this block can be rewritten. Line operators
    /// accept every line and ignore this.
    fn accepts(&self, _block: &BlockKind) -> bool {
        self.kind() == OperatorKind::Line
    }
    /// Default parameters for one site, drawn deterministically from `rng`.
    fn draw_params(&self, ctx: &SiteContext<'_>, rng: &mut ChaCha8Rng) -> Params;
    fn apply(&self, target: Target<'_>, params: &Params, seed: u64) -> Result<(), String>;
}

fn real(params: &Params, key: &str) -> Result<f64, String> {
    params
        .get(key)
        .and_then(ParamValue::as_f64)
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("parameter `{key}` must be a finite number"))
}

fn count(params: &Params, key: &str) -> Result<usize, String> {
    params.get(key).and_then(ParamValue::as_usize).ok_or_else(|| format!("parameter `{key}` must be a count"))
}

fn text<'a>(params: &'a Params, key: &str) -> Result<&'a str, String> {
    params.get(key).and_then(ParamValue::as_str).ok_or_else(|| format!("parameter `{key}` must be text"))
}

fn one(key: &str, v: ParamValue) -> Params {
    [(key.to_string(), v)].into()
}

/// Line operators share one shape: draw parameters, then build a fault.
struct LineOperator {
    name: &'static str,
    draw: fn(&SiteContext<'_>, &mut ChaCha8Rng) -> Params,
    build: fn(&Params, u64) -> Result<LineFault, String>,
}

impl FaultOperator for LineOperator {
    fn name(&self) -> &'static str {
        self.name
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Line
    }

    fn draw_params(&self, ctx: &SiteContext<'_>, rng: &mut ChaCha8Rng) -> Params {
        (self.draw)(ctx, rng)
    }

    fn apply(&self, target: Target<'_>, params: &Params, seed: u64) -> Result<(), String> {
        let Target::Line(line) = target else { return Err(format!("{} applies to lines only", self.name)) };
        line.fault = Some((self.build)(params, seed)?);
        Ok(())
    }
}

fn line_operators() -> Vec<LineOperator> {
    vec![
        LineOperator {
            name: "Noise",
            draw: |ctx, _| one("sigma", ParamValue::Real(0.05 * ctx.scale())),
            build: |p, seed| {
                let sigma = real(p, "sigma")?;
                if sigma <= 0.0 {
                    return Err("sigma must be positive".into());
                }
                Ok(LineFault::Noise { sigma, seed })
            },
        },
        LineOperator {
            name: "Bias",
            draw: |ctx, rng| {
                let w = 0.1 * ctx.scale();
                one("offset", ParamValue::Real(rng.random_range(-w..=w)))
            },
            build: |p, _| Ok(LineFault::Bias { offset: real(p, "offset")? }),
        },
        LineOperator { name: "Negate", draw: |_, _| Params::new(), build: |_, _| Ok(LineFault::Negate) },
        LineOperator { name: "Absolute", draw: |_, _| Params::new(), build: |_, _| Ok(LineFault::Absolute) },
        LineOperator {
            name: "StuckAt",
            draw: |ctx, rng| {
                let (lo, hi) = ctx.nominal.unwrap_or((0.0, 0.0));
                let value = *[0.0, lo, hi].choose(rng).expect("non-empty");
                one("value", ParamValue::Real(value))
            },
            build: |p, _| Ok(LineFault::StuckAt { value: real(p, "value")? }),
        },
        LineOperator {
            name: "TimeDelay",
            draw: |_, rng| one("samples", ParamValue::Int(*[5, 25].choose(rng).expect("non-empty"))),
            build: |p, _| {
                let samples = count(p, "samples")?;
                if samples == 0 {
                    return Err("samples must be at least 1".into());
                }
                Ok(LineFault::TimeDelay { samples })
            },
        },
        LineOperator {
            name: "PackageDrop",
            draw: |_, _| one("p", ParamValue::Real(0.1)),
            build: |p, seed| {
                let probability = real(p, "p")?;
                if !(probability > 0.0 && probability < 1.0) {
                    return Err("p must lie in (0, 1)".into());
                }
                Ok(LineFault::PackageDrop { probability, seed })
            },
        },
    ]
}

/// Relational operator replacement.
struct Ror;

impl FaultOperator for Ror {
    fn name(&self) -> &'static str {
        "ROR"
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Block
    }

    fn accepts(&self, block: &BlockKind) -> bool {
        matches!(block, BlockKind::Relational { .. })
    }

    fn draw_params(&self, ctx: &SiteContext<'_>, rng: &mut ChaCha8Rng) -> Params {
        let current = match ctx.block {
            Some(BlockKind::Relational { op }) => Some(*op),
            _ => None,
        };
        let others: Vec<RelOp> = RelOp::ALL.into_iter().filter(|o| Some(*o) != current).collect();
        let pick = others.choose(rng).expect("five alternatives");
        one("replacement", ParamValue::Text(pick.symbol().to_string()))
    }

    fn apply(&self, target: Target<'_>, params: &Params, _seed: u64) -> Result<(), String> {
        let Target::Block(BlockKind::Relational { op }) = target else { return Err("ROR needs a Relational block".into()) };
        let new: RelOp = text(params, "replacement")?.parse()?;
        if new == *op {
            return Err(format!("replacement `{new}` equals the original operator"));
        }
        *op = new;
        Ok(())
    }
}

/// Logical operator replacement: AND and OR swap. `NOT` has a fixed arity
/// and is not a site.
struct Lor;

impl FaultOperator for Lor {
    fn name(&self) -> &'static str {
        "LOR"
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Block
    }

    fn accepts(&self, block: &BlockKind) -> bool {
        matches!(block, BlockKind::Logical { op: LogicOp::And | LogicOp::Or, .. })
    }

    fn draw_params(&self, ctx: &SiteContext<'_>, _rng: &mut ChaCha8Rng) -> Params {
        let to = match ctx.block {
            Some(BlockKind::Logical { op: LogicOp::Or, .. }) => LogicOp::And,
            _ => LogicOp::Or,
        };
        one("replacement", ParamValue::Text(to.to_string()))
    }

    fn apply(&self, target: Target<'_>, params: &Params, _seed: u64) -> Result<(), String> {
        let Target::Block(BlockKind::Logical { op, .. }) = target else { return Err("LOR needs a Logical block".into()) };
        let new: LogicOp = text(params, "replacement")?.parse()?;
        if new == LogicOp::Not || new == *op || *op == LogicOp::Not {
            return Err(format!("cannot replace {op} by {new}"));
        }
        *op = new;
        Ok(())
    }
}

/// Block operators without parameters that rewrite the block kind.
struct Rewrite {
    name: &'static str,
    accepts: fn(&BlockKind) -> bool,
    rewrite: fn(&BlockKind) -> BlockKind,
}

impl FaultOperator for Rewrite {
    fn name(&self) -> &'static str {
        self.name
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Block
    }

    fn accepts(&self, block: &BlockKind) -> bool {
        (self.accepts)(block)
    }

    fn draw_params(&self, _ctx: &SiteContext<'_>, _rng: &mut ChaCha8Rng) -> Params {
        Params::new()
    }

    fn apply(&self, target: Target<'_>, _params: &Params, _seed: u64) -> Result<(), String> {
        match target {
            Target::Block(kind) if (self.accepts)(kind) => {
                *kind = (self.rewrite)(kind);
                Ok(())
            }
            _ => Err(format!("{} cannot rewrite this site", self.name)),
        }
    }
}

fn rewrites() -> Vec<Rewrite> {
    vec![
        Rewrite {
            name: "S2P",
            accepts: |k| matches!(k, BlockKind::Sum { .. }),
            rewrite: |k| match k {
                BlockKind::Sum { signs } => BlockKind::Product { inputs: signs.len() },
                other => other.clone(),
            },
        },
        Rewrite {
            name: "P2S",
            accepts: |k| matches!(k, BlockKind::Product { .. }),
            rewrite: |k| match k {
                BlockKind::Product { inputs } => BlockKind::Sum { signs: vec![Sign::Plus; *inputs] },
                other => other.clone(),
            },
        },
        Rewrite {
            name: "ASR",
            accepts: |k| matches!(k, BlockKind::Sum { .. }),
            rewrite: |k| match k {
                BlockKind::Sum { signs } => BlockKind::Sum { signs: signs.iter().map(|s| s.flipped()).collect() },
                other => other.clone(),
            },
        },
    ]
}

/// Lookup-table entry mutations: zero one entry, or swap an entry with its
/// right neighbour.
struct LutOperator {
    name: &'static str,
    swap: bool,
}

impl FaultOperator for LutOperator {
    fn name(&self) -> &'static str {
        self.name
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Block
    }

    fn accepts(&self, block: &BlockKind) -> bool {
        match block {
            BlockKind::Lookup1D { table, .. } => table.len() >= if self.swap { 2 } else { 1 },
            _ => false,
        }
    }

    fn draw_params(&self, ctx: &SiteContext<'_>, rng: &mut ChaCha8Rng) -> Params {
        let n = match ctx.block {
            Some(BlockKind::Lookup1D { table, .. }) => table.len(),
            _ => 1,
        };
        let slots = if self.swap { n.saturating_sub(1).max(1) } else { n.max(1) };
        one("index", ParamValue::Int(rng.random_range(0..slots) as i64))
    }

    fn apply(&self, target: Target<'_>, params: &Params, _seed: u64) -> Result<(), String> {
        let Target::Block(BlockKind::Lookup1D { table, .. }) = target else {
            return Err(format!("{} needs a Lookup1D block", self.name));
        };
        let i = count(params, "index")?;
        let limit = if self.swap { table.len().saturating_sub(1) } else { table.len() };
        if i >= limit {
            return Err(format!("index {i} out of range for a {}-entry table", table.len()));
        }
        if self.swap {
            table.swap(i, i + 1);
        } else {
            table[i] = 0.0;
        }
        Ok(())
    }
}

/// Name-keyed collection of operators. [`OperatorRegistry::standard`] holds
/// the fourteen built-in operators; more can be registered.
#[derive(Clone)]
pub struct OperatorRegistry {
    ops: Vec<Arc<dyn FaultOperator>>,
}

impl std::fmt::Debug for OperatorRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl OperatorRegistry {
    pub fn empty() -> Self {
        Self { ops: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        for op in line_operators() {
            r.register(op);
        }
        r.register(Ror);
        r.register(Lor);
        for op in rewrites() {
            r.register(op);
        }
        r.register(LutOperator { name: "LutStuckAtZero", swap: false });
        r.register(LutOperator { name: "LutSwapNeighbors", swap: true });
        r
    }

    /// Adds an operator, replacing any existing one with the same name.
    pub fn register(&mut self, op: impl FaultOperator + 'static) {
        self.ops.retain(|o| o.name() != op.name());
        self.ops.push(Arc::new(op));
    }

    pub fn get(&self, name: &str) -> Option<&dyn FaultOperator> {
        self.ops.iter().find(|o| o.name() == name).map(|o| o.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ops.iter().map(|o| o.name()).collect()
    }
}

impl Default for OperatorRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
