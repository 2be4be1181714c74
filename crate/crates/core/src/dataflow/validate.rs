use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::flatten::flatten;
use super::model::{BlockKind, LineFault, Model, Port, PortRef};

/// One violated model invariant, naming the offending element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Diagnostic {
    DuplicateId { id: String },
    UnknownBlock { block: String, line: String },
    UnknownPort { port: String },
    UnconnectedPort { port: String },
    MultipleDrivers { port: String },
    InvalidParameter { block: String, reason: String },
    InvalidFault { line: String, reason: String },
    MissingInputRange { input: String },
    AlgebraicLoop { blocks: Vec<String> },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateId { id } => write!(f, "DuplicateId({id})"),
            Diagnostic::UnknownBlock { block, line } => write!(f, "UnknownBlock({block} in line {line})"),
            Diagnostic::UnknownPort { port } => write!(f, "UnknownPort({port})"),
            Diagnostic::UnconnectedPort { port } => write!(f, "UnconnectedPort({port})"),
            Diagnostic::MultipleDrivers { port } => write!(f, "MultipleDrivers({port})"),
            Diagnostic::InvalidParameter { block, reason } => write!(f, "InvalidParameter({block}: {reason})"),
            Diagnostic::InvalidFault { line, reason } => write!(f, "InvalidFault({line}: {reason})"),
            Diagnostic::MissingInputRange { input } => write!(f, "MissingInputRange({input})"),
            Diagnostic::AlgebraicLoop { blocks } => write!(f, "AlgebraicLoop({})", blocks.join(", ")),
        }
    }
}

/// Checks every structural invariant of `model`. An empty result means the
/// model can be flattened and simulated.
pub fn validate_model(model: &Model) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    check_level(model, "", true, &mut diags);
    if diags.is_empty() {
        // Loops may cross subsystem boundaries, so they are detected on the flat graph.
        let flat = flatten(model);
        if let Err(blocks) = flat.schedule() {
            diags.push(Diagnostic::AlgebraicLoop { blocks });
        }
    }
    diags
}

fn check_level(model: &Model, prefix: &str, top: bool, diags: &mut Vec<Diagnostic>) {
    let mut seen = BTreeSet::new();
    for b in &model.blocks {
        if !seen.insert(b.id.as_str()) {
            diags.push(Diagnostic::DuplicateId { id: format!("{prefix}{}", b.id) });
        }
        let path = format!("{prefix}{}", b.id);
        check_params(&b.kind, &path, top, diags);
        if let BlockKind::Subsystem(inner) = &b.kind {
            check_level(inner, &format!("{path}/"), false, diags);
        }
    }

    let mut drivers: BTreeMap<&PortRef, usize> = BTreeMap::new();
    for line in &model.lines {
        let line_name = format!("{prefix}{} -> {prefix}{}", line.src, line.dst);
        let mut ok = true;
        for (end, is_source) in [(&line.src, true), (&line.dst, false)] {
            match model.block(&end.block) {
                None => {
                    diags.push(Diagnostic::UnknownBlock {
                        block: format!("{prefix}{}", end.block),
                        line: line_name.clone(),
                    });
                    ok = false;
                }
                Some(b) => {
                    let valid = match (end.port, is_source) {
                        (Port::Out(i), true) => i <= b.kind.output_arity(),
                        (Port::In(i), false) => i <= b.kind.input_arity(),
                        _ => false,
                    };
                    if !valid {
                        diags.push(Diagnostic::UnknownPort { port: format!("{prefix}{end}") });
                        ok = false;
                    }
                }
            }
        }
        if ok {
            *drivers.entry(&line.dst).or_default() += 1;
        }
        if let Some(fault) = &line.fault {
            if let Err(reason) = check_fault(fault) {
                diags.push(Diagnostic::InvalidFault { line: format!("{prefix}{}", line.id()), reason });
            }
        }
    }
    for (port, n) in &drivers {
        if *n > 1 {
            diags.push(Diagnostic::MultipleDrivers { port: format!("{prefix}{port}") });
        }
    }
    for b in &model.blocks {
        for i in 1..=b.kind.input_arity() {
            let port = PortRef::input(b.id.clone(), i);
            if !drivers.contains_key(&port) {
                diags.push(Diagnostic::UnconnectedPort { port: format!("{prefix}{port}") });
            }
        }
    }
}

fn check_params(kind: &BlockKind, path: &str, top: bool, diags: &mut Vec<Diagnostic>) {
    let mut bad = |reason: String| {
        diags.push(Diagnostic::InvalidParameter { block: path.to_string(), reason });
    };
    let finite = |v: f64| v.is_finite();
    match kind {
        BlockKind::Input { range } => match range {
            Some(r) if !(finite(r.lo) && finite(r.hi) && r.lo <= r.hi) => {
                bad(format!("input range [{}, {}] is not a finite interval", r.lo, r.hi))
            }
            None if top => diags.push(Diagnostic::MissingInputRange { input: path.to_string() }),
            _ => {}
        },
        BlockKind::Constant { value } if !finite(*value) => bad("constant must be finite".into()),
        BlockKind::Gain { k } if !finite(*k) => bad("gain must be finite".into()),
        BlockKind::Sum { signs } if signs.is_empty() => bad("sign string is empty".into()),
        BlockKind::Product { inputs } if *inputs == 0 => bad("product needs at least one input".into()),
        BlockKind::Logical { op, inputs } => {
            if *op != super::model::LogicOp::Not && *inputs < 2 {
                bad(format!("{op} needs at least two inputs"));
            }
        }
        BlockKind::Switch { threshold } if !finite(*threshold) => bad("threshold must be finite".into()),
        BlockKind::Saturation { lo, hi } if !(finite(*lo) && finite(*hi) && lo <= hi) => {
            bad(format!("saturation bounds [{lo}, {hi}] are not a finite interval"))
        }
        BlockKind::UnitDelay { init } | BlockKind::DiscreteIntegrator { init } if !finite(*init) => {
            bad("initial value must be finite".into())
        }
        BlockKind::Lookup1D { breakpoints, table } => {
            if breakpoints.is_empty() {
                bad("lookup table needs at least one breakpoint".into());
            }
            if breakpoints.len() != table.len() {
                bad(format!(
                    "{} breakpoints but {} table values",
                    breakpoints.len(),
                    table.len()
                ));
            }
            if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                bad("breakpoints must be strictly increasing".into());
            }
            if breakpoints.iter().chain(table).any(|v| !v.is_finite()) {
                bad("lookup values must be finite".into());
            }
        }
        _ => {}
    }
}

fn check_fault(fault: &LineFault) -> Result<(), String> {
    match *fault {
        LineFault::Noise { sigma, .. } if !(sigma.is_finite() && sigma > 0.0) => {
            Err(format!("noise sigma {sigma} must be positive"))
        }
        LineFault::Bias { offset } if !offset.is_finite() => Err("bias must be finite".into()),
        LineFault::StuckAt { value } if !value.is_finite() => Err("stuck-at value must be finite".into()),
        LineFault::TimeDelay { samples: 0 } => Err("time delay must be at least one sample".into()),
        LineFault::PackageDrop { probability, .. } if !(probability > 0.0 && probability < 1.0) => {
            Err(format!("drop probability {probability} must lie in (0, 1)"))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::model::{Block, Line, Sign};

    fn gain_chain() -> Model {
        let mut m = Model::new("chain");
        m.blocks.push(Block::new("c", BlockKind::Constant { value: 2.0 }));
        m.blocks.push(Block::new("g", BlockKind::Gain { k: 3.0 }));
        m.blocks.push(Block::new("y", BlockKind::Output));
        m.lines.push(Line::new(PortRef::output("c", 1), PortRef::input("g", 1)));
        m.lines.push(Line::new(PortRef::output("g", 1), PortRef::input("y", 1)));
        m
    }

    #[test]
    fn gain_chain_is_valid() {
        assert_eq!(validate_model(&gain_chain()), vec![]);
    }

    #[test]
    fn dangling_input_port() {
        let mut m = gain_chain();
        m.blocks.push(Block::new("b2", BlockKind::Abs));
        assert_eq!(
            validate_model(&m),
            vec![Diagnostic::UnconnectedPort { port: "b2.in1".into() }]
        );
    }

    #[test]
    fn two_block_feedback_loop_is_algebraic() {
        // s = u + g(s): both blocks are direct-feedthrough, so the cycle has no delay.
        let mut m = Model::new("loop");
        m.blocks.push(Block::new("u", BlockKind::Constant { value: 1.0 }));
        m.blocks.push(Block::new("s", BlockKind::Sum { signs: vec![Sign::Plus, Sign::Plus] }));
        m.blocks.push(Block::new("g", BlockKind::Gain { k: 0.5 }));
        m.blocks.push(Block::new("y", BlockKind::Output));
        m.lines.push(Line::new(PortRef::output("u", 1), PortRef::input("s", 1)));
        m.lines.push(Line::new(PortRef::output("g", 1), PortRef::input("s", 2)));
        m.lines.push(Line::new(PortRef::output("s", 1), PortRef::input("g", 1)));
        m.lines.push(Line::new(PortRef::output("s", 1), PortRef::input("y", 1)));
        assert_eq!(
            validate_model(&m),
            vec![Diagnostic::AlgebraicLoop { blocks: vec!["g".into(), "s".into()] }]
        );

        // Inserting a unit delay on the feedback path breaks the loop.
        m.blocks.push(Block::new("d", BlockKind::UnitDelay { init: 0.0 }));
        m.lines[1] = Line::new(PortRef::output("d", 1), PortRef::input("s", 2));
        m.lines.push(Line::new(PortRef::output("g", 1), PortRef::input("d", 1)));
        assert_eq!(validate_model(&m), vec![]);
    }

    #[test]
    fn bad_lookup_and_double_driver() {
        let mut m = gain_chain();
        m.blocks.push(Block::new(
            "lut",
            BlockKind::Lookup1D { breakpoints: vec![0.0, 0.0], table: vec![1.0, 2.0] },
        ));
        m.lines.push(Line::new(PortRef::output("c", 1), PortRef::input("lut", 1)));
        m.lines.push(Line::new(PortRef::output("c", 1), PortRef::input("y", 1)));
        let d = validate_model(&m);
        assert!(d.contains(&Diagnostic::MultipleDrivers { port: "y.in1".into() }));
        assert!(d.iter().any(|d| matches!(d, Diagnostic::InvalidParameter { block, .. } if block == "lut")));
    }

    #[test]
    fn top_level_input_needs_range() {
        let mut m = Model::new("m");
        m.blocks.push(Block::new("u", BlockKind::Input { range: None }));
        m.blocks.push(Block::new("y", BlockKind::Output));
        m.lines.push(Line::new(PortRef::output("u", 1), PortRef::input("y", 1)));
        assert_eq!(validate_model(&m), vec![Diagnostic::MissingInputRange { input: "u".into() }]);
    }
}
