use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use super::model::{BlockKind, InputRange, LineFault, Model, Port, PortRef};

/// Atomic block of a flattened model; `id` is the `/`-separated hierarchy path.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatBlock {
    pub id: String,
    pub kind: BlockKind,
}

/// A flattened line. `signal` keeps the hierarchical line id so that traces
/// of the flat and nested forms expose the same signal names.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatLine {
    pub src: PortRef,
    pub dst: PortRef,
    pub signal: String,
    pub fault: Option<LineFault>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatModel {
    pub blocks: Vec<FlatBlock>,
    pub lines: Vec<FlatLine>,
    pub inputs: Vec<(String, InputRange)>,
    pub outputs: Vec<String>,
}

/// Inlines every subsystem. Subsystem-internal `Input`/`Output` blocks become
/// unity gains so the port signals stay observable.
pub fn flatten(model: &Model) -> FlatModel {
    let mut flat = FlatModel {
        blocks: Vec::new(),
        lines: Vec::new(),
        inputs: model.inputs(),
        outputs: model.outputs(),
    };
    flatten_into(model, "", true, &mut flat);
    flat
}

fn port_block(model: &Model, sub: &str, port: Port) -> Option<String> {
    let BlockKind::Subsystem(inner) = &model.block(sub)?.kind else {
        return None;
    };
    match port {
        Port::In(i) => inner.input_blocks().nth(i - 1).map(|b| b.id.clone()),
        Port::Out(i) => inner.output_blocks().nth(i - 1).map(|b| b.id.clone()),
    }
}

fn flatten_into(model: &Model, prefix: &str, top: bool, flat: &mut FlatModel) {
    for b in &model.blocks {
        let id = format!("{prefix}{}", b.id);
        match &b.kind {
            BlockKind::Subsystem(inner) => flatten_into(inner, &format!("{id}/"), false, flat),
            BlockKind::Input { .. } | BlockKind::Output if !top => {
                flat.blocks.push(FlatBlock { id, kind: BlockKind::Gain { k: 1.0 } })
            }
            kind => flat.blocks.push(FlatBlock { id, kind: kind.clone() }),
        }
    }
    for line in &model.lines {
        let src = match port_block(model, &line.src.block, line.src.port) {
            Some(inner) => PortRef::output(format!("{prefix}{}/{inner}", line.src.block), 1),
            None => PortRef::new(format!("{prefix}{}", line.src.block), line.src.port),
        };
        let dst = match port_block(model, &line.dst.block, line.dst.port) {
            Some(inner) => PortRef::input(format!("{prefix}{}/{inner}", line.dst.block), 1),
            None => PortRef::new(format!("{prefix}{}", line.dst.block), line.dst.port),
        };
        flat.lines.push(FlatLine {
            src,
            dst,
            signal: format!("{prefix}{}", line.id()),
            fault: line.fault.clone(),
        });
    }
}

impl FlatModel {
    pub fn block_index(&self) -> HashMap<&str, usize> {
        self.blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect()
    }

    /// Topological evaluation order over the delay-cut graph, ties broken by
    /// block id. On failure returns the (sorted) blocks lying on algebraic loops.
    pub fn schedule(&self) -> Result<Vec<usize>, Vec<String>> {
        let index = self.block_index();
        let n = self.blocks.len();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
        for line in &self.lines {
            let (Some(&s), Some(&d)) = (index.get(line.src.block.as_str()), index.get(line.dst.block.as_str()))
            else {
                continue;
            };
            if self.blocks[d].kind.is_delay() {
                continue;
            }
            succ[s].push(d);
            pred[d].push(s);
        }

        let mut indeg: Vec<usize> = pred.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<(&str, usize)>> = (0..n)
            .filter(|&i| indeg[i] == 0)
            .map(|i| Reverse((self.blocks[i].id.as_str(), i)))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, i))) = ready.pop() {
            order.push(i);
            for &d in &succ[i] {
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    ready.push(Reverse((self.blocks[d].id.as_str(), d)));
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }

        // Peel blocks that only sit downstream of a loop: what remains after
        // repeatedly removing sinks lies on (or between) cycles.
        let mut left: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] > 0).collect();
        loop {
            let sinks: Vec<usize> = left
                .iter()
                .copied()
                .filter(|&i| succ[i].iter().all(|d| !left.contains(d)))
                .collect();
            if sinks.is_empty() {
                break;
            }
            for s in sinks {
                left.remove(&s);
            }
        }
        let mut names: Vec<String> = left.into_iter().map(|i| self.blocks[i].id.clone()).collect();
        names.sort();
        Err(names)
    }
}
