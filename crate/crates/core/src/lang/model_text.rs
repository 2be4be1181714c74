use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::dataflow::{
    format_signs, parse_signs, Block, BlockKind, InputRange, Line, LineFault, LogicOp, Model, PortRef, RelOp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelErrorKind {
    SyntaxError,
    UnknownBlockKind,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind:?}: {message}")]
pub struct ModelParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ModelErrorKind,
    pub message: String,
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    column: usize,
}

/// Splits on whitespace outside `[...]` and `(...)` groups.
fn tokenize(line: &str, lineno: usize) -> Result<Vec<Token>, ModelParseError> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut depth: i32 = 0;
    for (col, c) in line.chars().enumerate() {
        if c == '#' && depth == 0 {
            break;
        }
        if c.is_whitespace() && depth == 0 {
            if !cur.is_empty() {
                toks.push(Token { text: std::mem::take(&mut cur), column: start + 1 });
            }
            continue;
        }
        if cur.is_empty() {
            start = col;
        }
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(syntax(lineno, col + 1, format!("unbalanced `{c}`")));
                }
            }
            _ => {}
        }
        cur.push(c);
    }
    if depth != 0 {
        return Err(syntax(lineno, start + 1, "unclosed bracket".into()));
    }
    if !cur.is_empty() {
        toks.push(Token { text: cur, column: start + 1 });
    }
    Ok(toks)
}

fn syntax(line: usize, column: usize, message: String) -> ModelParseError {
    ModelParseError { line, column, kind: ModelErrorKind::SyntaxError, message }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_num(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    let inner = s.strip_prefix('[')?.strip_suffix(']')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    inner.split(',').map(|x| parse_num(x.trim())).collect()
}

struct Scope {
    model: Model,
    /// Source position of each line statement, for reference errors.
    line_pos: Vec<(usize, usize)>,
    opened_at: usize,
}

struct Params<'a> {
    map: BTreeMap<String, &'a Token>,
    lineno: usize,
}

impl<'a> Params<'a> {
    fn parse(toks: &'a [Token], lineno: usize) -> Result<Self, ModelParseError> {
        let mut map = BTreeMap::new();
        for t in toks {
            let (k, v) = t
                .text
                .split_once('=')
                .ok_or_else(|| syntax(lineno, t.column, format!("expected `key=value`, found `{}`", t.text)))?;
            if v.is_empty() {
                return Err(syntax(lineno, t.column, format!("missing value for `{k}`")));
            }
            if map.insert(k.to_string(), t).is_some() {
                return Err(syntax(lineno, t.column, format!("parameter `{k}` given twice")));
            }
        }
        Ok(Self { map, lineno })
    }

    fn raw(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.map.remove(key).map(|t| (&t.text[key.len() + 1..], t.column))
    }

    fn num(&mut self, key: &str) -> Result<Option<f64>, ModelParseError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, col)) => parse_num(v)
                .map(Some)
                .ok_or_else(|| syntax(self.lineno, col, format!("`{key}` expects a finite number, found `{v}`"))),
        }
    }

    fn req_num(&mut self, key: &str, col: usize) -> Result<f64, ModelParseError> {
        self.num(key)?.ok_or_else(|| syntax(self.lineno, col, format!("missing parameter `{key}`")))
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ModelParseError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, col)) => v
                .parse()
                .map(Some)
                .map_err(|_| syntax(self.lineno, col, format!("`{key}` expects a count, found `{v}`"))),
        }
    }

    fn list(&mut self, key: &str, col: usize) -> Result<Vec<f64>, ModelParseError> {
        let (v, c) = self.raw(key).ok_or_else(|| syntax(self.lineno, col, format!("missing parameter `{key}`")))?;
        parse_list(v).ok_or_else(|| syntax(self.lineno, c, format!("`{key}` expects `[n,n,...]`, found `{v}`")))
    }

    fn finish(self) -> Result<(), ModelParseError> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, t)) => Err(syntax(self.lineno, t.column, format!("unknown parameter `{k}`"))),
        }
    }
}

fn parse_block_kind(kind: &Token, rest: &[Token], lineno: usize) -> Result<BlockKind, ModelParseError> {
    let mut p = Params::parse(rest, lineno)?;
    let col = kind.column;
    let k = match kind.text.as_str() {
        "Constant" => BlockKind::Constant { value: p.req_num("value", col)? },
        "Gain" => BlockKind::Gain { k: p.req_num("k", col)? },
        "Sum" => {
            let (v, c) = p.raw("signs").ok_or_else(|| syntax(lineno, col, "missing parameter `signs`".into()))?;
            BlockKind::Sum { signs: parse_signs(v).map_err(|m| syntax(lineno, c, m))? }
        }
        "Product" => BlockKind::Product { inputs: p.count("inputs")?.unwrap_or(2) },
        "Abs" => BlockKind::Abs,
        "UnaryMinus" => BlockKind::UnaryMinus,
        "Relational" => {
            let (v, c) = p.raw("op").ok_or_else(|| syntax(lineno, col, "missing parameter `op`".into()))?;
            BlockKind::Relational { op: v.parse::<RelOp>().map_err(|m| syntax(lineno, c, m))? }
        }
        "Logical" => {
            let (v, c) = p.raw("op").ok_or_else(|| syntax(lineno, col, "missing parameter `op`".into()))?;
            let op: LogicOp = v.parse().map_err(|m| syntax(lineno, c, m))?;
            let default = if op == LogicOp::Not { 1 } else { 2 };
            let inputs = p.count("inputs")?.unwrap_or(default);
            if op == LogicOp::Not && inputs != 1 {
                return Err(syntax(lineno, c, "NOT takes exactly one input".into()));
            }
            BlockKind::Logical { op, inputs }
        }
        "Switch" => BlockKind::Switch { threshold: p.num("threshold")?.unwrap_or(0.0) },
        "Saturation" => BlockKind::Saturation { lo: p.req_num("lo", col)?, hi: p.req_num("hi", col)? },
        "UnitDelay" => BlockKind::UnitDelay { init: p.num("init")?.unwrap_or(0.0) },
        "DiscreteIntegrator" => BlockKind::DiscreteIntegrator { init: p.num("init")?.unwrap_or(0.0) },
        "Lookup1D" => BlockKind::Lookup1D { breakpoints: p.list("breakpoints", col)?, table: p.list("table", col)? },
        other => {
            return Err(ModelParseError {
                line: lineno,
                column: col,
                kind: ModelErrorKind::UnknownBlockKind,
                message: format!("unknown block kind `{other}`"),
            })
        }
    };
    p.finish()?;
    Ok(k)
}

fn parse_fault(tok: &Token, lineno: usize) -> Result<LineFault, ModelParseError> {
    let body = tok.text.strip_prefix("fault=").ok_or_else(|| {
        syntax(lineno, tok.column, format!("expected `fault=...`, found `{}`", tok.text))
    })?;
    let (name, args) = match body.split_once('(') {
        None => (body, ""),
        Some((n, rest)) => (
            n,
            rest.strip_suffix(')')
                .ok_or_else(|| syntax(lineno, tok.column, "unclosed fault parameters".into()))?,
        ),
    };
    let arg_toks: Vec<Token> = args
        .split(',')
        .filter(|a| !a.trim().is_empty())
        .map(|a| Token { text: a.trim().to_string(), column: tok.column })
        .collect();
    let mut p = Params::parse(&arg_toks, lineno)?;
    let col = tok.column;
    let seed = |p: &mut Params| -> Result<u64, ModelParseError> {
        let (v, c) = p.raw("seed").ok_or_else(|| syntax(lineno, col, "missing parameter `seed`".into()))?;
        v.parse().map_err(|_| syntax(lineno, c, format!("`seed` expects an unsigned integer, found `{v}`")))
    };
    let fault = match name {
        "Noise" => LineFault::Noise { sigma: p.req_num("sigma", col)?, seed: seed(&mut p)? },
        "Bias" => LineFault::Bias { offset: p.req_num("offset", col)? },
        "Negate" => LineFault::Negate,
        "Absolute" => LineFault::Absolute,
        "StuckAt" => LineFault::StuckAt { value: p.req_num("value", col)? },
        "TimeDelay" => LineFault::TimeDelay {
            samples: p.count("samples")?.ok_or_else(|| syntax(lineno, col, "missing parameter `samples`".into()))?,
        },
        "PackageDrop" => LineFault::PackageDrop { probability: p.req_num("p", col)?, seed: seed(&mut p)? },
        other => return Err(syntax(lineno, col, format!("unknown fault `{other}`"))),
    };
    p.finish()?;
    Ok(fault)
}

fn parse_range(tok: &Token, lineno: usize) -> Result<InputRange, ModelParseError> {
    let v = tok
        .text
        .strip_prefix("range=")
        .ok_or_else(|| syntax(lineno, tok.column, format!("expected `range=[lo,hi]`, found `{}`", tok.text)))?;
    match parse_list(v).as_deref() {
        Some([lo, hi]) => Ok(InputRange::new(*lo, *hi)),
        _ => Err(syntax(lineno, tok.column, format!("expected `range=[lo,hi]`, found `{}`", tok.text))),
    }
}

fn check_id(tok: &Token, lineno: usize, scope: &Scope) -> Result<String, ModelParseError> {
    if !is_identifier(&tok.text) {
        return Err(syntax(lineno, tok.column, format!("invalid identifier `{}`", tok.text)));
    }
    if scope.model.block(&tok.text).is_some() {
        return Err(ModelParseError {
            line: lineno,
            column: tok.column,
            kind: ModelErrorKind::DuplicateId,
            message: format!("block `{}` declared twice", tok.text),
        });
    }
    Ok(tok.text.clone())
}

fn close_scope(scope: &Scope) -> Result<(), ModelParseError> {
    for (line, &(lineno, col)) in scope.model.lines.iter().zip(&scope.line_pos) {
        for end in [&line.src, &line.dst] {
            if scope.model.block(&end.block).is_none() {
                return Err(syntax(lineno, col, format!("line references undeclared block `{}`", end.block)));
            }
        }
    }
    Ok(())
}

/// Parses the line-oriented `.dfm` model format.
pub fn parse_model(src: &str) -> Result<Model, ModelParseError> {
    let mut stack: Vec<Scope> = vec![Scope { model: Model::new("model"), line_pos: Vec::new(), opened_at: 0 }];
    let mut named = false;

    for (idx, raw) in src.lines().enumerate() {
        let lineno = idx + 1;
        let toks = tokenize(raw, lineno)?;
        let Some(head) = toks.first() else { continue };
        let depth = stack.len();
        let scope = stack.last_mut().expect("scope stack is never empty");
        let arg = |i: usize| -> Result<&Token, ModelParseError> {
            toks.get(i).ok_or_else(|| syntax(lineno, raw.chars().count() + 1, format!("`{}` is incomplete", head.text)))
        };
        let no_more = |n: usize| -> Result<(), ModelParseError> {
            match toks.get(n) {
                Some(t) => Err(syntax(lineno, t.column, format!("unexpected `{}`", t.text))),
                None => Ok(()),
            }
        };
        match head.text.as_str() {
            "model" => {
                if depth > 1 || named {
                    return Err(syntax(lineno, head.column, "`model` must appear once at top level".into()));
                }
                let name = arg(1)?;
                if !is_identifier(&name.text) {
                    return Err(syntax(lineno, name.column, format!("invalid model name `{}`", name.text)));
                }
                no_more(2)?;
                scope.model.name = name.text.clone();
                named = true;
            }
            "input" => {
                let id = check_id(arg(1)?, lineno, scope)?;
                let range = toks.get(2).map(|t| parse_range(t, lineno)).transpose()?;
                no_more(3)?;
                scope.model.blocks.push(Block::new(id, BlockKind::Input { range }));
            }
            "output" => {
                let id = check_id(arg(1)?, lineno, scope)?;
                no_more(2)?;
                scope.model.blocks.push(Block::new(id, BlockKind::Output));
            }
            "block" => {
                let id = check_id(arg(1)?, lineno, scope)?;
                let kind = parse_block_kind(arg(2)?, &toks[3..], lineno)?;
                scope.model.blocks.push(Block::new(id, kind));
            }
            "line" => {
                let src_tok = arg(1)?;
                let arrow = arg(2)?;
                let dst_tok = arg(3)?;
                if arrow.text != "->" {
                    return Err(syntax(lineno, arrow.column, format!("expected `->`, found `{}`", arrow.text)));
                }
                let src: PortRef = src_tok.text.parse().map_err(|m| syntax(lineno, src_tok.column, m))?;
                let dst: PortRef = dst_tok.text.parse().map_err(|m| syntax(lineno, dst_tok.column, m))?;
                let fault = toks.get(4).map(|t| parse_fault(t, lineno)).transpose()?;
                no_more(5)?;
                scope.model.lines.push(Line { src, dst, fault });
                scope.line_pos.push((lineno, head.column));
            }
            "subsystem" => {
                let id = check_id(arg(1)?, lineno, scope)?;
                let brace = arg(2)?;
                if brace.text != "{" {
                    return Err(syntax(lineno, brace.column, format!("expected `{{`, found `{}`", brace.text)));
                }
                no_more(3)?;
                stack.push(Scope { model: Model::new(id), line_pos: Vec::new(), opened_at: lineno });
            }
            "}" => {
                no_more(1)?;
                if stack.len() == 1 {
                    return Err(syntax(lineno, head.column, "unmatched `}`".into()));
                }
                let done = stack.pop().expect("checked depth");
                close_scope(&done)?;
                let parent = stack.last_mut().expect("checked depth");
                let id = done.model.name.clone();
                parent.model.blocks.push(Block::new(id, BlockKind::Subsystem(Box::new(done.model))));
            }
            other => return Err(syntax(lineno, head.column, format!("unknown statement `{other}`"))),
        }
    }
    if stack.len() > 1 {
        let open = stack.last().expect("non-empty");
        return Err(syntax(open.opened_at, 1, format!("subsystem `{}` is never closed", open.model.name)));
    }
    let top = stack.pop().expect("top scope");
    close_scope(&top)?;
    Ok(top.model)
}

fn write_fault(out: &mut String, fault: &LineFault) {
    let _ = match fault {
        LineFault::Noise { sigma, seed } => write!(out, " fault=Noise(sigma={sigma},seed={seed})"),
        LineFault::Bias { offset } => write!(out, " fault=Bias(offset={offset})"),
        LineFault::Negate => write!(out, " fault=Negate"),
        LineFault::Absolute => write!(out, " fault=Absolute"),
        LineFault::StuckAt { value } => write!(out, " fault=StuckAt(value={value})"),
        LineFault::TimeDelay { samples } => write!(out, " fault=TimeDelay(samples={samples})"),
        LineFault::PackageDrop { probability, seed } => write!(out, " fault=PackageDrop(p={probability},seed={seed})"),
    };
}

fn list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(","))
}

/// One declaration per block: `input`, `output`, `block ...` or a nested
/// `subsystem` (which spans several lines).
pub fn block_declaration(block: &Block, indent: usize) -> String {
    let pad = "  ".repeat(indent);
    let id = &block.id;
    let params = match &block.kind {
        BlockKind::Input { range: Some(r) } => return format!("{pad}input {id} range=[{},{}]\n", r.lo, r.hi),
        BlockKind::Input { range: None } => return format!("{pad}input {id}\n"),
        BlockKind::Output => return format!("{pad}output {id}\n"),
        BlockKind::Subsystem(inner) => {
            let mut s = format!("{pad}subsystem {id} {{\n");
            write_body(&mut s, inner, indent + 1);
            s.push_str(&format!("{pad}}}\n"));
            return s;
        }
        BlockKind::Constant { value } => format!(" value={value}"),
        BlockKind::Gain { k } => format!(" k={k}"),
        BlockKind::Sum { signs } => format!(" signs={}", format_signs(signs)),
        BlockKind::Product { inputs } => format!(" inputs={inputs}"),
        BlockKind::Abs | BlockKind::UnaryMinus => String::new(),
        BlockKind::Relational { op } => format!(" op={op}"),
        BlockKind::Logical { op: LogicOp::Not, .. } => " op=NOT".to_string(),
        BlockKind::Logical { op, inputs } => format!(" op={op} inputs={inputs}"),
        BlockKind::Switch { threshold } => format!(" threshold={threshold}"),
        BlockKind::Saturation { lo, hi } => format!(" lo={lo} hi={hi}"),
        BlockKind::UnitDelay { init } | BlockKind::DiscreteIntegrator { init } => format!(" init={init}"),
        BlockKind::Lookup1D { breakpoints, table } => {
            format!(" breakpoints={} table={}", list(breakpoints), list(table))
        }
    };
    format!("{pad}block {id} {}{params}\n", block.kind.name())
}

pub fn line_declaration(line: &Line, indent: usize) -> String {
    let mut s = format!("{}line {} -> {}", "  ".repeat(indent), line.src, line.dst);
    if let Some(f) = &line.fault {
        write_fault(&mut s, f);
    }
    s.push('\n');
    s
}

fn write_body(out: &mut String, model: &Model, indent: usize) {
    for b in &model.blocks {
        out.push_str(&block_declaration(b, indent));
    }
    for l in &model.lines {
        out.push_str(&line_declaration(l, indent));
    }
}

/// Canonical text: the `model` header, every block in order, then every line.
pub fn serialize_model(model: &Model) -> String {
    let mut out = format!("model {}\n", model.name);
    write_body(&mut out, model, 0);
    out
}


#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = "input u range=[0,10]\nblock g Gain k=3\noutput y\nline u.out1 -> g.in1\nline g.out1 -> y.in1\n";

    #[test]
    fn gain_chain() {
        let m = parse_model(CHAIN).unwrap();
        assert_eq!(m.blocks.len(), 3);
        assert_eq!(m.lines.len(), 2);
        assert_eq!(m.inputs(), vec![("u".to_string(), InputRange::new(0.0, 10.0))]);
        assert_eq!(serialize_model(&m), format!("model model\n{CHAIN}"));
    }

    #[test]
    fn undeclared_block_reference() {
        let src = "input u range=[0,1]\noutput y\nline u.out1 -> y.in1\nline q.out1 -> y.in1\n";
        let e = parse_model(src).unwrap_err();
        assert_eq!((e.line, e.kind), (4, ModelErrorKind::SyntaxError));
    }

    #[test]
    fn unknown_kind_and_duplicate() {
        let e = parse_model("block a Frobnicate\n").unwrap_err();
        assert_eq!((e.line, e.column, e.kind), (1, 9, ModelErrorKind::UnknownBlockKind));
        let e = parse_model("output y\nblock y Abs\n").unwrap_err();
        assert_eq!((e.line, e.kind), (2, ModelErrorKind::DuplicateId));
    }

    #[test]
    fn subsystem_round_trip() {
        let src = "model nest\ninput u range=[-1,1]\nsubsystem s {\n  input a\n  block g Gain k=2\n  output z\n  line a.out1 -> g.in1\n  line g.out1 -> z.in1\n}\noutput y\nline u.out1 -> s.in1\nline s.out1 -> y.in1 fault=Noise(sigma=0.5,seed=42)\n";
        let m = parse_model(src).unwrap();
        let text = serialize_model(&m);
        assert_eq!(parse_model(&text).unwrap(), m);
        assert!(text.contains("subsystem s {\n  input a\n"));
    }

    #[test]
    fn all_block_kinds_parse() {
        let src = "\
input a range=[0,1]
block c Constant value=-2.5
block s Sum signs=+-+
block p Product inputs=3
block r Relational op=>=
block l Logical op=AND inputs=3
block n Logical op=NOT
block w Switch threshold=0.5
block sat Saturation lo=-1 hi=1
block d UnitDelay init=1
block i DiscreteIntegrator
block t Lookup1D breakpoints=[0, 1, 2] table=[0,5,7]   # spaces inside lists
block ab Abs
block neg UnaryMinus
";
        let m = parse_model(src).unwrap();
        assert_eq!(m.blocks.len(), 14);
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        for src in [
            "block",
            "block g Gain",
            "block g Gain k=abc",
            "block g Gain k=1 q=2",
            "line a.out1 b.in1",
            "input u range=[0]",
            "subsystem s {\n",
            "}",
            "block t Lookup1D breakpoints=[0,1 table=[1,2]",
            "frob x",
            "line a.out1 -> b.in1 fault=Noise(sigma=1)",
        ] {
            let e = parse_model(src).unwrap_err();
            assert_eq!(e.kind, ModelErrorKind::SyntaxError, "{src}: {e}");
        }
    }
}
