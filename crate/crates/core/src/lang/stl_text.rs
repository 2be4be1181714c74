use thiserror::Error;

use crate::dataflow::{Model, RelOp, Simulator};
use crate::stl::{Interval, Predicate, StlFormula, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StlParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: unknown signal `{name}`")]
    UnknownSignal { line: usize, column: usize, name: String },
    #[error("{line}:{column}: bad interval [{lo}, {hi}]: bounds must satisfy 0 <= a <= b")]
    BadInterval { line: usize, column: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Minus,
    Arrow,
    Rel(RelOp),
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '/')
}

impl<'a> Lexer<'a> {
    fn lex(src: &'a str) -> Result<Vec<(Tok, usize)>, StlParseError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let chars: Vec<(usize, char)> = src.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            let peek = chars.get(i + 1).map(|p| p.1);
            let mut push = |t: Tok, n: usize| {
                lx.toks.push((t, pos));
                n
            };
            i += match c {
                c if c.is_whitespace() => 1,
                '#' => {
                    while i < chars.len() && chars[i].1 != '\n' {
                        i += 1;
                    }
                    0
                }
                '(' => push(Tok::LParen, 1),
                ')' => push(Tok::RParen, 1),
                '[' => push(Tok::LBracket, 1),
                ']' => push(Tok::RBracket, 1),
                ',' => push(Tok::Comma, 1),
                '-' if peek == Some('>') => push(Tok::Arrow, 2),
                '-' => push(Tok::Minus, 1),
                '→' => push(Tok::Arrow, 1),
                '<' if peek == Some('=') => push(Tok::Rel(RelOp::Le), 2),
                '>' if peek == Some('=') => push(Tok::Rel(RelOp::Ge), 2),
                '=' if peek == Some('=') => push(Tok::Rel(RelOp::Eq), 2),
                '!' if peek == Some('=') => push(Tok::Rel(RelOp::Ne), 2),
                '<' => push(Tok::Rel(RelOp::Lt), 1),
                '>' => push(Tok::Rel(RelOp::Gt), 1),
                '≤' => push(Tok::Rel(RelOp::Le), 1),
                '≥' => push(Tok::Rel(RelOp::Ge), 1),
                '≠' => push(Tok::Rel(RelOp::Ne), 1),
                '¬' => push(Tok::Ident("not".into()), 1),
                '∧' => push(Tok::Ident("and".into()), 1),
                '∨' => push(Tok::Ident("or".into()), 1),
                '□' => push(Tok::Ident("always".into()), 1),
                '◇' => push(Tok::Ident("eventually".into()), 1),
                '↑' => push(Tok::Ident("rise".into()), 1),
                c if c.is_ascii_digit() => {
                    let start = i;
                    let mut j = i;
                    while j < chars.len() && (chars[j].1.is_ascii_digit() || chars[j].1 == '.') {
                        j += 1;
                    }
                    // Optional exponent.
                    if j < chars.len() && matches!(chars[j].1, 'e' | 'E') {
                        let mut e = j + 1;
                        if e < chars.len() && matches!(chars[e].1, '+' | '-') {
                            e += 1;
                        }
                        if e < chars.len() && chars[e].1.is_ascii_digit() {
                            j = e;
                            while j < chars.len() && chars[j].1.is_ascii_digit() {
                                j += 1;
                            }
                        }
                    }
                    let end = chars.get(j).map_or(src.len(), |p| p.0);
                    let text = &src[chars[start].0..end];
                    let v: f64 = text.parse().map_err(|_| lx.syntax(pos, format!("invalid number `{text}`")))?;
                    lx.toks.push((Tok::Num(v), pos));
                    j - i
                }
                c if is_ident_start(c) => {
                    let mut j = i;
                    while j < chars.len() && is_ident_char(chars[j].1) {
                        j += 1;
                    }
                    let end = chars.get(j).map_or(src.len(), |p| p.0);
                    lx.toks.push((Tok::Ident(src[pos..end].to_string()), pos));
                    j - i
                }
                other => return Err(lx.syntax(pos, format!("unexpected character `{other}`"))),
            };
        }
        lx.toks.push((Tok::Eof, src.len()));
        Ok(lx.toks)
    }

    fn syntax(&self, pos: usize, message: String) -> StlParseError {
        let (line, column) = line_col(self.src, pos);
        StlParseError::Syntax { line, column, message }
    }
}

fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

const KEYWORDS: [&str; 8] = ["not", "and", "or", "always", "eventually", "until", "rise", "abs"];

struct Parser<'a, F> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    known: F,
}

impl<'a, F: Fn(&str) -> bool> Parser<'a, F> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> StlParseError {
        let (line, column) = line_col(self.src, self.offset());
        StlParseError::Syntax { line, column, message: message.into() }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), StlParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    fn implies(&mut self) -> Result<StlFormula, StlParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(lhs.implies(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<StlFormula, StlParseError> {
        let mut lhs = self.and()?;
        while self.is_kw("or") {
            self.bump();
            lhs = lhs.or(self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<StlFormula, StlParseError> {
        let mut lhs = self.until()?;
        while self.is_kw("and") {
            self.bump();
            lhs = lhs.and(self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<StlFormula, StlParseError> {
        let mut lhs = self.unary()?;
        while self.is_kw("until") {
            self.bump();
            let interval = self.interval()?;
            lhs = StlFormula::until(interval, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StlFormula, StlParseError> {
        if self.is_kw("not") {
            self.bump();
            return Ok(self.unary()?.not());
        }
        if self.is_kw("always") {
            self.bump();
            let interval = self.interval()?;
            return Ok(StlFormula::always(interval, self.unary()?));
        }
        if self.is_kw("eventually") {
            self.bump();
            let interval = self.interval()?;
            return Ok(StlFormula::eventually(interval, self.unary()?));
        }
        self.primary()
    }

    fn interval(&mut self) -> Result<Interval, StlParseError> {
        if *self.peek() != Tok::LBracket {
            return Ok(Interval::UNBOUNDED);
        }
        let start = self.offset();
        self.bump();
        let lo = self.number()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = if self.is_kw("inf") {
            self.bump();
            None
        } else {
            Some(self.number()?)
        };
        self.expect(Tok::RBracket, "`]`")?;
        let bad = lo < 0.0 || hi.is_some_and(|h| h < lo);
        if bad {
            let (line, column) = line_col(self.src, start);
            return Err(StlParseError::BadInterval { line, column, lo, hi: hi.unwrap_or(f64::INFINITY) });
        }
        Ok(Interval { lo, hi })
    }

    fn number(&mut self) -> Result<f64, StlParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v) => Ok(if neg { -v } else { v }),
            other => {
                self.pos -= 1;
                Err(self.err(format!("expected a number, found {other:?}")))
            }
        }
    }

    fn signal(&mut self) -> Result<String, StlParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                if !(self.known)(&name) {
                    let (line, column) = line_col(self.src, at);
                    return Err(StlParseError::UnknownSignal { line, column, name });
                }
                Ok(name)
            }
            other => Err(self.err(format!("expected a signal name, found {other:?}"))),
        }
    }

    fn predicate(&mut self) -> Result<Predicate, StlParseError> {
        let term = if self.is_kw("abs") {
            self.bump();
            self.expect(Tok::LParen, "`(`")?;
            let a = self.signal()?;
            self.expect(Tok::Minus, "`-`")?;
            let b = self.signal()?;
            self.expect(Tok::RParen, "`)`")?;
            Term::AbsDiff(a, b)
        } else {
            Term::Signal(self.signal()?)
        };
        let op = match self.bump() {
            Tok::Rel(op) => op,
            other => {
                self.pos -= 1;
                return Err(self.err(format!("expected a comparison, found {other:?}")));
            }
        };
        let threshold = self.number()?;
        Ok(Predicate { term, op, threshold })
    }

    fn primary(&mut self) -> Result<StlFormula, StlParseError> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let f = self.implies()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(f);
        }
        if self.is_kw("rise") {
            self.bump();
            self.expect(Tok::LParen, "`(`")?;
            let p = self.predicate()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(StlFormula::Rise(p));
        }
        Ok(StlFormula::Pred(self.predicate()?))
    }
}

/// Parses a property, resolving signal names with `known`.
pub fn parse_stl_with(src: &str, known: impl Fn(&str) -> bool) -> Result<StlFormula, StlParseError> {
    let toks = Lexer::lex(src)?;
    let mut p = Parser { src, toks, pos: 0, known };
    let f = p.implies()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err(format!("unexpected trailing {:?}", p.peek())));
    }
    Ok(f)
}

/// Parses a property whose signals must be among `signals`.
pub fn parse_stl_for_signals(src: &str, signals: &[&str]) -> Result<StlFormula, StlParseError> {
    parse_stl_with(src, |s| signals.contains(&s))
}

/// Parses a property against the named signals of `model`. If the model is
/// not simulatable only its top-level input and output names resolve.
pub fn parse_stl(src: &str, model: &Model) -> Result<StlFormula, StlParseError> {
    match Simulator::new(model) {
        Ok(sim) => {
            let table = sim.signal_table().clone();
            parse_stl_with(src, move |s| table.column(s).is_some())
        }
        Err(_) => {
            let names: Vec<String> = model.inputs().into_iter().map(|(n, _)| n).chain(model.outputs()).collect();
            parse_stl_with(src, move |s| names.iter().any(|n| n == s))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn any(src: &str) -> Result<StlFormula, StlParseError> {
        parse_stl_with(src, |_| true)
    }

    #[test]
    fn atcs_shape() {
        let f = any("always (v <= 120 and w <= 4500)").unwrap();
        let expected = StlFormula::always(
            Interval::UNBOUNDED,
            StlFormula::pred("v", RelOp::Le, 120.0).and(StlFormula::pred("w", RelOp::Le, 4500.0)),
        );
        assert_eq!(f, expected);
        assert_eq!(f.predicates().len(), 2);
    }

    #[test]
    fn aecs_shape() {
        let f = any("always (rise(cmd >= 0.09) -> eventually[0,2] always[0,1] (abs(cmd - pos) <= 0.02))").unwrap();
        let rise = StlFormula::Rise(Predicate::new(Term::Signal("cmd".into()), RelOp::Ge, 0.09));
        let settle = StlFormula::Pred(Predicate::new(
            Term::AbsDiff("cmd".into(), "pos".into()),
            RelOp::Le,
            0.02,
        ));
        let expected = StlFormula::always(
            Interval::UNBOUNDED,
            rise.implies(StlFormula::eventually(
                Interval::new(0.0, 2.0),
                StlFormula::always(Interval::new(0.0, 1.0), settle),
            )),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn bad_interval() {
        assert!(matches!(any("eventually[3,1] (x > 0)"), Err(StlParseError::BadInterval { lo, hi, .. }) if lo == 3.0 && hi == 1.0));
    }

    #[test]
    fn unknown_signal_is_positioned() {
        let err = parse_stl_for_signals("always (v <= 1 and\n  q > 2)", &["v"]).unwrap_err();
        assert_eq!(err, StlParseError::UnknownSignal { line: 2, column: 3, name: "q".into() });
    }

    #[test]
    fn precedence() {
        // not > and > or > ->
        let f = any("not a > 0 and b > 0 or c > 0 -> d > 0").unwrap();
        let a = StlFormula::pred("a", RelOp::Gt, 0.0);
        let b = StlFormula::pred("b", RelOp::Gt, 0.0);
        let c = StlFormula::pred("c", RelOp::Gt, 0.0);
        let d = StlFormula::pred("d", RelOp::Gt, 0.0);
        assert_eq!(f, a.not().and(b).or(c).implies(d));
    }

    #[test]
    fn negative_numbers_and_unicode() {
        let f = any("□[0,inf] (x ≥ -1.5e1)").unwrap();
        assert_eq!(f, StlFormula::always(Interval::UNBOUNDED, StlFormula::pred("x", RelOp::Ge, -15.0)));
        let g = any("always[1,inf] x < 2").unwrap();
        assert_eq!(g, StlFormula::always(Interval { lo: 1.0, hi: None }, StlFormula::pred("x", RelOp::Lt, 2.0)));
        assert_eq!(any(&g.to_string()).unwrap(), g);
    }

    #[test]
    fn garbage_is_a_positioned_error() {
        for src in ["", "always", "x >", "(x > 1", "x > 1 )", "abs(x) > 1", "x $ 1", "until x > 1"] {
            assert!(matches!(any(src), Err(StlParseError::Syntax { .. })), "{src}");
        }
    }
}
