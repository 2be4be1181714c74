use std::fmt;

use crate::dataflow::RelOp;

/// Left-hand side of a signal predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Signal(String),
    /// `abs(a - b)`
    AbsDiff(String, String),
}

impl Term {
    pub fn signals(&self) -> Vec<&str> {
        match self {
            Term::Signal(s) => vec![s],
            Term::AbsDiff(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Signal(s) => f.write_str(s),
            Term::AbsDiff(a, b) => write!(f, "abs({a} - {b})"),
        }
    }
}

/// `term op threshold`
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub term: Term,
    pub op: RelOp,
    pub threshold: f64,
}

impl Predicate {
    pub fn new(term: Term, op: RelOp, threshold: f64) -> Self {
        Self { term, op, threshold }
    }

    /// Robustness of the predicate for a term value `x`.
    pub fn robustness(&self, x: f64) -> f64 {
        let c = self.threshold;
        match self.op {
            RelOp::Ge | RelOp::Gt => x - c,
            RelOp::Le | RelOp::Lt => c - x,
            RelOp::Eq => -(x - c).abs(),
            RelOp::Ne => (x - c).abs(),
        }
    }

    pub fn holds(&self, x: f64) -> bool {
        self.op.eval(x, self.threshold)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.term, self.op, self.threshold)
    }
}

/// Closed time interval in seconds; `hi = None` runs to the end of the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: 0.0, hi: None };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi: Some(hi) }
    }

    pub fn is_unbounded_from_zero(&self) -> bool {
        self.lo == 0.0 && self.hi.is_none()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            _ if self.is_unbounded_from_zero() => Ok(()),
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},inf]", self.lo),
        }
    }
}

/// STL abstract syntax. Implication is desugared to `not p or q` by the parser.
#[derive(Debug, Clone, PartialEq)]
pub enum StlFormula {
    Pred(Predicate),
    Not(Box<StlFormula>),
    And(Box<StlFormula>, Box<StlFormula>),
    Or(Box<StlFormula>, Box<StlFormula>),
    Always(Interval, Box<StlFormula>),
    Eventually(Interval, Box<StlFormula>),
    Until(Interval, Box<StlFormula>, Box<StlFormula>),
    /// Rising edge: the predicate holds now and did not hold at the previous sample.
    Rise(Predicate),
}

impl StlFormula {
    pub fn pred(name: &str, op: RelOp, threshold: f64) -> Self {
        StlFormula::Pred(Predicate::new(Term::Signal(name.into()), op, threshold))
    }

    pub fn not(self) -> Self {
        StlFormula::Not(Box::new(self))
    }

    pub fn and(self, rhs: Self) -> Self {
        StlFormula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Self) -> Self {
        StlFormula::Or(Box::new(self), Box::new(rhs))
    }

    pub fn implies(self, rhs: Self) -> Self {
        self.not().or(rhs)
    }

    pub fn always(interval: Interval, body: Self) -> Self {
        StlFormula::Always(interval, Box::new(body))
    }

    pub fn eventually(interval: Interval, body: Self) -> Self {
        StlFormula::Eventually(interval, Box::new(body))
    }

    pub fn until(interval: Interval, lhs: Self, rhs: Self) -> Self {
        StlFormula::Until(interval, Box::new(lhs), Box::new(rhs))
    }

    pub fn depth(&self) -> usize {
        match self {
            StlFormula::Pred(_) | StlFormula::Rise(_) => 1,
            StlFormula::Not(a) | StlFormula::Always(_, a) | StlFormula::Eventually(_, a) => 1 + a.depth(),
            StlFormula::And(a, b) | StlFormula::Or(a, b) | StlFormula::Until(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.visit_predicates(&mut |p| out.push(p));
        out
    }

    fn visit_predicates<'a>(&'a self, f: &mut impl FnMut(&'a Predicate)) {
        match self {
            StlFormula::Pred(p) | StlFormula::Rise(p) => f(p),
            StlFormula::Not(a) | StlFormula::Always(_, a) | StlFormula::Eventually(_, a) => a.visit_predicates(f),
            StlFormula::And(a, b) | StlFormula::Or(a, b) | StlFormula::Until(_, a, b) => {
                a.visit_predicates(f);
                b.visit_predicates(f);
            }
        }
    }

    /// Every signal name referenced, deduplicated, in first-use order.
    pub fn signals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in self.predicates() {
            for s in p.term.signals() {
                if !out.iter().any(|o| o == s) {
                    out.push(s.to_string());
                }
            }
        }
        out
    }
}

/// Fully parenthesised canonical text; re-parses to an equal AST.
impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StlFormula::Pred(p) => write!(f, "{p}"),
            StlFormula::Rise(p) => write!(f, "rise({p})"),
            StlFormula::Not(a) => write!(f, "not ({a})"),
            StlFormula::And(a, b) => write!(f, "(({a}) and ({b}))"),
            StlFormula::Or(a, b) => write!(f, "(({a}) or ({b}))"),
            StlFormula::Always(i, a) => write!(f, "always{i} ({a})"),
            StlFormula::Eventually(i, a) => write!(f, "eventually{i} ({a})"),
            StlFormula::Until(i, a, b) => write!(f, "(({a}) until{i} ({b}))"),
        }
    }
}
