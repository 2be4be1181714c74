#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;

use pbmt::dataflow::{Model, RelOp, SimConfig, Simulator, TestCase, Trace};
use pbmt::lang::parse_model;
use pbmt::stl::{Interval, Predicate, StlFormula, Term};

pub const GAIN_CHAIN: &str = "\
model chain
input u range=[-10,10]
block g Gain k=3
output y
line u.out1 -> g.in1
line g.out1 -> y.in1
";

pub fn model(src: &str) -> Model {
    parse_model(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

pub fn run(m: &Model, test: &TestCase, cfg: &SimConfig) -> Trace {
    Simulator::new(m).unwrap().run(test, cfg).unwrap()
}

pub fn test(values: &[(&str, &[f64])]) -> TestCase {
    TestCase::new(values.iter().map(|(n, v)| (n.to_string(), v.to_vec())).collect::<BTreeMap<_, _>>())
}

/// One generated block: kind text plus indices choosing its input sources.
#[derive(Debug, Clone)]
pub struct GenBlock {
    pub kind: String,
    pub arity: usize,
    pub sources: Vec<usize>,
}

fn num() -> impl Strategy<Value = f64> {
    (-40i32..40).prop_map(|v| v as f64 / 4.0)
}

fn gen_kind() -> impl Strategy<Value = (String, usize)> {
    prop_oneof![
        num().prop_map(|v| (format!("Constant value={v}"), 0)),
        num().prop_map(|k| (format!("Gain k={k}"), 1)),
        prop::collection::vec(any::<bool>(), 1..4).prop_map(|s| {
            let signs: String = s.iter().map(|p| if *p { '+' } else { '-' }).collect();
            let n = signs.len();
            (format!("Sum signs={signs}"), n)
        }),
        Just(("Product inputs=2".to_string(), 2)),
        Just(("Abs".to_string(), 1)),
        Just(("UnaryMinus".to_string(), 1)),
        prop::sample::select(vec!["<", "<=", ">", ">=", "==", "!="]).prop_map(|op| (format!("Relational op={op}"), 2)),
        prop::sample::select(vec!["AND", "OR"]).prop_map(|op| (format!("Logical op={op} inputs=2"), 2)),
        Just(("Logical op=NOT".to_string(), 1)),
        num().prop_map(|t| (format!("Switch threshold={t}"), 3)),
        (num(), 0u8..20).prop_map(|(lo, w)| (format!("Saturation lo={lo} hi={}", lo + w as f64 / 2.0), 1)),
        num().prop_map(|i| (format!("UnitDelay init={i}"), 1)),
        num().prop_map(|i| (format!("DiscreteIntegrator init={i}"), 1)),
        prop::collection::vec(num(), 2..5).prop_map(|t| {
            let bps: Vec<String> = (0..t.len()).map(|i| (i as f64 * 2.0 - 3.0).to_string()).collect();
            let tab: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            (format!("Lookup1D breakpoints=[{}] table=[{}]", bps.join(","), tab.join(",")), 1)
        }),
    ]
}

fn gen_block() -> impl Strategy<Value = GenBlock> {
    (gen_kind(), prop::collection::vec(any::<usize>(), 3))
        .prop_map(|((kind, arity), sources)| GenBlock { kind, arity, sources })
}

fn gen_fault() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        6 => Just(None),
        1 => Just(Some("fault=Negate".to_string())),
        1 => num().prop_map(|c| Some(format!("fault=Bias(offset={c})"))),
        1 => (1usize..4).prop_map(|d| Some(format!("fault=TimeDelay(samples={d})"))),
        1 => any::<u16>().prop_map(|s| Some(format!("fault=Noise(sigma=0.5,seed={s})"))),
    ]
}

/// Source text of a random valid feed-forward model over inputs `u1`, `u2`
/// with one output `y` fed by the last block. Optional line faults.
pub fn model_source() -> impl Strategy<Value = String> {
    (prop::collection::vec(gen_block(), 1..8), prop::collection::vec(gen_fault(), 30)).prop_map(|(blocks, faults)| {
        let mut s = String::from("model gen\ninput u1 range=[-5,5]\ninput u2 range=[0,3]\noutput y\n");
        let mut lines = Vec::new();
        let mut signals = vec!["u1".to_string(), "u2".to_string()];
        for (i, b) in blocks.iter().enumerate() {
            s.push_str(&format!("block b{i} {}\n", b.kind));
            for p in 0..b.arity {
                let src = &signals[b.sources[p % b.sources.len()].wrapping_add(p) % signals.len()];
                lines.push(format!("{src}.out1 -> b{i}.in{}", p + 1));
            }
            signals.push(format!("b{i}"));
        }
        lines.push(format!("b{}.out1 -> y.in1", blocks.len() - 1));
        for (l, f) in lines.iter().zip(faults.iter().cycle()) {
            match f {
                Some(f) => s.push_str(&format!("line {l} {f}\n")),
                None => s.push_str(&format!("line {l}\n")),
            }
        }
        s
    })
}

/// Random in-range tests for [`model_source`] models.
pub fn gen_test(q_t: usize) -> impl Strategy<Value = TestCase> {
    (prop::collection::vec(-5.0..5.0f64, q_t), prop::collection::vec(0.0..3.0f64, q_t))
        .prop_map(|(a, b)| TestCase::new([("u1".to_string(), a), ("u2".to_string(), b)].into()))
}

fn rel_op() -> impl Strategy<Value = RelOp> {
    prop::sample::select(vec![RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge, RelOp::Eq, RelOp::Ne])
}

fn predicate() -> impl Strategy<Value = Predicate> {
    (
        prop_oneof![
            3 => prop::sample::select(vec!["a", "b"]).prop_map(|s| Term::Signal(s.into())),
            1 => Just(Term::AbsDiff("a".into(), "b".into())),
        ],
        rel_op(),
        (-8i32..8).prop_map(|c| c as f64 / 2.0),
    )
        .prop_map(|(term, op, threshold)| Predicate { term, op, threshold })
}

fn interval() -> impl Strategy<Value = Interval> {
    prop_oneof![
        1 => Just(Interval::UNBOUNDED),
        1 => (0u8..4).prop_map(|lo| Interval { lo: lo as f64, hi: None }),
        4 => (0u8..5, 0u8..5).prop_map(|(lo, w)| Interval::new(lo as f64, (lo + w) as f64)),
    ]
}

/// Random formulas over signals `a` and `b` with nesting depth at most `depth`.
pub fn formula(depth: u32) -> impl Strategy<Value = StlFormula> {
    let leaf = prop_oneof![4 => predicate().prop_map(StlFormula::Pred), 1 => predicate().prop_map(StlFormula::Rise)];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(StlFormula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.or(b)),
            (interval(), inner.clone()).prop_map(|(i, a)| StlFormula::always(i, a)),
            (interval(), inner.clone()).prop_map(|(i, a)| StlFormula::eventually(i, a)),
            (interval(), inner.clone(), inner).prop_map(|(i, a, b)| StlFormula::until(i, a, b)),
        ]
    })
}

/// A trace over signals `a` and `b` with unit sample time. Values are small
/// integers so predicate robustness is often exactly zero.
pub fn ab_trace(max_len: usize) -> impl Strategy<Value = Trace> {
    (1..=max_len).prop_flat_map(|k| {
        (prop::collection::vec(-8i32..8, k), prop::collection::vec(-8i32..8, k)).prop_map(|(a, b)| {
            let f = |v: Vec<i32>| v.into_iter().map(|x| x as f64 / 2.0).collect::<Vec<f64>>();
            Trace::from_signals(1.0, [("a", f(a)), ("b", f(b))]).unwrap()
        })
    })
}

pub const UNIT: SimConfig = SimConfig { sample_time: 1.0, horizon: 10.0 };
