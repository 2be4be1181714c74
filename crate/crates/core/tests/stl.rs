mod common;

use common::*;
use proptest::prelude::*;

use pbmt::dataflow::{RelOp, Trace};
use pbmt::stl::{boolean_sat, robustness, robustness_signal, Interval, Predicate, StlError, StlFormula, Term};

fn rho(t: &Trace, phi: &StlFormula) -> f64 {
    robustness(t, phi, &UNIT).unwrap().value
}

fn v(values: &[f64]) -> Trace {
    Trace::from_signals(1.0, [("v", values.to_vec())]).unwrap()
}

/// Plain recursive robustness, one sample at a time.
fn naive(t: &Trace, phi: &StlFormula, j: usize) -> f64 {
    let k = t.len();
    let window = |i: &Interval| -> Option<(usize, usize)> {
        let lo = i.lo.round() as usize;
        let start = j + lo;
        if start >= k {
            return None;
        }
        Some((start, i.hi.map_or(k - 1, |h| (j + h.round() as usize).min(k - 1))))
    };
    let pred = |p: &Predicate, j: usize| {
        let x = match &p.term {
            Term::Signal(s) => t.signal(s).unwrap()[j],
            Term::AbsDiff(a, b) => (t.signal(a).unwrap()[j] - t.signal(b).unwrap()[j]).abs(),
        };
        p.robustness(x)
    };
    match phi {
        StlFormula::Pred(p) => pred(p, j),
        StlFormula::Rise(p) => {
            if j == 0 {
                f64::NEG_INFINITY
            } else {
                pred(p, j).min(-pred(p, j - 1))
            }
        }
        StlFormula::Not(a) => -naive(t, a, j),
        StlFormula::And(a, b) => naive(t, a, j).min(naive(t, b, j)),
        StlFormula::Or(a, b) => naive(t, a, j).max(naive(t, b, j)),
        StlFormula::Always(i, a) => match window(i) {
            None => f64::INFINITY,
            Some((s, e)) => (s..=e).map(|jp| naive(t, a, jp)).fold(f64::INFINITY, f64::min),
        },
        StlFormula::Eventually(i, a) => match window(i) {
            None => f64::NEG_INFINITY,
            Some((s, e)) => (s..=e).map(|jp| naive(t, a, jp)).fold(f64::NEG_INFINITY, f64::max),
        },
        StlFormula::Until(i, a, b) => match window(i) {
            None => f64::NEG_INFINITY,
            Some((s, e)) => (s..=e)
                .map(|jp| {
                    let before = (j..jp).map(|jq| naive(t, a, jq)).fold(f64::INFINITY, f64::min);
                    naive(t, b, jp).min(before)
                })
                .fold(f64::NEG_INFINITY, f64::max),
        },
    }
}

#[test]
fn constant_speed_has_margin_twenty() {
    let phi = StlFormula::always(Interval::UNBOUNDED, StlFormula::pred("v", RelOp::Le, 120.0));
    assert_eq!(rho(&v(&[100.0; 8]), &phi), 20.0);
    assert!(boolean_sat(&v(&[100.0; 8]), &phi, &UNIT).unwrap());
    assert_eq!(rho(&v(&[100.0, 130.0, 100.0]), &phi), -10.0);
    assert!(!boolean_sat(&v(&[100.0, 130.0, 100.0]), &phi, &UNIT).unwrap());
}

#[test]
fn negation_flips_sign() {
    let phi = StlFormula::eventually(Interval::new(1.0, 2.0), StlFormula::pred("v", RelOp::Gt, 3.0));
    let t = v(&[1.0, 5.0, 2.0, 7.0]);
    assert_eq!(rho(&t, &phi.clone().not()), -rho(&t, &phi));
    assert_eq!(rho(&t, &phi), 2.0);
}

#[test]
fn interval_bounds_round_to_nearest_sample() {
    let cfg = pbmt::dataflow::SimConfig { sample_time: 0.4, horizon: 2.0 };
    let t = Trace::from_signals(0.4, [("v", vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0])]).unwrap();
    // [0.5, 1.0] s covers samples 1..=3 (0.5/0.4 = 1.25, 1.0/0.4 = 2.5 rounds up).
    let phi = StlFormula::eventually(Interval::new(0.5, 1.0), StlFormula::pred("v", RelOp::Ge, 10.0));
    assert_eq!(robustness(&t, &phi, &cfg).unwrap().value, 3.0 - 10.0);
}

#[test]
fn missing_signal_is_reported() {
    let phi = StlFormula::pred("w", RelOp::Le, 1.0);
    assert!(matches!(robustness(&v(&[1.0]), &phi, &UNIT), Err(StlError::MissingSignal(s)) if s == "w"));
    assert!(matches!(boolean_sat(&v(&[1.0]), &phi, &UNIT), Err(StlError::MissingSignal(_))));
}

#[test]
fn stabilisation_after_rise() {
    let phi = StlFormula::always(
        Interval::UNBOUNDED,
        StlFormula::Rise(Predicate::new(Term::Signal("cmd".into()), RelOp::Ge, 0.09)).implies(
            StlFormula::eventually(
                Interval::new(0.0, 2.0),
                StlFormula::always(
                    Interval::new(0.0, 1.0),
                    StlFormula::Pred(Predicate::new(Term::AbsDiff("cmd".into(), "pos".into()), RelOp::Le, 0.02)),
                ),
            ),
        ),
    );
    let cmd = vec![0.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
    let settles = Trace::from_signals(1.0, [("cmd", cmd.clone()), ("pos", vec![0.0, 0.0, 0.05, 0.1, 0.1, 0.1, 0.1])]).unwrap();
    let stuck = Trace::from_signals(1.0, [("cmd", cmd), ("pos", vec![0.0; 7])]).unwrap();
    assert!(rho(&settles, &phi) > 0.0);
    assert!(boolean_sat(&settles, &phi, &UNIT).unwrap());
    assert!(rho(&stuck, &phi) < 0.0);
    assert!(!boolean_sat(&stuck, &phi, &UNIT).unwrap());
}

#[test]
fn pointwise_signal_matches_naive() {
    let t = Trace::from_signals(1.0, [("a", vec![1.0, -2.0, 3.0, 0.5, -1.0]), ("b", vec![0.0, 2.0, -1.0, 1.0, 4.0])]).unwrap();
    let phi = StlFormula::until(Interval::new(0.0, 3.0), StlFormula::pred("a", RelOp::Gt, -1.5), StlFormula::pred("b", RelOp::Ge, 1.0));
    let sig = robustness_signal(&t, &phi, &UNIT).unwrap();
    for (j, r) in sig.iter().enumerate() {
        assert_eq!(*r, naive(&t, &phi, j), "j={j}");
    }
}

const SLOT: f64 = 1000.0;

/// Formulas in which the slot predicate `a <= SLOT` only occurs positively.
fn positive() -> impl Strategy<Value = StlFormula> {
    Just(StlFormula::pred("a", RelOp::Le, SLOT)).prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), formula(1)).prop_map(|(f, g)| f.and(g)),
            (inner.clone(), formula(1)).prop_map(|(f, g)| f.or(g)),
            (inner.clone(), 0u8..3, 0u8..3)
                .prop_map(|(f, lo, w)| StlFormula::always(Interval::new(lo as f64, (lo + w) as f64), f)),
            (inner.clone(), 0u8..3).prop_map(|(f, lo)| StlFormula::eventually(Interval { lo: lo as f64, hi: None }, f)),
            (inner, formula(1)).prop_map(|(f, g)| StlFormula::until(Interval::UNBOUNDED, g, f)),
        ]
    })
}

fn fill(phi: &StlFormula, c: f64) -> StlFormula {
    let b = |f: &StlFormula| Box::new(fill(f, c));
    match phi {
        StlFormula::Pred(p) if p.threshold == SLOT => StlFormula::pred("a", RelOp::Le, c),
        StlFormula::Not(a) => StlFormula::Not(b(a)),
        StlFormula::And(x, y) => StlFormula::And(b(x), b(y)),
        StlFormula::Or(x, y) => StlFormula::Or(b(x), b(y)),
        StlFormula::Always(i, a) => StlFormula::Always(*i, b(a)),
        StlFormula::Eventually(i, a) => StlFormula::Eventually(*i, b(a)),
        StlFormula::Until(i, x, y) => StlFormula::Until(*i, b(x), b(y)),
        other => other.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn boolean_agrees_with_robustness_sign(t in ab_trace(12), phi in formula(4)) {
        let r = rho(&t, &phi);
        let sat = boolean_sat(&t, &phi, &UNIT).unwrap();
        if r > 0.0 {
            prop_assert!(sat, "rho {} > 0 but unsatisfied: {}", r, phi);
        } else if r < 0.0 {
            prop_assert!(!sat, "rho {} < 0 but satisfied: {}", r, phi);
        }
    }

    #[test]
    fn always_eventually_duality(t in ab_trace(12), phi in formula(3), lo in 0u8..4, w in prop::option::of(0u8..5)) {
        let i = Interval { lo: lo as f64, hi: w.map(|w| (lo + w) as f64) };
        let lhs = rho(&t, &StlFormula::always(i, phi.clone()));
        let rhs = rho(&t, &StlFormula::eventually(i, phi.not()));
        prop_assert_eq!(lhs, -rhs);
    }

    #[test]
    fn matches_naive_recursion(t in ab_trace(6), phi in formula(3)) {
        let fast = robustness_signal(&t, &phi, &UNIT).unwrap();
        for (j, r) in fast.iter().enumerate() {
            prop_assert_eq!(*r, naive(&t, &phi, j), "j={} phi={}", j, phi);
        }
    }

    #[test]
    fn raising_upper_threshold_never_lowers_robustness(
        t in ab_trace(10),
        phi in positive(),
        c in -4.0..4.0f64,
        d in 0.0..3.0f64,
    ) {
        prop_assert!(rho(&t, &fill(&phi, c + d)) >= rho(&t, &fill(&phi, c)));
    }
}
