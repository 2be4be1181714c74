mod common;

use common::*;
use proptest::prelude::*;

use pbmt::bundled::MINI_ATC;
use pbmt::dataflow::{validate_model, InputRange, RelOp};
use pbmt::lang::{parse_model, parse_stl, parse_stl_for_signals, serialize_model, ModelErrorKind, StlParseError};
use pbmt::stl::{Interval, StlFormula, Term};

#[test]
fn gain_chain_counts() {
    let m = model(GAIN_CHAIN);
    assert_eq!(m.name, "chain");
    assert_eq!(m.blocks.len(), 3);
    assert_eq!(m.lines.len(), 2);
    assert_eq!(serialize_model(&m), GAIN_CHAIN);
}

#[test]
fn undeclared_block_reports_its_line() {
    let err = parse_model("input u range=[0,1]\noutput y\nline u.out1 -> y.in1\nline nowhere.out1 -> y.in1\n").unwrap_err();
    assert_eq!(err.kind, ModelErrorKind::SyntaxError);
    assert_eq!(err.line, 4);
}

#[test]
fn unknown_kind_and_duplicate_id() {
    let err = parse_model("block a Integrate\n").unwrap_err();
    assert_eq!((err.kind, err.line, err.column), (ModelErrorKind::UnknownBlockKind, 1, 9));
    let err = parse_model("block a Gain k=1\nblock a Gain k=2\n").unwrap_err();
    assert_eq!((err.kind, err.line), (ModelErrorKind::DuplicateId, 2));
}

#[test]
fn bundled_atc_inputs() {
    let m = parse_model(MINI_ATC.model).unwrap();
    assert!(validate_model(&m).is_empty());
    let inputs = m.inputs();
    assert_eq!(
        inputs,
        vec![("throttle".to_string(), InputRange::new(0.0, 100.0)), ("brake".to_string(), InputRange::new(0.0, 100.0))]
    );
    assert_eq!(m.outputs(), vec!["v".to_string(), "w".to_string()]);
}

#[test]
fn atc_property_shape() {
    let m = parse_model(MINI_ATC.model).unwrap();
    let phi = parse_stl("always (v <= 120 and w <= 4500)", &m).unwrap();
    let StlFormula::Always(i, body) = &phi else { panic!("{phi:?}") };
    assert!(i.is_unbounded_from_zero());
    assert!(matches!(**body, StlFormula::And(..)));
    let preds = phi.predicates();
    assert_eq!(preds.len(), 2);
    assert_eq!((preds[0].op, preds[0].threshold), (RelOp::Le, 120.0));
    assert_eq!((preds[1].op, preds[1].threshold), (RelOp::Le, 4500.0));
}

#[test]
fn actuator_property_shape() {
    let src = "always (rise(cmd >= 0.09) -> eventually[0,2] always[0,1] (abs(cmd - pos) <= 0.02))";
    let phi = parse_stl_for_signals(src, &["cmd", "pos"]).unwrap();
    let StlFormula::Always(_, body) = &phi else { panic!() };
    // p -> q is stored as (not p) or q.
    let StlFormula::Or(lhs, rhs) = &**body else { panic!("{body:?}") };
    let StlFormula::Not(rise) = &**lhs else { panic!() };
    assert!(matches!(&**rise, StlFormula::Rise(p) if p.threshold == 0.09));
    let StlFormula::Eventually(ev, inner) = &**rhs else { panic!() };
    assert_eq!(*ev, Interval::new(0.0, 2.0));
    let StlFormula::Always(al, pred) = &**inner else { panic!() };
    assert_eq!(*al, Interval::new(0.0, 1.0));
    assert!(matches!(&**pred, StlFormula::Pred(p) if p.term == Term::AbsDiff("cmd".into(), "pos".into())));
}

#[test]
fn stl_errors() {
    assert!(matches!(parse_stl_for_signals("eventually[3,1] (x > 0)", &["x"]), Err(StlParseError::BadInterval { .. })));
    assert!(matches!(
        parse_stl_for_signals("always (speed > 0)", &["x"]),
        Err(StlParseError::UnknownSignal { column: 9, .. })
    ));
    assert!(matches!(parse_stl_for_signals("x >", &["x"]), Err(StlParseError::Syntax { .. })));
    assert!(matches!(parse_stl_for_signals("(x > 1", &["x"]), Err(StlParseError::Syntax { .. })));
}

#[test]
fn stl_precedence() {
    let s = ["a", "b", "c", "d"];
    let p = |src| parse_stl_for_signals(src, &s).unwrap();
    assert_eq!(p("not a > 0 and b > 0 or c > 0 -> d > 0"), p("(((not (a > 0)) and (b > 0)) or (c > 0)) -> (d > 0)"));
    assert_eq!(p("a > 0 -> b > 0 -> c > 0"), p("a > 0 -> (b > 0 -> c > 0)"));
}

#[test]
fn subsystem_round_trip() {
    let src = "model h\ninput u range=[0,1]\noutput y\nsubsystem s {\n  input a\n  output b\n  block g Gain k=2\n  \
               line a.out1 -> g.in1\n  line g.out1 -> b.in1\n}\nline u.out1 -> s.in1\nline s.out1 -> y.in1\n";
    let m = model(src);
    let text = serialize_model(&m);
    assert!(text.contains("subsystem s {\n"));
    assert_eq!(model(&text), m);
    assert!(parse_model("subsystem s {\n").is_err());
    assert!(parse_model("}\n").is_err());
}

#[test]
fn faults_round_trip() {
    let src = "model f\ninput u range=[0,1]\noutput y\nline u.out1 -> y.in1 fault=PackageDrop(p=0.25,seed=9)\n";
    let m = model(src);
    assert_eq!(serialize_model(&m), src);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn model_round_trip(src in model_source()) {
        let m = model(&src);
        prop_assert!(validate_model(&m).is_empty(), "{}", src);
        let text = serialize_model(&m);
        prop_assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn model_parser_is_total(src in "[a-z0-9 =.>\\[\\](){},#\\n-]{0,80}") {
        if let Err(e) = parse_model(&src) {
            prop_assert!(e.line >= 1 && e.column >= 1);
        }
    }

    #[test]
    fn stl_parser_is_total(src in "[a-z0-9 <>=!().,\\[\\]-]{0,60}") {
        match parse_stl_for_signals(&src, &["a", "b"]) {
            Ok(_) => {}
            Err(StlParseError::Syntax { line, column, .. })
            | Err(StlParseError::UnknownSignal { line, column, .. })
            | Err(StlParseError::BadInterval { line, column, .. }) => prop_assert!(line >= 1 && column >= 1),
        }
    }

    #[test]
    fn stl_display_reparses(phi in formula(4)) {
        let text = phi.to_string();
        prop_assert_eq!(parse_stl_for_signals(&text, &["a", "b"]).unwrap(), phi);
    }
}
