mod common;

use common::*;
use proptest::prelude::*;

use pbmt::dataflow::{InputRange, Model, RelOp, SimConfig, TestCase};
use pbmt::mutation::{apply_mutation, MutantDescriptor, MutantModel, ParamValue, Site};
use pbmt::bundled::MINI_ATC;
use pbmt::lang::{parse_model, parse_stl};
use pbmt::stl::{robustness, StlFormula};
use pbmt::testgen::{
    art_generate, brute_force_phi_killable, falsify, min_pairwise_distance, optimize, random_tests, sbtg,
    Evaluation, Grid, KillProblem, OracleError, OracleVerdict, RandomRestart, SearchBudget, UpdateRegistry, BARRIER,
};

/// `y = clamp(1.5 u, 0, 110)`, so `y <= 120` always holds on the original.
const LIMITED: &str = "\
input u range=[0,100]
output y
block g Gain k=1.5
block lim Saturation lo=0 hi=110
line u.out1 -> g.in1
line g.out1 -> lim.in1
line lim.out1 -> y.in1
";

const CFG: SimConfig = SimConfig { sample_time: 1.0, horizon: 3.0 };

fn phi() -> StlFormula {
    StlFormula::always(pbmt::stl::Interval::UNBOUNDED, StlFormula::pred("y", RelOp::Le, 120.0))
}

fn fault(m: &Model, op: &str, key: &str, value: f64) -> MutantModel {
    let d = MutantDescriptor {
        id: "m0000".into(),
        operator: op.into(),
        site: Site::Line("y.in1".into()),
        params: [(key.to_string(), ParamValue::Real(value))].into(),
        seed: 1,
    };
    apply_mutation(m, &d).unwrap()
}

fn constant(u: f64) -> TestCase {
    test(&[("u", &[u])])
}

fn inputs() -> Vec<(String, InputRange)> {
    vec![("u".into(), InputRange::new(0.0, 100.0)), ("w".into(), InputRange::new(-1.0, 1.0))]
}

#[test]
fn feasible_fitness_is_the_distance() {
    let m = model(LIMITED);
    let mutant = fault(&m, "StuckAt", "value", 130.0);
    let phi = phi();
    let problem = KillProblem::new(&m, &mutant, &phi, &CFG).unwrap();
    let f = problem.evaluate(&constant(0.0));
    assert!(f.feasible);
    assert_eq!((f.rho_orig, f.rho_mut), (120.0, -10.0));
    assert_eq!(f.distance, 260.0);
    assert_eq!(f.penalized_value, 260.0);
}

#[test]
fn infeasible_fitness_is_penalized_below_every_feasible_value() {
    let m = model(LIMITED);
    let mutant = fault(&m, "Bias", "offset", 5.0);
    let phi = phi();
    let problem = KillProblem::new(&m, &mutant, &phi, &CFG).unwrap();
    assert_eq!((problem.weights.w1, problem.weights.w2), (10_000.0, 10_000.0));
    let f = problem.evaluate(&constant(100.0));
    assert!(!f.feasible);
    assert_eq!((f.rho_orig, f.rho_mut, f.distance), (10.0, 5.0, 10.0));
    assert_eq!(f.penalized_value, 10.0 - 10_000.0 * 5.0 - BARRIER);
    assert!(f.penalized_value < 0.0);
}

#[test]
fn sbtg_finds_kill_for_stuck_limiter_output() {
    let m = model(LIMITED);
    let mutant = fault(&m, "StuckAt", "value", 130.0);
    let out = sbtg(&m, &mutant, &phi(), &CFG, 2, &SearchBudget::new(4, 10, 3)).unwrap();
    let t = out.test.expect("kill found");
    assert!(out.best.feasible && out.best.rho_orig > 0.0 && out.best.rho_mut < 0.0);
    assert!(out.log.is_monotone());
    let phi = phi();
    assert!(KillProblem::new(&m, &mutant, &phi, &CFG).unwrap().evaluate(&t).feasible);
}

#[test]
fn sbtg_searches_for_a_narrow_kill() {
    // Killed only when some control point exceeds 70.
    let m = model(LIMITED);
    let mutant = fault(&m, "Bias", "offset", 15.0);
    let out = sbtg(&m, &mutant, &phi(), &CFG, 2, &SearchBudget::new(6, 30, 8)).unwrap();
    let t = out.test.expect("kill found");
    assert!(t.inputs["u"].iter().any(|u| *u > 70.0), "{t:?}");
}

#[test]
fn sbtg_reports_no_test_without_a_kill() {
    let m = model(LIMITED);
    let mutant = fault(&m, "Bias", "offset", -5.0);
    let out = sbtg(&m, &mutant, &phi(), &CFG, 2, &SearchBudget::new(4, 5, 3)).unwrap();
    assert!(out.test.is_none());
    assert!(!out.best.feasible);
    assert_eq!(out.log.best_per_iteration.len(), 6);
    assert_eq!(out.log.evaluations, 24);
}

#[test]
fn zero_iterations_evaluates_only_the_initial_population() {
    let m = model(LIMITED);
    let mutant = fault(&m, "Bias", "offset", -5.0);
    let out = sbtg(&m, &mutant, &phi(), &CFG, 2, &SearchBudget::new(5, 0, 3)).unwrap();
    assert_eq!(out.log.best_per_iteration.len(), 1);
    assert_eq!(out.log.evaluations, 5);
    assert!(sbtg(&m, &mutant, &phi(), &CFG, 2, &SearchBudget::new(0, 3, 3)).is_err());
    assert!(sbtg(&m, &mutant, &phi(), &CFG, 0, &SearchBudget::new(2, 3, 3)).is_err());
}

#[test]
fn falsification_targets_the_mutant_alone() {
    let m = model(LIMITED);
    let budget = SearchBudget::new(4, 5, 2);
    let stuck = falsify(&fault(&m, "StuckAt", "value", 130.0), &phi(), &CFG, 2, &budget).unwrap();
    assert!(stuck.test.is_some());
    let fine = falsify(&fault(&m, "Bias", "offset", -5.0), &phi(), &CFG, 2, &budget).unwrap();
    assert!(fine.test.is_none());
    assert!(fine.log.is_monotone());
}

#[test]
fn grid_oracle_verdicts() {
    let m = model(LIMITED);
    let phi = phi();
    let killable = fault(&m, "Bias", "offset", 15.0);
    let grid = Grid::uniform(&m.inputs(), 3);
    assert_eq!(grid.levels[0].1, vec![0.0, 50.0, 100.0]);
    let p = KillProblem::new(&m, &killable, &phi, &CFG).unwrap();
    let OracleVerdict::KillableOnGrid { witness, index } = brute_force_phi_killable(&p, &grid, 1).unwrap() else {
        panic!("expected a kill")
    };
    assert_eq!(index, 2);
    assert_eq!(witness, constant(100.0));
    assert!(p.evaluate(&witness).feasible);

    let harmless = fault(&m, "Bias", "offset", 5.0);
    let p = KillProblem::new(&m, &harmless, &phi, &CFG).unwrap();
    assert_eq!(brute_force_phi_killable(&p, &grid, 2).unwrap(), OracleVerdict::NotKillableOnGrid { tests: 9 });
}

#[test]
fn stuck_speed_on_bundled_transmission() {
    let m = parse_model(MINI_ATC.model).unwrap();
    let phi = parse_stl(MINI_ATC.property, &m).unwrap();
    let d = MutantDescriptor {
        id: "m0000".into(),
        operator: "StuckAt".into(),
        site: Site::Line("v.in1".into()),
        params: [("value".to_string(), ParamValue::Real(130.0))].into(),
        seed: 0,
    };
    let mutant = apply_mutation(&m, &d).unwrap();
    let cfg = SimConfig { sample_time: 0.5, horizon: 20.0 };
    let p = KillProblem::new(&m, &mutant, &phi, &cfg).unwrap();
    let OracleVerdict::KillableOnGrid { witness, .. } = brute_force_phi_killable(&p, &Grid::uniform(&m.inputs(), 3), 2).unwrap()
    else {
        panic!("expected a kill")
    };
    let rho = |model: &Model| robustness(&run(model, &witness, &cfg), &phi, &cfg).unwrap().value;
    assert!(rho(&m) > 0.0);
    assert_eq!(rho(&mutant.model), -10.0);
}

#[test]
fn witness_values_extend_the_grid() {
    let m = model(LIMITED);
    let phi = phi();
    // Any control value above 70 kills; the coarse grid has none until 72 is added.
    let killable = fault(&m, "Bias", "offset", 15.0);
    let p = KillProblem::new(&m, &killable, &phi, &CFG).unwrap();
    let coarse = Grid { levels: vec![("u".into(), vec![0.0, 60.0])] };
    assert!(!brute_force_phi_killable(&p, &coarse, 2).unwrap().is_killable());
    let augmented = coarse.with_test(&test(&[("u", &[10.0, 72.0])]));
    assert_eq!(augmented.levels[0].1, vec![0.0, 10.0, 60.0, 72.0]);
    assert!(brute_force_phi_killable(&p, &augmented, 2).unwrap().is_killable());
}

#[test]
fn oversized_grid_is_refused() {
    let m = model(LIMITED);
    let phi = phi();
    let mutant = fault(&m, "Bias", "offset", 15.0);
    let p = KillProblem::new(&m, &mutant, &phi, &CFG).unwrap();
    let grid = Grid::uniform(&m.inputs(), 11);
    assert_eq!(brute_force_phi_killable(&p, &grid, 6), Err(OracleError::GridTooLarge { size: 1_771_561 }));
}

#[test]
fn art_single_test_and_determinism() {
    let one = art_generate(&inputs(), 3, 1, 10, 5).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].inputs["u"].len(), 3);
    let a = art_generate(&inputs(), 3, 12, 10, 5).unwrap();
    assert_eq!(a, art_generate(&inputs(), 3, 12, 10, 5).unwrap());
    assert_ne!(a, art_generate(&inputs(), 3, 12, 10, 6).unwrap());
}

#[test]
fn art_spreads_tests_further_than_random() {
    let (mut art, mut rnd) = (0.0, 0.0);
    for seed in 0..10 {
        art += min_pairwise_distance(&inputs(), 2, &art_generate(&inputs(), 2, 15, 10, seed).unwrap());
        rnd += min_pairwise_distance(&inputs(), 2, &random_tests(&inputs(), 2, 15, seed).unwrap());
    }
    assert!(art > rnd, "art {art} random {rnd}");
}

#[test]
fn update_rules_by_name() {
    let reg = UpdateRegistry::standard();
    assert_eq!(reg.names(), vec!["drift", "random"]);
    assert!(reg.get("drift").is_some());
    assert!(reg.get("annealing").is_none());
    let out = optimize(2, &SearchBudget::new(4, 20, 1), &RandomRestart, |x| Evaluation {
        value: -(x[0] - 0.3).powi(2) - (x[1] - 0.6).powi(2),
        done: false,
        detail: (),
    })
    .unwrap();
    assert!(out.log.is_monotone());
    assert_eq!(out.log.evaluations, 84);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_logs_never_regress(seed in any::<u64>(), offset in -20.0..20.0f64, pop in 1usize..6, iters in 0usize..8) {
        let m = model(LIMITED);
        let mutant = fault(&m, "Bias", "offset", offset);
        let out = sbtg(&m, &mutant, &phi(), &CFG, 2, &SearchBudget::new(pop, iters, seed)).unwrap();
        prop_assert!(out.log.is_monotone());
        prop_assert!(out.log.best_per_iteration.len() <= iters + 1);
        prop_assert_eq!(out.test.is_some(), out.best.feasible);
        let f = falsify(&mutant, &phi(), &CFG, 2, &SearchBudget::new(pop, iters, seed)).unwrap();
        prop_assert!(f.log.is_monotone());
    }

    #[test]
    fn art_tests_stay_in_range(seed in any::<u64>(), n in 1usize..10, q_t in 1usize..5) {
        for t in art_generate(&inputs(), q_t, n, 5, seed).unwrap() {
            prop_assert!(t.inputs["u"].iter().all(|v| (0.0..=100.0).contains(v)));
            prop_assert!(t.inputs["w"].iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert_eq!(t.inputs["u"].len(), q_t);
        }
    }
}
