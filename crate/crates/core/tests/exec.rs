mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{build_one, gen_program};
use mctest_core::exec::{deserialize_trace, execute, serialize_trace, Event, Outcome, TestInput, Trace};
use mctest_core::ir::{CheckKind, Dir, IrModule, PointKind};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn input(values: &[i32]) -> TestInput {
    TestInput {
        bindings: values.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect(),
        fresh: BTreeMap::new(),
    }
}

/// Points the events say were reached.
fn covered_from_events(m: &IrModule, t: &Trace) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for e in &t.events {
        match e {
            Event::Stmt(p) => {
                out.insert(*p);
            }
            Event::Branch { site, dir } => {
                if let Some(p) = m.branch_sites[*site as usize].points {
                    out.insert(p[if *dir == Dir::Then { 0 } else { 1 }]);
                }
            }
            Event::CheckFailed(s) => {
                out.insert(m.check_sites[*s as usize].fail_point);
            }
            _ => {}
        }
    }
    out
}

const ABS: &str = "int abs(int x) {\n    if (x < 0) {\n        return -x;\n    }\n    return x;\n}\n";

#[test]
fn abs_of_negative_completes_through_the_then_edge() {
    let b = build_one(ABS, &["abs"]);
    let p = &b.plans[0];
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&[-3]), 1000).unwrap();
    assert_eq!(t.outcome, Outcome::Completed);
    let branches: Vec<_> = t.events.iter().filter(|e| matches!(e, Event::Branch { .. })).collect();
    assert_eq!(branches.len(), 1);
    assert!(matches!(branches[0], Event::Branch { dir: Dir::Then, .. }));
    assert_eq!(t.covered, covered_from_events(&b.module, &t));
    // statement `return x;` is the only one left out
    let stmts = b.module.points_of("abs").filter(|p| p.kind == PointKind::Stmt).count();
    let hit = t.covered.iter().filter(|p| b.module.points[**p as usize].kind == PointKind::Stmt).count();
    assert_eq!((stmts, hit), (3, 2));
}

#[test]
fn zero_divisor_stops_at_the_check() {
    let b = build_one("int div(int a, int b) {\n    return a / b;\n}\n", &["div"]);
    let p = &b.plans[0];
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&[7, 0]), 1000).unwrap();
    let Outcome::ErrorFound(site) = t.outcome else { panic!("{:?}", t.outcome) };
    assert_eq!(b.module.check_sites[site as usize].kind, CheckKind::DivByZero);
    let last_dir = t.events.iter().rev().find(|e| matches!(e, Event::CheckFailed(_) | Event::CheckPassed(_)));
    assert_eq!(last_dir, Some(&Event::CheckFailed(site)));
    let ok = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&[7, 2]), 1000).unwrap();
    assert_eq!(ok.outcome, Outcome::Completed);
}

#[test]
fn infinite_loop_exhausts_the_step_budget() {
    let b = build_one("void spin(int x) {\n    while (true) {\n        x = x + 1;\n    }\n}\n", &["spin"]);
    let p = &b.plans[0];
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&[0]), 1000).unwrap();
    assert_eq!(t.outcome, Outcome::StepBudgetExceeded);
}

#[test]
fn unbound_symbol_is_an_error() {
    let b = build_one(ABS, &["abs"]);
    let p = &b.plans[0];
    assert!(execute(&b.module, &p.driver_name, &p.symbol_map, &TestInput::default(), 1000).is_err());
    assert!(execute(&b.module, "__DRIVER_nothing", &p.symbol_map, &input(&[1]), 1000).is_err());
}

#[test]
fn trace_text_lines() {
    let t = Trace {
        events: vec![Event::Branch { site: 7, dir: Dir::Then }, Event::CheckFailed(2)],
        outcome: Outcome::ErrorFound(2),
        input: input(&[5]),
        covered: BTreeSet::from([1, 4]),
    };
    let text = serialize_trace(&t);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["TRACE error 2", "IN 0 5", "BR 7 T", "CF 2", "COV 1 4"]);
    assert_eq!(deserialize_trace(&text).unwrap(), t);
    assert!(deserialize_trace("").is_err());
    assert!(deserialize_trace("TRACE done\n").is_err());
}

fn random_run(seed: u64) -> (IrModule, Trace, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = gen_program(&mut rng).render();
    let b = build_one(&text, &["f"]);
    let p = &b.plans[0];
    let args: Vec<i32> = (0..3).map(|_| rng.gen_range(-40..=40)).collect();
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&args), 200_000).unwrap();
    let again = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&args), 200_000).unwrap();
    assert_eq!(t, again, "execution is deterministic");
    (b.module, t, text)
}

#[test]
fn traces_round_trip_and_agree_with_coverage() {
    let mut runner = TestRunner::new_with_rng(
        Config { cases: 150, ..Config::default() },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[5; 32]),
    );
    runner
        .run(&any::<u64>(), |seed| {
            let (m, t, src) = random_run(seed);
            let text = serialize_trace(&t);
            prop_assert_eq!(deserialize_trace(&text).unwrap(), t.clone(), "{}", src);
            prop_assert_eq!(&t.covered, &covered_from_events(&m, &t));
            let ends_in_failure = matches!(t.events.last(), Some(Event::CheckFailed(_)));
            prop_assert_eq!(matches!(t.outcome, Outcome::ErrorFound(_)), ends_in_failure);
            Ok(())
        })
        .unwrap();
}
