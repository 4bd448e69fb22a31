mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{corpus_dir, gen_program};
use mctest_core::ir::{
    enumerate_coverage_points, inject_checks, lower, CheckKind, CheckOperands, IrFunction, IrModule, PointKind,
    PointTotals, Term,
};
use mctest_core::pipeline::prebuild;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lowered(src: &str) -> IrModule {
    let sources = BTreeMap::from([("t.mc".to_string(), src.to_string())]);
    let p = prebuild(&sources).unwrap_or_else(|e| panic!("{e}"));
    lower(&p).unwrap_or_else(|e| panic!("{e}"))
}

fn corpus_module() -> IrModule {
    let mut sources = BTreeMap::new();
    for e in std::fs::read_dir(corpus_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "mc") {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            sources.insert(name, std::fs::read_to_string(&p).unwrap());
        }
    }
    inject_checks(lower(&prebuild(&sources).unwrap()).unwrap())
}

fn terms(f: &IrFunction) -> impl Iterator<Item = &Term> {
    f.blocks.iter().map(|b| &b.term)
}

fn has_cycle(f: &IrFunction) -> bool {
    // iterative three-colour DFS from the entry
    let succ = f.successors();
    let mut state = vec![0u8; f.blocks.len()];
    let mut stack = vec![(0u32, 0usize)];
    state[0] = 1;
    while let Some((b, i)) = stack.pop() {
        let next = &succ[&b];
        if i == next.len() {
            state[b as usize] = 2;
            continue;
        }
        stack.push((b, i + 1));
        let n = next[i];
        match state[n as usize] {
            1 => return true,
            0 => {
                state[n as usize] = 1;
                stack.push((n, 0));
            }
            _ => {}
        }
    }
    false
}

fn checks_of(m: &IrModule, func: &str) -> Vec<(CheckKind, CheckOperands)> {
    let f = m.function(func).unwrap();
    terms(f)
        .filter_map(|t| match t {
            Term::Check { site, operands, .. } => Some((m.check_sites[*site as usize].kind, operands.clone())),
            _ => None,
        })
        .collect()
}

#[test]
fn single_return_is_one_block() {
    let m = lowered("int id(int x) {\n    return x;\n}\n");
    let f = m.function("id").unwrap();
    assert_eq!(f.blocks.len(), 1);
    assert!(matches!(&f.blocks[0].term, Term::Ret(v) if v.len() == 1));
    assert_eq!(enumerate_coverage_points(&m)["id"], PointTotals { stmt: 1, branch: 0 });
}

#[test]
fn short_circuit_and_is_two_conditional_branches() {
    let m = lowered("int both(int a, int b) {\n    if (a > 0 && b > 0) {\n        return 1;\n    }\n    return 0;\n}\n");
    let f = m.function("both").unwrap();
    let condbrs = terms(f).filter(|t| matches!(t, Term::CondBr { .. })).count();
    assert_eq!(condbrs, 2);
    assert_eq!(enumerate_coverage_points(&m)["both"].branch, 4);
    assert!(!has_cycle(f));
}

#[test]
fn while_loop_has_a_back_edge() {
    let m = lowered("int count(int n) {\n    int i = 0;\n    while (i < n) {\n        i = i + 1;\n    }\n    return i;\n}\n");
    let f = m.function("count").unwrap();
    assert!(has_cycle(f));
    assert_eq!(enumerate_coverage_points(&m)["count"], PointTotals { stmt: 4, branch: 2 });
}

#[test]
fn straight_line_and_if_else_totals() {
    let m = lowered(
        "int s(int x) {\n    int y = x + 1;\n    y = y * 2;\n    return y;\n}\n\
         int pick(int x) {\n    if (x > 0) {\n        return 1;\n    } else {\n        return 2;\n    }\n}\n",
    );
    let totals = enumerate_coverage_points(&m);
    assert_eq!(totals["s"], PointTotals { stmt: 3, branch: 0 });
    assert_eq!(totals["pick"], PointTotals { stmt: 3, branch: 2 });
}

#[test]
fn division_gets_a_divisor_check_without_new_branches() {
    let before = lowered("int d(int a, int b) {\n    return a / b;\n}\n");
    let after = inject_checks(before.clone());
    assert_eq!(enumerate_coverage_points(&before), enumerate_coverage_points(&after));
    let checks = checks_of(&after, "d");
    assert_eq!(checks.len(), 1);
    assert!(matches!(checks[0], (CheckKind::DivByZero, CheckOperands::Divisor(_))));
    let site = &after.check_sites[0];
    assert_eq!((site.loc.line, site.func.as_str()), (2, "d"));
    let fail = &after.points[site.fail_point as usize];
    assert!(fail.is_error_edge);
    assert_eq!(fail.kind, PointKind::Branch);
}

#[test]
fn remainder_index_and_assert_checks() {
    let m = inject_checks(lowered(
        "int r(int a, int b) {\n    return a % b;\n}\n\
         int at(int v[4], int i) {\n    return v[i];\n}\n\
         void pos(int x) {\n    assert(x > 0);\n}\n",
    ));
    assert!(matches!(checks_of(&m, "r")[..], [(CheckKind::ModByZero, CheckOperands::Divisor(_))]));
    assert!(matches!(
        checks_of(&m, "at")[..],
        [(CheckKind::IndexOutOfBounds, CheckOperands::Index { bound: 4, .. })]
    ));
    assert!(matches!(checks_of(&m, "pos")[..], [(CheckKind::UserAssert, CheckOperands::Predicate(_))]));
}

#[test]
fn constant_divisor_is_still_checked_by_kind() {
    let m = inject_checks(lowered("int half(int a) {\n    return a / 2;\n}\n"));
    assert!(matches!(checks_of(&m, "half")[..], [(CheckKind::DivByZero, _)]));
}

#[test]
fn branch_points_are_distinct_and_share_the_condition_location() {
    let m = corpus_module();
    assert!(m.branch_sites.len() > 100);
    for bs in &m.branch_sites {
        let [t, e] = bs.points.expect("user branch has points");
        assert_ne!(t, e);
        let (pt, pe) = (&m.points[t as usize], &m.points[e as usize]);
        assert_eq!(pt.loc, pe.loc);
        assert_eq!(pt.loc, bs.loc);
        assert_eq!((pt.kind, pe.kind), (PointKind::Branch, PointKind::Branch));
        assert_ne!(pt.dir, pe.dir);
        assert!(!pt.is_error_edge && !pe.is_error_edge);
    }
}

#[test]
fn point_ids_are_dense_and_check_fail_points_are_error_edges() {
    let m = corpus_module();
    for (i, p) in m.points.iter().enumerate() {
        assert_eq!(p.id as usize, i);
    }
    let fail: BTreeSet<u32> = m.check_sites.iter().map(|c| c.fail_point).collect();
    assert_eq!(fail.len(), m.check_sites.len());
    for p in &m.points {
        assert_eq!(p.is_error_edge, fail.contains(&p.id), "point {}", p.id);
    }
}

#[test]
fn injection_is_idempotent_on_the_corpus() {
    let once = corpus_module();
    assert_eq!(inject_checks(once.clone()), once);
}

#[test]
fn injection_is_idempotent_on_random_programs() {
    let mut runner = TestRunner::new_with_rng(
        Config { cases: 200, ..Config::default() },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[3; 32]),
    );
    runner
        .run(&any::<u64>(), |seed| {
            let text = gen_program(&mut ChaCha8Rng::seed_from_u64(seed)).render();
            let once = inject_checks(lowered(&text));
            prop_assert_eq!(inject_checks(once.clone()), once);
            Ok(())
        })
        .unwrap();
}
