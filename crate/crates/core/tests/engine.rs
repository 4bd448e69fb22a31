mod common;

use common::build_one;
use mctest_core::engine::{
    check_divergence, run_unit, run_unit_with, Divergence, EngineConfig, Origin, StopReason, Strategy, UnitResult,
};
use mctest_core::exec::{execute, Outcome, TestInput};
use mctest_core::ir::{CheckKind, Dir, EdgeSite};
use mctest_core::pipeline::Built;

fn run(src: &str, target: &str, cfg: &EngineConfig) -> (Built, UnitResult) {
    let b = build_one(src, &[target]);
    let r = run_unit(&b.module, &b.plans[0], cfg, &b.targets);
    (b, r)
}

fn full(r: &UnitResult) -> bool {
    let t = r.coverage.totals();
    t.stmt_covered == t.stmt_total && t.branch_covered == t.branch_total
}

const ABS: &str = "int abs(int x) {\n    if (x < 0) {\n        return -x;\n    }\n    return x;\n}\n";

#[test]
fn abs_is_covered_in_at_most_three_tests() {
    let (_, r) = run(ABS, "abs", &EngineConfig::default());
    assert!(full(&r));
    assert!(r.testcases.len() <= 3, "{} tests", r.testcases.len());
    assert_eq!(r.testcases[0].origin, Origin::Seed);
    assert_eq!(r.stats.stop_reason, StopReason::FullCoverage);
    assert!(r.findings.is_empty());
}

#[test]
fn magic_constant_is_found_by_the_solver() {
    let src = "int magic(int x) {\n    if (x == 1234567) {\n        return 1;\n    }\n    return 0;\n}\n";
    let (_, r) = run(src, "magic", &EngineConfig::default());
    assert!(full(&r));
    let hit = r.testcases.iter().find(|t| t.input.bindings[&0] == 1234567);
    assert!(hit.is_some_and(|t| t.origin != Origin::Seed));
}

#[test]
fn nested_conditions_need_several_flips() {
    let src = "int grade(int a, int b) {\n    int s = a * 3 + b;\n    if (s > 100) {\n        if (a - b == 7) {\n            return 2;\n        }\n        return 1;\n    }\n    return 0;\n}\n";
    for strategy in [Strategy::Ccs, Strategy::Dfs, Strategy::Auto] {
        let cfg = EngineConfig { strategy, ..EngineConfig::default() };
        let (_, r) = run(src, "grade", &cfg);
        assert!(full(&r), "{strategy:?}");
    }
}

#[test]
fn division_finding_reproduces() {
    let src = "int ratio(int a, int b) {\n    if (a > 10) {\n        return a / b;\n    }\n    return 0;\n}\n";
    let (b, r) = run(src, "ratio", &EngineConfig::default());
    assert_eq!(r.findings.len(), 1);
    let f = &r.findings[0];
    assert_eq!(f.kind, CheckKind::DivByZero);
    assert_eq!((f.loc.line, f.func_name.as_str()), (3, "ratio"));
    let p = &b.plans[0];
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &f.reproducing_input, 10_000).unwrap();
    assert_eq!(t.outcome, Outcome::ErrorFound(f.check_id));
    let rec = r.testcases.iter().find(|t| t.id == f.test_id).unwrap();
    assert_eq!(rec.input, f.reproducing_input);
}

#[test]
fn stub_values_are_solved_for() {
    let src = "external int sensor();\nint watch(int limit) {\n    int v = sensor();\n    if (v == 4242 && limit < 3) {\n        return 1;\n    }\n    return 0;\n}\n";
    let (_, r) = run(src, "watch", &EngineConfig::default());
    assert!(full(&r));
    assert!(r.testcases.iter().any(|t| t.input.fresh.values().any(|q| q.first() == Some(&4242))));
}

#[test]
fn max_tests_is_respected() {
    let src = "int steps(int n) {\n    int i = 0;\n    int s = 0;\n    while (i < n) {\n        if (i == 37) {\n            s = s + 2;\n        }\n        s = s + 1;\n        i = i + 1;\n    }\n    return s;\n}\n";
    let cfg = EngineConfig { max_tests: 4, ..EngineConfig::default() };
    let (_, r) = run(src, "steps", &cfg);
    assert!(r.stats.tests_run <= 4);
    assert!(r.testcases.len() <= 4);
    if !full(&r) {
        assert_eq!(r.stats.stop_reason, StopReason::MaxTests);
    }
    let cfg = EngineConfig { max_solver_calls: 1, ..EngineConfig::default() };
    let (_, r) = run(src, "steps", &cfg);
    assert!(r.stats.solver_calls <= 1);
}

#[test]
fn flip_log_verdicts_match_a_prefix_comparison() {
    let src = "int classify(int a, int b, int c) {\n    int t[4];\n    t[0] = a;\n    t[1] = b;\n    t[2] = c;\n    t[3] = a + b;\n    int k = 0;\n    if (c >= 0 && c < 4) {\n        if (t[c] > 10) {\n            k = 1;\n        }\n    }\n    while (a > 0 && k < 3) {\n        a = a - b;\n        k = k + 1;\n    }\n    return k;\n}\n";
    let cfg = EngineConfig { keep_flip_log: true, ..EngineConfig::default() };
    let (_, r) = run(src, "classify", &cfg);
    assert!(!r.flip_log.is_empty());
    let mut consistent = 0;
    for f in &r.flip_log {
        let oracle = match f.expected.iter().zip(&f.actual).position(|(e, a)| e != a) {
            Some(k) => Divergence::Divergent(k),
            None if f.actual.len() < f.expected.len() => Divergence::Divergent(f.actual.len()),
            None => Divergence::Consistent,
        };
        assert_eq!(f.verdict, oracle);
        assert_eq!(check_divergence(&f.expected, &f.actual), oracle);
        // the prediction ends with the flipped direction
        assert_eq!(f.expected.len(), f.flip_index + 1);
        consistent += (oracle == Divergence::Consistent) as u32;
    }
    assert_eq!(r.stats.consistent, consistent);
    assert_eq!(r.stats.consistent + r.stats.divergences, r.flip_log.len() as u32);
}

#[test]
fn divergence_is_reported_at_the_first_mismatch() {
    let e = [(EdgeSite::Branch(0), Dir::Then), (EdgeSite::Check(1), Dir::Else)];
    assert_eq!(check_divergence(&e, &e), Divergence::Consistent);
    let a = [(EdgeSite::Branch(0), Dir::Then), (EdgeSite::Check(1), Dir::Then)];
    assert_eq!(check_divergence(&e, &a), Divergence::Divergent(1));
    assert_eq!(check_divergence(&e, &a[..1]), Divergence::Divergent(1));
}

#[test]
fn runs_are_deterministic_for_a_seed() {
    let src = "int mix(int a, int b) {\n    if (a * b == 42) {\n        return 1;\n    }\n    if (a > b) {\n        return 2;\n    }\n    return 3;\n}\n";
    let cfg = EngineConfig { seed: 5, ..EngineConfig::default() };
    let (_, r1) = run(src, "mix", &cfg);
    let (_, r2) = run(src, "mix", &cfg);
    assert_eq!(r1.testcases, r2.testcases);
    assert_eq!(r1.covered, r2.covered);
}

#[test]
fn manual_tests_follow_the_seed() {
    let b = build_one(ABS, &["abs"]);
    let manual = [TestInput {
        bindings: [(0, -9)].into(),
        fresh: Default::default(),
    }];
    let r = run_unit_with(&b.module, &b.plans[0], &EngineConfig::default(), &b.targets, &manual);
    assert!(full(&r));
    assert_eq!(r.testcases[0].origin, Origin::Seed);
    let m = &r.testcases[1];
    assert_eq!((m.origin, m.input.bindings[&0]), (Origin::Manual, -9));
    // seed and manual test together cover abs, so nothing is generated
    assert_eq!(r.testcases.len(), 2);
}
