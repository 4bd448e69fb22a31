mod common;

use std::collections::BTreeMap;

use common::{build_one, corpus_dir, gen_program};
use mctest_core::exec::{execute, zero_input, TestInput, Trace};
use mctest_core::ir::{Addr, ArithOp, CellKind, CmpOp, Dir, EdgeSite, Value, Width};
use mctest_core::symex::{ite_chain, replay_symbolic, simplify, SymExpr, SymMemory, Var};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn input(values: &[i32]) -> TestInput {
    TestInput {
        bindings: values.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect(),
        fresh: BTreeMap::new(),
    }
}

fn model_of(t: &Trace) -> impl Fn(Var) -> Option<i32> + '_ {
    move |v| match v {
        Var::Sym(id) => t.input.bindings.get(&id).copied(),
        Var::Fresh(tag, seq) => Some(t.input.fresh_value(tag, seq)),
    }
}

#[test]
fn abs_path_condition() {
    let b = build_one("int abs(int x) {\n    if (x < 0) {\n        return -x;\n    }\n    return x;\n}\n", &["abs"]);
    let p = &b.plans[0];
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&[-3]), 1000).unwrap();
    let r = replay_symbolic(&b.module, &p.driver_name, &t, &p.symbol_map).unwrap();
    assert_eq!(r.pc.constraints.len(), 1);
    let c = &r.pc.constraints[0];
    assert!(c.flippable);
    assert!(matches!(c.site, EdgeSite::Branch(_)));
    assert_eq!(c.dir, Dir::Then);
    let x = SymExpr::var(Var::Sym(0), Width::I32);
    assert_eq!(c.expr, SymExpr::cmp(CmpOp::Lt, x, SymExpr::int(0)));
    assert!(r.pc.holds_under(&t).unwrap());
}

#[test]
fn input_independent_condition_is_not_flippable() {
    let src = "int k(int x) {\n    int n = 3;\n    if (n > 2) {\n        x = x + 1;\n    }\n    return x;\n}\n";
    let b = build_one(src, &["k"]);
    let p = &b.plans[0];
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&[1]), 1000).unwrap();
    let r = replay_symbolic(&b.module, &p.driver_name, &t, &p.symbol_map).unwrap();
    assert!(r.pc.constraints.iter().all(|c| !c.flippable));
}

#[test]
fn failed_division_check_ends_with_the_fail_side() {
    let b = build_one("int div(int a, int b) {\n    return a / b;\n}\n", &["div"]);
    let p = &b.plans[0];
    let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&[9, 0]), 1000).unwrap();
    let r = replay_symbolic(&b.module, &p.driver_name, &t, &p.symbol_map).unwrap();
    let last = r.pc.constraints.last().unwrap();
    assert!(matches!(last.site, EdgeSite::Check(_)));
    assert_eq!(last.dir, Dir::Else);
    assert!(last.flippable);
    // the fail side is `b == 0`, which must evaluate false with b = 5
    let other = |v: Var| Some(if v == Var::Sym(1) { 5 } else { 9 });
    assert_eq!(last.expr.eval(&other).unwrap(), 0);
}

#[test]
fn symbolic_offset_load_selects_every_cell() {
    let mut mem = SymMemory::default();
    let obj = mem.alloc(&[CellKind::Int; 4]);
    let s1 = SymExpr::var(Var::Sym(1), Width::I32);
    for (k, v) in [10, 20, 30, 40].into_iter().enumerate() {
        let sym = (k == 2).then(|| SymExpr::arith(ArithOp::Add, s1.clone(), SymExpr::int(1)));
        mem.sym_store(Addr { obj, off: k as u32 }, Value::Int(v), sym).unwrap();
    }
    let off = SymExpr::var(Var::Sym(0), Width::I32);
    let (value, sym) = mem.sym_load(Addr { obj, off: 1 }, Some(&off)).unwrap();
    assert_eq!(value, Value::Int(20));
    let sym = sym.unwrap();
    for k in 0..4 {
        let model = |v: Var| Some(if v == Var::Sym(0) { k } else { 29 });
        let expected = [10, 20, 30, 40][k as usize];
        assert_eq!(sym.eval(&model).unwrap(), expected, "offset {k}");
    }
    // a constant offset leaves the cell's own value
    let (_, plain) = mem.sym_load(Addr { obj, off: 3 }, None).unwrap();
    assert!(plain.is_none());
    assert!(mem.sym_load(Addr { obj, off: 4 }, None).is_err());
}

#[test]
fn ite_chain_is_right_folded() {
    let off = SymExpr::var(Var::Sym(0), Width::I32);
    let cells: Vec<(u32, SymExpr)> = (0..3).map(|k| (k, SymExpr::int(100 + k as i32))).collect();
    let e = ite_chain(&off, &cells);
    assert_eq!(e.to_string().matches("ite").count(), 2);
    for k in -1..4 {
        let want = if (0..2).contains(&k) { 100 + k } else { 102 };
        assert_eq!(e.eval(&|_| Some(k)).unwrap(), want);
    }
}

/// Replays random programs with random inputs: the path condition holds
/// under the inputs and every symbolic cell evaluates to its concrete value.
#[test]
fn replay_is_consistent_with_concrete_execution() {
    let mut runner = TestRunner::new_with_rng(
        Config { cases: 300, ..Config::default() },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[9; 32]),
    );
    runner
        .run(&any::<u64>(), |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let text = gen_program(&mut rng).render();
            let b = build_one(&text, &["f"]);
            let p = &b.plans[0];
            let args: Vec<i32> = (0..3).map(|_| rng.gen_range(-20..=20)).collect();
            let t = execute(&b.module, &p.driver_name, &p.symbol_map, &input(&args), 200_000).unwrap();
            let r = replay_symbolic(&b.module, &p.driver_name, &t, &p.symbol_map).unwrap();
            prop_assert!(r.pc.holds_under(&t).unwrap(), "{}", text);
            let directions = t.directions();
            let mut expected = directions.iter();
            for c in &r.pc.constraints {
                prop_assert!(expected.any(|d| *d == (c.site, c.dir)));
            }
            let model = model_of(&t);
            for cells in &r.memory.objects {
                for (value, sym) in cells {
                    if let Some(s) = sym {
                        prop_assert_eq!(s.eval(&model).unwrap(), value.as_int());
                    }
                }
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn corpus_zero_inputs_replay_cleanly() {
    let mut sources = Vec::new();
    for e in std::fs::read_dir(corpus_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "mc") {
            sources.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()));
        }
    }
    let files: Vec<(&str, &str)> = sources.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let b = common::build_sources(&files, &[]);
    for p in &b.plans {
        let t = execute(&b.module, &p.driver_name, &p.symbol_map, &zero_input(p), 100_000).unwrap();
        let r = replay_symbolic(&b.module, &p.driver_name, &t, &p.symbol_map).unwrap();
        assert!(r.pc.holds_under(&t).unwrap(), "{}", p.target);
    }
}

#[derive(Clone, Debug)]
enum T {
    Var(u32),
    Int(i32),
    Arith(ArithOp, Box<T>, Box<T>),
    Cmp(CmpOp, Box<T>, Box<T>),
    Not(Box<T>),
    And(Box<T>, Box<T>),
    Ite(Box<T>, Box<T>, Box<T>),
}

const ARITH: [ArithOp; 5] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div, ArithOp::Rem];
const CMP: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

fn int_tree() -> BoxedStrategy<T> {
    let leaf = prop_oneof![
        (0u32..3).prop_map(T::Var),
        (-4i32..5).prop_map(T::Int),
        Just(T::Int(i32::MIN)),
        Just(T::Int(-1)),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (0usize..5, inner.clone(), inner.clone()).prop_map(|(o, a, b)| T::Arith(ARITH[o], a.into(), b.into())),
            (bool_tree_of(inner.clone()), inner.clone(), inner).prop_map(|(c, a, b)| T::Ite(c.into(), a.into(), b.into())),
        ]
    })
    .boxed()
}

fn bool_tree_of(ints: impl Strategy<Value = T> + Clone + 'static) -> BoxedStrategy<T> {
    let atom = (0usize..6, ints.clone(), ints).prop_map(|(o, a, b)| T::Cmp(CMP[o], a.into(), b.into()));
    atom.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| T::Not(a.into())),
            (inner.clone(), inner).prop_map(|(a, b)| T::And(a.into(), b.into())),
        ]
    })
    .boxed()
}

fn reference(t: &T, env: &[i32; 3]) -> i32 {
    match t {
        T::Var(v) => env[*v as usize],
        T::Int(i) => *i,
        T::Arith(op, a, b) => {
            let (a, b) = (reference(a, env), reference(b, env));
            match op {
                ArithOp::Add => a.wrapping_add(b),
                ArithOp::Sub => a.wrapping_sub(b),
                ArithOp::Mul => a.wrapping_mul(b),
                ArithOp::Div if b == 0 => 0,
                ArithOp::Div => a.wrapping_div(b),
                ArithOp::Rem if b == 0 => 0,
                ArithOp::Rem => a.wrapping_rem(b),
            }
        }
        T::Cmp(op, a, b) => {
            let (a, b) = (reference(a, env), reference(b, env));
            let r = match op {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            };
            r as i32
        }
        T::Not(a) => (reference(a, env) == 0) as i32,
        T::And(a, b) => (reference(a, env) != 0 && reference(b, env) != 0) as i32,
        T::Ite(c, a, b) => {
            if reference(c, env) != 0 {
                reference(a, env)
            } else {
                reference(b, env)
            }
        }
    }
}

fn build(t: &T) -> SymExpr {
    match t {
        T::Var(v) => SymExpr::var(Var::Sym(*v), Width::I32),
        T::Int(i) => SymExpr::int(*i),
        T::Arith(op, a, b) => SymExpr::arith(*op, build(a), build(b)),
        T::Cmp(op, a, b) => SymExpr::cmp(*op, build(a), build(b)),
        T::Not(a) => SymExpr::not(build(a)),
        T::And(a, b) => SymExpr::and(build(a), build(b)),
        T::Ite(c, a, b) => SymExpr::ite(build(c), build(a), build(b)),
    }
}

proptest! {
    #![proptest_config(Config {
        cases: 200,
        rng_seed: RngSeed::Fixed(11),
        ..Config::default()
    })]

    /// The simplifying constructors and `simplify` agree with a plain
    /// evaluation of the unsimplified tree on 500 assignments each.
    #[test]
    fn simplification_preserves_values(t in prop_oneof![int_tree(), bool_tree_of(int_tree())], seed in any::<u64>()) {
        let e = build(&t);
        let s = simplify(&e);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..500 {
            let env: [i32; 3] = std::array::from_fn(|_| match rng.gen_range(0..4) {
                0 => rng.gen(),
                1 => *[i32::MIN, i32::MAX, -1, 0].get(rng.gen_range(0..4)).unwrap(),
                _ => rng.gen_range(-6..=6),
            });
            let model = |v: Var| match v {
                Var::Sym(i) => Some(env[i as usize]),
                Var::Fresh(..) => None,
            };
            let want = reference(&t, &env);
            prop_assert_eq!(e.eval(&model).unwrap(), want, "{:?} at {:?}", t, env);
            prop_assert_eq!(s.eval(&model).unwrap(), want);
        }
    }
}
