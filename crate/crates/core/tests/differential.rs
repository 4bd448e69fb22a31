mod common;

use common::{build_one, gen_program, lit, Fault};
use mctest_core::exec::{execute, Outcome, TestInput};
use mctest_core::frontend::{parse_unit, print_ast, SourceUnit};
use mctest_core::ir::CheckKind;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lowered IR agrees with the reference evaluator on return values and
/// runtime faults. The harness target `check` calls `f` with constant
/// arguments and asserts the expected result, so a mismatch shows up as a
/// failed assert inside `check`.
#[test]
fn ir_matches_reference_on_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut faults = 0;
    for case in 0..1000 {
        let prog = gen_program(&mut rng);
        let args = [
            rng.gen_range(-30..=30),
            rng.gen_range(-30..=30),
            if rng.gen_bool(0.1) { i32::MIN } else { rng.gen_range(-30..=30) },
        ];
        let expected = prog.eval(args);
        let call = format!("f({}, {}, {})", lit(args[0]), lit(args[1]), lit(args[2]));
        let check = match expected {
            Ok(v) => format!("void check() {{\n    int r = {call};\n    assert(r == {});\n}}\n", lit(v)),
            Err(_) => format!("void check() {{\n    int r = {call};\n}}\n"),
        };
        let src = format!("{}\n{check}", prog.render());
        let b = build_one(&src, &["check"]);
        let plan = &b.plans[0];
        let t = execute(&b.module, &plan.driver_name, &plan.symbol_map, &TestInput::default(), 1_000_000)
            .unwrap_or_else(|e| panic!("case {case}: {e}\n{src}"));
        match (expected, t.outcome) {
            (Ok(_), Outcome::Completed) => {}
            (Err(fault), Outcome::ErrorFound(site)) => {
                faults += 1;
                let s = &b.module.check_sites[site as usize];
                let kind = match fault {
                    Fault::DivByZero => CheckKind::DivByZero,
                    Fault::ModByZero => CheckKind::ModByZero,
                    Fault::Assert => CheckKind::UserAssert,
                };
                assert_eq!(s.kind, kind, "case {case}\n{src}");
                assert_ne!(s.func, "check", "case {case}\n{src}");
            }
            (e, o) => panic!("case {case}: reference {e:?}, IR {o:?}\n{src}"),
        }
    }
    // the generator must exercise both outcomes
    assert!(faults > 50 && faults < 900, "{faults} faulting cases");
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 300,
        rng_seed: prop::test_runner::RngSeed::Fixed(1),
        ..ProptestConfig::default()
    })]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let prog = gen_program(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = prog.render();
        let a = parse_unit(&SourceUnit::new("t.mc", text.clone())).unwrap_or_else(|e| panic!("{e}\n{text}"));
        let printed = print_ast(&a);
        let b = parse_unit(&SourceUnit::new("t.mc", printed.clone())).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(print_ast(&b), printed);
    }
}
