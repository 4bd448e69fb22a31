mod common;

use std::collections::BTreeMap;

use common::{build_one, corpus_dir};
use mctest_core::frontend::{list_functions, parse_unit, print_ast, SourceUnit};
use mctest_core::pipeline::{prebuild, PipelineError};

fn corpus() -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(corpus_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "mc") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap());
        }
    }
    out
}

#[test]
fn corpus_links_and_lists_every_function() {
    let sources = corpus();
    assert!(sources.len() >= 12);
    let p = prebuild(&sources).unwrap();
    let (all, warnings) = list_functions(&p, &[], &[]);
    assert!(warnings.is_empty());
    assert_eq!(all.len(), 78);
    // ordered by file, then by position
    let files: Vec<&String> = all.iter().map(|f| &p.file_of[f]).collect();
    assert!(files.windows(2).all(|w| w[0] <= w[1]));
    let (stack, _) = list_functions(&p, &["stack_*".to_string()], &["stack_max".to_string()]);
    assert_eq!(stack, ["stack_ok", "stack_push", "stack_pop"]);
}

#[test]
fn corpus_files_survive_printing() {
    for (path, text) in corpus() {
        let a = parse_unit(&SourceUnit::new(path.clone(), text)).unwrap();
        let printed = print_ast(&a);
        let b = parse_unit(&SourceUnit::new(path.clone(), printed.clone())).unwrap();
        assert_eq!(a, b, "{path}");
        assert_eq!(print_ast(&b), printed, "{path}");
    }
}

#[test]
fn syntax_error_carries_its_position() {
    let err = parse_unit(&SourceUnit::new("bad.mc", "int f(int x) {\n    return x +;\n}\n")).unwrap_err();
    let text = err.to_string();
    assert!(text.starts_with("bad.mc:2:"), "{text}");
    assert!(err.has_errors());
}

#[test]
fn diagnostics_from_several_files_are_collected() {
    let sources = BTreeMap::from([
        ("a.mc".to_string(), "int f( {\n".to_string()),
        ("b.mc".to_string(), "int g() {\n    return 1\n}\n".to_string()),
    ]);
    match prebuild(&sources) {
        Err(PipelineError::Frontend(d)) => {
            assert_eq!(d.0.len(), 2, "{d}");
            assert_eq!(&*d.0[0].loc.file, "a.mc");
            assert_eq!(&*d.0[1].loc.file, "b.mc");
        }
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("broken sources linked"),
    }
}

#[test]
fn domain_annotations_reach_the_symbol_map() {
    let src = "// @domain(-10, 40)\nint clamp(int t, int limit) {\n    if (t > limit) {\n        return limit;\n    }\n    return t;\n}\n\
               record P {\n    int x;\n    int y;\n}\n// @domain(p.y, 0, 9)\nint gety(P* p) {\n    return p->y;\n}\n";
    let b = build_one(src, &["clamp", "gety"]);
    let clamp = &b.plans[0].symbol_map.entries;
    assert!(clamp.iter().all(|e| e.domain == Some((-10, 40))), "{clamp:?}");
    let gety = &b.plans[1].symbol_map.entries;
    let d: Vec<_> = gety.iter().map(|e| (e.path.as_str(), e.domain)).collect();
    assert!(d.contains(&("p.y", Some((0, 9)))), "{d:?}");
    assert!(d.iter().filter(|(p, _)| *p != "p.y").all(|(_, dom)| dom.is_none()), "{d:?}");
}
