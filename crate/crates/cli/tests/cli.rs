use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mctest_core::report::{parse_results_json, ResultsDoc};

const PICK: &str = "int pick(int x) {\n    if (x == 1234567) {\n        return 1;\n    }\n    return 0;\n}\n";
const RATIO: &str = "int ratio(int a, int b) {\n    if (a > 10) {\n        return a / b;\n    }\n    return 0;\n}\n";

fn mctest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mctest"))
        .args(args)
        .env_remove("COYOTE_MC_SEED")
        .output()
        .expect("binary runs")
}

fn project(files: &[(&str, &str)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (p, text) in files {
        std::fs::write(dir.path().join(p), text).unwrap();
    }
    dir
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn results(dir: &Path) -> (PathBuf, ResultsDoc) {
    let path = dir.join("coyote-report/results.json");
    let doc = parse_results_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    (path, doc)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_then_replay_every_test_case() {
    let dir = project(&[("pick.mc", PICK), ("ratio.mc", RATIO)]);
    let out = mctest(&["run", "--project", p(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("finding: DivByZero in ratio at ratio.mc:3"), "{text}");
    assert!(dir.path().join("coyote-report/index.html").is_file());

    let (path, doc) = results(dir.path());
    assert_eq!(doc.findings.len(), 1);
    for u in &doc.units {
        for t in &u.testcases {
            let o = mctest(&["replay", p(&path), &t.id]);
            assert_eq!(o.status.code(), Some(0), "{}: {}", t.id, stderr(&o));
            let line = stdout(&o);
            if t.outcome == "error" {
                assert!(line.contains("DivByZero"), "{line}");
            } else {
                assert!(line.contains("completed"), "{line}");
            }
        }
    }
    let o = mctest(&["replay", p(&path), "pick:999"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_regenerates_the_pages() {
    let dir = project(&[("pick.mc", PICK)]);
    assert_eq!(mctest(&["run", "--project", p(dir.path())]).status.code(), Some(0));
    let (path, _) = results(dir.path());
    let html = dir.path().join("html");
    let o = mctest(&["report", p(&path), "--report-dir", p(&html)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let original = std::fs::read_to_string(dir.path().join("coyote-report/index.html")).unwrap();
    assert_eq!(std::fs::read_to_string(html.join("index.html")).unwrap(), original);
    assert!(html.join("file_pick.mc.html").is_file());
}

#[test]
fn syntax_error_exits_with_two() {
    let dir = project(&[("pick.mc", PICK), ("bad.mc", "int f( {\n")]);
    let o = mctest(&["run", "--project", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.mc:1:"), "{}", stderr(&o));
    // excluding the broken file makes the run succeed
    let o = mctest(&["run", "--project", p(dir.path()), "--exclude", "bad.mc"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = project(&[("pick.mc", PICK), ("coyote.json", "{\"workers\": \"many\"}")]);
    assert_eq!(mctest(&["run", "--project", p(dir.path())]).status.code(), Some(1));
    let dir = project(&[("pick.mc", PICK)]);
    let missing = dir.path().join("nope.json");
    let o = mctest(&["run", "--project", p(dir.path()), "--config", p(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_mctest"))
        .args(["run", "--project", p(dir.path())])
        .env("COYOTE_MC_SEED", "soon")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn empty_function_filter_warns_and_succeeds() {
    let dir = project(&[("pick.mc", PICK)]);
    let o = mctest(&["run", "--project", p(dir.path()), "--functions", "nothing_*"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning:"), "{}", stderr(&o));
    let (_, doc) = results(dir.path());
    assert!(doc.units.is_empty());
}

#[test]
fn command_line_seed_beats_the_config_file() {
    let dir = project(&[("pick.mc", PICK), ("coyote.json", "{\"seed\": 3}")]);
    assert_eq!(mctest(&["run", "--project", p(dir.path())]).status.code(), Some(0));
    assert_eq!(results(dir.path()).1.config.seed, 3);
    assert_eq!(mctest(&["run", "--project", p(dir.path()), "--seed", "7"]).status.code(), Some(0));
    assert_eq!(results(dir.path()).1.config.seed, 7);
}

#[test]
fn corpus_findings_re_fail_under_replay() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("rep");
    let o = mctest(&["run", "--project", p(&corpus), "--report-dir", p(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let path = report.join("results.json");
    let doc = parse_results_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc.findings.len(), 5);
    for f in &doc.findings {
        let o = mctest(&["replay", p(&path), &f.testcase]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let line = stdout(&o);
        assert!(line.contains(&format!("{} (check {})", f.kind, f.check_id)), "{line}");
        assert!(line.contains(&format!("{}:{}", f.file, f.line)), "{line}");
    }
}
