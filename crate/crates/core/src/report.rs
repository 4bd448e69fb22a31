//! results.json, timing.json, the static HTML report and debug dumps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ProjectConfig;
use crate::coverage::{percent, CoverageRow};
use crate::engine::{Origin, UnitResult, UnitStats};
use crate::exec::{Outcome, TestInput};
use crate::ir::{Dir, PointKind, Width};
use crate::pipeline::{ProjectResult, Timing};

pub const SCHEMA_VERSION: &str = "1";
pub const RESULTS_FILE: &str = "results.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed results document: {0}")]
    Malformed(String),
}

fn write_file(path: &Path, text: &str) -> Result<(), ReportError> {
    let err = |source| ReportError::Write {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    std::fs::write(path, text).map_err(err)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InputValue {
    pub symbol_id: u32,
    pub path: String,
    pub value: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StubValues {
    pub tag: i32,
    pub values: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestCaseDoc {
    /// `function:n`, the handle `replay` takes.
    pub id: String,
    pub origin: Origin,
    /// `completed`, `error` or `stepBudget`.
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_id: Option<u32>,
    pub inputs: Vec<InputValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stub_values: Vec<StubValues>,
    pub newly_covered: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SymbolDoc {
    pub id: u32,
    pub path: String,
    pub width: Width,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<(i32, i32)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnitDoc {
    pub function: String,
    pub file: String,
    pub driver: String,
    pub symbols: Vec<SymbolDoc>,
    pub coverage: CoverageRow,
    pub covered_points: Vec<u32>,
    pub testcases: Vec<TestCaseDoc>,
    pub stats: UnitStatsDoc,
    pub warnings: Vec<String>,
}

/// `UnitStats` in document form; owned so the document can be read back.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnitStatsDoc {
    pub tests_run: u32,
    pub solver_calls: u32,
    pub sat: u32,
    pub unsat: u32,
    pub unknowns: u32,
    pub consistent: u32,
    pub divergences: u32,
    pub duplicate_inputs: u32,
    pub replay_errors: u32,
    pub replay_violations: u32,
    pub exec_errors: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switched_to_dfs_at: Option<u32>,
    pub stop_reason: String,
}

impl From<&UnitStats> for UnitStatsDoc {
    fn from(s: &UnitStats) -> Self {
        let stop = serde_json::to_value(s.stop_reason).expect("stop reason serializes");
        UnitStatsDoc {
            tests_run: s.tests_run,
            solver_calls: s.solver_calls,
            sat: s.sat,
            unsat: s.unsat,
            unknowns: s.unknowns,
            consistent: s.consistent,
            divergences: s.divergences,
            duplicate_inputs: s.duplicate_inputs,
            replay_errors: s.replay_errors,
            replay_violations: s.replay_violations,
            exec_errors: s.exec_errors,
            switched_to_dfs_at: s.switched_to_dfs_at,
            stop_reason: stop.as_str().unwrap_or_default().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FindingDoc {
    pub check_id: u32,
    pub kind: String,
    pub function: String,
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub testcase: String,
    pub inputs: Vec<InputValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stub_values: Vec<StubValues>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageDoc {
    pub total: CoverageRow,
    pub files: Vec<CoverageRow>,
    pub functions: Vec<CoverageRow>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsDoc {
    pub units: u32,
    pub tests_run: u32,
    pub testcases_kept: u32,
    pub solver_calls: u32,
    pub sat: u32,
    pub unsat: u32,
    pub unknowns: u32,
    pub consistent: u32,
    pub divergences: u32,
    pub replay_violations: u32,
    pub findings: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PointDoc {
    pub id: u32,
    pub function: String,
    /// `stmt` or `branch`.
    pub kind: String,
    pub line: u32,
    pub col: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FileDoc {
    pub path: String,
    pub source: String,
    pub points: Vec<PointDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultsDoc {
    pub version: String,
    pub units: Vec<UnitDoc>,
    pub coverage: CoverageDoc,
    pub findings: Vec<FindingDoc>,
    pub stats: StatsDoc,
    pub config: ProjectConfig,
    pub files: Vec<FileDoc>,
    pub warnings: Vec<String>,
}

fn input_triples(u: &UnitResult, input: &TestInput) -> Vec<InputValue> {
    input
        .bindings
        .iter()
        .map(|(&id, &value)| InputValue {
            symbol_id: id,
            path: u.plan.symbol_map.get(id).map(|e| e.path.clone()).unwrap_or_default(),
            value,
        })
        .collect()
}

fn stub_values(input: &TestInput) -> Vec<StubValues> {
    input
        .fresh
        .iter()
        .map(|(&tag, values)| StubValues {
            tag,
            values: values.clone(),
        })
        .collect()
}

/// Rebuilds an executable input from its document form.
pub fn input_of(inputs: &[InputValue], stubs: &[StubValues]) -> TestInput {
    TestInput {
        bindings: inputs.iter().map(|v| (v.symbol_id, v.value)).collect(),
        fresh: stubs.iter().map(|s| (s.tag, s.values.clone())).collect(),
    }
}

fn outcome_doc(o: Outcome) -> (String, Option<u32>) {
    match o {
        Outcome::Completed => ("completed".into(), None),
        Outcome::ErrorFound(c) => ("error".into(), Some(c)),
        Outcome::StepBudgetExceeded => ("stepBudget".into(), None),
    }
}

fn dir_name(d: Dir) -> &'static str {
    match d {
        Dir::Then => "then",
        Dir::Else => "else",
    }
}

pub fn results_doc(r: &ProjectResult) -> ResultsDoc {
    let m = &r.built.module;
    let mut units = Vec::new();
    let mut findings = Vec::new();
    let mut stats = StatsDoc::default();
    for u in &r.units {
        let testcases = u
            .testcases
            .iter()
            .map(|t| {
                let (outcome, check_id) = outcome_doc(t.outcome);
                TestCaseDoc {
                    id: format!("{}:{}", u.function, t.id),
                    origin: t.origin,
                    outcome,
                    check_id,
                    inputs: input_triples(u, &t.input),
                    stub_values: stub_values(&t.input),
                    newly_covered: t.newly_covered.iter().copied().collect(),
                }
            })
            .collect::<Vec<_>>();
        for f in &u.findings {
            findings.push(FindingDoc {
                check_id: f.check_id,
                kind: f.kind.name().to_string(),
                function: f.func_name.clone(),
                file: f.loc.file.to_string(),
                line: f.loc.line,
                col: f.loc.col,
                testcase: format!("{}:{}", u.function, f.test_id),
                inputs: input_triples(u, &f.reproducing_input),
                stub_values: stub_values(&f.reproducing_input),
            });
        }
        let s = &u.stats;
        stats.units += 1;
        stats.tests_run += s.tests_run;
        stats.testcases_kept += testcases.len() as u32;
        stats.solver_calls += s.solver_calls;
        stats.sat += s.sat;
        stats.unsat += s.unsat;
        stats.unknowns += s.unknowns;
        stats.consistent += s.consistent;
        stats.divergences += s.divergences;
        stats.replay_violations += s.replay_violations;
        stats.findings += u.findings.len() as u32;
        let row = u.coverage.function_rows().into_iter().next().unwrap_or_else(|| CoverageRow {
            name: u.function.clone(),
            stmt_covered: 0,
            stmt_total: 0,
            stmt_pct: percent(0, 0),
            branch_covered: 0,
            branch_total: 0,
            branch_pct: percent(0, 0),
        });
        units.push(UnitDoc {
            function: u.function.clone(),
            file: u.file.clone(),
            driver: u.plan.driver_name.clone(),
            symbols: u
                .plan
                .symbol_map
                .entries
                .iter()
                .map(|e| SymbolDoc {
                    id: e.id,
                    path: e.path.clone(),
                    width: e.width,
                    domain: e.domain,
                })
                .collect(),
            coverage: row,
            covered_points: u.covered.iter().copied().collect(),
            testcases,
            stats: (&u.stats).into(),
            warnings: u.warnings.clone(),
        });
    }

    let mut files: BTreeMap<&str, FileDoc> = r
        .built
        .sources
        .iter()
        .map(|(path, source)| {
            (
                path.as_str(),
                FileDoc {
                    path: path.clone(),
                    source: source.clone(),
                    points: Vec::new(),
                },
            )
        })
        .collect();
    for (name, fc) in &r.coverage.functions {
        let Some(fd) = files.get_mut(fc.file.as_str()) else { continue };
        for p in m.points_of(name).filter(|p| !p.is_error_edge) {
            let (kind, covered) = match p.kind {
                PointKind::Stmt => ("stmt", fc.stmt_covered.contains(&p.id)),
                PointKind::Branch => ("branch", fc.branch_covered.contains(&p.id)),
            };
            fd.points.push(PointDoc {
                id: p.id,
                function: name.clone(),
                kind: kind.to_string(),
                line: p.loc.line,
                col: p.loc.col,
                dir: p.dir.map(|d| dir_name(d).to_string()),
                covered,
            });
        }
    }
    for fd in files.values_mut() {
        fd.points.sort_by_key(|p| (p.line, p.col, p.id));
    }

    ResultsDoc {
        version: SCHEMA_VERSION.to_string(),
        units,
        coverage: CoverageDoc {
            total: r.coverage.totals(),
            files: r.coverage.file_rows(),
            functions: r.coverage.function_rows(),
        },
        findings,
        stats,
        config: r.config.clone(),
        files: files.into_values().collect(),
        warnings: r.warnings.clone(),
    }
}

/// Compact JSON; key order follows the struct declarations.
pub fn results_json(doc: &ResultsDoc) -> String {
    serde_json::to_string(doc).expect("results document serializes")
}

pub fn write_results_json(r: &ProjectResult, path: &Path) -> Result<(), ReportError> {
    write_file(path, &results_json(&results_doc(r)))
}

pub fn read_results_json(path: &Path) -> Result<ResultsDoc, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_results_json(&text)
}

pub fn parse_results_json(text: &str) -> Result<ResultsDoc, ReportError> {
    let doc: ResultsDoc = serde_json::from_str(text).map_err(|e| ReportError::Malformed(e.to_string()))?;
    if doc.version != SCHEMA_VERSION {
        return Err(ReportError::Malformed(format!("unsupported version {}", doc.version)));
    }
    Ok(doc)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingDoc {
    pub select_files_ms: u64,
    pub prebuild_ms: u64,
    pub select_functions_ms: u64,
    pub build_ms: u64,
    pub test_ms: u64,
    pub statements: u32,
    pub statements_per_hour: f64,
    pub units: Vec<(String, u64)>,
}

pub fn timing_doc(r: &ProjectResult) -> TimingDoc {
    let t: &Timing = &r.timing;
    TimingDoc {
        select_files_ms: t.select_files_ms,
        prebuild_ms: t.prebuild_ms,
        select_functions_ms: t.select_functions_ms,
        build_ms: t.build_ms,
        test_ms: t.test_ms,
        statements: r.coverage.totals().stmt_total,
        statements_per_hour: t.statements_per_hour,
        units: r.units.iter().map(|u| (u.function.clone(), u.wall_ms)).collect(),
    }
}

pub fn write_timing_json(r: &ProjectResult, path: &Path) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(&timing_doc(r)).expect("timing serializes");
    write_file(path, &text)
}

// ---- HTML ----

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}\
td,th{border:1px solid #ccc;padding:2px 8px;text-align:left}td.num{text-align:right}\
pre.src{font-family:monospace;line-height:1.3}pre.src span{display:block;white-space:pre}\
.covered{background:#dfd}.uncovered{background:#fdd}.partial{background:#ffc}";

fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{}</title><style>{STYLE}</style></head>\n<body>\n<h1>{}</h1>\n{body}</body></html>\n",
        esc(title),
        esc(title)
    )
}

/// Page name for a source file: `/` becomes `_`.
pub fn file_page_name(path: &str) -> String {
    format!("file_{}.html", path.replace(['/', '\\'], "_"))
}

fn coverage_table(out: &mut String, head: &str, rows: &[CoverageRow], link: impl Fn(&str) -> Option<String>) {
    let _ = writeln!(
        out,
        "<table class=\"coverage\">\n<tr><th>{head}</th><th>statements</th><th>stmt %</th><th>branches</th><th>branch %</th></tr>"
    );
    for r in rows {
        let name = match link(&r.name) {
            Some(href) => format!("<a href=\"{}\">{}</a>", esc(&href), esc(&r.name)),
            None => esc(&r.name),
        };
        let _ = writeln!(
            out,
            "<tr><td>{name}</td><td class=\"num\">{}/{}</td><td class=\"num\">{}</td><td class=\"num\">{}/{}</td><td class=\"num\">{}</td></tr>",
            r.stmt_covered, r.stmt_total, r.stmt_pct, r.branch_covered, r.branch_total, r.branch_pct
        );
    }
    out.push_str("</table>\n");
}

fn findings_list(out: &mut String, findings: &[&FindingDoc]) {
    if findings.is_empty() {
        out.push_str("<p>No findings.</p>\n");
        return;
    }
    out.push_str("<ul class=\"findings\">\n");
    for f in findings {
        let _ = writeln!(
            out,
            "<li>{} in <code>{}</code> at {}:{}:{} (check {}, test case <code>{}</code>): {}</li>",
            esc(&f.kind),
            esc(&f.function),
            esc(&f.file),
            f.line,
            f.col,
            f.check_id,
            esc(&f.testcase),
            esc(&inputs_text(&f.inputs, &f.stub_values))
        );
    }
    out.push_str("</ul>\n");
}

fn inputs_text(inputs: &[InputValue], stubs: &[StubValues]) -> String {
    let mut parts: Vec<String> = inputs.iter().map(|v| format!("{} = {}", v.path, v.value)).collect();
    for s in stubs {
        parts.push(format!("stub#{} = {:?}", s.tag, s.values));
    }
    if parts.is_empty() {
        "(no inputs)".to_string()
    } else {
        parts.join(", ")
    }
}

/// Line status: `covered`, `uncovered` or `partial`; `None` for lines
/// without points.
pub fn line_marks(file: &FileDoc) -> BTreeMap<u32, &'static str> {
    let mut by_line: BTreeMap<u32, Vec<&PointDoc>> = BTreeMap::new();
    for p in &file.points {
        by_line.entry(p.line).or_default().push(p);
    }
    by_line
        .into_iter()
        .map(|(line, ps)| {
            let any = ps.iter().any(|p| p.covered);
            let all = ps.iter().all(|p| p.covered);
            let mark = if all {
                "covered"
            } else if !any || ps.iter().any(|p| p.kind == "stmt" && !p.covered) {
                "uncovered"
            } else {
                "partial"
            };
            (line, mark)
        })
        .collect()
}

fn file_page(doc: &ResultsDoc, file: &FileDoc) -> String {
    let mut body = String::new();
    let _ = writeln!(body, "<p><a href=\"index.html\">index</a></p>");
    let rows: Vec<CoverageRow> = doc.coverage.files.iter().filter(|r| r.name == file.path).cloned().collect();
    coverage_table(&mut body, "file", &rows, |_| None);
    let marks = line_marks(file);
    body.push_str("<pre class=\"src\">");
    for (i, line) in file.source.lines().enumerate() {
        let n = i as u32 + 1;
        let (class, sign) = match marks.get(&n) {
            Some(&"covered") => (" class=\"covered\"", '+'),
            Some(&"uncovered") => (" class=\"uncovered\"", '-'),
            Some(&"partial") => (" class=\"partial\"", '~'),
            _ => ("", ' '),
        };
        let _ = write!(body, "<span id=\"L{n}\"{class}>{n:>5} {sign} {}</span>", esc(line));
    }
    body.push_str("</pre>\n");

    let findings: Vec<&FindingDoc> = doc.findings.iter().filter(|f| f.file == file.path).collect();
    body.push_str("<h2>Findings</h2>\n");
    findings_list(&mut body, &findings);

    for u in doc.units.iter().filter(|u| u.file == file.path) {
        let _ = writeln!(body, "<h2 id=\"fn-{}\">Test cases for {}</h2>", esc(&u.function), esc(&u.function));
        body.push_str("<table class=\"testcases\">\n<tr><th>id</th><th>origin</th><th>outcome</th><th>inputs</th><th>new points</th></tr>\n");
        for t in &u.testcases {
            let origin = serde_json::to_value(t.origin).expect("origin serializes");
            let outcome = match t.check_id {
                Some(c) => format!("{} (check {c})", t.outcome),
                None => t.outcome.clone(),
            };
            let _ = writeln!(
                body,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td class=\"num\">{}</td></tr>",
                esc(&t.id),
                esc(origin.as_str().unwrap_or_default()),
                esc(&outcome),
                esc(&inputs_text(&t.inputs, &t.stub_values)),
                t.newly_covered.len()
            );
        }
        body.push_str("</table>\n");
    }
    page(&file.path, &body)
}

fn index_page(doc: &ResultsDoc) -> String {
    let mut body = String::new();
    body.push_str("<h2>Total</h2>\n");
    coverage_table(&mut body, "project", std::slice::from_ref(&doc.coverage.total), |_| None);
    body.push_str("<h2>Files</h2>\n");
    let with_page: BTreeSet<&str> = doc.files.iter().map(|f| f.path.as_str()).collect();
    coverage_table(&mut body, "file", &doc.coverage.files, |name| {
        with_page.contains(name).then(|| file_page_name(name))
    });
    body.push_str("<h2>Functions</h2>\n");
    let unit_file: BTreeMap<&str, &str> = doc.units.iter().map(|u| (u.function.as_str(), u.file.as_str())).collect();
    coverage_table(&mut body, "function", &doc.coverage.functions, |name| {
        unit_file.get(name).map(|f| format!("{}#fn-{name}", file_page_name(f)))
    });
    body.push_str("<h2>Findings</h2>\n");
    findings_list(&mut body, &doc.findings.iter().collect::<Vec<_>>());
    let s = &doc.stats;
    let _ = writeln!(
        body,
        "<h2>Statistics</h2>\n<p>{} units, {} tests run, {} kept, {} solver calls ({} sat, {} unsat, {} unknown), {} consistent flips, {} divergences.</p>",
        s.units, s.tests_run, s.testcases_kept, s.solver_calls, s.sat, s.unsat, s.unknowns, s.consistent, s.divergences
    );
    if !doc.warnings.is_empty() {
        body.push_str("<h2>Warnings</h2>\n<ul>\n");
        for w in &doc.warnings {
            let _ = writeln!(body, "<li>{}</li>", esc(w));
        }
        body.push_str("</ul>\n");
    }
    page("Coverage report", &body)
}

/// The report pages as `(file name, html)`, index first.
pub fn html_pages(doc: &ResultsDoc) -> Vec<(String, String)> {
    let mut out = vec![("index.html".to_string(), index_page(doc))];
    for f in &doc.files {
        out.push((file_page_name(&f.path), file_page(doc, f)));
    }
    out
}

pub fn write_html_report(doc: &ResultsDoc, dir: &Path) -> Result<(), ReportError> {
    for (name, html) in html_pages(doc) {
        write_file(&dir.join(name), &html)?;
    }
    Ok(())
}

/// What to dump next to the report.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dumps {
    pub ir: bool,
    pub traces: bool,
    pub pc: bool,
    pub harness: bool,
    pub smt: bool,
}

/// Writes `ir.txt`, `harness.mc`, and per-function `traces/`, `pc/` and
/// `smt/` directories as requested.
pub fn write_dumps(r: &ProjectResult, dir: &Path, d: Dumps) -> Result<(), ReportError> {
    if d.ir {
        write_file(&dir.join("ir.txt"), &crate::ir::dump_module(&r.built.module))?;
    }
    if d.harness {
        let text = crate::harness::project_harness_text(&r.built.program, &r.built.plans);
        write_file(&dir.join("harness.mc"), &text)?;
    }
    for u in &r.units {
        let groups = [
            (d.traces, "traces", "trace", &u.artifacts.traces),
            (d.pc, "pc", "pc", &u.artifacts.path_conditions),
            (d.smt, "smt", "smt2", &u.artifacts.queries),
        ];
        for (on, sub, ext, items) in groups {
            if !on {
                continue;
            }
            for (name, text) in items {
                write_file(&dir.join(sub).join(&u.function).join(format!("{name}.{ext}")), text)?;
            }
        }
    }
    Ok(())
}

/// results.json, timing.json, the HTML pages and requested dumps.
pub fn write_report(r: &ProjectResult, dir: &Path, d: Dumps) -> Result<ResultsDoc, ReportError> {
    let doc = results_doc(r);
    write_file(&dir.join(RESULTS_FILE), &results_json(&doc))?;
    write_timing_json(r, &dir.join(TIMING_FILE))?;
    write_html_report(&doc, dir)?;
    write_dumps(r, dir, d)?;
    Ok(doc)
}
