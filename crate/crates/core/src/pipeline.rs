//! Select files, prebuild, select functions, build, test.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;

use crate::config::ProjectConfig;
use crate::coverage::{CoverageError, CoverageMap};
use crate::engine::{run_unit_with, UnitResult};
use crate::frontend::{link_program, list_functions, parse_unit, DiagnosticList, Program, SourceUnit};
use crate::harness::{assemble_project, plan_harness, HarnessError, HarnessPlan};
use crate::ir::{self, EdgeTargets, IrModule};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Frontend(DiagnosticList),
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Frontend(_) => 2,
            PipelineError::Internal(_) => 3,
        }
    }
}

impl From<HarnessError> for PipelineError {
    fn from(e: HarnessError) -> Self {
        PipelineError::Internal(e.to_string())
    }
}

impl From<CoverageError> for PipelineError {
    fn from(e: CoverageError) -> Self {
        PipelineError::Internal(e.to_string())
    }
}

/// Milliseconds spent per pipeline step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timing {
    pub select_files_ms: u64,
    pub prebuild_ms: u64,
    pub select_functions_ms: u64,
    pub build_ms: u64,
    pub test_ms: u64,
    /// Total statements of the tested functions per hour of the test step.
    pub statements_per_hour: f64,
}

/// Output of the prebuild and build steps, enough to execute any unit.
pub struct Built {
    pub sources: BTreeMap<String, String>,
    pub program: Program,
    pub functions: Vec<String>,
    pub plans: Vec<HarnessPlan>,
    pub module: IrModule,
    pub targets: EdgeTargets,
    pub warnings: Vec<String>,
}

pub struct ProjectResult {
    pub config: ProjectConfig,
    pub built: Built,
    pub units: Vec<UnitResult>,
    pub coverage: CoverageMap,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

fn glob_set(globs: &[String]) -> Result<GlobSet, PipelineError> {
    let mut b = GlobSetBuilder::new();
    for g in globs {
        b.add(Glob::new(g).map_err(|e| PipelineError::Config(format!("bad glob `{g}`: {e}")))?);
    }
    b.build().map_err(|e| PipelineError::Config(e.to_string()))
}

/// Source files under `root` matching the config, as sorted `/`-separated
/// relative paths.
pub fn select_files(root: &Path, cfg: &ProjectConfig) -> Result<Vec<String>, PipelineError> {
    if !root.is_dir() {
        return Err(PipelineError::Config(format!("project directory {} not found", root.display())));
    }
    let include = glob_set(&cfg.source_globs)?;
    let exclude = glob_set(&cfg.exclude_files)?;
    let report = PathBuf::from(&cfg.report_dir);
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| PipelineError::Config(e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walk stays under root");
        if rel.starts_with(&report) {
            continue;
        }
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if include.is_match(&rel) && !exclude.is_match(&rel) {
            out.push(rel);
        }
    }
    out.sort();
    Ok(out)
}

/// Parses every file and links them. All files' diagnostics are reported.
pub fn prebuild(sources: &BTreeMap<String, String>) -> Result<Program, PipelineError> {
    let mut asts = Vec::new();
    let mut diags = Vec::new();
    for (path, text) in sources {
        match parse_unit(&SourceUnit::new(path.clone(), text.clone())) {
            Ok(a) => asts.push(a),
            Err(d) => diags.extend(d.0),
        }
    }
    if !diags.is_empty() {
        return Err(PipelineError::Frontend(DiagnosticList(diags)));
    }
    link_program(&asts).map_err(PipelineError::Frontend)
}

/// Harness generation, lowering and check injection for the chosen
/// functions, as one module.
pub fn build(
    sources: BTreeMap<String, String>,
    program: Program,
    functions: Vec<String>,
    depth_limit: u32,
    mut warnings: Vec<String>,
) -> Result<Built, PipelineError> {
    let mut plans = Vec::new();
    for f in &functions {
        let plan = plan_harness(&program, f, depth_limit)?;
        warnings.extend(plan.warnings.iter().map(|w| format!("{f}: {w}")));
        plans.push(plan);
    }
    let assembled = assemble_project(&program, &plans)?;
    let module = ir::lower(&assembled).map_err(|e| PipelineError::Internal(e.to_string()))?;
    let module = ir::inject_checks(module);
    let targets = module.all_edge_targets();
    Ok(Built {
        sources,
        program,
        functions,
        plans,
        module,
        targets,
        warnings,
    })
}

pub fn read_sources(root: &Path, files: &[String]) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    for f in files {
        let text = std::fs::read_to_string(root.join(f))
            .map_err(|e| PipelineError::Config(format!("cannot read {f}: {e}")))?;
        out.insert(f.clone(), text);
    }
    Ok(out)
}

fn ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

/// Steps one to four.
pub fn prepare(root: &Path, cfg: &ProjectConfig) -> Result<(Built, Timing), PipelineError> {
    cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let t = Instant::now();
    let files = select_files(root, cfg)?;
    let sources = read_sources(root, &files)?;
    let select_files_ms = ms(t);
    let (built, mut timing) = prepare_sources(sources, cfg)?;
    timing.select_files_ms = select_files_ms;
    Ok((built, timing))
}

/// Steps two to four over already selected sources.
pub fn prepare_sources(sources: BTreeMap<String, String>, cfg: &ProjectConfig) -> Result<(Built, Timing), PipelineError> {
    let mut timing = Timing::default();
    let t = Instant::now();
    let program = prebuild(&sources)?;
    timing.prebuild_ms = ms(t);

    let t = Instant::now();
    let (functions, mut warnings) = list_functions(&program, &cfg.include_functions, &cfg.exclude_functions);
    if functions.is_empty() {
        warnings.push("no functions matched the selection".to_string());
    }
    for name in cfg.manual_tests.keys() {
        if !functions.contains(name) {
            warnings.push(format!("manual tests for {name} ignored: function not selected"));
        }
    }
    timing.select_functions_ms = ms(t);

    let t = Instant::now();
    let built = build(sources, program, functions, cfg.depth_limit, warnings)?;
    timing.build_ms = ms(t);
    Ok((built, timing))
}

/// Runs the engine over every unit on a pool of `workers` threads. Results
/// come back in function order regardless of scheduling.
pub fn test_units(built: &Built, cfg: &ProjectConfig, keep: Keep) -> Result<Vec<UnitResult>, PipelineError> {
    let mut ecfg = cfg.engine();
    ecfg.keep_traces = keep.traces;
    ecfg.keep_queries = keep.queries;
    ecfg.keep_flip_log = keep.flip_log;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let manual: BTreeMap<&str, Vec<_>> = cfg
        .manual_tests
        .iter()
        .map(|(k, v)| (k.as_str(), v.iter().map(|t| t.to_input()).collect()))
        .collect();
    let empty = Vec::new();
    Ok(pool.install(|| {
        built
            .plans
            .par_iter()
            .map(|plan| {
                let man = manual.get(plan.target.as_str()).unwrap_or(&empty);
                run_unit_with(&built.module, plan, &ecfg, &built.targets, man)
            })
            .collect()
    }))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Keep {
    pub traces: bool,
    pub queries: bool,
    pub flip_log: bool,
}

pub fn run_pipeline(root: &Path, cfg: &ProjectConfig) -> Result<ProjectResult, PipelineError> {
    run_pipeline_keeping(root, cfg, Keep::default())
}

pub fn run_pipeline_keeping(root: &Path, cfg: &ProjectConfig, keep: Keep) -> Result<ProjectResult, PipelineError> {
    let (built, mut timing) = prepare(root, cfg)?;
    let t = Instant::now();
    let units = test_units(&built, cfg, keep)?;
    let test_secs = t.elapsed().as_secs_f64();
    timing.test_ms = ms(t);

    let mut coverage = CoverageMap::default();
    let mut warnings = built.warnings.clone();
    for u in &units {
        coverage = coverage.merge(&u.coverage)?;
        warnings.extend(
            u.warnings
                .iter()
                .filter(|w| !u.plan.warnings.contains(w))
                .map(|w| format!("{}: {w}", u.function)),
        );
    }
    let stmts = coverage.totals().stmt_total as f64;
    let hours = test_secs.max(1e-6) / 3600.0;
    timing.statements_per_hour = stmts / hours;

    // every finding must reproduce before it is reported
    for u in &units {
        for f in &u.findings {
            let tr = crate::exec::execute(
                &built.module,
                &u.plan.driver_name,
                &u.plan.symbol_map,
                &f.reproducing_input,
                cfg.step_budget,
            )
            .map_err(|e| PipelineError::Internal(e.to_string()))?;
            if tr.outcome != crate::exec::Outcome::ErrorFound(f.check_id) {
                return Err(PipelineError::Internal(format!(
                    "finding {} in {} does not reproduce",
                    f.check_id, u.function
                )));
            }
        }
    }
    Ok(ProjectResult {
        config: cfg.clone(),
        built,
        units,
        coverage,
        warnings,
        timing,
    })
}
