use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mctest_core::config::{parse_config, ProjectConfig, CONFIG_FILE, SEED_ENV};
use mctest_core::engine::Strategy;
use mctest_core::exec::{execute, Outcome};
use mctest_core::pipeline::{prepare_sources, run_pipeline_keeping, Keep, PipelineError};
use mctest_core::report::{self, Dumps, ReportError};

#[derive(Parser)]
#[command(name = "mctest", version, about = "Concolic unit-test generation for MiniC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select files, build harnesses and generate tests.
    Run(RunArgs),
    /// Re-execute one recorded test case, e.g. `abs:3`.
    Replay { results: PathBuf, testcase: String },
    /// Regenerate the HTML pages from a results.json.
    Report {
        results: PathBuf,
        /// Output directory; defaults to the directory of the results file.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = ".")]
    project: PathBuf,
    /// Defaults to coyote.json in the project directory when present.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Source globs; replaces the configured ones.
    #[arg(long)]
    include: Vec<String>,
    #[arg(long)]
    exclude: Vec<String>,
    /// Function name patterns (`*` wildcard), comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    functions: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    #[arg(long)]
    max_tests: Option<u32>,
    /// Per-function wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<u64>,
    #[arg(long)]
    depth_limit: Option<u32>,
    /// Relative paths are taken from the project directory.
    #[arg(long)]
    report_dir: Option<String>,
    #[arg(long)]
    dump_ir: bool,
    #[arg(long)]
    dump_traces: bool,
    #[arg(long)]
    dump_pc: bool,
    #[arg(long)]
    emit_harness: bool,
    #[arg(long)]
    emit_smt: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "ccs" => Ok(Strategy::Ccs),
        "dfs" => Ok(Strategy::Dfs),
        "auto" => Ok(Strategy::Auto),
        _ => Err(format!("expected ccs, dfs or auto, got `{s}`")),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Write { .. } => Failure::internal(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

/// Flags beat the seed variable, which beats the file.
fn load_config(a: &RunArgs) -> Result<ProjectConfig, Failure> {
    let path = a.config.clone().unwrap_or_else(|| a.project.join(CONFIG_FILE));
    let mut cfg = if path.is_file() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        parse_config(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
    } else if a.config.is_some() {
        return Err(Failure::config(format!("config file {} not found", path.display())));
    } else {
        ProjectConfig::default()
    };
    if !a.include.is_empty() {
        cfg.source_globs = a.include.clone();
    }
    cfg.exclude_files.extend(a.exclude.iter().cloned());
    if !a.functions.is_empty() {
        cfg.include_functions = a.functions.clone();
    }
    match (a.seed, std::env::var(SEED_ENV)) {
        (Some(s), _) => cfg.seed = s,
        (None, Ok(v)) => {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("{SEED_ENV} is not an integer: `{v}`")))?
        }
        (None, Err(_)) => {}
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(s) = a.strategy {
        cfg.strategy = s;
    }
    if let Some(n) = a.max_tests {
        cfg.max_tests = n;
    }
    if let Some(t) = a.time_budget {
        cfg.time_budget = t;
    }
    if let Some(d) = a.depth_limit {
        cfg.depth_limit = d;
    }
    if let Some(r) = &a.report_dir {
        cfg.report_dir = r.clone();
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(&a)?;
    let keep = Keep {
        traces: a.dump_traces || a.dump_pc,
        queries: a.emit_smt,
        flip_log: false,
    };
    let r = run_pipeline_keeping(&a.project, &cfg, keep)?;
    let dir = a.project.join(&cfg.report_dir);
    let dumps = Dumps {
        ir: a.dump_ir,
        traces: a.dump_traces,
        pc: a.dump_pc,
        harness: a.emit_harness,
        smt: a.emit_smt,
    };
    let doc = report::write_report(&r, &dir, dumps)?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    let t = &doc.coverage.total;
    println!(
        "{} functions, {} tests kept: statements {}/{} ({}%), branches {}/{} ({}%)",
        doc.units.len(),
        doc.stats.testcases_kept,
        t.stmt_covered,
        t.stmt_total,
        t.stmt_pct,
        t.branch_covered,
        t.branch_total,
        t.branch_pct
    );
    for f in &doc.findings {
        println!("finding: {} in {} at {}:{} ({})", f.kind, f.function, f.file, f.line, f.testcase);
    }
    println!("report written to {}", dir.display());
    Ok(())
}

fn replay(results: &Path, testcase: &str) -> Result<(), Failure> {
    let doc = report::read_results_json(results)?;
    let (function, _) = testcase
        .split_once(':')
        .ok_or_else(|| Failure::config(format!("test case id must look like `function:n`, got `{testcase}`")))?;
    let unit = doc
        .units
        .iter()
        .find(|u| u.function == function)
        .ok_or_else(|| Failure::config(format!("no unit for function {function}")))?;
    let tc = unit
        .testcases
        .iter()
        .find(|t| t.id == testcase)
        .ok_or_else(|| Failure::config(format!("no test case {testcase}")))?;
    let sources = doc.files.iter().map(|f| (f.path.clone(), f.source.clone())).collect();
    let (built, _) = prepare_sources(sources, &doc.config)?;
    let plan = built
        .plans
        .iter()
        .find(|p| p.target == function)
        .ok_or_else(|| Failure::internal(format!("rebuilt project has no harness for {function}")))?;
    let input = report::input_of(&tc.inputs, &tc.stub_values);
    let trace = execute(&built.module, &plan.driver_name, &plan.symbol_map, &input, doc.config.step_budget)
        .map_err(|e| Failure::internal(e.to_string()))?;
    match trace.outcome {
        Outcome::Completed => println!("{testcase}: completed"),
        Outcome::StepBudgetExceeded => println!("{testcase}: step budget exceeded"),
        Outcome::ErrorFound(c) => {
            let site = &built.module.check_sites[c as usize];
            println!("{testcase}: {} (check {c}) at {}", site.kind.name(), site.loc);
        }
    }
    let (expected, expected_check) = (&tc.outcome, tc.check_id);
    let actual = match trace.outcome {
        Outcome::Completed => ("completed", None),
        Outcome::ErrorFound(c) => ("error", Some(c)),
        Outcome::StepBudgetExceeded => ("stepBudget", None),
    };
    if (expected.as_str(), expected_check) != actual {
        return Err(Failure::internal(format!(
            "{testcase} no longer reproduces: recorded {expected}{}",
            expected_check.map(|c| format!(" (check {c})")).unwrap_or_default()
        )));
    }
    Ok(())
}

fn regenerate(results: &Path, dir: Option<PathBuf>) -> Result<(), Failure> {
    let doc = report::read_results_json(results)?;
    let dir = dir.unwrap_or_else(|| results.parent().map(Path::to_path_buf).unwrap_or_default());
    report::write_html_report(&doc, &dir)?;
    println!("report written to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Replay { results, testcase } => replay(&results, &testcase),
        Command::Report { results, report_dir } => regenerate(&results, report_dir),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

