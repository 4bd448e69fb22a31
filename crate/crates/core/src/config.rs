//! `coyote.json` project configuration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, Strategy};
use crate::exec::{self, TestInput};
use crate::harness::DEFAULT_DEPTH_LIMIT;
use crate::solver;

pub const CONFIG_FILE: &str = "coyote.json";
pub const SEED_ENV: &str = "COYOTE_MC_SEED";

/// A hand-written input for one function. Symbols not listed are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ManualTest {
    #[serde(default)]
    pub bindings: BTreeMap<u32, i32>,
    #[serde(default)]
    pub fresh: BTreeMap<i32, Vec<i32>>,
}

impl ManualTest {
    pub fn to_input(&self) -> TestInput {
        TestInput {
            bindings: self.bindings.clone(),
            fresh: self.fresh.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct ProjectConfig {
    /// Globs relative to the project root.
    pub source_globs: Vec<String>,
    pub exclude_files: Vec<String>,
    pub include_functions: Vec<String>,
    pub exclude_functions: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    pub max_tests: u32,
    pub max_solver_calls: u32,
    /// Wall-clock budget per function, in seconds.
    pub time_budget: u64,
    pub strategy: Strategy,
    pub stagnation_window: u32,
    pub sufficient_coverage: f64,
    pub step_budget: u64,
    pub solver_timeout_ms: u64,
    pub depth_limit: u32,
    pub report_dir: String,
    pub manual_tests: BTreeMap<String, Vec<ManualTest>>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        let e = EngineConfig::default();
        ProjectConfig {
            source_globs: vec!["**/*.mc".to_string()],
            exclude_files: Vec::new(),
            include_functions: Vec::new(),
            exclude_functions: Vec::new(),
            seed: 0,
            workers: 1,
            max_tests: e.max_tests,
            max_solver_calls: e.max_solver_calls,
            time_budget: e.wall_clock_ms / 1000,
            strategy: e.strategy,
            stagnation_window: e.stagnation_window,
            sufficient_coverage: e.sufficient_coverage,
            step_budget: exec::DEFAULT_STEP_BUDGET,
            solver_timeout_ms: solver::DEFAULT_TIMEOUT_MS,
            depth_limit: DEFAULT_DEPTH_LIMIT,
            report_dir: "coyote-report".to_string(),
            manual_tests: BTreeMap::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("malformed configuration: {0}")]
    Malformed(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Parses a `coyote.json` document. Blank text yields the defaults.
pub fn parse_config(text: &str) -> Result<ProjectConfig, ConfigError> {
    if text.trim().is_empty() {
        return Ok(ProjectConfig::default());
    }
    let cfg: ProjectConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        // serde reports "unknown field `x`, expected one of ..."
        match msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
            Some(key) => ConfigError::UnknownKey(key.to_string()),
            None => ConfigError::Malformed(msg),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ProjectConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.source_globs.is_empty() {
            return Err(ConfigError::Invalid("at least one source glob is required".into()));
        }
        if self.workers < 1 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.depth_limit < 1 {
            return Err(ConfigError::Invalid("depthLimit must be at least 1".into()));
        }
        for g in self.source_globs.iter().chain(&self.exclude_files) {
            globset::Glob::new(g).map_err(|e| ConfigError::Invalid(format!("bad glob `{g}`: {e}")))?;
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            seed: self.seed,
            strategy: self.strategy,
            max_tests: self.max_tests,
            max_solver_calls: self.max_solver_calls,
            wall_clock_ms: self.time_budget.saturating_mul(1000),
            stagnation_window: self.stagnation_window,
            sufficient_coverage: self.sufficient_coverage,
            step_budget: self.step_budget,
            solver_timeout_ms: self.solver_timeout_ms,
            ..EngineConfig::default()
        }
    }
}
