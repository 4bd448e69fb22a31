//! The concolic loop for one function under test.

use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coverage::CoverageMap;
use crate::exec::{self, execute, serialize_trace, Outcome, TestInput, Trace};
use crate::frontend::SrcLoc;
use crate::harness::HarnessPlan;
use crate::ir::{CheckKind, Dir, EdgeSite, EdgeTargets, Instr, IrModule, PointId, PointKind, SiteId};
use crate::solver::{self, export_smtlib, Query, SolveResult};
use crate::symex::{replay_symbolic, PathCondition, SymExpr, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ccs,
    Dfs,
    /// CCS first, DFS once CCS runs dry or stagnates.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EngineConfig {
    pub seed: u64,
    pub strategy: Strategy,
    pub max_tests: u32,
    pub max_solver_calls: u32,
    pub wall_clock_ms: u64,
    pub stagnation_window: u32,
    /// Statement coverage (percent) of the target at which DFS is not needed.
    pub sufficient_coverage: f64,
    pub step_budget: u64,
    pub solver_timeout_ms: u64,
    #[serde(skip)]
    pub keep_traces: bool,
    #[serde(skip)]
    pub keep_queries: bool,
    #[serde(skip)]
    pub keep_flip_log: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seed: 0,
            strategy: Strategy::Auto,
            max_tests: 500,
            max_solver_calls: 2000,
            wall_clock_ms: 30_000,
            stagnation_window: 25,
            sufficient_coverage: 100.0,
            step_budget: exec::DEFAULT_STEP_BUDGET,
            solver_timeout_ms: solver::DEFAULT_TIMEOUT_MS,
            keep_traces: false,
            keep_queries: false,
            keep_flip_log: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Seed,
    #[serde(rename = "CCS")]
    Ccs,
    #[serde(rename = "DFS")]
    Dfs,
    Manual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub trace_ref: usize,
    pub flip_index: usize,
    /// (target uncovered, depth, trace recency)
    pub priority_key: (bool, usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCaseRecord {
    pub id: u32,
    pub input: TestInput,
    pub outcome: Outcome,
    pub newly_covered: BTreeSet<PointId>,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorFinding {
    pub check_id: SiteId,
    pub kind: CheckKind,
    pub func_name: String,
    pub loc: SrcLoc,
    pub reproducing_input: TestInput,
    pub test_id: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    FullCoverage,
    FrontierEmpty,
    MaxTests,
    MaxSolverCalls,
    WallClock,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UnitStats {
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
    /// Tests run when CCS handed over to DFS.
    pub switched_to_dfs_at: Option<u32>,
    pub stop_reason: StopReason,
}

impl Default for UnitStats {
    fn default() -> Self {
        UnitStats {
            tests_run: 0,
            solver_calls: 0,
            sat: 0,
            unsat: 0,
            unknowns: 0,
            consistent: 0,
            divergences: 0,
            duplicate_inputs: 0,
            replay_errors: 0,
            replay_violations: 0,
            exec_errors: 0,
            switched_to_dfs_at: None,
            stop_reason: StopReason::FrontierEmpty,
        }
    }
}

/// One solver-derived execution with what the flip predicted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlipRecord {
    pub flip_index: usize,
    /// The parent's path up to and including the flipped branch.
    pub parent: Vec<(EdgeSite, Dir)>,
    pub expected: Vec<(EdgeSite, Dir)>,
    pub actual: Vec<(EdgeSite, Dir)>,
    pub verdict: Divergence,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnitArtifacts {
    /// `(name, text)` pairs for traces, path conditions and queries.
    pub traces: Vec<(String, String)>,
    pub path_conditions: Vec<(String, String)>,
    pub queries: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct UnitResult {
    pub function: String,
    pub file: String,
    pub plan: HarnessPlan,
    pub testcases: Vec<TestCaseRecord>,
    /// Every point reached while testing this unit, callees included.
    pub covered: BTreeSet<PointId>,
    /// The target function's own coverage.
    pub coverage: CoverageMap,
    pub findings: Vec<ErrorFinding>,
    pub stats: UnitStats,
    pub warnings: Vec<String>,
    pub artifacts: UnitArtifacts,
    pub flip_log: Vec<FlipRecord>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Divergence {
    Consistent,
    Divergent(usize),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FlipError {
    #[error("constraint {0} does not exist")]
    OutOfRange(usize),
    #[error("constraint {0} has a concrete condition and cannot be flipped")]
    NotFlippable(usize),
}

/// Constraints `0..i` as taken plus the negation of constraint `i`.
pub fn flip(pc: &PathCondition, i: usize) -> Result<Query, FlipError> {
    let c = pc.constraints.get(i).ok_or(FlipError::OutOfRange(i))?;
    if !c.flippable {
        return Err(FlipError::NotFlippable(i));
    }
    let mut cs: Vec<SymExpr> = pc.constraints[..i].iter().map(|c| c.expr.clone()).collect();
    cs.push(SymExpr::not(c.expr.clone()));
    let mut domains = BTreeMap::new();
    for e in &cs {
        for (v, _) in e.vars() {
            if let Some(d) = pc.domains.get(&v) {
                domains.insert(v, *d);
            }
        }
    }
    Ok(Query::new(cs, domains))
}

/// Keeps the last constraint and those connected to it through shared
/// variables. The dropped ones mention none of the kept variables, so the
/// parent's values still satisfy them.
pub fn independent_slice(q: &Query) -> Query {
    let Some(last) = q.constraints.last() else { return q.clone() };
    let vars: Vec<BTreeSet<Var>> = q.constraints.iter().map(|c| c.vars().into_iter().map(|(v, _)| v).collect()).collect();
    let mut keep = vec![false; q.constraints.len()];
    let mut live: BTreeSet<Var> = last.vars().into_iter().map(|(v, _)| v).collect();
    *keep.last_mut().unwrap() = true;
    loop {
        let mut grew = false;
        for (i, vs) in vars.iter().enumerate() {
            if !keep[i] && !vs.is_disjoint(&live) {
                keep[i] = true;
                live.extend(vs.iter().copied());
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let constraints = q
        .constraints
        .iter()
        .zip(&keep)
        .filter(|(c, k)| **k && !c.is_const())
        .map(|(c, _)| c.clone())
        .collect();
    Query {
        constraints,
        domains: q.domains.iter().filter(|(v, _)| live.contains(v)).map(|(v, d)| (*v, *d)).collect(),
        timeout_ms: q.timeout_ms,
        hint: q.hint.iter().filter(|(v, _)| live.contains(v)).map(|(v, d)| (*v, *d)).collect(),
    }
}

/// Prefix `0..=i` of the actual directions against what the flip predicted.
pub fn check_divergence(expected: &[(EdgeSite, Dir)], actual: &[(EdgeSite, Dir)]) -> Divergence {
    for (k, e) in expected.iter().enumerate() {
        if actual.get(k) != Some(e) {
            return Divergence::Divergent(k);
        }
    }
    Divergence::Consistent
}

fn apply_model(parent: &TestInput, model: &BTreeMap<Var, i32>) -> TestInput {
    let mut out = parent.clone();
    for (v, x) in model {
        match *v {
            Var::Sym(id) => {
                out.bindings.insert(id, *x);
            }
            Var::Fresh(tag, seq) => {
                let q = out.fresh.entry(tag).or_default();
                if q.len() <= seq as usize {
                    q.resize(seq as usize + 1, 0);
                }
                q[seq as usize] = *x;
            }
        }
    }
    // trailing default draws carry no information
    for q in out.fresh.values_mut() {
        while q.last() == Some(&0) {
            q.pop();
        }
    }
    out.fresh.retain(|_, q| !q.is_empty());
    out
}

fn hint_of(input: &TestInput, pc: &PathCondition) -> BTreeMap<Var, i32> {
    pc.domains
        .keys()
        .map(|v| {
            let x = match *v {
                Var::Sym(id) => input.bindings.get(&id).copied().unwrap_or(0),
                Var::Fresh(tag, seq) => input.fresh_value(tag, seq),
            };
            (*v, x)
        })
        .collect()
}

struct TraceInfo {
    input: TestInput,
    dirs: Vec<(EdgeSite, Dir)>,
    pc: PathCondition,
    /// Identity of the query obtained by flipping each index.
    keys: Vec<u64>,
}

fn flip_keys(pc: &PathCondition) -> Vec<u64> {
    let mut acc = DefaultHasher::new();
    let mut out = Vec::with_capacity(pc.constraints.len());
    for c in &pc.constraints {
        let mut k = acc.clone();
        0xF1u8.hash(&mut k);
        c.expr.structural_hash().hash(&mut k);
        out.push(k.finish());
        c.expr.structural_hash().hash(&mut acc);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Active {
    Ccs,
    Dfs,
}

pub struct UnitState<'a> {
    m: &'a IrModule,
    plan: &'a HarnessPlan,
    cfg: &'a EngineConfig,
    targets: &'a EdgeTargets,
    traces: Vec<TraceInfo>,
    pub covered: BTreeSet<PointId>,
    relevant: BTreeSet<PointId>,
    target_stmts: Vec<PointId>,
    frontier: BinaryHeap<(Reverse<usize>, usize)>,
    attempted: HashSet<u64>,
    executed: HashSet<TestInput>,
    dfs_cursor: Vec<usize>,
    pub strategy: Active,
    pub stagnation: u32,
    pub testcases: Vec<TestCaseRecord>,
    pub findings: Vec<ErrorFinding>,
    pub stats: UnitStats,
    pub warnings: Vec<String>,
    artifacts: UnitArtifacts,
    flip_log: Vec<FlipRecord>,
    query_count: u32,
}

impl<'a> UnitState<'a> {
    pub fn new(m: &'a IrModule, plan: &'a HarnessPlan, cfg: &'a EngineConfig, targets: &'a EdgeTargets) -> Self {
        // user functions reachable from the driver
        let mut reach: BTreeSet<u32> = BTreeSet::new();
        let mut work: Vec<u32> = m.func_index.get(&plan.driver_name).copied().into_iter().collect();
        while let Some(f) = work.pop() {
            if !reach.insert(f) {
                continue;
            }
            for b in &m.functions[f as usize].blocks {
                for i in &b.instrs {
                    if let Instr::Call { func, .. } = i {
                        work.push(*func);
                    }
                }
            }
        }
        let names: BTreeSet<&str> = reach
            .iter()
            .map(|f| &m.functions[*f as usize])
            .filter(|f| f.user)
            .map(|f| f.name.as_str())
            .collect();
        let relevant = m.points.iter().filter(|p| names.contains(p.func.as_str())).map(|p| p.id).collect();
        let target_stmts = m
            .points_of(&plan.target)
            .filter(|p| p.kind == PointKind::Stmt)
            .map(|p| p.id)
            .collect();
        UnitState {
            m,
            plan,
            cfg,
            targets,
            traces: Vec::new(),
            covered: BTreeSet::new(),
            relevant,
            target_stmts,
            frontier: BinaryHeap::new(),
            attempted: HashSet::new(),
            executed: HashSet::new(),
            dfs_cursor: Vec::new(),
            strategy: if cfg.strategy == Strategy::Dfs { Active::Dfs } else { Active::Ccs },
            stagnation: 0,
            testcases: Vec::new(),
            findings: Vec::new(),
            stats: UnitStats::default(),
            warnings: Vec::new(),
            artifacts: UnitArtifacts::default(),
            flip_log: Vec::new(),
            query_count: 0,
        }
    }

    fn target_uncovered(&self, t: usize, i: usize) -> bool {
        let (site, dir) = self.traces[t].dirs[i];
        self.targets
            .get(site, dir.flip())
            .iter()
            .any(|p| self.relevant.contains(p) && !self.covered.contains(p))
    }

    pub fn fully_covered(&self) -> bool {
        self.relevant.iter().all(|p| self.covered.contains(p))
    }

    pub fn target_stmt_percent(&self) -> f64 {
        if self.target_stmts.is_empty() {
            return 100.0;
        }
        let hit = self.target_stmts.iter().filter(|p| self.covered.contains(p)).count();
        hit as f64 * 100.0 / self.target_stmts.len() as f64
    }

    /// Adds the trace's points to the covered set and returns the new ones.
    pub fn update_coverage(&mut self, t: &Trace) -> BTreeSet<PointId> {
        let delta: BTreeSet<PointId> = t.covered.difference(&self.covered).copied().collect();
        self.covered.extend(delta.iter().copied());
        delta
    }

    pub fn next_candidate_ccs(&mut self) -> Option<Candidate> {
        while let Some((Reverse(i), t)) = self.frontier.pop() {
            if self.attempted.contains(&self.traces[t].keys[i]) || !self.target_uncovered(t, i) {
                continue;
            }
            return Some(Candidate {
                trace_ref: t,
                flip_index: i,
                priority_key: (true, i, t),
            });
        }
        None
    }

    pub fn next_candidate_dfs(&mut self) -> Option<Candidate> {
        for t in (0..self.traces.len()).rev() {
            while self.dfs_cursor[t] > 0 {
                self.dfs_cursor[t] -= 1;
                let i = self.dfs_cursor[t];
                let tr = &self.traces[t];
                if tr.pc.constraints[i].flippable && !self.attempted.contains(&tr.keys[i]) {
                    return Some(Candidate {
                        trace_ref: t,
                        flip_index: i,
                        priority_key: (self.target_uncovered(t, i), i, t),
                    });
                }
            }
        }
        None
    }

    /// One-way hand-over from CCS to DFS.
    pub fn switch_strategy(&mut self, frontier_empty: bool) -> bool {
        if self.strategy != Active::Ccs || self.cfg.strategy != Strategy::Auto {
            return false;
        }
        let stuck = frontier_empty || self.stagnation >= self.cfg.stagnation_window;
        if stuck && self.target_stmt_percent() < self.cfg.sufficient_coverage {
            self.strategy = Active::Dfs;
            self.stats.switched_to_dfs_at = Some(self.stats.tests_run);
            return true;
        }
        false
    }

    fn budget_left(&self) -> bool {
        self.stats.tests_run < self.cfg.max_tests
    }

    /// Runs one input through execute and replay and folds the result in.
    /// Returns false when nothing was executed.
    fn run_input(&mut self, input: TestInput, origin: Origin, parent: Option<(usize, usize)>) -> bool {
        if !self.budget_left() {
            return false;
        }
        if !self.executed.insert(input.clone()) {
            self.stats.duplicate_inputs += 1;
            return false;
        }
        let n = self.stats.tests_run;
        self.stats.tests_run += 1;
        let sm = &self.plan.symbol_map;
        let trace = match execute(self.m, &self.plan.driver_name, sm, &input, self.cfg.step_budget) {
            Ok(t) => t,
            Err(e) => {
                self.stats.exec_errors += 1;
                self.warnings.push(format!("execution {n} failed: {e}"));
                return true;
            }
        };
        let delta = self.update_coverage(&trace);
        if delta.is_empty() {
            self.stagnation += 1;
        } else {
            self.stagnation = 0;
        }
        let dirs = trace.directions();
        if let Some((p, i)) = parent {
            let mut expected = self.traces[p].dirs[..i].to_vec();
            let (site, dir) = self.traces[p].dirs[i];
            expected.push((site, dir.flip()));
            let verdict = check_divergence(&expected, &dirs);
            match verdict {
                Divergence::Consistent => self.stats.consistent += 1,
                Divergence::Divergent(_) => self.stats.divergences += 1,
            }
            if self.cfg.keep_flip_log {
                self.flip_log.push(FlipRecord {
                    flip_index: i,
                    parent: self.traces[p].dirs[..=i].to_vec(),
                    expected,
                    actual: dirs.clone(),
                    verdict,
                });
            }
        }
        let new_error = match trace.outcome {
            Outcome::ErrorFound(c) => !self.findings.iter().any(|f| f.check_id == c),
            _ => false,
        };
        if !delta.is_empty() || new_error || origin == Origin::Seed {
            let id = self.testcases.len() as u32;
            if let Outcome::ErrorFound(c) = trace.outcome {
                if new_error {
                    let site = &self.m.check_sites[c as usize];
                    self.findings.push(ErrorFinding {
                        check_id: c,
                        kind: site.kind,
                        func_name: site.func.clone(),
                        loc: site.loc.clone(),
                        reproducing_input: input.clone(),
                        test_id: id,
                    });
                }
            }
            self.testcases.push(TestCaseRecord {
                id,
                input: input.clone(),
                outcome: trace.outcome,
                newly_covered: delta,
                origin,
            });
        }
        if self.cfg.keep_traces {
            self.artifacts.traces.push((format!("t{n}"), serialize_trace(&trace)));
        }
        match replay_symbolic(self.m, &self.plan.driver_name, &trace, sm) {
            Err(e) => {
                self.stats.replay_errors += 1;
                self.warnings.push(format!("replay of execution {n} failed: {e}"));
            }
            Ok(r) => {
                if r.pc.holds_under(&trace) != Ok(true) {
                    self.stats.replay_violations += 1;
                }
                if self.cfg.keep_traces {
                    self.artifacts.path_conditions.push((format!("t{n}"), r.pc.to_string()));
                }
                let t = self.traces.len();
                let keys = flip_keys(&r.pc);
                self.dfs_cursor.push(r.pc.constraints.len());
                self.traces.push(TraceInfo {
                    input,
                    dirs,
                    pc: r.pc,
                    keys,
                });
                for i in 0..self.traces[t].pc.constraints.len() {
                    let tr = &self.traces[t];
                    if tr.pc.constraints[i].flippable && !self.attempted.contains(&tr.keys[i]) && self.target_uncovered(t, i)
                    {
                        self.frontier.push((Reverse(i), t));
                    }
                }
            }
        }
        true
    }

    /// Manual inputs run like generated ones. Missing symbols default to
    /// zero; inputs naming unknown symbols are skipped with a warning.
    pub fn import_manual_tests(&mut self, inputs: &[TestInput]) {
        for (k, inp) in inputs.iter().enumerate() {
            if let Some(bad) = inp.bindings.keys().find(|id| self.plan.symbol_map.get(**id).is_none()) {
                self.warnings.push(format!("manual test {k} binds unknown symbol {bad}; skipped"));
                continue;
            }
            let mut full = exec::zero_input(self.plan);
            full.bindings.extend(inp.bindings.iter().map(|(a, b)| (*a, *b)));
            full.fresh = inp.fresh.clone();
            self.run_input(full, Origin::Manual, None);
        }
    }

    /// Flips the candidate and runs the solver's model, if any.
    fn attempt(&mut self, c: Candidate, origin: Origin) {
        let tr = &self.traces[c.trace_ref];
        self.attempted.insert(tr.keys[c.flip_index]);
        let mut q = match flip(&tr.pc, c.flip_index) {
            Ok(q) => q,
            Err(e) => {
                self.warnings.push(e.to_string());
                return;
            }
        };
        q.timeout_ms = self.cfg.solver_timeout_ms;
        q.hint = hint_of(&tr.input, &tr.pc);
        let q = independent_slice(&q);
        self.stats.solver_calls += 1;
        if self.cfg.keep_queries {
            self.artifacts.queries.push((format!("q{}", self.query_count), export_smtlib(&q)));
            self.query_count += 1;
        }
        match solver::solve(&q) {
            Ok(SolveResult::Sat(model)) => {
                self.stats.sat += 1;
                let input = apply_model(&self.traces[c.trace_ref].input, &model);
                self.run_input(input, origin, Some((c.trace_ref, c.flip_index)));
            }
            Ok(SolveResult::Unsat) => self.stats.unsat += 1,
            Ok(SolveResult::Unknown(_)) => self.stats.unknowns += 1,
            Err(e) => {
                self.stats.unknowns += 1;
                self.warnings.push(format!("solver rejected query: {e}"));
            }
        }
    }

    fn run(&mut self, manual: &[TestInput], start: Instant) {
        self.run_input(exec::zero_input(self.plan), Origin::Seed, None);
        self.import_manual_tests(manual);
        self.stats.stop_reason = loop {
            if self.fully_covered() {
                break StopReason::FullCoverage;
            }
            if !self.budget_left() {
                break StopReason::MaxTests;
            }
            if self.stats.solver_calls >= self.cfg.max_solver_calls {
                break StopReason::MaxSolverCalls;
            }
            if start.elapsed().as_millis() as u64 >= self.cfg.wall_clock_ms {
                break StopReason::WallClock;
            }
            if self.strategy == Active::Ccs && self.stagnation >= self.cfg.stagnation_window {
                self.switch_strategy(false);
            }
            let cand = match self.strategy {
                Active::Ccs => self.next_candidate_ccs(),
                Active::Dfs => self.next_candidate_dfs(),
            };
            match cand {
                Some(c) => {
                    let origin = if self.strategy == Active::Ccs { Origin::Ccs } else { Origin::Dfs };
                    self.attempt(c, origin);
                }
                None => {
                    if self.switch_strategy(true) {
                        continue;
                    }
                    break StopReason::FrontierEmpty;
                }
            }
        };
    }
}

/// Tests one function. Deterministic apart from the wall-clock budget.
pub fn run_unit(m: &IrModule, plan: &HarnessPlan, cfg: &EngineConfig, targets: &EdgeTargets) -> UnitResult {
    run_unit_with(m, plan, cfg, targets, &[])
}

pub fn run_unit_with(
    m: &IrModule,
    plan: &HarnessPlan,
    cfg: &EngineConfig,
    targets: &EdgeTargets,
    manual: &[TestInput],
) -> UnitResult {
    let start = Instant::now();
    let mut st = UnitState::new(m, plan, cfg, targets);
    st.run(manual, start);
    let coverage = CoverageMap::from_points(m, [plan.target.as_str()], &st.covered);
    let mut warnings = plan.warnings.clone();
    warnings.append(&mut st.warnings);
    UnitResult {
        function: plan.target.clone(),
        file: m.function(&plan.target).map(|f| f.file.clone()).unwrap_or_default(),
        plan: plan.clone(),
        testcases: st.testcases,
        covered: st.covered,
        coverage,
        findings: st.findings,
        stats: st.stats,
        warnings,
        artifacts: st.artifacts,
        flip_log: st.flip_log,
        wall_ms: start.elapsed().as_millis() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::CmpOp;
    use crate::symex::BranchConstraint;

    fn x() -> SymExpr {
        SymExpr::var(Var::Sym(0), crate::ir::Width::I32)
    }

    fn pc(cs: Vec<(SymExpr, bool)>) -> PathCondition {
        PathCondition {
            constraints: cs
                .into_iter()
                .enumerate()
                .map(|(i, (expr, flippable))| BranchConstraint {
                    index: i,
                    site: EdgeSite::Branch(i as u32),
                    dir: Dir::Then,
                    expr,
                    flippable,
                })
                .collect(),
            domains: [(Var::Sym(0), (i32::MIN, i32::MAX))].into(),
        }
    }

    #[test]
    fn flip_negates_last() {
        let p = pc(vec![(SymExpr::cmp(CmpOp::Lt, x(), SymExpr::int(0)), true)]);
        let q = flip(&p, 0).unwrap();
        assert_eq!(q.constraints, vec![SymExpr::cmp(CmpOp::Ge, x(), SymExpr::int(0))]);
        let p = pc(vec![(SymExpr::bool(true), false)]);
        assert_eq!(flip(&p, 0).unwrap_err(), FlipError::NotFlippable(0));
    }

    #[test]
    fn divergence_verdicts() {
        let a = (EdgeSite::Branch(0), Dir::Then);
        let b = (EdgeSite::Branch(1), Dir::Else);
        assert_eq!(check_divergence(&[a, b], &[a, b, a]), Divergence::Consistent);
        assert_eq!(check_divergence(&[a, b], &[b, b]), Divergence::Divergent(0));
        assert_eq!(check_divergence(&[a, b], &[a]), Divergence::Divergent(1));
        assert_eq!(check_divergence(&[b], &[b]), Divergence::Consistent);
    }

    #[test]
    fn model_application_keeps_other_values() {
        let parent = TestInput {
            bindings: [(0, 5), (1, 6)].into(),
            fresh: BTreeMap::new(),
        };
        let m = [(Var::Sym(1), 9), (Var::Fresh(3, 1), 4)].into();
        let child = apply_model(&parent, &m);
        assert_eq!(child.bindings, [(0, 5), (1, 9)].into());
        assert_eq!(child.fresh, [(3, vec![0, 4])].into());
    }
}
