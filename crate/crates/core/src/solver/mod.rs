//! Bounded 32-bit constraint solver: interval propagation to a fixpoint,
//! then complete backtracking search with exact evaluation as the final gate.

mod interval;
mod smtlib;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ir::{ArithOp, CmpOp, Width};
use crate::symex::{Kind, MissingBinding, SymExpr, Var};

pub use interval::Interval;
pub use smtlib::export_smtlib;

pub const DEFAULT_TIMEOUT_MS: u64 = 200;

/// Work units (node visits) granted per millisecond of timeout. The budget is
/// counted rather than measured, so results do not depend on machine load.
pub const WORK_PER_MS: u64 = 10_000;

#[derive(Clone, Debug)]
pub struct Query {
    pub constraints: Vec<SymExpr>,
    /// Inclusive ranges; variables without an entry get the full range of
    /// their width.
    pub domains: BTreeMap<Var, (i32, i32)>,
    pub timeout_ms: u64,
    /// Preferred values, tried first when they lie in the current range.
    pub hint: BTreeMap<Var, i32>,
}

impl Query {
    pub fn new(constraints: Vec<SymExpr>, domains: BTreeMap<Var, (i32, i32)>) -> Query {
        Query {
            constraints,
            domains,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            hint: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnknownReason {
    Timeout,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(BTreeMap<Var, i32>),
    Unsat,
    Unknown(UnknownReason),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("constraint is not boolean: {0}")]
    NotBoolean(String),
}

pub fn eval_model(constraints: &[SymExpr], model: &BTreeMap<Var, i32>) -> Result<bool, MissingBinding> {
    let lookup = |v: Var| model.get(&v).copied();
    let mut memo = HashMap::new();
    for c in constraints {
        if c.eval_memo(&lookup, &mut memo)? == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Op {
    Var(usize),
    Const(i64),
    Arith(ArithOp, usize, usize),
    Cmp(CmpOp, usize, usize),
    Not(usize),
    And(usize, usize),
    Ite(usize, usize, usize),
}

/// The query as a topologically ordered node list without duplicates.
pub(crate) struct Compiled {
    pub ops: Vec<Op>,
    pub roots: Vec<usize>,
    pub vars: Vec<Var>,
    pub var_node: Vec<usize>,
    pub base_domains: Vec<Interval>,
    /// For comparison nodes, `lhs - rhs` as a linear form when both sides
    /// are built from +, - and multiplication by constants.
    pub cmp_lin: Vec<Option<interval::Lin>>,
}

fn compile(q: &Query) -> Result<Compiled, SolveError> {
    let mut c = Compiled {
        ops: Vec::new(),
        roots: Vec::new(),
        vars: Vec::new(),
        var_node: Vec::new(),
        base_domains: Vec::new(),
        cmp_lin: Vec::new(),
    };
    let mut by_node: HashMap<usize, usize> = HashMap::new();
    let mut by_struct: HashMap<SymExpr, usize> = HashMap::new();
    let mut var_index: BTreeMap<Var, usize> = BTreeMap::new();

    fn go(
        e: &SymExpr,
        q: &Query,
        c: &mut Compiled,
        by_node: &mut HashMap<usize, usize>,
        by_struct: &mut HashMap<SymExpr, usize>,
        var_index: &mut BTreeMap<Var, usize>,
    ) -> usize {
        if let Some(i) = by_node.get(&e.node_id()) {
            return *i;
        }
        if let Some(i) = by_struct.get(e) {
            by_node.insert(e.node_id(), *i);
            return *i;
        }
        let mut sub = |x: &SymExpr, c: &mut Compiled| go(x, q, c, by_node, by_struct, var_index);
        let op = match e.kind() {
            Kind::Var(v, w) => {
                let vi = match var_index.get(v) {
                    Some(i) => *i,
                    None => {
                        let i = c.vars.len();
                        c.vars.push(*v);
                        let (lo, hi) = match (q.domains.get(v), w) {
                            (_, Width::Bool) => (0, 1),
                            (Some(d), _) => *d,
                            (None, _) => (i32::MIN, i32::MAX),
                        };
                        c.base_domains.push(Interval::new(lo as i64, hi as i64));
                        c.var_node.push(usize::MAX);
                        var_index.insert(*v, i);
                        i
                    }
                };
                Op::Var(vi)
            }
            Kind::Int(i) => Op::Const(*i as i64),
            Kind::Bool(b) => Op::Const(*b as i64),
            Kind::Arith(op, a, b) => {
                let (a, b) = (sub(a, c), sub(b, c));
                Op::Arith(*op, a, b)
            }
            Kind::Cmp(op, a, b) => {
                let (a, b) = (sub(a, c), sub(b, c));
                Op::Cmp(*op, a, b)
            }
            Kind::Not(a) => Op::Not(sub(a, c)),
            Kind::And(a, b) => {
                let (a, b) = (sub(a, c), sub(b, c));
                Op::And(a, b)
            }
            Kind::Ite(x, a, b) => {
                let (x, a, b) = (sub(x, c), sub(a, c), sub(b, c));
                Op::Ite(x, a, b)
            }
        };
        let idx = c.ops.len();
        if let Op::Var(vi) = op {
            c.var_node[vi] = idx;
        }
        c.ops.push(op);
        by_node.insert(e.node_id(), idx);
        by_struct.insert(e.clone(), idx);
        idx
    }

    for e in &q.constraints {
        if !e.is_bool() {
            return Err(SolveError::NotBoolean(e.to_string()));
        }
        let r = go(e, q, &mut c, &mut by_node, &mut by_struct, &mut var_index);
        c.roots.push(r);
    }
    c.cmp_lin = interval::linear_forms(&c.ops);
    Ok(c)
}

struct Search<'a> {
    c: &'a Compiled,
    q: &'a Query,
    work: u64,
    budget: u64,
    /// Scratch buffers reused across propagation passes.
    fwd: Vec<Interval>,
    req: Vec<Interval>,
}

#[derive(Debug)]
struct OutOfWork;

fn closest_to(iv: Interval, target: i64) -> i64 {
    target.clamp(iv.lo, iv.hi)
}

impl Search<'_> {
    fn hint(&self, vi: usize) -> Option<i64> {
        self.q.hint.get(&self.c.vars[vi]).map(|v| *v as i64)
    }

    /// Exact evaluation of all roots under singleton domains.
    fn exact(&mut self, vals: &[i64]) -> bool {
        self.work += self.c.ops.len() as u64;
        let mut v = vec![0i64; self.c.ops.len()];
        for (i, op) in self.c.ops.iter().enumerate() {
            v[i] = match *op {
                Op::Var(x) => vals[x],
                Op::Const(k) => k,
                Op::Arith(o, a, b) => crate::ir::arith(o, v[a] as i32, v[b] as i32) as i64,
                Op::Cmp(o, a, b) => o.eval(v[a], v[b]) as i64,
                Op::Not(a) => (v[a] == 0) as i64,
                Op::And(a, b) => (v[a] != 0 && v[b] != 0) as i64,
                Op::Ite(x, a, b) => {
                    if v[x] != 0 {
                        v[a]
                    } else {
                        v[b]
                    }
                }
            };
        }
        self.c.roots.iter().all(|r| v[*r] != 0)
    }

    fn solve(&mut self, mut dom: Vec<Interval>) -> Result<Option<Vec<i64>>, OutOfWork> {
        if self.work > self.budget {
            return Err(OutOfWork);
        }
        let all_true = match interval::propagate(self.c, &mut dom, &mut self.fwd, &mut self.req, &mut self.work) {
            None => return Ok(None),
            Some(t) => t,
        };
        if all_true || dom.iter().all(|d| d.lo == d.hi) {
            // any point of the box works when propagation proves every root;
            // the exact check still has the final word
            let vals: Vec<i64> = dom
                .iter()
                .enumerate()
                .map(|(i, d)| closest_to(*d, self.hint(i).unwrap_or(0)))
                .collect();
            if self.exact(&vals) {
                return Ok(Some(vals));
            }
            if dom.iter().all(|d| d.lo == d.hi) {
                return Ok(None);
            }
        }
        // branch on the smallest undecided range
        let (vi, d) = dom
            .iter()
            .enumerate()
            .filter(|(_, d)| d.lo < d.hi)
            .min_by_key(|(i, d)| (d.hi - d.lo, *i))
            .map(|(i, d)| (i, *d))
            .expect("undecided variable");
        let target = self.hint(vi).unwrap_or(0);
        let mut parts: Vec<Interval> = Vec::with_capacity(3);
        if let Some(h) = self.hint(vi).filter(|h| d.contains(*h)) {
            parts.push(Interval::new(h, h));
            if d.lo < h {
                parts.push(Interval::new(d.lo, h - 1));
            }
            if h < d.hi {
                parts.push(Interval::new(h + 1, d.hi));
            }
            // the singleton first, then the nearer remaining side
            if parts.len() == 3 && (parts[2].lo - target) < (target - parts[1].hi) {
                parts.swap(1, 2);
            }
        } else {
            let mid = d.lo + (d.hi - d.lo) / 2;
            let lower = Interval::new(d.lo, mid);
            let upper = Interval::new(mid + 1, d.hi);
            if target > mid {
                parts.push(upper);
                parts.push(lower);
            } else {
                parts.push(lower);
                parts.push(upper);
            }
        }
        for p in parts {
            let mut sub = dom.clone();
            sub[vi] = p;
            if let Some(m) = self.solve(sub)? {
                return Ok(Some(m));
            }
        }
        Ok(None)
    }
}

pub fn solve(q: &Query) -> Result<SolveResult, SolveError> {
    let c = compile(q)?;
    let mut s = Search {
        c: &c,
        q,
        work: 0,
        budget: q.timeout_ms.saturating_mul(WORK_PER_MS),
        fwd: Vec::new(),
        req: Vec::new(),
    };
    let outcome = s.solve(c.base_domains.clone());
    Ok(match outcome {
        Err(OutOfWork) => SolveResult::Unknown(UnknownReason::Timeout),
        Ok(None) => SolveResult::Unsat,
        Ok(Some(vals)) => {
            let mut model: BTreeMap<Var, i32> = c.vars.iter().zip(vals).map(|(v, x)| (*v, x as i32)).collect();
            for (v, (lo, hi)) in &q.domains {
                model.entry(*v).or_insert_with(|| {
                    let h = q.hint.get(v).copied().unwrap_or(0);
                    h.clamp(*lo, *hi)
                });
            }
            debug_assert_eq!(eval_model(&q.constraints, &model), Ok(true));
            SolveResult::Sat(model)
        }
    })
}

/// Interval fixpoint over the query's variables, or `None` when it proves
/// the query unsatisfiable.
pub fn propagate_intervals(q: &Query) -> Result<Option<BTreeMap<Var, (i64, i64)>>, SolveError> {
    let c = compile(q)?;
    let mut dom = c.base_domains.clone();
    let (mut fwd, mut req, mut work) = (Vec::new(), Vec::new(), 0u64);
    Ok(interval::propagate(&c, &mut dom, &mut fwd, &mut req, &mut work).map(|_| {
        let mut out: BTreeMap<Var, (i64, i64)> = c.vars.iter().zip(&dom).map(|(v, d)| (*v, (d.lo, d.hi))).collect();
        for (v, (lo, hi)) in &q.domains {
            out.entry(*v).or_insert((*lo as i64, *hi as i64));
        }
        out
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(id: u32) -> SymExpr {
        SymExpr::var(Var::Sym(id), Width::I32)
    }

    fn int(v: i32) -> SymExpr {
        SymExpr::int(v)
    }

    #[test]
    fn unique_integer_between() {
        let q = Query::new(
            vec![SymExpr::cmp(CmpOp::Gt, var(0), int(0)), SymExpr::cmp(CmpOp::Lt, var(0), int(2))],
            BTreeMap::new(),
        );
        assert_eq!(solve(&q).unwrap(), SolveResult::Sat([(Var::Sym(0), 1)].into()));
    }

    #[test]
    fn empty_gap_is_unsat() {
        let q = Query::new(
            vec![SymExpr::cmp(CmpOp::Gt, var(0), int(0)), SymExpr::cmp(CmpOp::Lt, var(0), int(1))],
            BTreeMap::new(),
        );
        assert_eq!(solve(&q).unwrap(), SolveResult::Unsat);
    }

    #[test]
    fn linear_system_on_small_grid() {
        let three_x = SymExpr::arith(ArithOp::Mul, int(3), var(0));
        let q = Query::new(
            vec![
                SymExpr::cmp(CmpOp::Eq, SymExpr::arith(ArithOp::Add, three_x, var(1)), int(10)),
                SymExpr::cmp(CmpOp::Gt, var(0), var(1)),
            ],
            [(Var::Sym(0), (0, 15)), (Var::Sym(1), (0, 15))].into(),
        );
        assert_eq!(
            solve(&q).unwrap(),
            SolveResult::Sat([(Var::Sym(0), 3), (Var::Sym(1), 1)].into())
        );
    }

    #[test]
    fn propagation_examples() {
        let q = Query::new(
            vec![SymExpr::cmp(CmpOp::Ge, var(0), int(5)), SymExpr::cmp(CmpOp::Le, var(0), int(5))],
            BTreeMap::new(),
        );
        assert_eq!(propagate_intervals(&q).unwrap().unwrap()[&Var::Sym(0)], (5, 5));

        let q = Query::new(
            vec![
                SymExpr::cmp(CmpOp::Lt, var(0), var(1)),
                SymExpr::cmp(CmpOp::Lt, var(1), int(-5)),
            ],
            [(Var::Sym(0), (0, 9))].into(),
        );
        assert_eq!(propagate_intervals(&q).unwrap(), None);

        let q = Query::new(
            vec![SymExpr::cmp(CmpOp::Eq, var(1), SymExpr::arith(ArithOp::Add, var(0), int(1)))],
            [(Var::Sym(0), (0, 3))].into(),
        );
        assert_eq!(propagate_intervals(&q).unwrap().unwrap()[&Var::Sym(1)], (1, 4));
    }

    #[test]
    fn wrapping_matters() {
        let e = SymExpr::cmp(CmpOp::Gt, SymExpr::arith(ArithOp::Add, var(0), int(1)), var(0));
        let q = Query::new(vec![SymExpr::not(e)], BTreeMap::new());
        assert_eq!(solve(&q).unwrap(), SolveResult::Sat([(Var::Sym(0), i32::MAX)].into()));
    }
}
