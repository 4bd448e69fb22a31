use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ir::{arith, ArithOp, CmpOp, Width};

/// A solver variable: an input symbol or one draw from a stub.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    Sym(u32),
    Fresh(i32, u32),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Sym(id) => write!(f, "s{id}"),
            Var::Fresh(tag, seq) => write!(f, "f{tag}_{seq}"),
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Var(Var, Width),
    Int(i32),
    Bool(bool),
    Arith(ArithOp, SymExpr, SymExpr),
    Cmp(CmpOp, SymExpr, SymExpr),
    Not(SymExpr),
    And(SymExpr, SymExpr),
    Ite(SymExpr, SymExpr, SymExpr),
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    hash: u64,
    is_bool: bool,
}

/// Immutable, shareable symbolic expression with a precomputed structural
/// hash. Build it through the constructors, which fold constants and apply
/// the local simplifications.
#[derive(Clone, Debug)]
pub struct SymExpr(Arc<Node>);

impl PartialEq for SymExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.kind == other.0.kind)
    }
}

impl Eq for SymExpr {}

impl Hash for SymExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

fn structural_hash(kind: &Kind) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    match kind {
        Kind::Var(v, w) => (0u8, v, w).hash(&mut h),
        Kind::Int(i) => (1u8, i).hash(&mut h),
        Kind::Bool(b) => (2u8, b).hash(&mut h),
        Kind::Arith(op, a, b) => (3u8, op, a.0.hash, b.0.hash).hash(&mut h),
        Kind::Cmp(op, a, b) => (4u8, op, a.0.hash, b.0.hash).hash(&mut h),
        Kind::Not(a) => (5u8, a.0.hash).hash(&mut h),
        Kind::And(a, b) => (6u8, a.0.hash, b.0.hash).hash(&mut h),
        Kind::Ite(c, a, b) => (7u8, c.0.hash, a.0.hash, b.0.hash).hash(&mut h),
    }
    h.finish()
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("no value for {0}")]
pub struct MissingBinding(pub Var);

impl SymExpr {
    fn mk(kind: Kind) -> SymExpr {
        let is_bool = match &kind {
            Kind::Var(_, w) => *w == Width::Bool,
            Kind::Int(_) | Kind::Arith(..) => false,
            Kind::Bool(_) | Kind::Cmp(..) | Kind::Not(_) | Kind::And(..) => true,
            Kind::Ite(_, a, _) => a.is_bool(),
        };
        SymExpr(Arc::new(Node {
            hash: structural_hash(&kind),
            kind,
            is_bool,
        }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn is_bool(&self) -> bool {
        self.0.is_bool
    }

    /// Identity of the shared node, for memo tables.
    pub fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn var(v: Var, w: Width) -> SymExpr {
        SymExpr::mk(Kind::Var(v, w))
    }

    pub fn int(v: i32) -> SymExpr {
        SymExpr::mk(Kind::Int(v))
    }

    pub fn bool(v: bool) -> SymExpr {
        SymExpr::mk(Kind::Bool(v))
    }

    pub fn as_int(&self) -> Option<i32> {
        match self.kind() {
            Kind::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.kind() {
            Kind::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self.kind(), Kind::Int(_) | Kind::Bool(_))
    }

    pub fn arith(op: ArithOp, a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_int(), b.as_int(), op) {
            (Some(x), Some(y), _) => SymExpr::int(arith(op, x, y)),
            (_, Some(0), ArithOp::Add | ArithOp::Sub) => a,
            (Some(0), _, ArithOp::Add) => b,
            (_, Some(1), ArithOp::Mul | ArithOp::Div) => a,
            (Some(1), _, ArithOp::Mul) => b,
            (_, Some(0), ArithOp::Mul) | (Some(0), _, ArithOp::Mul) => SymExpr::int(0),
            _ => SymExpr::mk(Kind::Arith(op, a, b)),
        }
    }

    pub fn cmp(op: CmpOp, a: SymExpr, b: SymExpr) -> SymExpr {
        if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
            return SymExpr::bool(op.eval(x, y));
        }
        if let (Some(x), Some(y)) = (a.as_bool(), b.as_bool()) {
            return SymExpr::bool(op.eval(x, y));
        }
        if a == b {
            return SymExpr::bool(matches!(op, CmpOp::Eq | CmpOp::Le | CmpOp::Ge));
        }
        // comparisons of a boolean against a constant reduce to the boolean
        if a.is_bool() && matches!(op, CmpOp::Eq | CmpOp::Ne) {
            let (e, c) = match (a.as_bool(), b.as_bool()) {
                (_, Some(c)) => (a, c),
                (Some(c), _) => (b, c),
                _ => return SymExpr::mk(Kind::Cmp(op, a, b)),
            };
            return if c == (op == CmpOp::Eq) { e } else { SymExpr::not(e) };
        }
        SymExpr::mk(Kind::Cmp(op, a, b))
    }

    pub fn not(a: SymExpr) -> SymExpr {
        match a.kind() {
            Kind::Bool(v) => SymExpr::bool(!v),
            Kind::Not(inner) => inner.clone(),
            Kind::Cmp(op, x, y) => SymExpr::mk(Kind::Cmp(op.negate(), x.clone(), y.clone())),
            _ => SymExpr::mk(Kind::Not(a)),
        }
    }

    pub fn and(a: SymExpr, b: SymExpr) -> SymExpr {
        match (a.as_bool(), b.as_bool()) {
            (Some(false), _) | (_, Some(false)) => SymExpr::bool(false),
            (Some(true), _) => b,
            (_, Some(true)) => a,
            _ if a == b => a,
            _ => SymExpr::mk(Kind::And(a, b)),
        }
    }

    pub fn ite(c: SymExpr, a: SymExpr, b: SymExpr) -> SymExpr {
        match c.as_bool() {
            Some(true) => a,
            Some(false) => b,
            None if a == b => a,
            None => SymExpr::mk(Kind::Ite(c, a, b)),
        }
    }

    /// Evaluates with 32-bit wrapping semantics; booleans come out as 0/1.
    pub fn eval(&self, model: &dyn Fn(Var) -> Option<i32>) -> Result<i32, MissingBinding> {
        let mut memo = HashMap::new();
        self.eval_memo(model, &mut memo)
    }

    pub fn eval_memo(
        &self,
        model: &dyn Fn(Var) -> Option<i32>,
        memo: &mut HashMap<usize, i32>,
    ) -> Result<i32, MissingBinding> {
        if let Some(v) = memo.get(&self.node_id()) {
            return Ok(*v);
        }
        let v = match self.kind() {
            Kind::Var(v, w) => {
                let x = model(*v).ok_or(MissingBinding(*v))?;
                if *w == Width::Bool {
                    (x != 0) as i32
                } else {
                    x
                }
            }
            Kind::Int(i) => *i,
            Kind::Bool(b) => *b as i32,
            Kind::Arith(op, a, b) => arith(*op, a.eval_memo(model, memo)?, b.eval_memo(model, memo)?),
            Kind::Cmp(op, a, b) => op.eval(a.eval_memo(model, memo)?, b.eval_memo(model, memo)?) as i32,
            Kind::Not(a) => (a.eval_memo(model, memo)? == 0) as i32,
            Kind::And(a, b) => {
                if a.eval_memo(model, memo)? == 0 {
                    0
                } else {
                    (b.eval_memo(model, memo)? != 0) as i32
                }
            }
            Kind::Ite(c, a, b) => {
                if c.eval_memo(model, memo)? != 0 {
                    a.eval_memo(model, memo)?
                } else {
                    b.eval_memo(model, memo)?
                }
            }
        };
        memo.insert(self.node_id(), v);
        Ok(v)
    }

    /// Variables in first-occurrence order.
    pub fn vars(&self) -> Vec<(Var, Width)> {
        let mut out = Vec::new();
        let mut seen_nodes = std::collections::HashSet::new();
        let mut seen_vars = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen_nodes.insert(e.node_id()) {
                continue;
            }
            match e.kind() {
                Kind::Var(v, w) => {
                    if seen_vars.insert(*v) {
                        out.push((*v, *w));
                    }
                }
                Kind::Int(_) | Kind::Bool(_) => {}
                Kind::Arith(_, a, b) | Kind::Cmp(_, a, b) | Kind::And(a, b) => {
                    stack.push(b.clone());
                    stack.push(a.clone());
                }
                Kind::Not(a) => stack.push(a.clone()),
                Kind::Ite(c, a, b) => {
                    stack.push(b.clone());
                    stack.push(a.clone());
                    stack.push(c.clone());
                }
            }
        }
        out
    }

    /// Children in order.
    pub fn children(&self) -> Vec<&SymExpr> {
        match self.kind() {
            Kind::Var(..) | Kind::Int(_) | Kind::Bool(_) => vec![],
            Kind::Arith(_, a, b) | Kind::Cmp(_, a, b) | Kind::And(a, b) => vec![a, b],
            Kind::Not(a) => vec![a],
            Kind::Ite(c, a, b) => vec![c, a, b],
        }
    }
}

/// Rebuilds `e` bottom-up through the simplifying constructors.
pub fn simplify(e: &SymExpr) -> SymExpr {
    let mut memo: HashMap<usize, SymExpr> = HashMap::new();
    simplify_memo(e, &mut memo)
}

fn simplify_memo(e: &SymExpr, memo: &mut HashMap<usize, SymExpr>) -> SymExpr {
    if let Some(s) = memo.get(&e.node_id()) {
        return s.clone();
    }
    let s = match e.kind() {
        Kind::Var(..) | Kind::Int(_) | Kind::Bool(_) => e.clone(),
        Kind::Arith(op, a, b) => SymExpr::arith(*op, simplify_memo(a, memo), simplify_memo(b, memo)),
        Kind::Cmp(op, a, b) => SymExpr::cmp(*op, simplify_memo(a, memo), simplify_memo(b, memo)),
        Kind::Not(a) => SymExpr::not(simplify_memo(a, memo)),
        Kind::And(a, b) => SymExpr::and(simplify_memo(a, memo), simplify_memo(b, memo)),
        Kind::Ite(c, a, b) => SymExpr::ite(simplify_memo(c, memo), simplify_memo(a, memo), simplify_memo(b, memo)),
    };
    memo.insert(e.node_id(), s.clone());
    s
}

fn arith_sym(op: ArithOp) -> &'static str {
    match op {
        ArithOp::Add => "+",
        ArithOp::Sub => "-",
        ArithOp::Mul => "*",
        ArithOp::Div => "/",
        ArithOp::Rem => "%",
    }
}

fn cmp_sym(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "==",
        CmpOp::Ne => "!=",
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    }
}

/// Prefix notation, e.g. `(< s0 0)`.
impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Var(v, _) => write!(f, "{v}"),
            Kind::Int(i) => write!(f, "{i}"),
            Kind::Bool(b) => write!(f, "{b}"),
            Kind::Arith(op, a, b) => write!(f, "({} {a} {b})", arith_sym(*op)),
            Kind::Cmp(op, a, b) => write!(f, "({} {a} {b})", cmp_sym(*op)),
            Kind::Not(a) => write!(f, "(not {a})"),
            Kind::And(a, b) => write!(f, "(and {a} {b})"),
            Kind::Ite(c, a, b) => write!(f, "(ite {c} {a} {b})"),
        }
    }
}
