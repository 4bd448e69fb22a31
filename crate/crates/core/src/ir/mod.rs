//! Basic-block IR, runtime-error check injection and coverage points.
//!
//! Locals live in memory: every local (parameters included) is an object
//! allocated when its frame is entered, addressed through `LocalAddr`.
//! Temporaries are single-assignment per function. Records and arrays travel
//! between functions as flattened scalar cells.

mod checks;
mod dump;
mod lower;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::{SrcLoc, Ty};

pub use checks::inject_checks;
pub use lower::{lower, LowerError};

pub type BlockId = u32;
pub type Temp = u32;
pub type PointId = u32;
pub type SiteId = u32;

/// Address of one scalar cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Addr {
    pub obj: u32,
    pub off: u32,
}

/// A runtime scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i32),
    Bool(bool),
    /// `None` is the null address.
    Ptr(Option<Addr>),
}

impl Value {
    pub fn as_int(self) -> i32 {
        match self {
            Value::Int(v) => v,
            Value::Bool(b) => b as i32,
            Value::Ptr(_) => panic!("address used as integer"),
        }
    }

    pub fn as_bool(self) -> bool {
        match self {
            Value::Bool(b) => b,
            Value::Int(v) => v != 0,
            Value::Ptr(p) => p.is_some(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Ptr(None) => f.write_str("null"),
            Value::Ptr(Some(a)) => write!(f, "@{}+{}", a.obj, a.off),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Int,
    Bool,
    Ptr,
}

impl CellKind {
    pub fn zero(self) -> Value {
        match self {
            CellKind::Int => Value::Int(0),
            CellKind::Bool => Value::Bool(false),
            CellKind::Ptr => Value::Ptr(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Temp(Temp),
    Const(Value),
}

impl Operand {
    pub fn int(v: i32) -> Operand {
        Operand::Const(Value::Int(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn eval<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// 32-bit wrapping arithmetic. Division truncates; a zero divisor yields 0
/// (only reachable when no check guards the operation).
pub fn arith(op: ArithOp, a: i32, b: i32) -> i32 {
    match op {
        ArithOp::Add => a.wrapping_add(b),
        ArithOp::Sub => a.wrapping_sub(b),
        ArithOp::Mul => a.wrapping_mul(b),
        ArithOp::Div => {
            if b == 0 {
                0
            } else {
                a.wrapping_div(b)
            }
        }
        ArithOp::Rem => {
            if b == 0 {
                0
            } else {
                a.wrapping_rem(b)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Width {
    I32,
    Bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instr {
    /// Marks the start of an executable source statement.
    Stmt { point: PointId },
    LocalAddr { dest: Temp, local: u32 },
    /// Fresh zero-initialised heap object.
    Alloc { dest: Temp, cells: Vec<CellKind> },
    /// Resets a local object to zero, for declarations without initialiser.
    Zero { local: u32 },
    /// `base + offset` cells; null stays null.
    FieldAddr { dest: Temp, base: Operand, offset: u32 },
    IndexAddr {
        dest: Temp,
        base: Operand,
        index: Operand,
        elem_count: u32,
        elem_size: u32,
        guarded: bool,
        loc: SrcLoc,
    },
    Load { dest: Temp, addr: Operand, site: u32, guarded: bool, loc: SrcLoc },
    Store { addr: Operand, value: Operand, site: u32, guarded: bool, loc: SrcLoc },
    Arith { dest: Temp, op: ArithOp, lhs: Operand, rhs: Operand, guarded: bool, loc: SrcLoc },
    Cmp { dest: Temp, op: CmpOp, lhs: Operand, rhs: Operand },
    Not { dest: Temp, src: Operand },
    Call { dests: Vec<Temp>, func: u32, args: Vec<Operand> },
    /// Binds input symbol `id` into the cell at `addr`.
    SymBind { id: Operand, addr: Operand, width: Width },
    /// Draws the next stub value for `tag`.
    Fresh { dest: Temp, tag: Operand, width: Width },
    /// Placeholder replaced by a `UserAssert` check during injection.
    Assert { cond: Operand, loc: SrcLoc },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckKind {
    DivByZero,
    ModByZero,
    IndexOutOfBounds,
    NullDeref,
    UserAssert,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::DivByZero => "DivByZero",
            CheckKind::ModByZero => "ModByZero",
            CheckKind::IndexOutOfBounds => "IndexOutOfBounds",
            CheckKind::NullDeref => "NullDeref",
            CheckKind::UserAssert => "UserAssert",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckOperands {
    /// Passes when non-zero.
    Divisor(Operand),
    /// Passes when `0 <= index < bound`.
    Index { index: Operand, bound: u32 },
    /// Passes when non-null.
    Address(Operand),
    /// Passes when true.
    Predicate(Operand),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Br(BlockId),
    CondBr { cond: Operand, then_blk: BlockId, else_blk: BlockId, site: SiteId },
    Check { site: SiteId, operands: CheckOperands, fail: BlockId, cont: BlockId },
    Ret(Vec<Operand>),
    /// End of a failed check's block: the execution stops with a finding.
    Halt,
    /// Reaching this is an interpreter error (falls off a value function).
    Unreachable,
}

impl Term {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Term::Br(b) => vec![*b],
            Term::CondBr { then_blk, else_blk, .. } => vec![*then_blk, *else_blk],
            Term::Check { fail, cont, .. } => vec![*cont, *fail],
            Term::Ret(_) | Term::Halt | Term::Unreachable => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub instrs: Vec<Instr>,
    pub term: Term,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Local {
    pub name: String,
    pub ty: Ty,
    pub cells: Vec<CellKind>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrFunction {
    pub name: String,
    pub file: String,
    pub loc: SrcLoc,
    /// False for generated harness code, which has no points and no checks.
    pub user: bool,
    /// Parameters are locals `0..param_count`.
    pub param_count: u32,
    pub ret: Ty,
    pub ret_cells: u32,
    pub locals: Vec<Local>,
    pub temps: u32,
    /// Entry is block 0. Empty for bodiless externals.
    pub blocks: Vec<Block>,
}

impl IrFunction {
    pub fn param_cells(&self) -> usize {
        self.locals[..self.param_count as usize].iter().map(|l| l.cells.len()).sum()
    }

    pub fn successors(&self) -> BTreeMap<BlockId, Vec<BlockId>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (i as BlockId, b.term.successors()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldLayout {
    pub name: String,
    pub ty: Ty,
    pub offset: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordLayout {
    pub fields: Vec<FieldLayout>,
    pub cells: Vec<CellKind>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dir {
    Then,
    Else,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::Then => Dir::Else,
            Dir::Else => Dir::Then,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointKind {
    Stmt,
    Branch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoveragePoint {
    pub id: PointId,
    pub kind: PointKind,
    pub func: String,
    pub loc: SrcLoc,
    pub dir: Option<Dir>,
    pub is_error_edge: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchSite {
    pub func: String,
    pub loc: SrcLoc,
    /// Points for the then and else directions; `None` in harness code.
    pub points: Option<[PointId; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckSite {
    pub func: String,
    pub loc: SrcLoc,
    pub kind: CheckKind,
    pub fail_point: PointId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrModule {
    pub functions: Vec<IrFunction>,
    pub func_index: BTreeMap<String, u32>,
    pub layouts: BTreeMap<String, RecordLayout>,
    pub points: Vec<CoveragePoint>,
    pub branch_sites: Vec<BranchSite>,
    pub check_sites: Vec<CheckSite>,
    pub mem_sites: u32,
}

/// Coverage denominators of one function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PointTotals {
    pub stmt: u32,
    pub branch: u32,
}

impl IrModule {
    pub fn function(&self, name: &str) -> Option<&IrFunction> {
        self.func_index.get(name).map(|i| &self.functions[*i as usize])
    }

    pub fn cells_of(&self, ty: &Ty) -> Vec<CellKind> {
        lower::cells_of(&self.layouts, ty)
    }

    /// Which points belong to `func`, split by kind; error edges excluded.
    pub fn points_of(&self, func: &str) -> impl Iterator<Item = &CoveragePoint> {
        let func = func.to_string();
        self.points.iter().filter(move |p| p.func == func)
    }

    /// Points a flip toward `dir` of a branch or check site could reach
    /// first: the edge itself plus the statements of the successor block,
    /// following passed checks.
    pub fn edge_targets(&self, site: EdgeSite, dir: Dir) -> Vec<PointId> {
        let mut out = Vec::new();
        let (fi, succ) = match site {
            EdgeSite::Branch(s) => {
                let bs = &self.branch_sites[s as usize];
                if let Some(p) = bs.points {
                    out.push(p[if dir == Dir::Then { 0 } else { 1 }]);
                }
                let Some((fi, b)) = self.find_term(|t| matches!(t, Term::CondBr { site, .. } if *site == s)) else {
                    return out;
                };
                let Term::CondBr { then_blk, else_blk, .. } = &self.functions[fi].blocks[b as usize].term else {
                    unreachable!()
                };
                (fi, if dir == Dir::Then { *then_blk } else { *else_blk })
            }
            EdgeSite::Check(s) => {
                if dir == Dir::Else {
                    out.push(self.check_sites[s as usize].fail_point);
                    return out;
                }
                let Some((fi, b)) = self.find_term(|t| matches!(t, Term::Check { site, .. } if *site == s)) else {
                    return out;
                };
                let Term::Check { cont, .. } = &self.functions[fi].blocks[b as usize].term else { unreachable!() };
                (fi, *cont)
            }
        };
        let f = &self.functions[fi];
        let mut b = succ;
        loop {
            let blk = &f.blocks[b as usize];
            for i in &blk.instrs {
                if let Instr::Stmt { point } = i {
                    out.push(*point);
                }
            }
            match &blk.term {
                Term::Check { cont, .. } => b = *cont,
                Term::CondBr { site, .. } => {
                    if let Some(p) = self.branch_sites[*site as usize].points {
                        out.extend(p);
                    }
                    break;
                }
                _ => break,
            }
        }
        out
    }

    fn find_term(&self, pred: impl Fn(&Term) -> bool) -> Option<(usize, BlockId)> {
        for (fi, f) in self.functions.iter().enumerate() {
            for (bi, b) in f.blocks.iter().enumerate() {
                if pred(&b.term) {
                    return Some((fi, bi as BlockId));
                }
            }
        }
        None
    }

    /// Precomputed `edge_targets` for every site and direction.
    pub fn all_edge_targets(&self) -> EdgeTargets {
        let mut loc: BTreeMap<EdgeSite, (usize, BlockId)> = BTreeMap::new();
        for (fi, f) in self.functions.iter().enumerate() {
            for (bi, b) in f.blocks.iter().enumerate() {
                match &b.term {
                    Term::CondBr { site, .. } => {
                        loc.insert(EdgeSite::Branch(*site), (fi, bi as BlockId));
                    }
                    Term::Check { site, .. } => {
                        loc.insert(EdgeSite::Check(*site), (fi, bi as BlockId));
                    }
                    _ => {}
                }
            }
        }
        let mut map = BTreeMap::new();
        for site in loc.keys() {
            for dir in [Dir::Then, Dir::Else] {
                map.insert((*site, dir), self.edge_targets(*site, dir));
            }
        }
        EdgeTargets { map }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeSite {
    Branch(SiteId),
    Check(SiteId),
}

#[derive(Clone, Debug, Default)]
pub struct EdgeTargets {
    map: BTreeMap<(EdgeSite, Dir), Vec<PointId>>,
}

impl EdgeTargets {
    pub fn get(&self, site: EdgeSite, dir: Dir) -> &[PointId] {
        self.map.get(&(site, dir)).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Per-function statement and branch denominators. Error edges of checks
/// are not counted.
pub fn enumerate_coverage_points(m: &IrModule) -> BTreeMap<String, PointTotals> {
    let mut out: BTreeMap<String, PointTotals> = BTreeMap::new();
    for f in m.functions.iter().filter(|f| f.user) {
        out.entry(f.name.clone()).or_default();
    }
    for p in &m.points {
        let e = out.entry(p.func.clone()).or_default();
        match (p.kind, p.is_error_edge) {
            (PointKind::Stmt, _) => e.stmt += 1,
            (PointKind::Branch, false) => e.branch += 1,
            (PointKind::Branch, true) => {}
        }
    }
    out
}

pub use dump::dump_module;
