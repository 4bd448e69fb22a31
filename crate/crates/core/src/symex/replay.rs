use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::exec::{Event, Trace};
use crate::harness::SymbolMap;
use crate::ir::*;

use super::expr::{SymExpr, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct BranchConstraint {
    pub index: usize,
    pub site: EdgeSite,
    /// For checks, `Then` is the passing side.
    pub dir: Dir,
    /// The condition as taken.
    pub expr: SymExpr,
    pub flippable: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathCondition {
    pub constraints: Vec<BranchConstraint>,
    /// Inclusive ranges of every variable that occurs in the constraints.
    pub domains: BTreeMap<Var, (i32, i32)>,
}

impl PathCondition {
    /// Every constraint evaluated under the values the trace ran with.
    pub fn holds_under(&self, t: &Trace) -> Result<bool, super::expr::MissingBinding> {
        let model = |v: Var| match v {
            Var::Sym(id) => t.input.bindings.get(&id).copied(),
            Var::Fresh(tag, seq) => Some(t.input.fresh_value(tag, seq)),
        };
        let mut memo = HashMap::new();
        for c in &self.constraints {
            if c.expr.eval_memo(&model, &mut memo)? == 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// One constraint per line, prefix notation.
impl fmt::Display for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            let (kind, id) = match c.site {
                EdgeSite::Branch(s) => ("br", s),
                EdgeSite::Check(s) => ("check", s),
            };
            let dir = match (c.site, c.dir) {
                (EdgeSite::Branch(_), Dir::Then) => "T",
                (EdgeSite::Branch(_), Dir::Else) => "F",
                (EdgeSite::Check(_), Dir::Then) => "pass",
                (EdgeSite::Check(_), Dir::Else) => "fail",
            };
            let flip = if c.flippable { "" } else { " const" };
            writeln!(f, "{} {kind} {id} {dir}{flip} {}", c.index, c.expr)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("trace diverges from the IR at event {index}: expected {expected}, found {found}")]
    Divergent {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("unknown driver {0}")]
    UnknownDriver(String),
    #[error("replay failed in {func}: {message}")]
    Runtime { func: String, message: String },
}

/// Symbolic state after replay: per object, per cell, the concrete value and
/// the symbolic value when it is not a constant.
#[derive(Clone, Debug, Default)]
pub struct SymMemory {
    pub objects: Vec<Vec<(Value, Option<SymExpr>)>>,
}

impl SymMemory {
    pub fn alloc(&mut self, cells: &[CellKind]) -> u32 {
        self.objects.push(cells.iter().map(|k| (k.zero(), None)).collect());
        (self.objects.len() - 1) as u32
    }

    /// Write rule: the concretely addressed cell gets the value, whatever
    /// symbolic form the address had.
    pub fn sym_store(&mut self, concrete: Addr, value: Value, sym: Option<SymExpr>) -> Result<(), String> {
        let cell = self
            .objects
            .get_mut(concrete.obj as usize)
            .and_then(|o| o.get_mut(concrete.off as usize))
            .ok_or_else(|| format!("store outside object at {}+{}", concrete.obj, concrete.off))?;
        let sym = if matches!(value, Value::Ptr(_)) { None } else { sym };
        *cell = (value, sym.filter(|s| !s.is_const()));
        Ok(())
    }

    /// Read rule: a symbolic offset selects among the accessed object's cells
    /// of the loaded kind with a right-folded `ite` chain.
    pub fn sym_load(&self, concrete: Addr, sym_offset: Option<&SymExpr>) -> Result<(Value, Option<SymExpr>), String> {
        let obj = self
            .objects
            .get(concrete.obj as usize)
            .ok_or_else(|| format!("load from unknown object {}", concrete.obj))?;
        let (value, sym) = obj
            .get(concrete.off as usize)
            .cloned()
            .ok_or_else(|| format!("load outside object at {}+{}", concrete.obj, concrete.off))?;
        let Some(off) = sym_offset else { return Ok((value, sym)) };
        if matches!(value, Value::Ptr(_)) {
            return Ok((value, None));
        }
        let same_kind = |v: &Value| std::mem::discriminant(v) == std::mem::discriminant(&value);
        let cells: Vec<(u32, SymExpr)> = obj
            .iter()
            .enumerate()
            .filter(|(_, (v, _))| same_kind(v))
            .map(|(k, (v, s))| (k as u32, s.clone().unwrap_or_else(|| const_of(*v))))
            .collect();
        Ok((value, Some(ite_chain(off, &cells))))
    }
}

/// `ite(off == k0, c0, ite(off == k1, c1, ... c_last))`.
pub fn ite_chain(off: &SymExpr, cells: &[(u32, SymExpr)]) -> SymExpr {
    let (_, last) = cells.last().expect("object has a cell of the loaded kind");
    let mut acc = last.clone();
    for (k, c) in cells[..cells.len() - 1].iter().rev() {
        let cond = SymExpr::cmp(CmpOp::Eq, off.clone(), SymExpr::int(*k as i32));
        acc = SymExpr::ite(cond, c.clone(), acc);
    }
    acc
}

fn const_of(v: Value) -> SymExpr {
    match v {
        Value::Int(i) => SymExpr::int(i),
        Value::Bool(b) => SymExpr::bool(b),
        Value::Ptr(_) => SymExpr::int(0),
    }
}

struct Frame {
    func: u32,
    block: u32,
    ip: usize,
    temps: Vec<Value>,
    /// For integer and boolean temps the symbolic value; for addresses the
    /// symbolic offset within the object.
    syms: Vec<Option<SymExpr>>,
    locals: Vec<u32>,
    dests: Vec<Temp>,
}

pub struct Replay {
    pub pc: PathCondition,
    pub memory: SymMemory,
}

struct Walker<'a> {
    m: &'a IrModule,
    t: &'a Trace,
    pos: usize,
    mem: SymMemory,
    constraints: Vec<BranchConstraint>,
    fresh_seq: BTreeMap<i32, u32>,
}

fn event_text(e: Option<&Event>) -> String {
    match e {
        None => "end of trace".into(),
        Some(e) => format!("{e:?}"),
    }
}

impl Walker<'_> {
    fn expect(&mut self, e: Event) -> Result<(), ReplayError> {
        let found = self.t.events.get(self.pos);
        if found != Some(&e) {
            return Err(ReplayError::Divergent {
                index: self.pos,
                expected: format!("{e:?}"),
                found: event_text(found),
            });
        }
        self.pos += 1;
        Ok(())
    }

    fn constraint(&mut self, site: EdgeSite, dir: Dir, cond_as_taken: Option<SymExpr>) {
        let (expr, flippable) = match cond_as_taken {
            Some(e) if !e.is_const() => (e, true),
            _ => (SymExpr::bool(true), false),
        };
        let index = self.constraints.len();
        self.constraints.push(BranchConstraint {
            index,
            site,
            dir,
            expr,
            flippable,
        });
    }

    fn new_frame(&mut self, func: u32, args: &[(Value, Option<SymExpr>)], dests: Vec<Temp>) -> Frame {
        let f = &self.m.functions[func as usize];
        let locals: Vec<u32> = f.locals.iter().map(|l| self.mem.alloc(&l.cells)).collect();
        let mut it = args.iter();
        for l in &locals[..f.param_count as usize] {
            for c in self.mem.objects[*l as usize].iter_mut() {
                let (v, s) = it.next().expect("argument cell").clone();
                let s = if matches!(v, Value::Ptr(_)) { None } else { s };
                *c = (v, s);
            }
        }
        Frame {
            func,
            block: 0,
            ip: 0,
            temps: vec![Value::Int(0); f.temps as usize],
            syms: vec![None; f.temps as usize],
            locals,
            dests,
        }
    }
}

fn operand(fr: &Frame, o: &Operand) -> (Value, Option<SymExpr>) {
    match o {
        Operand::Temp(t) => (fr.temps[*t as usize], fr.syms[*t as usize].clone()),
        Operand::Const(v) => (*v, None),
    }
}

fn sym_or_const(v: Value, s: Option<SymExpr>) -> SymExpr {
    s.unwrap_or_else(|| const_of(v))
}

/// Replays `t` over `m`, rebuilding symbolic values and the path condition.
pub fn replay_symbolic(m: &IrModule, driver: &str, t: &Trace, sm: &SymbolMap) -> Result<Replay, ReplayError> {
    let &entry = m.func_index.get(driver).ok_or_else(|| ReplayError::UnknownDriver(driver.to_string()))?;
    let mut w = Walker {
        m,
        t,
        pos: 0,
        mem: SymMemory::default(),
        constraints: Vec::new(),
        fresh_seq: BTreeMap::new(),
    };
    let runtime = |f: &IrFunction, msg: String| ReplayError::Runtime {
        func: f.name.clone(),
        message: msg,
    };

    w.expect(Event::Call(entry))?;
    let first = w.new_frame(entry, &[], vec![]);
    let mut stack = vec![first];
    let budget_hit = t.outcome == crate::exec::Outcome::StepBudgetExceeded;

    loop {
        let fr = stack.last_mut().expect("frame");
        let f = &m.functions[fr.func as usize];
        if f.blocks.is_empty() {
            return Err(runtime(f, "call to an external function without a stub".into()));
        }
        let block = &f.blocks[fr.block as usize];
        // a budget-limited trace simply stops; so does its replay
        if budget_hit && w.pos >= t.events.len() {
            break;
        }

        if fr.ip < block.instrs.len() {
            let instr = &block.instrs[fr.ip];
            fr.ip += 1;
            match instr {
                Instr::Stmt { point } => {
                    w.expect(Event::Stmt(*point))?;
                }
                Instr::LocalAddr { dest, local } => {
                    fr.temps[*dest as usize] = Value::Ptr(Some(Addr {
                        obj: fr.locals[*local as usize],
                        off: 0,
                    }));
                    fr.syms[*dest as usize] = None;
                }
                Instr::Alloc { dest, cells } => {
                    let obj = w.mem.alloc(cells);
                    fr.temps[*dest as usize] = Value::Ptr(Some(Addr { obj, off: 0 }));
                    fr.syms[*dest as usize] = None;
                }
                Instr::Zero { local } => {
                    let obj = fr.locals[*local as usize] as usize;
                    for (c, k) in w.mem.objects[obj].iter_mut().zip(&f.locals[*local as usize].cells) {
                        *c = (k.zero(), None);
                    }
                }
                Instr::FieldAddr { dest, base, offset } => {
                    let (b, bs) = operand(fr, base);
                    let v = match b {
                        Value::Ptr(Some(a)) => Value::Ptr(Some(Addr {
                            obj: a.obj,
                            off: a.off + offset,
                        })),
                        _ => Value::Ptr(None),
                    };
                    fr.temps[*dest as usize] = v;
                    fr.syms[*dest as usize] =
                        bs.map(|s| SymExpr::arith(ArithOp::Add, s, SymExpr::int(*offset as i32)));
                }
                Instr::IndexAddr {
                    dest,
                    base,
                    index,
                    elem_count,
                    elem_size,
                    ..
                } => {
                    let (b, bs) = operand(fr, base);
                    let (i, is) = operand(fr, index);
                    let i = i.as_int();
                    let v = match b {
                        Value::Ptr(Some(a)) => {
                            if i < 0 || i as u32 >= *elem_count {
                                return Err(runtime(f, format!("unchecked index {i}")));
                            }
                            Value::Ptr(Some(Addr {
                                obj: a.obj,
                                off: a.off + i as u32 * elem_size,
                            }))
                        }
                        _ => Value::Ptr(None),
                    };
                    let sym = if bs.is_some() || is.is_some() {
                        let base_off = match b {
                            Value::Ptr(Some(a)) => a.off as i32,
                            _ => 0,
                        };
                        let bse = bs.unwrap_or_else(|| SymExpr::int(base_off));
                        let ie = is.unwrap_or_else(|| SymExpr::int(i));
                        let scaled = SymExpr::arith(ArithOp::Mul, ie, SymExpr::int(*elem_size as i32));
                        Some(SymExpr::arith(ArithOp::Add, bse, scaled))
                    } else {
                        None
                    };
                    fr.temps[*dest as usize] = v;
                    fr.syms[*dest as usize] = sym;
                }
                Instr::Load { dest, addr, site, .. } => {
                    let (a, off) = operand(fr, addr);
                    let Value::Ptr(Some(a)) = a else {
                        return Err(runtime(f, "load through null".into()));
                    };
                    let (v, s) = w.mem.sym_load(a, off.as_ref()).map_err(|e| runtime(f, e))?;
                    fr.temps[*dest as usize] = v;
                    fr.syms[*dest as usize] = s.filter(|s| !s.is_const());
                    w.expect(Event::Load {
                        site: *site,
                        addr: a,
                        value: v,
                    })?;
                }
                Instr::Store { addr, value, site, .. } => {
                    let (a, _) = operand(fr, addr);
                    let Value::Ptr(Some(a)) = a else {
                        return Err(runtime(f, "store through null".into()));
                    };
                    let (v, s) = operand(fr, value);
                    w.mem.sym_store(a, v, s).map_err(|e| runtime(f, e))?;
                    w.expect(Event::Store {
                        site: *site,
                        addr: a,
                        value: v,
                    })?;
                }
                Instr::Arith { dest, op, lhs, rhs, .. } => {
                    let (l, ls) = operand(fr, lhs);
                    let (r, rs) = operand(fr, rhs);
                    fr.temps[*dest as usize] = Value::Int(arith(*op, l.as_int(), r.as_int()));
                    fr.syms[*dest as usize] = if ls.is_some() || rs.is_some() {
                        Some(SymExpr::arith(*op, sym_or_const(l, ls), sym_or_const(r, rs))).filter(|e| !e.is_const())
                    } else {
                        None
                    };
                }
                Instr::Cmp { dest, op, lhs, rhs } => {
                    let (l, ls) = operand(fr, lhs);
                    let (r, rs) = operand(fr, rhs);
                    fr.temps[*dest as usize] = Value::Bool(op.eval(l, r));
                    let pointers = matches!(l, Value::Ptr(_)) || matches!(r, Value::Ptr(_));
                    fr.syms[*dest as usize] = if !pointers && (ls.is_some() || rs.is_some()) {
                        Some(SymExpr::cmp(*op, sym_or_const(l, ls), sym_or_const(r, rs))).filter(|e| !e.is_const())
                    } else {
                        None
                    };
                }
                Instr::Not { dest, src } => {
                    let (v, s) = operand(fr, src);
                    fr.temps[*dest as usize] = Value::Bool(!v.as_bool());
                    fr.syms[*dest as usize] = s.map(SymExpr::not).filter(|e| !e.is_const());
                }
                Instr::SymBind { id, addr, width } => {
                    let id = operand(fr, id).0.as_int() as u32;
                    let Value::Ptr(Some(a)) = operand(fr, addr).0 else {
                        return Err(runtime(f, "symbol bound to null".into()));
                    };
                    let raw = *t.input.bindings.get(&id).ok_or_else(|| runtime(f, format!("unbound symbol {id}")))?;
                    let v = match width {
                        Width::I32 => Value::Int(raw),
                        Width::Bool => Value::Bool(raw != 0),
                    };
                    w.mem
                        .sym_store(a, v, Some(SymExpr::var(Var::Sym(id), *width)))
                        .map_err(|e| runtime(f, e))?;
                    w.expect(Event::SymBind { symbol: id, addr: a })?;
                }
                Instr::Fresh { dest, tag, width } => {
                    let tag = operand(fr, tag).0.as_int();
                    let seq = w.fresh_seq.entry(tag).or_insert(0);
                    let s = *seq;
                    *seq += 1;
                    let raw = t.input.fresh_value(tag, s);
                    let (v, raw) = match width {
                        Width::I32 => (Value::Int(raw), raw),
                        Width::Bool => (Value::Bool(raw != 0), (raw != 0) as i32),
                    };
                    fr.temps[*dest as usize] = v;
                    fr.syms[*dest as usize] = Some(SymExpr::var(Var::Fresh(tag, s), *width));
                    w.expect(Event::Fresh { tag, seq: s, value: raw })?;
                }
                Instr::Call { dests, func, args } => {
                    let vals: Vec<(Value, Option<SymExpr>)> = args.iter().map(|a| operand(fr, a)).collect();
                    w.expect(Event::Call(*func))?;
                    let callee = w.new_frame(*func, &vals, dests.clone());
                    stack.push(callee);
                }
                Instr::Assert { .. } => {}
            }
            continue;
        }

        match &block.term {
            Term::Br(b) => {
                fr.block = *b;
                fr.ip = 0;
            }
            Term::CondBr {
                cond,
                then_blk,
                else_blk,
                site,
            } => {
                let (c, cs) = operand(fr, cond);
                let c = c.as_bool();
                let dir = if c { Dir::Then } else { Dir::Else };
                let (nb, site) = (if c { *then_blk } else { *else_blk }, *site);
                fr.block = nb;
                fr.ip = 0;
                w.expect(Event::Branch { site, dir })?;
                let taken = cs.map(|s| if c { s } else { SymExpr::not(s) });
                w.constraint(EdgeSite::Branch(site), dir, taken);
            }
            Term::Check {
                site,
                operands,
                fail,
                cont,
            } => {
                let (ok, pass_expr) = match operands {
                    CheckOperands::Divisor(d) => {
                        let (v, s) = operand(fr, d);
                        (v.as_int() != 0, s.map(|s| SymExpr::cmp(CmpOp::Ne, s, SymExpr::int(0))))
                    }
                    CheckOperands::Index { index, bound } => {
                        let (v, s) = operand(fr, index);
                        let i = v.as_int();
                        let e = s.map(|s| {
                            SymExpr::and(
                                SymExpr::cmp(CmpOp::Ge, s.clone(), SymExpr::int(0)),
                                SymExpr::cmp(CmpOp::Lt, s, SymExpr::int(*bound as i32)),
                            )
                        });
                        (i >= 0 && (i as u32) < *bound, e)
                    }
                    CheckOperands::Address(a) => (matches!(operand(fr, a).0, Value::Ptr(Some(_))), None),
                    CheckOperands::Predicate(p) => {
                        let (v, s) = operand(fr, p);
                        (v.as_bool(), s)
                    }
                };
                let site = *site;
                fr.block = if ok { *cont } else { *fail };
                fr.ip = 0;
                let (ev, dir) = if ok {
                    (Event::CheckPassed(site), Dir::Then)
                } else {
                    (Event::CheckFailed(site), Dir::Else)
                };
                w.expect(ev)?;
                let taken = pass_expr.map(|e| if ok { e } else { SymExpr::not(e) });
                w.constraint(EdgeSite::Check(site), dir, taken);
            }
            Term::Ret(vals) => {
                let vals: Vec<(Value, Option<SymExpr>)> = vals.iter().map(|v| operand(fr, v)).collect();
                let done = stack.pop().expect("frame");
                w.expect(Event::Ret(done.func))?;
                match stack.last_mut() {
                    None => break,
                    Some(caller) => {
                        for (d, (v, s)) in done.dests.iter().zip(vals) {
                            caller.temps[*d as usize] = v;
                            caller.syms[*d as usize] = if matches!(v, Value::Ptr(_)) { None } else { s };
                        }
                    }
                }
            }
            Term::Halt => break,
            Term::Unreachable => return Err(runtime(f, "reached unreachable".into())),
        }
    }

    if w.pos != t.events.len() {
        return Err(ReplayError::Divergent {
            index: w.pos,
            expected: "end of trace".into(),
            found: event_text(t.events.get(w.pos)),
        });
    }

    let mut domains = BTreeMap::new();
    for c in &w.constraints {
        for (v, width) in c.expr.vars() {
            let range = match (v, width) {
                (_, Width::Bool) => (0, 1),
                (Var::Sym(id), Width::I32) => sm.range(id),
                (Var::Fresh(..), Width::I32) => (i32::MIN, i32::MAX),
            };
            domains.insert(v, range);
        }
    }
    Ok(Replay {
        pc: PathCondition {
            constraints: w.constraints,
            domains,
        },
        memory: w.mem,
    })
}
