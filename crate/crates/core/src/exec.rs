//! Concrete IR interpreter that records execution traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::harness::{HarnessPlan, SymbolMap};
use crate::ir::*;

pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

/// Values for one execution. Bool symbols use 0/1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestInput {
    pub bindings: BTreeMap<u32, i32>,
    /// Stub values per tag, consumed in draw order.
    pub fresh: BTreeMap<i32, Vec<i32>>,
}

impl TestInput {
    pub fn fresh_value(&self, tag: i32, seq: u32) -> i32 {
        self.fresh.get(&tag).and_then(|v| v.get(seq as usize)).copied().unwrap_or(0)
    }
}

/// All symbols zero, or the low end of their domain when zero is outside it.
pub fn zero_input(plan: &HarnessPlan) -> TestInput {
    let bindings = plan
        .symbol_map
        .entries
        .iter()
        .map(|e| {
            let v = match e.domain {
                Some((lo, hi)) if !(lo..=hi).contains(&0) => lo,
                _ => 0,
            };
            (e.id, v)
        })
        .collect();
    TestInput {
        bindings,
        fresh: BTreeMap::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Branch { site: SiteId, dir: Dir },
    CheckPassed(SiteId),
    CheckFailed(SiteId),
    Load { site: u32, addr: Addr, value: Value },
    Store { site: u32, addr: Addr, value: Value },
    SymBind { symbol: u32, addr: Addr },
    Fresh { tag: i32, seq: u32, value: i32 },
    Call(u32),
    Ret(u32),
    Stmt(PointId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Completed,
    ErrorFound(SiteId),
    StepBudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
    pub outcome: Outcome,
    pub input: TestInput,
    pub covered: BTreeSet<PointId>,
}

impl Trace {
    /// Branch and check directions in order, as `(site, dir)` with checks
    /// passing as `Then`.
    pub fn directions(&self) -> Vec<(EdgeSite, Dir)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Branch { site, dir } => Some((EdgeSite::Branch(*site), *dir)),
                Event::CheckPassed(s) => Some((EdgeSite::Check(*s), Dir::Then)),
                Event::CheckFailed(s) => Some((EdgeSite::Check(*s), Dir::Else)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("no function named {0}")]
    UnknownDriver(String),
    #[error("input does not bind symbol {0}")]
    UnboundSymbol(u32),
    #[error("interpreter error in {func}: {message}")]
    Runtime { func: String, message: String },
}

struct Frame {
    func: u32,
    block: u32,
    ip: usize,
    temps: Vec<Value>,
    locals: Vec<u32>,
    /// Where the caller wants the return values.
    dests: Vec<Temp>,
}

pub(crate) struct Heap {
    pub objects: Vec<Vec<Value>>,
}

impl Heap {
    pub fn alloc(&mut self, cells: &[CellKind]) -> u32 {
        self.objects.push(cells.iter().map(|k| k.zero()).collect());
        (self.objects.len() - 1) as u32
    }

    fn cell(&mut self, a: Addr) -> Option<&mut Value> {
        self.objects.get_mut(a.obj as usize)?.get_mut(a.off as usize)
    }
}

pub fn execute(
    m: &IrModule,
    driver: &str,
    symbols: &SymbolMap,
    input: &TestInput,
    budget: u64,
) -> Result<Trace, ExecError> {
    let &entry = m.func_index.get(driver).ok_or_else(|| ExecError::UnknownDriver(driver.to_string()))?;
    for e in &symbols.entries {
        if !input.bindings.contains_key(&e.id) {
            return Err(ExecError::UnboundSymbol(e.id));
        }
    }
    let mut heap = Heap { objects: Vec::new() };
    let mut events = Vec::new();
    let mut covered = BTreeSet::new();
    let mut fresh_seq: BTreeMap<i32, u32> = BTreeMap::new();
    let mut steps = 0u64;

    let fail = |f: &IrFunction, msg: String| ExecError::Runtime {
        func: f.name.clone(),
        message: msg,
    };

    let mut stack = vec![new_frame(m, &mut heap, entry, &[], vec![])];
    events.push(Event::Call(entry));

    let outcome = 'run: loop {
        let frame = stack.last_mut().expect("frame");
        let f = &m.functions[frame.func as usize];
        if f.blocks.is_empty() {
            return Err(fail(f, "call to an external function without a stub".into()));
        }
        let block = &f.blocks[frame.block as usize];
        steps += 1;
        if steps > budget {
            break 'run Outcome::StepBudgetExceeded;
        }
        let val = |temps: &Vec<Value>, o: &Operand| match o {
            Operand::Temp(t) => temps[*t as usize],
            Operand::Const(v) => *v,
        };

        if frame.ip < block.instrs.len() {
            let instr = &block.instrs[frame.ip];
            frame.ip += 1;
            match instr {
                Instr::Stmt { point } => {
                    covered.insert(*point);
                    events.push(Event::Stmt(*point));
                }
                Instr::LocalAddr { dest, local } => {
                    frame.temps[*dest as usize] = Value::Ptr(Some(Addr {
                        obj: frame.locals[*local as usize],
                        off: 0,
                    }));
                }
                Instr::Alloc { dest, cells } => {
                    let obj = heap.alloc(cells);
                    frame.temps[*dest as usize] = Value::Ptr(Some(Addr { obj, off: 0 }));
                }
                Instr::Zero { local } => {
                    let obj = frame.locals[*local as usize] as usize;
                    for (c, k) in heap.objects[obj].iter_mut().zip(&f.locals[*local as usize].cells) {
                        *c = k.zero();
                    }
                }
                Instr::FieldAddr { dest, base, offset } => {
                    let v = match val(&frame.temps, base) {
                        Value::Ptr(Some(a)) => Value::Ptr(Some(Addr {
                            obj: a.obj,
                            off: a.off + offset,
                        })),
                        _ => Value::Ptr(None),
                    };
                    frame.temps[*dest as usize] = v;
                }
                Instr::IndexAddr {
                    dest,
                    base,
                    index,
                    elem_count,
                    elem_size,
                    ..
                } => {
                    let i = val(&frame.temps, index).as_int();
                    let v = match val(&frame.temps, base) {
                        Value::Ptr(Some(a)) => {
                            if i < 0 || i as u32 >= *elem_count {
                                return Err(fail(f, format!("unchecked index {i} out of bounds {elem_count}")));
                            }
                            Value::Ptr(Some(Addr {
                                obj: a.obj,
                                off: a.off + i as u32 * elem_size,
                            }))
                        }
                        _ => Value::Ptr(None),
                    };
                    frame.temps[*dest as usize] = v;
                }
                Instr::Load { dest, addr, site, .. } => {
                    let Value::Ptr(Some(a)) = val(&frame.temps, addr) else {
                        return Err(fail(f, "unchecked load through null".into()));
                    };
                    let Some(v) = heap.cell(a).copied() else {
                        return Err(fail(f, format!("load outside object at {}+{}", a.obj, a.off)));
                    };
                    frame.temps[*dest as usize] = v;
                    events.push(Event::Load {
                        site: *site,
                        addr: a,
                        value: v,
                    });
                }
                Instr::Store { addr, value, site, .. } => {
                    let Value::Ptr(Some(a)) = val(&frame.temps, addr) else {
                        return Err(fail(f, "unchecked store through null".into()));
                    };
                    let v = val(&frame.temps, value);
                    let Some(c) = heap.cell(a) else {
                        return Err(fail(f, format!("store outside object at {}+{}", a.obj, a.off)));
                    };
                    *c = v;
                    events.push(Event::Store {
                        site: *site,
                        addr: a,
                        value: v,
                    });
                }
                Instr::Arith { dest, op, lhs, rhs, .. } => {
                    let r = arith(*op, val(&frame.temps, lhs).as_int(), val(&frame.temps, rhs).as_int());
                    frame.temps[*dest as usize] = Value::Int(r);
                }
                Instr::Cmp { dest, op, lhs, rhs } => {
                    let r = op.eval(val(&frame.temps, lhs), val(&frame.temps, rhs));
                    frame.temps[*dest as usize] = Value::Bool(r);
                }
                Instr::Not { dest, src } => {
                    frame.temps[*dest as usize] = Value::Bool(!val(&frame.temps, src).as_bool());
                }
                Instr::SymBind { id, addr, width } => {
                    let id = val(&frame.temps, id).as_int() as u32;
                    let Some(&v) = input.bindings.get(&id) else {
                        return Err(ExecError::UnboundSymbol(id));
                    };
                    let Value::Ptr(Some(a)) = val(&frame.temps, addr) else {
                        return Err(fail(f, "symbol bound to null".into()));
                    };
                    let v = match width {
                        Width::I32 => Value::Int(v),
                        Width::Bool => Value::Bool(v != 0),
                    };
                    match heap.cell(a) {
                        Some(c) => *c = v,
                        None => return Err(fail(f, "symbol bound outside object".into())),
                    }
                    events.push(Event::SymBind { symbol: id, addr: a });
                }
                Instr::Fresh { dest, tag, width } => {
                    let tag = val(&frame.temps, tag).as_int();
                    let seq = fresh_seq.entry(tag).or_insert(0);
                    let raw = input.fresh_value(tag, *seq);
                    let (v, raw) = match width {
                        Width::I32 => (Value::Int(raw), raw),
                        Width::Bool => (Value::Bool(raw != 0), (raw != 0) as i32),
                    };
                    events.push(Event::Fresh {
                        tag,
                        seq: *seq,
                        value: raw,
                    });
                    *seq += 1;
                    frame.temps[*dest as usize] = v;
                }
                Instr::Call { dests, func, args } => {
                    let vals: Vec<Value> = args.iter().map(|a| val(&frame.temps, a)).collect();
                    events.push(Event::Call(*func));
                    let callee = new_frame(m, &mut heap, *func, &vals, dests.clone());
                    stack.push(callee);
                }
                Instr::Assert { cond, .. } => {
                    if !val(&frame.temps, cond).as_bool() {
                        return Err(fail(f, "assertion without injected check failed".into()));
                    }
                }
            }
            continue;
        }

        match &block.term {
            Term::Br(b) => {
                frame.block = *b;
                frame.ip = 0;
            }
            Term::CondBr {
                cond,
                then_blk,
                else_blk,
                site,
            } => {
                let c = val(&frame.temps, cond).as_bool();
                let dir = if c { Dir::Then } else { Dir::Else };
                events.push(Event::Branch { site: *site, dir });
                if let Some(p) = m.branch_sites[*site as usize].points {
                    covered.insert(p[if c { 0 } else { 1 }]);
                }
                frame.block = if c { *then_blk } else { *else_blk };
                frame.ip = 0;
            }
            Term::Check {
                site,
                operands,
                fail: fail_blk,
                cont,
            } => {
                let ok = match operands {
                    CheckOperands::Divisor(d) => val(&frame.temps, d).as_int() != 0,
                    CheckOperands::Index { index, bound } => {
                        let i = val(&frame.temps, index).as_int();
                        i >= 0 && (i as u32) < *bound
                    }
                    CheckOperands::Address(a) => matches!(val(&frame.temps, a), Value::Ptr(Some(_))),
                    CheckOperands::Predicate(p) => val(&frame.temps, p).as_bool(),
                };
                if ok {
                    events.push(Event::CheckPassed(*site));
                    frame.block = *cont;
                } else {
                    events.push(Event::CheckFailed(*site));
                    covered.insert(m.check_sites[*site as usize].fail_point);
                    frame.block = *fail_blk;
                }
                frame.ip = 0;
            }
            Term::Ret(vals) => {
                let vals: Vec<Value> = vals.iter().map(|v| val(&frame.temps, v)).collect();
                let done = stack.pop().expect("frame");
                events.push(Event::Ret(done.func));
                match stack.last_mut() {
                    None => break 'run Outcome::Completed,
                    Some(caller) => {
                        for (d, v) in done.dests.iter().zip(vals) {
                            caller.temps[*d as usize] = v;
                        }
                    }
                }
            }
            Term::Halt => {
                let site = events
                    .iter()
                    .rev()
                    .find_map(|e| match e {
                        Event::CheckFailed(s) => Some(*s),
                        _ => None,
                    })
                    .expect("halt follows a failed check");
                break 'run Outcome::ErrorFound(site);
            }
            Term::Unreachable => return Err(fail(f, "reached the end of a value-returning function".into())),
        }
    };

    Ok(Trace {
        events,
        outcome,
        input: input.clone(),
        covered,
    })
}

fn new_frame(m: &IrModule, heap: &mut Heap, func: u32, args: &[Value], dests: Vec<Temp>) -> Frame {
    let f = &m.functions[func as usize];
    let locals: Vec<u32> = f.locals.iter().map(|l| heap.alloc(&l.cells)).collect();
    let mut it = args.iter();
    for l in &locals[..f.param_count as usize] {
        for c in heap.objects[*l as usize].iter_mut() {
            *c = *it.next().expect("argument cell");
        }
    }
    Frame {
        func,
        block: 0,
        ip: 0,
        temps: vec![Value::Int(0); f.temps as usize],
        locals,
        dests,
    }
}

fn value_text(v: Value) -> String {
    match v {
        Value::Int(i) => format!("i:{i}"),
        Value::Bool(b) => format!("b:{}", b as u8),
        Value::Ptr(None) => "p:null".into(),
        Value::Ptr(Some(a)) => format!("p:{}+{}", a.obj, a.off),
    }
}

fn addr_text(a: Addr) -> String {
    format!("{}+{}", a.obj, a.off)
}

/// One event per line after a header line.
pub fn serialize_trace(t: &Trace) -> String {
    let mut out = match t.outcome {
        Outcome::Completed => "TRACE completed\n".to_string(),
        Outcome::ErrorFound(s) => format!("TRACE error {s}\n"),
        Outcome::StepBudgetExceeded => "TRACE budget\n".to_string(),
    };
    for (id, v) in &t.input.bindings {
        let _ = writeln!(out, "IN {id} {v}");
    }
    for (tag, vals) in &t.input.fresh {
        let v: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "FQ {tag}{}{}", if v.is_empty() { "" } else { " " }, v.join(" "));
    }
    for e in &t.events {
        let line = match e {
            Event::Branch { site, dir } => format!("BR {site} {}", if *dir == Dir::Then { "T" } else { "F" }),
            Event::CheckPassed(s) => format!("CP {s}"),
            Event::CheckFailed(s) => format!("CF {s}"),
            Event::Load { site, addr, value } => format!("LD {site} {} {}", addr_text(*addr), value_text(*value)),
            Event::Store { site, addr, value } => format!("ST {site} {} {}", addr_text(*addr), value_text(*value)),
            Event::SymBind { symbol, addr } => format!("SB {symbol} {}", addr_text(*addr)),
            Event::Fresh { tag, seq, value } => format!("FR {tag} {seq} {value}"),
            Event::Call(f) => format!("CALL {f}"),
            Event::Ret(f) => format!("RET {f}"),
            Event::Stmt(p) => format!("PT {p}"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    if !t.covered.is_empty() {
        let c: Vec<String> = t.covered.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "COV {}", c.join(" "));
    }
    out
}

fn parse_addr(s: &str) -> Result<Addr, String> {
    let (o, f) = s.split_once('+').ok_or_else(|| format!("bad address `{s}`"))?;
    Ok(Addr {
        obj: o.parse().map_err(|_| format!("bad address `{s}`"))?,
        off: f.parse().map_err(|_| format!("bad address `{s}`"))?,
    })
}

fn parse_value(s: &str) -> Result<Value, String> {
    let bad = || format!("bad value `{s}`");
    match s.split_once(':').ok_or_else(bad)? {
        ("i", v) => Ok(Value::Int(v.parse().map_err(|_| bad())?)),
        ("b", "0") => Ok(Value::Bool(false)),
        ("b", "1") => Ok(Value::Bool(true)),
        ("p", "null") => Ok(Value::Ptr(None)),
        ("p", a) => Ok(Value::Ptr(Some(parse_addr(a)?))),
        _ => Err(bad()),
    }
}

pub fn deserialize_trace(text: &str) -> Result<Trace, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty trace text")?;
    let outcome = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["TRACE", "completed"] => Outcome::Completed,
        ["TRACE", "budget"] => Outcome::StepBudgetExceeded,
        ["TRACE", "error", s] => Outcome::ErrorFound(s.parse().map_err(|_| format!("bad header `{header}`"))?),
        _ => return Err(format!("bad header `{header}`")),
    };
    let mut t = Trace {
        events: vec![],
        outcome,
        input: TestInput::default(),
        covered: BTreeSet::new(),
    };
    for line in lines {
        let w: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<i64, String> {
            w.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| format!("bad line `{line}`"))
        };
        let arg = |i: usize| -> Result<&str, String> { w.get(i).copied().ok_or_else(|| format!("bad line `{line}`")) };
        match w.first().copied() {
            Some("IN") => {
                t.input.bindings.insert(num(1)? as u32, num(2)? as i32);
            }
            Some("FQ") => {
                let vals = (2..w.len()).map(|i| num(i).map(|v| v as i32)).collect::<Result<_, _>>()?;
                t.input.fresh.insert(num(1)? as i32, vals);
            }
            Some("BR") => t.events.push(Event::Branch {
                site: num(1)? as u32,
                dir: match arg(2)? {
                    "T" => Dir::Then,
                    "F" => Dir::Else,
                    _ => return Err(format!("bad line `{line}`")),
                },
            }),
            Some("CP") => t.events.push(Event::CheckPassed(num(1)? as u32)),
            Some("CF") => t.events.push(Event::CheckFailed(num(1)? as u32)),
            Some("LD") => t.events.push(Event::Load {
                site: num(1)? as u32,
                addr: parse_addr(arg(2)?)?,
                value: parse_value(arg(3)?)?,
            }),
            Some("ST") => t.events.push(Event::Store {
                site: num(1)? as u32,
                addr: parse_addr(arg(2)?)?,
                value: parse_value(arg(3)?)?,
            }),
            Some("SB") => t.events.push(Event::SymBind {
                symbol: num(1)? as u32,
                addr: parse_addr(arg(2)?)?,
            }),
            Some("FR") => t.events.push(Event::Fresh {
                tag: num(1)? as i32,
                seq: num(2)? as u32,
                value: num(3)? as i32,
            }),
            Some("CALL") => t.events.push(Event::Call(num(1)? as u32)),
            Some("RET") => t.events.push(Event::Ret(num(1)? as u32)),
            Some("PT") => t.events.push(Event::Stmt(num(1)? as u32)),
            Some("COV") => {
                for i in 1..w.len() {
                    t.covered.insert(num(i)? as u32);
                }
            }
            None => {}
            Some(_) => return Err(format!("unknown trace line `{line}`")),
        }
    }
    Ok(t)
}
