use std::collections::{BTreeMap, HashMap};

use crate::frontend::link::{SYM_BOOL, SYM_FRESH_BOOL, SYM_FRESH_I32, SYM_I32};
use crate::frontend::*;

use super::*;

#[derive(Debug, thiserror::Error)]
#[error("internal lowering error in function {func}: {message}")]
pub struct LowerError {
    pub func: String,
    pub message: String,
}

pub(crate) fn cells_of(layouts: &BTreeMap<String, RecordLayout>, ty: &Ty) -> Vec<CellKind> {
    match ty {
        Ty::Int => vec![CellKind::Int],
        Ty::Bool => vec![CellKind::Bool],
        Ty::Ptr(_) | Ty::Null => vec![CellKind::Ptr],
        Ty::Record(n) => layouts[n].cells.clone(),
        Ty::Array(e, n) => {
            let one = cells_of(layouts, e);
            let mut out = Vec::with_capacity(one.len() * *n as usize);
            for _ in 0..*n {
                out.extend_from_slice(&one);
            }
            out
        }
        Ty::Void => vec![],
    }
}

fn compute_layouts(p: &Program) -> BTreeMap<String, RecordLayout> {
    fn build(p: &Program, name: &str, out: &mut BTreeMap<String, RecordLayout>) {
        if out.contains_key(name) {
            return;
        }
        let r = p.record(name);
        for f in &r.fields {
            let mut t = &f.ty;
            while let Ty::Array(e, _) = t {
                t = e;
            }
            if let Ty::Record(n) = t {
                build(p, n, out);
            }
        }
        let mut fields = Vec::new();
        let mut cells = Vec::new();
        for f in &r.fields {
            fields.push(FieldLayout {
                name: f.name.clone(),
                ty: f.ty.clone(),
                offset: cells.len() as u32,
            });
            cells.extend(cells_of(out, &f.ty));
        }
        out.insert(name.to_string(), RecordLayout { fields, cells });
    }
    let mut out = BTreeMap::new();
    for n in &p.record_order {
        build(p, n, &mut out);
    }
    out
}

/// Lowers every function of `p`. User functions come first in program order
/// so their point ids do not depend on the generated harness.
pub fn lower(p: &Program) -> Result<IrModule, LowerError> {
    let layouts = compute_layouts(p);
    let mut order: Vec<&String> = p.function_order.iter().filter(|n| !p.generated.contains(*n)).collect();
    order.extend(p.function_order.iter().filter(|n| p.generated.contains(*n)));
    let func_index: BTreeMap<String, u32> = order.iter().enumerate().map(|(i, n)| ((*n).clone(), i as u32)).collect();

    let mut m = IrModule {
        functions: Vec::new(),
        func_index: func_index.clone(),
        layouts,
        points: Vec::new(),
        branch_sites: Vec::new(),
        check_sites: Vec::new(),
        mem_sites: 0,
    };
    for name in order {
        let f = &p.functions[name];
        let user = !p.generated.contains(name);
        let lowered = FnLower::new(p, &mut m, f, user).run()?;
        m.functions.push(lowered);
    }
    Ok(m)
}

struct Bb {
    instrs: Vec<Instr>,
    term: Option<Term>,
}

struct FnLower<'a> {
    p: &'a Program,
    m: &'a mut IrModule,
    f: &'a FuncDef,
    file: String,
    user: bool,
    locals: Vec<Local>,
    scopes: Vec<HashMap<String, u32>>,
    temps: u32,
    blocks: Vec<Bb>,
    cur: BlockId,
}

type LResult<T> = Result<T, LowerError>;

impl<'a> FnLower<'a> {
    fn new(p: &'a Program, m: &'a mut IrModule, f: &'a FuncDef, user: bool) -> Self {
        FnLower {
            p,
            m,
            f,
            file: p.file_of.get(&f.name).cloned().unwrap_or_default(),
            user,
            locals: Vec::new(),
            scopes: vec![HashMap::new()],
            temps: 0,
            blocks: Vec::new(),
            cur: 0,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> LResult<T> {
        Err(LowerError {
            func: self.f.name.clone(),
            message: message.into(),
        })
    }

    fn run(mut self) -> LResult<IrFunction> {
        for prm in &self.f.params {
            self.declare(&prm.name, &prm.ty);
        }
        let param_count = self.locals.len() as u32;
        let ret_cells = cells_of(&self.m.layouts, &self.f.ret).len() as u32;
        if let Some(body) = &self.f.body {
            self.cur = self.new_block();
            for s in body {
                self.stmt(s)?;
            }
            if self.blocks[self.cur as usize].term.is_none() {
                let t = if self.f.ret == Ty::Void { Term::Ret(vec![]) } else { Term::Unreachable };
                self.terminate(t);
            }
        }
        let blocks = self
            .blocks
            .into_iter()
            .map(|b| Block {
                instrs: b.instrs,
                term: b.term.unwrap_or(Term::Unreachable),
            })
            .collect();
        Ok(IrFunction {
            name: self.f.name.clone(),
            file: self.file,
            loc: self.f.loc.clone(),
            user: self.user,
            param_count,
            ret: self.f.ret.clone(),
            ret_cells,
            locals: self.locals,
            temps: self.temps,
            blocks,
        })
    }

    fn declare(&mut self, name: &str, ty: &Ty) -> u32 {
        let idx = self.locals.len() as u32;
        self.locals.push(Local {
            name: name.to_string(),
            ty: ty.clone(),
            cells: cells_of(&self.m.layouts, ty),
        });
        self.scopes.last_mut().unwrap().insert(name.to_string(), idx);
        idx
    }

    fn lookup(&self, name: &str) -> LResult<u32> {
        match self.scopes.iter().rev().find_map(|s| s.get(name)) {
            Some(i) => Ok(*i),
            None => self.err(format!("unresolved variable {name}")),
        }
    }

    fn new_block(&mut self) -> BlockId {
        self.blocks.push(Bb { instrs: Vec::new(), term: None });
        (self.blocks.len() - 1) as BlockId
    }

    fn temp(&mut self) -> Temp {
        self.temps += 1;
        self.temps - 1
    }

    fn emit(&mut self, i: Instr) {
        if self.blocks[self.cur as usize].term.is_some() {
            // code after a return: keep it in a block nobody jumps to
            self.cur = self.new_block();
        }
        self.blocks[self.cur as usize].instrs.push(i);
    }

    fn terminate(&mut self, t: Term) {
        if self.blocks[self.cur as usize].term.is_some() {
            self.cur = self.new_block();
        }
        self.blocks[self.cur as usize].term = Some(t);
    }

    fn switch_to(&mut self, b: BlockId) {
        self.cur = b;
    }

    fn stmt_point(&mut self, loc: &SrcLoc) {
        if !self.user {
            return;
        }
        let id = self.m.points.len() as PointId;
        self.m.points.push(CoveragePoint {
            id,
            kind: PointKind::Stmt,
            func: self.f.name.clone(),
            loc: loc.clone(),
            dir: None,
            is_error_edge: false,
        });
        self.emit(Instr::Stmt { point: id });
    }

    fn branch_site(&mut self, loc: &SrcLoc) -> SiteId {
        let points = if self.user {
            let base = self.m.points.len() as PointId;
            for (k, dir) in [Dir::Then, Dir::Else].into_iter().enumerate() {
                self.m.points.push(CoveragePoint {
                    id: base + k as PointId,
                    kind: PointKind::Branch,
                    func: self.f.name.clone(),
                    loc: loc.clone(),
                    dir: Some(dir),
                    is_error_edge: false,
                });
            }
            Some([base, base + 1])
        } else {
            None
        };
        self.m.branch_sites.push(BranchSite {
            func: self.f.name.clone(),
            loc: loc.clone(),
            points,
        });
        (self.m.branch_sites.len() - 1) as SiteId
    }

    fn mem_site(&mut self) -> u32 {
        self.m.mem_sites += 1;
        self.m.mem_sites - 1
    }

    fn stmt(&mut self, s: &Stmt) -> LResult<()> {
        if s.kind.is_executable() {
            self.stmt_point(&s.loc);
        }
        match &s.kind {
            StmtKind::Block(stmts) => {
                self.scopes.push(HashMap::new());
                for s in stmts {
                    self.stmt(s)?;
                }
                self.scopes.pop();
            }
            StmtKind::Decl { name, ty, init } => match init {
                Some(e) => {
                    let vals = self.value(e)?;
                    let local = self.declare(name, ty);
                    let addr = self.local_addr(local);
                    self.store_cells(addr, vals, &s.loc);
                }
                None => {
                    let local = self.declare(name, ty);
                    self.emit(Instr::Zero { local });
                }
            },
            StmtKind::Assign { target, value } => {
                let addr = self.lvalue(target)?;
                let vals = self.value(value)?;
                self.store_cells(addr, vals, &s.loc);
            }
            StmtKind::Expr(e) => {
                self.value(e)?;
            }
            StmtKind::If { cond, then, els } => {
                let then_b = self.new_block();
                let join = self.new_block();
                let else_b = if els.is_some() { self.new_block() } else { join };
                self.cond(cond, then_b, else_b)?;
                self.switch_to(then_b);
                self.scoped(then)?;
                self.terminate(Term::Br(join));
                if let Some(e) = els {
                    self.switch_to(else_b);
                    self.scoped(e)?;
                    self.terminate(Term::Br(join));
                }
                self.switch_to(join);
            }
            StmtKind::While { cond, body } => {
                let header = self.new_block();
                let body_b = self.new_block();
                let exit = self.new_block();
                self.terminate(Term::Br(header));
                self.switch_to(header);
                self.cond(cond, body_b, exit)?;
                self.switch_to(body_b);
                self.scoped(body)?;
                self.terminate(Term::Br(header));
                self.switch_to(exit);
            }
            StmtKind::Return(v) => {
                let vals = match v {
                    Some(e) => self.value(e)?,
                    None => vec![],
                };
                self.terminate(Term::Ret(vals));
            }
            StmtKind::Assert(e) => {
                let c = self.scalar(e)?;
                self.emit(Instr::Assert { cond: c, loc: e.loc.clone() });
            }
        }
        Ok(())
    }

    fn scoped(&mut self, s: &Stmt) -> LResult<()> {
        self.scopes.push(HashMap::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    /// Lowers a boolean condition as a branch chain to `t` or `f`.
    fn cond(&mut self, e: &Expr, t: BlockId, f: BlockId) -> LResult<()> {
        match &e.kind {
            ExprKind::Binary(BinaryOp::And, a, b) => {
                let mid = self.new_block();
                self.cond(a, mid, f)?;
                self.switch_to(mid);
                self.cond(b, t, f)
            }
            ExprKind::Binary(BinaryOp::Or, a, b) => {
                let mid = self.new_block();
                self.cond(a, t, mid)?;
                self.switch_to(mid);
                self.cond(b, t, f)
            }
            ExprKind::Unary(UnaryOp::Not, a) => self.cond(a, f, t),
            ExprKind::Bool(b) => {
                self.terminate(Term::Br(if *b { t } else { f }));
                Ok(())
            }
            _ => {
                let c = self.scalar(e)?;
                let site = self.branch_site(&e.loc);
                self.terminate(Term::CondBr {
                    cond: c,
                    then_blk: t,
                    else_blk: f,
                    site,
                });
                Ok(())
            }
        }
    }

    fn local_addr(&mut self, local: u32) -> Operand {
        let dest = self.temp();
        self.emit(Instr::LocalAddr { dest, local });
        Operand::Temp(dest)
    }

    fn offset(&mut self, base: Operand, offset: u32) -> Operand {
        if offset == 0 {
            return base;
        }
        let dest = self.temp();
        self.emit(Instr::FieldAddr { dest, base, offset });
        Operand::Temp(dest)
    }

    fn load(&mut self, addr: Operand, loc: &SrcLoc) -> Operand {
        let dest = self.temp();
        let site = self.mem_site();
        self.emit(Instr::Load {
            dest,
            addr,
            site,
            guarded: false,
            loc: loc.clone(),
        });
        Operand::Temp(dest)
    }

    fn store_cells(&mut self, addr: Operand, vals: Vec<Operand>, loc: &SrcLoc) {
        for (k, v) in vals.into_iter().enumerate() {
            let a = self.offset(addr.clone(), k as u32);
            let site = self.mem_site();
            self.emit(Instr::Store {
                addr: a,
                value: v,
                site,
                guarded: false,
                loc: loc.clone(),
            });
        }
    }

    /// Address of an assignable expression.
    fn lvalue(&mut self, e: &Expr) -> LResult<Operand> {
        match &e.kind {
            ExprKind::Var(n) => {
                let l = self.lookup(n)?;
                Ok(self.local_addr(l))
            }
            ExprKind::Field(base, fname) => {
                let b = self.lvalue(base)?;
                let Ty::Record(rn) = base.ty() else {
                    return self.err("field access on non-record");
                };
                let Some(fl) = self.m.layouts[rn].fields.iter().find(|f| &f.name == fname) else {
                    return self.err(format!("no field {fname} in {rn}"));
                };
                let off = fl.offset;
                Ok(self.offset(b, off))
            }
            ExprKind::Index(base, idx) => {
                let b = self.lvalue(base)?;
                let i = self.scalar(idx)?;
                let Ty::Array(elem, n) = base.ty() else {
                    return self.err("indexing non-array");
                };
                let elem_size = cells_of(&self.m.layouts, elem).len() as u32;
                let dest = self.temp();
                self.emit(Instr::IndexAddr {
                    dest,
                    base: b,
                    index: i,
                    elem_count: *n,
                    elem_size,
                    guarded: false,
                    loc: e.loc.clone(),
                });
                Ok(Operand::Temp(dest))
            }
            ExprKind::Deref(inner) => self.scalar(inner),
            _ => self.err(format!("expression at {} is not assignable", e.loc)),
        }
    }

    fn scalar(&mut self, e: &Expr) -> LResult<Operand> {
        let mut v = self.value(e)?;
        if v.len() != 1 {
            return self.err(format!("expected a scalar at {}", e.loc));
        }
        Ok(v.pop().unwrap())
    }

    /// The flattened cells of an expression's value.
    fn value(&mut self, e: &Expr) -> LResult<Vec<Operand>> {
        let one = |o: Operand| Ok(vec![o]);
        match &e.kind {
            ExprKind::Int(v) => one(Operand::int(*v as i32)),
            ExprKind::Bool(b) => one(Operand::Const(Value::Bool(*b))),
            ExprKind::Null => one(Operand::Const(Value::Ptr(None))),
            ExprKind::Var(_) | ExprKind::Field(..) | ExprKind::Index(..) | ExprKind::Deref(_) => {
                let addr = self.lvalue(e)?;
                let n = cells_of(&self.m.layouts, e.ty()).len() as u32;
                let mut out = Vec::with_capacity(n as usize);
                for k in 0..n {
                    let a = self.offset(addr.clone(), k);
                    out.push(self.load(a, &e.loc));
                }
                Ok(out)
            }
            ExprKind::Unary(UnaryOp::Neg, a) => {
                let v = self.scalar(a)?;
                let dest = self.temp();
                self.emit(Instr::Arith {
                    dest,
                    op: ArithOp::Sub,
                    lhs: Operand::int(0),
                    rhs: v,
                    guarded: false,
                    loc: e.loc.clone(),
                });
                one(Operand::Temp(dest))
            }
            ExprKind::Unary(UnaryOp::Not, a) => {
                let v = self.scalar(a)?;
                let dest = self.temp();
                self.emit(Instr::Not { dest, src: v });
                one(Operand::Temp(dest))
            }
            ExprKind::Binary(op @ (BinaryOp::And | BinaryOp::Or), _, _) => {
                let _ = op;
                // materialise through a hidden local so both sides stay lazy
                let local = self.declare(&format!("$sc{}", self.locals.len()), &Ty::Bool);
                let t = self.new_block();
                let f = self.new_block();
                let join = self.new_block();
                self.cond(e, t, f)?;
                for (blk, val) in [(t, true), (f, false)] {
                    self.switch_to(blk);
                    let a = self.local_addr(local);
                    self.store_cells(a, vec![Operand::Const(Value::Bool(val))], &e.loc);
                    self.terminate(Term::Br(join));
                }
                self.switch_to(join);
                let a = self.local_addr(local);
                one(self.load(a, &e.loc))
            }
            ExprKind::Binary(op, a, b) => {
                let l = self.scalar(a)?;
                let r = self.scalar(b)?;
                let dest = self.temp();
                let arith = match op {
                    BinaryOp::Add => Some(ArithOp::Add),
                    BinaryOp::Sub => Some(ArithOp::Sub),
                    BinaryOp::Mul => Some(ArithOp::Mul),
                    BinaryOp::Div => Some(ArithOp::Div),
                    BinaryOp::Rem => Some(ArithOp::Rem),
                    _ => None,
                };
                if let Some(aop) = arith {
                    self.emit(Instr::Arith {
                        dest,
                        op: aop,
                        lhs: l,
                        rhs: r,
                        guarded: false,
                        loc: e.loc.clone(),
                    });
                } else {
                    let cop = match op {
                        BinaryOp::Eq => CmpOp::Eq,
                        BinaryOp::Ne => CmpOp::Ne,
                        BinaryOp::Lt => CmpOp::Lt,
                        BinaryOp::Le => CmpOp::Le,
                        BinaryOp::Gt => CmpOp::Gt,
                        BinaryOp::Ge => CmpOp::Ge,
                        _ => unreachable!(),
                    };
                    self.emit(Instr::Cmp {
                        dest,
                        op: cop,
                        lhs: l,
                        rhs: r,
                    });
                }
                one(Operand::Temp(dest))
            }
            ExprKind::AddrOf(inner) => Ok(vec![self.lvalue(inner)?]),
            ExprKind::New(t) => {
                let dest = self.temp();
                let cells = cells_of(&self.m.layouts, t);
                self.emit(Instr::Alloc { dest, cells });
                one(Operand::Temp(dest))
            }
            ExprKind::Call(name, args) => self.call(name, args, e),
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], e: &Expr) -> LResult<Vec<Operand>> {
        let mut flat = Vec::new();
        for a in args {
            flat.extend(self.value(a)?);
        }
        match name {
            SYM_I32 | SYM_BOOL => {
                let width = if name == SYM_I32 { Width::I32 } else { Width::Bool };
                let [id, addr]: [Operand; 2] = flat.try_into().map_err(|_| LowerError {
                    func: self.f.name.clone(),
                    message: format!("bad arguments to {name}"),
                })?;
                self.emit(Instr::SymBind { id, addr, width });
                return Ok(vec![]);
            }
            SYM_FRESH_I32 | SYM_FRESH_BOOL => {
                let width = if name == SYM_FRESH_I32 { Width::I32 } else { Width::Bool };
                let dest = self.temp();
                let tag = flat.pop().expect("checked arity");
                self.emit(Instr::Fresh { dest, tag, width });
                return Ok(vec![Operand::Temp(dest)]);
            }
            _ => {}
        }
        let Some(&func) = self.m.func_index.get(name) else {
            return self.err(format!("call to unknown function {name} at {}", e.loc));
        };
        let ret = &self.p.functions[name].ret;
        let n = cells_of(&self.m.layouts, ret).len();
        let dests: Vec<Temp> = (0..n).map(|_| self.temp()).collect();
        self.emit(Instr::Call {
            dests: dests.clone(),
            func,
            args: flat,
        });
        Ok(dests.into_iter().map(Operand::Temp).collect())
    }
}
