//! Cross-unit name resolution and type checking.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::ast::*;
use super::diag::{Diagnostic, DiagnosticList};

/// Runtime intrinsics available to harness code. Users may call them too.
pub const SYM_I32: &str = "__sym_i32";
pub const SYM_BOOL: &str = "__sym_bool";
pub const SYM_FRESH_I32: &str = "__sym_fresh_i32";
pub const SYM_FRESH_BOOL: &str = "__sym_fresh_bool";

fn intrinsic_sig(name: &str) -> Option<(Vec<Ty>, Ty)> {
    Some(match name {
        SYM_I32 => (vec![Ty::Int, Ty::ptr(Ty::Int)], Ty::Void),
        SYM_BOOL => (vec![Ty::Int, Ty::ptr(Ty::Bool)], Ty::Void),
        SYM_FRESH_I32 => (vec![Ty::Int], Ty::Int),
        SYM_FRESH_BOOL => (vec![Ty::Int], Ty::Bool),
        _ => return None,
    })
}

/// A linked, type-checked program. Expression types are filled in.
#[derive(Clone, Debug)]
pub struct Program {
    pub records: BTreeMap<String, RecordDef>,
    pub functions: BTreeMap<String, FuncDef>,
    pub file_of: BTreeMap<String, String>,
    /// Function names ordered by (file path, source position).
    pub function_order: Vec<String>,
    /// Record names ordered by (file path, source position).
    pub record_order: Vec<String>,
    /// The unchecked units this program was linked from.
    pub units: Vec<Ast>,
    /// Functions produced by harness generation rather than written by the user.
    pub generated: BTreeSet<String>,
}

impl Program {
    pub fn record(&self, name: &str) -> &RecordDef {
        &self.records[name]
    }

    pub fn function(&self, name: &str) -> Option<&FuncDef> {
        self.functions.get(name)
    }

    /// Functions without a body, in program order.
    pub fn externals(&self) -> impl Iterator<Item = &FuncDef> {
        self.function_order
            .iter()
            .map(|n| &self.functions[n])
            .filter(|f| f.is_external())
    }

    /// Direct callees of `name`, in first-call order.
    pub fn callees(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(body) = self.functions.get(name).and_then(|f| f.body.as_ref()) {
            for s in body {
                collect_calls_stmt(s, &mut out);
            }
        }
        let mut seen = HashSet::new();
        out.retain(|n| seen.insert(n.clone()) && self.functions.contains_key(n));
        out
    }

    /// Every function reachable from `root` through calls, excluding `root`
    /// unless it is recursive.
    pub fn reachable_from(&self, root: &str) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![root.to_string()];
        while let Some(f) = stack.pop() {
            for c in self.callees(&f).into_iter().rev() {
                if seen.insert(c.clone()) {
                    order.push(c.clone());
                    stack.push(c);
                }
            }
        }
        order
    }
}

fn collect_calls_stmt(s: &Stmt, out: &mut Vec<String>) {
    match &s.kind {
        StmtKind::Block(b) => b.iter().for_each(|s| collect_calls_stmt(s, out)),
        StmtKind::Decl { init, .. } => {
            if let Some(e) = init {
                collect_calls_expr(e, out)
            }
        }
        StmtKind::Assign { target, value } => {
            collect_calls_expr(target, out);
            collect_calls_expr(value, out);
        }
        StmtKind::Expr(e) | StmtKind::Assert(e) | StmtKind::Return(Some(e)) => collect_calls_expr(e, out),
        StmtKind::Return(None) => {}
        StmtKind::If { cond, then, els } => {
            collect_calls_expr(cond, out);
            collect_calls_stmt(then, out);
            if let Some(e) = els {
                collect_calls_stmt(e, out);
            }
        }
        StmtKind::While { cond, body } => {
            collect_calls_expr(cond, out);
            collect_calls_stmt(body, out);
        }
    }
}

fn collect_calls_expr(e: &Expr, out: &mut Vec<String>) {
    match &e.kind {
        ExprKind::Call(n, args) => {
            out.push(n.clone());
            args.iter().for_each(|a| collect_calls_expr(a, out));
        }
        ExprKind::Unary(_, a) | ExprKind::AddrOf(a) | ExprKind::Deref(a) | ExprKind::Field(a, _) => {
            collect_calls_expr(a, out)
        }
        ExprKind::Binary(_, a, b) | ExprKind::Index(a, b) => {
            collect_calls_expr(a, out);
            collect_calls_expr(b, out);
        }
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::Var(_) | ExprKind::New(_) => {}
    }
}

pub fn link_program(units: &[Ast]) -> Result<Program, DiagnosticList> {
    let mut diags = Vec::new();
    let mut sorted: Vec<&Ast> = units.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));

    let mut records: BTreeMap<String, RecordDef> = BTreeMap::new();
    let mut record_order = Vec::new();
    let mut functions: BTreeMap<String, FuncDef> = BTreeMap::new();
    let mut file_of = BTreeMap::new();
    let mut function_order: Vec<String> = Vec::new();

    for ast in &sorted {
        for item in &ast.items {
            match item {
                Item::Record(r) => {
                    if let Some(prev) = records.get(&r.name) {
                        diags.push(Diagnostic::error(
                            r.loc.clone(),
                            format!("duplicate definition of record {} (first defined at {})", r.name, prev.loc),
                        ));
                    } else {
                        records.insert(r.name.clone(), r.clone());
                        record_order.push(r.name.clone());
                    }
                }
                Item::Func(f) => {
                    if intrinsic_sig(&f.name).is_some() {
                        diags.push(Diagnostic::error(
                            f.loc.clone(),
                            format!("`{}` is a reserved runtime intrinsic", f.name),
                        ));
                        continue;
                    }
                    match functions.get_mut(&f.name) {
                        None => {
                            functions.insert(f.name.clone(), f.clone());
                            file_of.insert(f.name.clone(), ast.path.clone());
                            function_order.push(f.name.clone());
                        }
                        Some(prev) => {
                            let same_sig = prev.ret == f.ret
                                && prev.params.len() == f.params.len()
                                && prev.params.iter().zip(&f.params).all(|(a, b)| a.ty == b.ty);
                            if prev.body.is_some() && f.body.is_some() {
                                diags.push(Diagnostic::error(
                                    f.loc.clone(),
                                    format!("duplicate definition of function {} (first defined at {})", f.name, prev.loc),
                                ));
                            } else if !same_sig {
                                diags.push(Diagnostic::error(
                                    f.loc.clone(),
                                    format!("conflicting declaration of function {} (see {})", f.name, prev.loc),
                                ));
                            } else if f.body.is_some() {
                                // a definition supersedes an external declaration
                                let mut def = f.clone();
                                if def.domains.is_empty() {
                                    def.domains = prev.domains.clone();
                                }
                                *prev = def;
                                file_of.insert(f.name.clone(), ast.path.clone());
                                function_order.retain(|n| n != &f.name);
                                function_order.push(f.name.clone());
                            }
                        }
                    }
                }
            }
        }
    }

    // function order must be (file, position) even after supersession
    let pos: HashMap<(String, String), usize> = sorted
        .iter()
        .flat_map(|a| {
            a.items.iter().enumerate().filter_map(move |(i, it)| match it {
                Item::Func(f) => Some(((a.path.clone(), f.name.clone()), i)),
                _ => None,
            })
        })
        .collect();
    function_order.sort_by_key(|n| {
        let file = file_of[n].clone();
        let i = pos.get(&(file.clone(), n.clone())).copied().unwrap_or(usize::MAX);
        (file, i)
    });

    let env = TypeEnv { records: &records };
    for name in &record_order {
        env.check_record(&records[name], &mut diags);
    }
    env.check_value_cycles(&record_order, &mut diags);

    let sigs: HashMap<String, (Vec<Ty>, Ty)> = functions
        .iter()
        .map(|(n, f)| (n.clone(), (f.params.iter().map(|p| p.ty.clone()).collect(), f.ret.clone())))
        .collect();

    for name in &function_order {
        let f = functions.get_mut(name).expect("ordered name is defined");
        let mut checker = BodyChecker {
            env: &env,
            sigs: &sigs,
            scopes: Vec::new(),
            ret: f.ret.clone(),
            diags: &mut diags,
        };
        checker.check_func(f);
    }

    if diags.iter().any(|d| d.severity == super::diag::Severity::Error) {
        return Err(DiagnosticList(diags));
    }
    Ok(Program {
        records,
        functions,
        file_of,
        function_order,
        record_order,
        units: units.to_vec(),
        generated: BTreeSet::new(),
    })
}

struct TypeEnv<'a> {
    records: &'a BTreeMap<String, RecordDef>,
}

impl TypeEnv<'_> {
    fn resolve(&self, ty: &Ty, loc: &SrcLoc, diags: &mut Vec<Diagnostic>) -> bool {
        match ty {
            Ty::Int | Ty::Bool => true,
            Ty::Record(n) => {
                if self.records.contains_key(n) {
                    true
                } else {
                    diags.push(Diagnostic::error(loc.clone(), format!("unresolved type {n}")));
                    false
                }
            }
            Ty::Array(e, n) => {
                if *n == 0 {
                    diags.push(Diagnostic::error(loc.clone(), "array length must be at least 1"));
                    return false;
                }
                self.resolve(e, loc, diags)
            }
            Ty::Ptr(e) => self.resolve(e, loc, diags),
            Ty::Null | Ty::Void => {
                diags.push(Diagnostic::error(loc.clone(), format!("`{ty}` is not a value type")));
                false
            }
        }
    }

    fn check_record(&self, r: &RecordDef, diags: &mut Vec<Diagnostic>) {
        if r.fields.is_empty() {
            diags.push(Diagnostic::error(r.loc.clone(), format!("record {} has no fields", r.name)));
        }
        let mut seen = HashSet::new();
        for f in &r.fields {
            if !seen.insert(&f.name) {
                diags.push(Diagnostic::error(
                    f.loc.clone(),
                    format!("duplicate field {} in record {}", f.name, r.name),
                ));
            }
            self.resolve(&f.ty, &f.loc, diags);
        }
    }

    /// Records may only refer to themselves through an address type.
    fn check_value_cycles(&self, order: &[String], diags: &mut Vec<Diagnostic>) {
        fn value_deps(ty: &Ty, out: &mut Vec<String>) {
            match ty {
                Ty::Record(n) => out.push(n.clone()),
                Ty::Array(e, _) => value_deps(e, out),
                _ => {}
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&str, u8> = HashMap::new();
        let mut reported = HashSet::new();
        fn visit<'a>(
            env: &TypeEnv<'a>,
            name: &'a str,
            state: &mut HashMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
            reported: &mut HashSet<String>,
            diags: &mut Vec<Diagnostic>,
        ) {
            let Some(r) = env.records.get_key_value(name) else { return };
            let (key, r) = r;
            match state.get(key.as_str()) {
                Some(2) => return,
                Some(1) => {
                    let start = stack.iter().position(|n| *n == key.as_str()).unwrap_or(0);
                    let mut cycle: Vec<&str> = stack[start..].to_vec();
                    cycle.push(key);
                    let head = cycle[0].to_string();
                    if reported.insert(head.clone()) {
                        diags.push(Diagnostic::error(
                            env.records[&head].loc.clone(),
                            format!(
                                "record {head} contains itself by value ({}); use an address type",
                                cycle.join(" -> ")
                            ),
                        ));
                    }
                    return;
                }
                _ => {}
            }
            state.insert(key.as_str(), 1);
            stack.push(key.as_str());
            for f in &r.fields {
                let mut deps = Vec::new();
                value_deps(&f.ty, &mut deps);
                for d in deps {
                    if let Some((k, _)) = env.records.get_key_value(&d) {
                        visit(env, k.as_str(), state, stack, reported, diags);
                    }
                }
            }
            stack.pop();
            state.insert(key.as_str(), 2);
        }
        for name in order {
            let key = self.records.get_key_value(name).map(|(k, _)| k.as_str()).unwrap();
            let mut stack = Vec::new();
            visit(self, key, &mut state, &mut stack, &mut reported, diags);
        }
    }
}

struct BodyChecker<'a, 'd> {
    env: &'a TypeEnv<'a>,
    sigs: &'a HashMap<String, (Vec<Ty>, Ty)>,
    scopes: Vec<HashMap<String, Ty>>,
    ret: Ty,
    diags: &'d mut Vec<Diagnostic>,
}

fn assignable(from: &Ty, to: &Ty) -> bool {
    from == to || (matches!(from, Ty::Null) && matches!(to, Ty::Ptr(_)))
}

pub(crate) fn is_lvalue(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Var(_) | ExprKind::Deref(_) => true,
        ExprKind::Field(b, _) | ExprKind::Index(b, _) => is_lvalue(b),
        _ => false,
    }
}

fn always_returns(stmts: &[Stmt]) -> bool {
    stmts.iter().any(stmt_returns)
}

fn stmt_returns(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::Block(b) => always_returns(b),
        StmtKind::If { then, els: Some(e), .. } => stmt_returns(then) && stmt_returns(e),
        StmtKind::While { cond, .. } => matches!(cond.kind, ExprKind::Bool(true)),
        _ => false,
    }
}

impl BodyChecker<'_, '_> {
    fn err(&mut self, loc: &SrcLoc, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(loc.clone(), msg));
    }

    fn check_func(&mut self, f: &mut FuncDef) {
        let mut params = HashMap::new();
        for p in &f.params {
            self.env.resolve(&p.ty, &p.loc, self.diags);
            if params.insert(p.name.clone(), p.ty.clone()).is_some() {
                let loc = p.loc.clone();
                self.err(&loc, format!("duplicate parameter {} in function {}", p.name, f.name));
            }
        }
        if f.ret != Ty::Void {
            self.env.resolve(&f.ret, &f.loc, self.diags);
        }
        let Some(body) = f.body.as_mut() else { return };
        self.scopes.push(params);
        for s in body.iter_mut() {
            self.check_stmt(s);
        }
        self.scopes.pop();
        if f.ret != Ty::Void && !always_returns(body) {
            let loc = f.loc.clone();
            self.err(&loc, format!("function {} does not return a value on every path", f.name));
        }
    }

    fn lookup(&self, name: &str) -> Option<&Ty> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn check_stmt(&mut self, s: &mut Stmt) {
        let loc = s.loc.clone();
        match &mut s.kind {
            StmtKind::Block(stmts) => {
                self.scopes.push(HashMap::new());
                for s in stmts.iter_mut() {
                    self.check_stmt(s);
                }
                self.scopes.pop();
            }
            StmtKind::Decl { name, ty, init } => {
                let ok = self.env.resolve(ty, &loc, self.diags);
                if let Some(e) = init {
                    if let Some(t) = self.check_expr(e) {
                        if ok && !assignable(&t, ty) {
                            self.err(&e.loc, format!("type mismatch: cannot initialize {ty} with {t}"));
                        }
                    }
                }
                let scope = self.scopes.last_mut().expect("function scope");
                if scope.insert(name.clone(), ty.clone()).is_some() {
                    self.err(&loc, format!("redeclaration of {name} in the same scope"));
                }
            }
            StmtKind::Assign { target, value } => {
                let tt = self.check_expr(target);
                let vt = self.check_expr(value);
                if !is_lvalue(target) {
                    self.err(&target.loc, "left side of assignment is not assignable");
                }
                if let (Some(tt), Some(vt)) = (tt, vt) {
                    if !assignable(&vt, &tt) {
                        self.err(&value.loc, format!("type mismatch: cannot assign {vt} to {tt}"));
                    }
                }
            }
            StmtKind::Expr(e) => {
                self.check_expr_allow_void(e, true);
            }
            StmtKind::If { cond, then, els } => {
                self.expect_bool(cond, "if condition");
                self.check_scoped(then);
                if let Some(e) = els {
                    self.check_scoped(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expect_bool(cond, "while condition");
                self.check_scoped(body);
            }
            StmtKind::Return(v) => {
                let ret = self.ret.clone();
                match (v, &ret) {
                    (None, Ty::Void) => {}
                    (None, _) => self.err(&loc, format!("missing return value of type {ret}")),
                    (Some(e), Ty::Void) => {
                        self.check_expr(e);
                        self.err(&e.loc, "void function cannot return a value");
                    }
                    (Some(e), _) => {
                        if let Some(t) = self.check_expr(e) {
                            if !assignable(&t, &ret) {
                                self.err(&e.loc, format!("type mismatch: returning {t} from function returning {ret}"));
                            }
                        }
                    }
                }
            }
            StmtKind::Assert(e) => self.expect_bool(e, "assert argument"),
        }
    }

    fn check_scoped(&mut self, s: &mut Stmt) {
        self.scopes.push(HashMap::new());
        self.check_stmt(s);
        self.scopes.pop();
    }

    fn expect_bool(&mut self, e: &mut Expr, what: &str) {
        if let Some(t) = self.check_expr(e) {
            if t != Ty::Bool {
                self.err(&e.loc, format!("type mismatch: {what} must be bool, found {t}"));
            }
        }
    }

    fn check_expr(&mut self, e: &mut Expr) -> Option<Ty> {
        self.check_expr_allow_void(e, false)
    }

    /// Returns `None` after reporting an error, so callers don't cascade.
    fn check_expr_allow_void(&mut self, e: &mut Expr, allow_void: bool) -> Option<Ty> {
        let loc = e.loc.clone();
        let ty = match &mut e.kind {
            ExprKind::Int(v) => {
                if i32::try_from(*v).is_err() {
                    self.err(&loc, format!("integer literal {v} does not fit in 32 bits"));
                    return None;
                }
                Ty::Int
            }
            ExprKind::Bool(_) => Ty::Bool,
            ExprKind::Null => Ty::Null,
            ExprKind::Var(n) => match self.lookup(n) {
                Some(t) => t.clone(),
                None => {
                    let msg = format!("unresolved variable {n}");
                    self.err(&loc, msg);
                    return None;
                }
            },
            ExprKind::Unary(op, inner) => {
                let t = self.check_expr(inner)?;
                let want = match op {
                    UnaryOp::Neg => Ty::Int,
                    UnaryOp::Not => Ty::Bool,
                };
                if t != want {
                    self.err(&loc, format!("type mismatch: operand must be {want}, found {t}"));
                    return None;
                }
                want
            }
            ExprKind::Binary(op, l, r) => {
                let lt = self.check_expr(l);
                let rt = self.check_expr(r);
                let (lt, rt) = (lt?, rt?);
                let op = *op;
                match op {
                    BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => {
                        if lt != Ty::Int || rt != Ty::Int {
                            self.err(&loc, format!("type mismatch: `{}` needs int operands, found {lt} and {rt}", op.symbol()));
                            return None;
                        }
                        Ty::Int
                    }
                    BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                        if lt != Ty::Int || rt != Ty::Int {
                            self.err(&loc, format!("type mismatch: `{}` needs int operands, found {lt} and {rt}", op.symbol()));
                            return None;
                        }
                        Ty::Bool
                    }
                    BinaryOp::Eq | BinaryOp::Ne => {
                        let ok = lt.is_scalar()
                            && rt.is_scalar()
                            && (lt == rt || assignable(&lt, &rt) || assignable(&rt, &lt));
                        if !ok {
                            self.err(&loc, format!("type mismatch: cannot compare {lt} with {rt}"));
                            return None;
                        }
                        Ty::Bool
                    }
                    BinaryOp::And | BinaryOp::Or => {
                        if lt != Ty::Bool || rt != Ty::Bool {
                            self.err(&loc, format!("type mismatch: `{}` needs bool operands, found {lt} and {rt}", op.symbol()));
                            return None;
                        }
                        Ty::Bool
                    }
                }
            }
            ExprKind::Field(base, fname) => {
                let bt = self.check_expr(base)?;
                if !is_lvalue(base) {
                    self.err(&loc, "field access requires an addressable record");
                    return None;
                }
                let Ty::Record(rn) = &bt else {
                    self.err(&loc, format!("type mismatch: field access on non-record type {bt}"));
                    return None;
                };
                match self.env.records[rn].field(fname) {
                    Some((_, f)) => f.ty.clone(),
                    None => {
                        let msg = format!("record {rn} has no field {fname}");
                        self.err(&loc, msg);
                        return None;
                    }
                }
            }
            ExprKind::Index(base, idx) => {
                let bt = self.check_expr(base);
                let it = self.check_expr(idx);
                let (bt, it) = (bt?, it?);
                if !is_lvalue(base) {
                    self.err(&loc, "indexing requires an addressable array");
                    return None;
                }
                if it != Ty::Int {
                    self.err(&idx.loc, format!("type mismatch: array index must be int, found {it}"));
                    return None;
                }
                match bt {
                    Ty::Array(elem, _) => *elem,
                    other => {
                        self.err(&loc, format!("type mismatch: indexing non-array type {other}"));
                        return None;
                    }
                }
            }
            ExprKind::AddrOf(inner) => {
                let t = self.check_expr(inner)?;
                if !is_lvalue(inner) {
                    self.err(&loc, "cannot take the address of a temporary value");
                    return None;
                }
                Ty::ptr(t)
            }
            ExprKind::Deref(inner) => {
                let t = self.check_expr(inner)?;
                match t {
                    Ty::Ptr(p) => *p,
                    other => {
                        self.err(&loc, format!("type mismatch: dereferencing non-address type {other}"));
                        return None;
                    }
                }
            }
            ExprKind::Call(name, args) => {
                let sig = intrinsic_sig(name).or_else(|| self.sigs.get(name.as_str()).cloned());
                let mut arg_tys = Vec::new();
                for a in args.iter_mut() {
                    arg_tys.push(self.check_expr(a));
                }
                let Some((params, ret)) = sig else {
                    let msg = format!("unresolved function {name}");
                    self.err(&loc, msg);
                    return None;
                };
                if params.len() != args.len() {
                    let msg = format!("function {name} expects {} argument(s), found {}", params.len(), args.len());
                    self.err(&loc, msg);
                    return None;
                }
                for ((a, at), pt) in args.iter().zip(&arg_tys).zip(&params) {
                    if let Some(at) = at {
                        if !assignable(at, pt) {
                            let msg = format!("type mismatch: argument of type {at} passed to parameter of type {pt} in call to {name}");
                            let aloc = a.loc.clone();
                            self.err(&aloc, msg);
                        }
                    }
                }
                ret
            }
            ExprKind::New(t) => {
                let t = t.clone();
                if !self.env.resolve(&t, &loc, self.diags) {
                    return None;
                }
                Ty::ptr(t)
            }
        };
        if ty == Ty::Void && !allow_void {
            self.err(&loc, "void value used in an expression");
            return None;
        }
        e.ty = Some(ty.clone());
        Some(ty)
    }
}

/// Wildcard match supporting `*` (any run) and `?` (one character).
pub fn name_matches(pattern: &str, name: &str) -> bool {
    globset::GlobBuilder::new(pattern)
        .literal_separator(false)
        .build()
        .map(|g| g.compile_matcher().is_match(name))
        .unwrap_or(false)
}

/// Functions selected for testing, plus warnings for patterns that matched
/// nothing. External and generated (`__`-prefixed) functions are never listed.
pub fn list_functions(p: &Program, include: &[String], exclude: &[String]) -> (Vec<String>, Vec<String>) {
    let candidates: Vec<&String> = p
        .function_order
        .iter()
        .filter(|n| !p.functions[*n].is_external() && !n.starts_with("__"))
        .collect();
    let mut warnings = Vec::new();
    for pat in include.iter().chain(exclude) {
        if !candidates.iter().any(|n| name_matches(pat, n)) {
            warnings.push(format!("function pattern `{pat}` matched nothing"));
        }
    }
    let selected = candidates
        .into_iter()
        .filter(|n| include.is_empty() || include.iter().any(|pat| name_matches(pat, n)))
        .filter(|n| !exclude.iter().any(|pat| name_matches(pat, n)))
        .cloned()
        .collect();
    (selected, warnings)
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_unit, SourceUnit};
    use super::*;

    fn link(srcs: &[(&str, &str)]) -> Result<Program, DiagnosticList> {
        let asts: Vec<Ast> = srcs
            .iter()
            .map(|(p, s)| parse_unit(&SourceUnit::new(*p, *s)).unwrap())
            .collect();
        link_program(&asts)
    }

    #[test]
    fn cross_unit_call_links() {
        let p = link(&[("a.mc", "int helper(int x){ return x + 1; }"), ("b.mc", "int f(){ return helper(2); }")]).unwrap();
        assert_eq!(p.function_order, vec!["helper", "f"]);
        assert_eq!(p.file_of["f"], "b.mc");
    }

    #[test]
    fn undeclared_function_is_reported() {
        let err = link(&[("a.mc", "int f(){ return g(); }")]).unwrap_err();
        assert!(err.to_string().contains("unresolved function g"), "{err}");
    }

    #[test]
    fn all_failures_are_listed() {
        let err = link(&[("a.mc", "int f(){ int a = true; return g() + h; }")]).unwrap_err();
        assert_eq!(err.len(), 3, "{err}");
    }

    #[test]
    fn value_self_recursion_rejected_but_address_accepted() {
        let err = link(&[("a.mc", "record L { L next; }")]).unwrap_err();
        assert!(err.to_string().contains("contains itself by value"), "{err}");
        link(&[("a.mc", "record L { L* next; }")]).unwrap();
        let err = link(&[("a.mc", "record A { B b; } record B { A a[2]; }")]).unwrap_err();
        assert_eq!(err.len(), 1, "{err}");
        link(&[("a.mc", "record A { B* b; } record B { A a[2]; }")]).unwrap();
    }

    #[test]
    fn missing_return_path_rejected() {
        let err = link(&[("a.mc", "int f(int x){ if (x > 0) return 1; }")]).unwrap_err();
        assert!(err.to_string().contains("does not return"), "{err}");
        link(&[("a.mc", "int f(int x){ if (x > 0) return 1; else return 2; }")]).unwrap();
        link(&[("a.mc", "int f(int x){ while (true) { x = x + 1; } }")]).unwrap();
    }

    #[test]
    fn external_declaration_superseded_by_definition() {
        let p = link(&[("a.mc", "external int h(int x); int f(){ return h(1); }"), ("b.mc", "int h(int x){ return x; }")]).unwrap();
        assert!(!p.functions["h"].is_external());
        assert_eq!(p.file_of["h"], "b.mc");
    }

    #[test]
    fn duplicate_definitions_rejected() {
        let err = link(&[("a.mc", "int f(){ return 1; }"), ("b.mc", "int f(){ return 2; }")]).unwrap_err();
        assert!(err.to_string().contains("duplicate definition"), "{err}");
    }

    #[test]
    fn expression_types_are_recorded() {
        let p = link(&[("a.mc", "record P { int x; } bool f(P* p){ return p->x < 3 && p != null; }")]).unwrap();
        let body = p.functions["f"].body.as_ref().unwrap();
        let StmtKind::Return(Some(e)) = &body[0].kind else { panic!() };
        assert_eq!(e.ty, Some(Ty::Bool));
    }

    #[test]
    fn function_listing_filters() {
        let p = link(&[(
            "a.mc",
            "external int rng(); int helper1(){ return 1; } int helper2(){ return 2; } int main_fn(){ return rng(); }",
        )])
        .unwrap();
        let (all, w) = list_functions(&p, &[], &[]);
        assert_eq!(all, vec!["helper1", "helper2", "main_fn"]);
        assert!(w.is_empty());
        let (some, _) = list_functions(&p, &[], &["helper*".into()]);
        assert_eq!(some, vec!["main_fn"]);
        let (none, w) = list_functions(&p, &["nothing*".into()], &[]);
        assert!(none.is_empty());
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn only_externals_lists_nothing() {
        let p = link(&[("a.mc", "external int rng(); external void fill(int* o);")]).unwrap();
        assert!(list_functions(&p, &[], &[]).0.is_empty());
    }

    #[test]
    fn wildcard_matching() {
        assert!(name_matches("helper*", "helper"));
        assert!(name_matches("*_sum", "tab_sum"));
        assert!(name_matches("a?c", "abc"));
        assert!(!name_matches("a?c", "ac"));
        assert!(name_matches("*", ""));
    }
}
