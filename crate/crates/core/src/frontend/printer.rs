//! Pretty-printer producing re-parseable MiniC.

use std::fmt::Write;

use super::ast::*;

pub fn print_ast(ast: &Ast) -> String {
    let mut out = String::new();
    for (i, item) in ast.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::Record(r) => print_record(&mut out, r),
            Item::Func(f) => print_func(&mut out, f),
        }
    }
    out
}

fn print_record(out: &mut String, r: &RecordDef) {
    let _ = writeln!(out, "record {} {{", r.name);
    for f in &r.fields {
        let _ = writeln!(out, "    {};", declarator(&f.ty, &f.name));
    }
    out.push_str("}\n");
}

/// `int v[4]`, `Point* p`.
pub fn declarator(ty: &Ty, name: &str) -> String {
    let (base, dims) = ty.split_declarator();
    let mut s = format!("{base} {name}");
    for d in dims {
        let _ = write!(s, "[{d}]");
    }
    s
}

pub fn print_func(out: &mut String, f: &FuncDef) {
    for d in &f.domains {
        match &d.path {
            Some(p) => {
                let _ = writeln!(out, "// @domain({p}, {}, {})", d.lo, d.hi);
            }
            None => {
                let _ = writeln!(out, "// @domain({}, {})", d.lo, d.hi);
            }
        }
    }
    if f.is_external() {
        out.push_str("external ");
    }
    let params: Vec<String> = f.params.iter().map(|p| declarator(&p.ty, &p.name)).collect();
    let _ = write!(out, "{} {}({})", f.ret, f.name, params.join(", "));
    match &f.body {
        None => out.push_str(";\n"),
        Some(body) => {
            out.push_str(" {\n");
            for s in body {
                print_stmt(out, s, 1);
            }
            out.push_str("}\n");
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

pub fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match &s.kind {
        StmtKind::Block(stmts) => {
            out.push_str("{\n");
            for s in stmts {
                print_stmt(out, s, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        StmtKind::Decl { name, ty, init } => {
            out.push_str(&declarator(ty, name));
            if let Some(e) = init {
                let _ = write!(out, " = {}", print_expr(e));
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{} = {};", print_expr(target), print_expr(value));
        }
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{};", print_expr(e));
        }
        StmtKind::If { cond, then, els } => {
            let _ = writeln!(out, "if ({})", print_expr(cond));
            print_stmt(out, then, level + 1);
            if let Some(e) = els {
                indent(out, level);
                out.push_str("else\n");
                print_stmt(out, e, level + 1);
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({})", print_expr(cond));
            print_stmt(out, body, level + 1);
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", print_expr(e));
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "assert({});", print_expr(e));
        }
    }
}

const UNARY_PREC: u8 = 7;
const POSTFIX_PREC: u8 = 8;

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, _, _) => op.precedence(),
        ExprKind::Unary(..) | ExprKind::AddrOf(_) | ExprKind::Deref(_) => UNARY_PREC,
        // a negative literal prints with a leading `-`
        ExprKind::Int(v) if *v < 0 => UNARY_PREC,
        _ => POSTFIX_PREC + 1,
    }
}

fn wrap(e: &Expr, min: u8) -> String {
    let s = print_expr(e);
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn print_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Null => "null".into(),
        ExprKind::Var(n) => n.clone(),
        ExprKind::Unary(UnaryOp::Neg, inner) => {
            // `-5` would re-parse as a literal, so keep the operator visible
            if matches!(inner.kind, ExprKind::Int(_)) {
                format!("-({})", print_expr(inner))
            } else {
                format!("-{}", wrap(inner, UNARY_PREC))
            }
        }
        ExprKind::Unary(UnaryOp::Not, inner) => format!("!{}", wrap(inner, UNARY_PREC)),
        ExprKind::AddrOf(inner) => format!("&{}", wrap(inner, UNARY_PREC)),
        ExprKind::Deref(inner) => format!("*{}", wrap(inner, UNARY_PREC)),
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            format!("{} {} {}", wrap(l, p), op.symbol(), wrap(r, p + 1))
        }
        ExprKind::Field(base, f) => format!("{}.{f}", wrap(base, POSTFIX_PREC)),
        ExprKind::Index(base, idx) => format!("{}[{}]", wrap(base, POSTFIX_PREC), print_expr(idx)),
        ExprKind::Call(name, args) => {
            let a: Vec<String> = args.iter().map(print_expr).collect();
            format!("{name}({})", a.join(", "))
        }
        ExprKind::New(t) => format!("new {t}"),
    }
}
