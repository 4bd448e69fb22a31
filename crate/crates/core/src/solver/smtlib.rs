use std::collections::HashMap;
use std::fmt::Write;

use crate::ir::{ArithOp, CmpOp, Width};
use crate::symex::{Kind, SymExpr, Var};

use super::Query;

fn bv(v: i32) -> String {
    format!("#x{:08x}", v as u32)
}

fn var_name(v: Var) -> String {
    v.to_string()
}

/// QF_BV rendering of a query. Bool variables are declared as 32-bit
/// vectors restricted to 0/1 so the model maps back one-to-one. Division
/// and remainder are guarded so that a zero divisor yields zero.
pub fn export_smtlib(q: &Query) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_BV)\n");
    let mut vars: Vec<(Var, Width)> = Vec::new();
    for c in &q.constraints {
        for (v, w) in c.vars() {
            if !vars.iter().any(|(x, _)| *x == v) {
                vars.push((v, w));
            }
        }
    }
    for v in q.domains.keys() {
        if !vars.iter().any(|(x, _)| x == v) {
            vars.push((*v, Width::I32));
        }
    }
    vars.sort_by_key(|(v, _)| *v);
    for (v, w) in &vars {
        let n = var_name(*v);
        writeln!(out, "(declare-const {n} (_ BitVec 32))").unwrap();
        let (lo, hi) = match w {
            Width::Bool => (0, 1),
            Width::I32 => q.domains.get(v).copied().unwrap_or((i32::MIN, i32::MAX)),
        };
        if (lo, hi) != (i32::MIN, i32::MAX) {
            writeln!(out, "(assert (and (bvsge {n} {}) (bvsle {n} {})))", bv(lo), bv(hi)).unwrap();
        }
    }
    let mut memo: HashMap<usize, String> = HashMap::new();
    for c in &q.constraints {
        let t = term(c, &mut memo);
        writeln!(out, "(assert {t})").unwrap();
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

/// Bool-typed expressions render as SMT booleans; integer ones as bit
/// vectors. `as_bv` converts where an integer is expected.
fn term(e: &SymExpr, memo: &mut HashMap<usize, String>) -> String {
    if let Some(s) = memo.get(&e.node_id()) {
        return s.clone();
    }
    let s = match e.kind() {
        Kind::Var(v, Width::Bool) => format!("(= {} {})", var_name(*v), bv(1)),
        Kind::Var(v, Width::I32) => var_name(*v),
        Kind::Int(i) => bv(*i),
        Kind::Bool(b) => b.to_string(),
        Kind::Arith(op, a, b) => {
            let (a, b) = (as_bv(a, memo), as_bv(b, memo));
            match op {
                ArithOp::Add => format!("(bvadd {a} {b})"),
                ArithOp::Sub => format!("(bvsub {a} {b})"),
                ArithOp::Mul => format!("(bvmul {a} {b})"),
                ArithOp::Div => format!("(ite (= {b} {z}) {z} (bvsdiv {a} {b}))", z = bv(0)),
                ArithOp::Rem => format!("(ite (= {b} {z}) {z} (bvsrem {a} {b}))", z = bv(0)),
            }
        }
        Kind::Cmp(op, a, b) => {
            let (a, b) = (as_bv(a, memo), as_bv(b, memo));
            match op {
                CmpOp::Eq => format!("(= {a} {b})"),
                CmpOp::Ne => format!("(not (= {a} {b}))"),
                CmpOp::Lt => format!("(bvslt {a} {b})"),
                CmpOp::Le => format!("(bvsle {a} {b})"),
                CmpOp::Gt => format!("(bvsgt {a} {b})"),
                CmpOp::Ge => format!("(bvsge {a} {b})"),
            }
        }
        Kind::Not(a) => format!("(not {})", term(a, memo)),
        Kind::And(a, b) => format!("(and {} {})", term(a, memo), term(b, memo)),
        Kind::Ite(c, a, b) => {
            let c = term(c, memo);
            if e.is_bool() {
                format!("(ite {c} {} {})", term(a, memo), term(b, memo))
            } else {
                format!("(ite {c} {} {})", as_bv(a, memo), as_bv(b, memo))
            }
        }
    };
    memo.insert(e.node_id(), s.clone());
    s
}

fn as_bv(e: &SymExpr, memo: &mut HashMap<usize, String>) -> String {
    match e.kind() {
        Kind::Var(v, Width::Bool) => var_name(*v),
        _ if e.is_bool() => format!("(ite {} {} {})", term(e, memo), bv(1), bv(0)),
        _ => term(e, memo),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_guarded_division() {
        let x = SymExpr::var(Var::Sym(0), Width::I32);
        let y = SymExpr::var(Var::Fresh(2, 0), Width::I32);
        let e = SymExpr::cmp(CmpOp::Eq, SymExpr::arith(ArithOp::Div, x, y), SymExpr::int(3));
        let q = Query::new(vec![e], [(Var::Sym(0), (-8, 7))].into());
        let s = export_smtlib(&q);
        assert!(s.starts_with("(set-logic QF_BV)\n"));
        assert!(s.contains("(declare-const s0 (_ BitVec 32))"));
        assert!(s.contains("(declare-const f2_0 (_ BitVec 32))"));
        assert!(s.contains("(assert (and (bvsge s0 #xfffffff8) (bvsle s0 #x00000007)))"));
        assert!(s.contains("(assert (= (ite (= f2_0 #x00000000) #x00000000 (bvsdiv s0 f2_0)) #x00000003))"));
        assert!(s.ends_with("(check-sat)\n(get-model)\n"));
    }
}
