use std::fmt::Write;

use super::*;

fn op(o: &Operand) -> String {
    match o {
        Operand::Temp(t) => format!("t{t}"),
        Operand::Const(v) => v.to_string(),
    }
}

fn ops(os: &[Operand]) -> String {
    os.iter().map(op).collect::<Vec<_>>().join(", ")
}

fn kinds(cells: &[CellKind]) -> String {
    cells
        .iter()
        .map(|k| match k {
            CellKind::Int => "i",
            CellKind::Bool => "b",
            CellKind::Ptr => "p",
        })
        .collect()
}

fn width(w: Width) -> &'static str {
    match w {
        Width::I32 => "i32",
        Width::Bool => "bool",
    }
}

fn instr(m: &IrModule, i: &Instr) -> String {
    let g = |guarded: bool| if guarded { " !" } else { "" };
    match i {
        Instr::Stmt { point } => format!("stmt p{point}"),
        Instr::LocalAddr { dest, local } => format!("t{dest} = localaddr l{local}"),
        Instr::Alloc { dest, cells } => format!("t{dest} = alloc [{}]", kinds(cells)),
        Instr::Zero { local } => format!("zero l{local}"),
        Instr::FieldAddr { dest, base, offset } => format!("t{dest} = fieldaddr {}, {offset}", op(base)),
        Instr::IndexAddr {
            dest,
            base,
            index,
            elem_count,
            elem_size,
            guarded,
            ..
        } => format!(
            "t{dest} = indexaddr {}, {}, {elem_count} x {elem_size}{}",
            op(base),
            op(index),
            g(*guarded)
        ),
        Instr::Load { dest, addr, site, guarded, .. } => format!("t{dest} = load {} @m{site}{}", op(addr), g(*guarded)),
        Instr::Store {
            addr,
            value,
            site,
            guarded,
            ..
        } => format!("store {}, {} @m{site}{}", op(addr), op(value), g(*guarded)),
        Instr::Arith {
            dest,
            op: a,
            lhs,
            rhs,
            guarded,
            ..
        } => format!("t{dest} = {a:?} {}, {}{}", op(lhs), op(rhs), g(*guarded)).to_lowercase(),
        Instr::Cmp { dest, op: c, lhs, rhs } => format!("t{dest} = cmp {} {}, {}", format!("{c:?}").to_lowercase(), op(lhs), op(rhs)),
        Instr::Not { dest, src } => format!("t{dest} = not {}", op(src)),
        Instr::Call { dests, func, args } => {
            let d: Vec<String> = dests.iter().map(|t| format!("t{t}")).collect();
            let lhs = if d.is_empty() { String::new() } else { format!("{} = ", d.join(", ")) };
            format!("{lhs}call {}({})", m.functions[*func as usize].name, ops(args))
        }
        Instr::SymBind { id, addr, width: w } => format!("symbind {} {}, {}", width(*w), op(id), op(addr)),
        Instr::Fresh { dest, tag, width: w } => format!("t{dest} = fresh {} {}", width(*w), op(tag)),
        Instr::Assert { cond, .. } => format!("assert {}", op(cond)),
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Br(b) => format!("br block{b}"),
        Term::CondBr {
            cond,
            then_blk,
            else_blk,
            site,
        } => format!("condbr {}, block{then_blk}, block{else_blk} #b{site}", op(cond)),
        Term::Check {
            site,
            operands,
            fail,
            cont,
        } => {
            let what = match operands {
                CheckOperands::Divisor(d) => format!("divisor {}", op(d)),
                CheckOperands::Index { index, bound } => format!("index {} < {bound}", op(index)),
                CheckOperands::Address(a) => format!("address {}", op(a)),
                CheckOperands::Predicate(p) => format!("predicate {}", op(p)),
            };
            format!("check #c{site} {what}, ok block{cont}, fail block{fail}")
        }
        Term::Ret(vals) => format!("ret {}", ops(vals)).trim_end().to_string(),
        Term::Halt => "halt".into(),
        Term::Unreachable => "unreachable".into(),
    }
}

/// Stable text form: one instruction per line, `blockN:` labels.
pub fn dump_module(m: &IrModule) -> String {
    let mut out = String::new();
    for f in &m.functions {
        let params: Vec<String> = f.locals[..f.param_count as usize]
            .iter()
            .map(|l| format!("{}: {}", l.name, l.ty))
            .collect();
        let tag = if f.user { "" } else { " generated" };
        let _ = writeln!(out, "func {}({}) -> {}{tag}", f.name, params.join(", "), f.ret);
        for (i, l) in f.locals.iter().enumerate().skip(f.param_count as usize) {
            let _ = writeln!(out, "  local l{i} {}: {}", l.name, l.ty);
        }
        if f.blocks.is_empty() {
            out.push_str("  external\n");
        }
        for (bi, b) in f.blocks.iter().enumerate() {
            let _ = writeln!(out, "block{bi}:");
            for i in &b.instrs {
                let _ = writeln!(out, "  {}", instr(m, i));
            }
            let _ = writeln!(out, "  {}", term(&b.term));
        }
        out.push('\n');
    }
    for (i, s) in m.check_sites.iter().enumerate() {
        let _ = writeln!(out, "#c{i} {} {} {} error-edge p{}", s.kind.name(), s.func, s.loc, s.fail_point);
    }
    out
}
