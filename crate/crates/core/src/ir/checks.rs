use std::collections::HashMap;

use super::*;

/// Splits blocks so that every division, remainder, array index, possibly
/// null memory access and `assert` is preceded by a `Check` terminator.
/// Generated harness functions are left alone. Applying this twice is the
/// same as applying it once: handled instructions are marked `guarded`.
pub fn inject_checks(mut m: IrModule) -> IrModule {
    for fi in 0..m.functions.len() {
        if !m.functions[fi].user {
            continue;
        }
        let defs = definitions(&m.functions[fi]);
        let mut b = 0;
        while b < m.functions[fi].blocks.len() {
            split_block(&mut m, fi, b, &defs);
            b += 1;
        }
    }
    m
}

fn definitions(f: &IrFunction) -> HashMap<Temp, Instr> {
    let mut defs = HashMap::new();
    for b in &f.blocks {
        for i in &b.instrs {
            let dest = match i {
                Instr::LocalAddr { dest, .. }
                | Instr::Alloc { dest, .. }
                | Instr::FieldAddr { dest, .. }
                | Instr::IndexAddr { dest, .. } => *dest,
                _ => continue,
            };
            defs.insert(dest, i.clone());
        }
    }
    defs
}

/// False when the address provably derives from a local or a fresh allocation.
fn may_be_null(addr: &Operand, defs: &HashMap<Temp, Instr>) -> bool {
    let mut cur = addr.clone();
    loop {
        let Operand::Temp(t) = cur else { return true };
        match defs.get(&t) {
            Some(Instr::LocalAddr { .. }) | Some(Instr::Alloc { .. }) => return false,
            Some(Instr::FieldAddr { base, .. }) | Some(Instr::IndexAddr { base, .. }) => cur = base.clone(),
            _ => return true,
        }
    }
}

fn split_block(m: &mut IrModule, fi: usize, b: usize, defs: &HashMap<Temp, Instr>) {
    let f = &mut m.functions[fi];
    let mut found = None;
    for (idx, instr) in f.blocks[b].instrs.iter_mut().enumerate() {
        let check = match instr {
            Instr::Arith {
                op: op @ (ArithOp::Div | ArithOp::Rem),
                rhs,
                guarded: false,
                loc,
                ..
            } => {
                let kind = if *op == ArithOp::Div { CheckKind::DivByZero } else { CheckKind::ModByZero };
                Some((kind, CheckOperands::Divisor(rhs.clone()), loc.clone()))
            }
            Instr::IndexAddr {
                index,
                elem_count,
                guarded: false,
                loc,
                ..
            } => Some((
                CheckKind::IndexOutOfBounds,
                CheckOperands::Index {
                    index: index.clone(),
                    bound: *elem_count,
                },
                loc.clone(),
            )),
            Instr::Load {
                addr,
                guarded: g @ false,
                loc,
                ..
            }
            | Instr::Store {
                addr,
                guarded: g @ false,
                loc,
                ..
            } => {
                if may_be_null(addr, defs) {
                    Some((CheckKind::NullDeref, CheckOperands::Address(addr.clone()), loc.clone()))
                } else {
                    *g = true;
                    None
                }
            }
            Instr::Assert { cond, loc } => Some((CheckKind::UserAssert, CheckOperands::Predicate(cond.clone()), loc.clone())),
            _ => None,
        };
        if let Some(c) = check {
            found = Some((idx, c));
            break;
        }
    }
    let Some((idx, (kind, operands, loc))) = found else { return };

    let mut rest = f.blocks[b].instrs.split_off(idx);
    match &mut rest[0] {
        Instr::Arith { guarded, .. }
        | Instr::IndexAddr { guarded, .. }
        | Instr::Load { guarded, .. }
        | Instr::Store { guarded, .. } => *guarded = true,
        Instr::Assert { .. } => {
            rest.remove(0);
        }
        _ => unreachable!(),
    }
    let old_term = std::mem::replace(&mut f.blocks[b].term, Term::Halt);
    let fail = f.blocks.len() as BlockId;
    f.blocks.push(Block {
        instrs: vec![],
        term: Term::Halt,
    });
    let cont = f.blocks.len() as BlockId;
    f.blocks.push(Block {
        instrs: rest,
        term: old_term,
    });
    let func = f.name.clone();

    let point = m.points.len() as PointId;
    m.points.push(CoveragePoint {
        id: point,
        kind: PointKind::Branch,
        func: func.clone(),
        loc: loc.clone(),
        dir: Some(Dir::Else),
        is_error_edge: true,
    });
    let site = m.check_sites.len() as SiteId;
    m.check_sites.push(CheckSite {
        func,
        loc,
        kind,
        fail_point: point,
    });
    m.functions[fi].blocks[b].term = Term::Check {
        site,
        operands,
        fail,
        cont,
    };
}
