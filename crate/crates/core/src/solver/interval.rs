use crate::ir::{ArithOp, CmpOp};

use super::{Compiled, Op};

const I32_LO: i64 = i32::MIN as i64;
const I32_HI: i64 = i32::MAX as i64;
const MAX_PASSES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub const FULL: Interval = Interval { lo: I32_LO, hi: I32_HI };
    pub const BOOL: Interval = Interval { lo: 0, hi: 1 };
    pub const TRUE: Interval = Interval { lo: 1, hi: 1 };
    pub const FALSE: Interval = Interval { lo: 0, hi: 0 };

    pub fn new(lo: i64, hi: i64) -> Interval {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn meet(&self, o: Interval) -> Option<Interval> {
        let (lo, hi) = (self.lo.max(o.lo), self.hi.min(o.hi));
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, o: Interval) -> Interval {
        Interval::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }

    fn singleton(&self) -> Option<i64> {
        (self.lo == self.hi).then_some(self.lo)
    }
}

fn wrap(v: i64) -> i64 {
    v as i32 as i64
}

/// Range of the 32-bit result given the range of the exact result.
fn wrapped(lo: i64, hi: i64) -> Interval {
    if hi - lo >= 1 << 32 {
        return Interval::FULL;
    }
    let (wl, wh) = (wrap(lo), wrap(hi));
    if wl <= wh && hi - lo == wh - wl {
        Interval::new(wl, wh)
    } else {
        Interval::FULL
    }
}

fn exact_range(op: ArithOp, a: Interval, b: Interval) -> Option<(i64, i64)> {
    match op {
        ArithOp::Add => Some((a.lo + b.lo, a.hi + b.hi)),
        ArithOp::Sub => Some((a.lo - b.hi, a.hi - b.lo)),
        ArithOp::Mul => {
            let c = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi];
            Some((*c.iter().min().unwrap(), *c.iter().max().unwrap()))
        }
        _ => None,
    }
}

fn div_part(a: Interval, b: Interval) -> Interval {
    // b excludes 0 here; truncating division is monotone per sign, so the
    // extremes sit on the corners
    if a.lo == I32_LO && b.contains(-1) {
        return Interval::FULL;
    }
    let c = [a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi];
    Interval::new(*c.iter().min().unwrap(), *c.iter().max().unwrap())
}

fn forward_arith(op: ArithOp, a: Interval, b: Interval) -> Interval {
    if let Some((lo, hi)) = exact_range(op, a, b) {
        return wrapped(lo, hi);
    }
    match op {
        ArithOp::Div => {
            let mut out: Option<Interval> = None;
            let mut join = |iv: Interval| out = Some(out.map_or(iv, |o| o.hull(iv)));
            if let Some(neg) = b.meet(Interval::new(I32_LO, -1)) {
                join(div_part(a, neg));
            }
            if let Some(pos) = b.meet(Interval::new(1, I32_HI)) {
                join(div_part(a, pos));
            }
            if b.contains(0) {
                join(Interval::new(0, 0));
            }
            out.unwrap_or(Interval::FULL)
        }
        ArithOp::Rem => {
            let m = b.lo.abs().max(b.hi.abs()) - 1;
            let m = m.max(0);
            let lo = if a.lo >= 0 { 0 } else { a.lo.max(-m) };
            let hi = if a.hi <= 0 { 0 } else { a.hi.min(m) };
            Interval::new(lo, hi)
        }
        _ => unreachable!(),
    }
}

fn forward_cmp(op: CmpOp, a: Interval, b: Interval) -> Interval {
    let (t, f) = match op {
        CmpOp::Lt => (a.hi < b.lo, a.lo >= b.hi),
        CmpOp::Le => (a.hi <= b.lo, a.lo > b.hi),
        CmpOp::Gt => (a.lo > b.hi, a.hi <= b.lo),
        CmpOp::Ge => (a.lo >= b.hi, a.hi < b.lo),
        CmpOp::Eq => (
            a.singleton().is_some() && a.singleton() == b.singleton(),
            a.meet(b).is_none(),
        ),
        CmpOp::Ne => (
            a.meet(b).is_none(),
            a.singleton().is_some() && a.singleton() == b.singleton(),
        ),
    };
    if t {
        Interval::TRUE
    } else if f {
        Interval::FALSE
    } else {
        Interval::BOOL
    }
}

/// Narrowed operand ranges for `a op b` to hold.
fn backward_cmp(op: CmpOp, a: Interval, b: Interval) -> Option<(Interval, Interval)> {
    let n = |lo: i64, hi: i64| (lo <= hi).then(|| Interval::new(lo, hi));
    Some(match op {
        CmpOp::Lt => (n(a.lo, a.hi.min(b.hi - 1))?, n(b.lo.max(a.lo + 1), b.hi)?),
        CmpOp::Le => (n(a.lo, a.hi.min(b.hi))?, n(b.lo.max(a.lo), b.hi)?),
        CmpOp::Gt => {
            let (b2, a2) = backward_cmp(CmpOp::Lt, b, a)?;
            (a2, b2)
        }
        CmpOp::Ge => {
            let (b2, a2) = backward_cmp(CmpOp::Le, b, a)?;
            (a2, b2)
        }
        CmpOp::Eq => {
            let m = a.meet(b)?;
            (m, m)
        }
        CmpOp::Ne => {
            let shave = |x: Interval, v: Option<i64>| -> Option<Interval> {
                match v {
                    Some(v) if x.lo == v => n(x.lo + 1, x.hi),
                    Some(v) if x.hi == v => n(x.lo, x.hi - 1),
                    _ => Some(x),
                }
            };
            (shave(a, b.singleton())?, shave(b, a.singleton())?)
        }
    })
}

fn floor_div(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -floor_div(-a, b)
}

/// Narrowed operand ranges for `a op b` to land in `r`. Multiplication is
/// only narrowed where it cannot wrap.
fn backward_arith(op: ArithOp, r: Interval, a: Interval, b: Interval) -> Option<(Interval, Interval)> {
    let n = |lo: i64, hi: i64| (lo <= hi).then(|| Interval::new(lo, hi));
    let no_wrap = match exact_range(op, a, b) {
        Some((lo, hi)) => lo >= I32_LO && hi <= I32_HI,
        None => false,
    };
    if !no_wrap {
        // wrapping add and subtract are still bijective in each operand, so
        // the operand lies in the wrapped image of the exact difference
        return match op {
            ArithOp::Add => Some((
                a.meet(wrapped(r.lo - b.hi, r.hi - b.lo))?,
                b.meet(wrapped(r.lo - a.hi, r.hi - a.lo))?,
            )),
            ArithOp::Sub => Some((
                a.meet(wrapped(r.lo + b.lo, r.hi + b.hi))?,
                b.meet(wrapped(a.lo - r.hi, a.hi - r.lo))?,
            )),
            _ => Some((a, b)),
        };
    }
    match op {
        ArithOp::Add => Some((
            a.meet(n(r.lo - b.hi, r.hi - b.lo)?)?,
            b.meet(n(r.lo - a.hi, r.hi - a.lo)?)?,
        )),
        ArithOp::Sub => Some((
            a.meet(n(r.lo + b.lo, r.hi + b.hi)?)?,
            b.meet(n(a.lo - r.hi, a.hi - r.lo)?)?,
        )),
        ArithOp::Mul => {
            let by_const = |x: Interval, c: i64| -> Option<Interval> {
                if c > 0 {
                    x.meet(n(ceil_div(r.lo, c), floor_div(r.hi, c))?)
                } else if c < 0 {
                    x.meet(n(ceil_div(r.hi, c), floor_div(r.lo, c))?)
                } else {
                    Some(x)
                }
            };
            match (a.singleton(), b.singleton()) {
                (_, Some(c)) => Some((by_const(a, c)?, b)),
                (Some(c), _) => Some((a, by_const(b, c)?)),
                _ => Some((a, b)),
            }
        }
        _ => Some((a, b)),
    }
}

const MAX_LIN_TERMS: usize = 16;
const MAX_LIN_INNER: usize = 64;
const MAX_COEF: i64 = 1 << 40;

/// `k + sum(coef * node)`, valid while none of the `inner` arithmetic nodes
/// wraps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lin {
    pub terms: Vec<(usize, i64)>,
    pub k: i64,
    pub inner: Vec<usize>,
}

impl Lin {
    fn atom(i: usize) -> Lin {
        Lin { terms: vec![(i, 1)], k: 0, inner: Vec::new() }
    }

    fn konst(k: i64) -> Lin {
        Lin { terms: Vec::new(), k, inner: Vec::new() }
    }

    fn combine(&self, o: &Lin, sign: i64, node: Option<usize>) -> Option<Lin> {
        let mut terms = self.terms.clone();
        for (n, c) in &o.terms {
            match terms.iter_mut().find(|(m, _)| m == n) {
                Some(t) => t.1 += sign * c,
                None => terms.push((*n, sign * c)),
            }
        }
        terms.retain(|(_, c)| *c != 0);
        terms.sort();
        let mut inner = self.inner.clone();
        inner.extend(o.inner.iter().copied());
        inner.extend(node);
        inner.sort();
        inner.dedup();
        let k = self.k.checked_add(o.k.checked_mul(sign)?)?;
        let ok = terms.len() <= MAX_LIN_TERMS
            && inner.len() <= MAX_LIN_INNER
            && k.abs() < MAX_COEF
            && terms.iter().all(|(_, c)| c.abs() < MAX_COEF);
        ok.then_some(Lin { terms, k, inner })
    }

    fn scale(&self, f: i64, node: usize) -> Option<Lin> {
        let mut out = Lin::konst(0).combine(self, f, Some(node))?;
        out.k = self.k.checked_mul(f)?;
        (out.k.abs() < MAX_COEF).then_some(out)
    }

    fn valid(&self, c: &Compiled, iv: &[Interval]) -> bool {
        self.inner.iter().all(|i| match c.ops[*i] {
            Op::Arith(o, a, b) => {
                matches!(exact_range(o, iv[a], iv[b]), Some((lo, hi)) if lo >= I32_LO && hi <= I32_HI)
            }
            _ => false,
        })
    }

    fn range(&self, iv: &[Interval]) -> (i128, i128) {
        let mut lo = self.k as i128;
        let mut hi = lo;
        for (n, c) in &self.terms {
            let (a, b) = (iv[*n].lo as i128 * *c as i128, iv[*n].hi as i128 * *c as i128);
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    }
}

pub(crate) fn linear_forms(ops: &[Op]) -> Vec<Option<Lin>> {
    let mut view: Vec<Option<Lin>> = Vec::with_capacity(ops.len());
    let mut out = vec![None; ops.len()];
    let as_lin = |view: &[Option<Lin>], i: usize| view[i].clone().unwrap_or_else(|| Lin::atom(i));
    for (i, op) in ops.iter().enumerate() {
        let v = match *op {
            Op::Var(_) => Some(Lin::atom(i)),
            Op::Const(k) => Some(Lin::konst(k)),
            Op::Arith(ArithOp::Add, a, b) => as_lin(&view, a).combine(&as_lin(&view, b), 1, Some(i)),
            Op::Arith(ArithOp::Sub, a, b) => as_lin(&view, a).combine(&as_lin(&view, b), -1, Some(i)),
            Op::Arith(ArithOp::Mul, a, b) => {
                let (la, lb) = (as_lin(&view, a), as_lin(&view, b));
                if la.terms.is_empty() {
                    lb.scale(la.k, i)
                } else if lb.terms.is_empty() {
                    la.scale(lb.k, i)
                } else {
                    None
                }
            }
            Op::Cmp(_, a, b) => {
                out[i] = as_lin(&view, a).combine(&as_lin(&view, b), -1, None);
                None
            }
            _ => None,
        };
        view.push(v);
    }
    out
}

/// Bounds `[l, u]` on `lhs - rhs` implied by `op` holding.
fn diff_bounds(op: CmpOp) -> Option<(i128, i128)> {
    const INF: i128 = i128::MAX / 4;
    match op {
        CmpOp::Lt => Some((-INF, -1)),
        CmpOp::Le => Some((-INF, 0)),
        CmpOp::Gt => Some((1, INF)),
        CmpOp::Ge => Some((0, INF)),
        CmpOp::Eq => Some((0, 0)),
        CmpOp::Ne => None,
    }
}

fn lin_decide(op: CmpOp, (lo, hi): (i128, i128)) -> Interval {
    let (t, f) = match op {
        CmpOp::Lt => (hi < 0, lo >= 0),
        CmpOp::Le => (hi <= 0, lo > 0),
        CmpOp::Gt => (lo > 0, hi <= 0),
        CmpOp::Ge => (lo >= 0, hi < 0),
        CmpOp::Eq => (lo == 0 && hi == 0, lo > 0 || hi < 0),
        CmpOp::Ne => (lo > 0 || hi < 0, lo == 0 && hi == 0),
    };
    if t {
        Interval::TRUE
    } else if f {
        Interval::FALSE
    } else {
        Interval::BOOL
    }
}

fn floor_div128(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn clamp64(v: i128) -> i64 {
    v.clamp(i64::MIN as i128 / 4, i64::MAX as i128 / 4) as i64
}

/// Narrows each term of `lin` so that `lin op 0` can hold.
fn lin_narrow(lin: &Lin, op: CmpOp, req: &mut [Interval]) -> Option<()> {
    let (l, u) = match diff_bounds(op) {
        Some(b) => b,
        None => {
            // a single unit term against a known rest can lose one value
            if let [(n, c)] = lin.terms[..] {
                if c.abs() == 1 && (lin.k % c) == 0 {
                    let v = -lin.k / c;
                    let r = req[n];
                    req[n] = if r.lo == v && r.hi > v {
                        Interval::new(v + 1, r.hi)
                    } else if r.hi == v && r.lo < v {
                        Interval::new(r.lo, v - 1)
                    } else if r.lo == v && r.hi == v {
                        return None;
                    } else {
                        r
                    };
                }
            }
            return Some(());
        }
    };
    let (tlo, thi) = lin.range(req);
    for (n, c) in &lin.terms {
        let c = *c as i128;
        let (a, b) = (req[*n].lo as i128 * c, req[*n].hi as i128 * c);
        // range of everything except this term
        let (rlo, rhi) = (tlo - a.min(b), thi - a.max(b));
        let (plo, phi) = (l - rhi, u - rlo);
        let (lo, hi) = if c > 0 {
            (-floor_div128(-plo, c), floor_div128(phi, c))
        } else {
            (-floor_div128(-phi, c), floor_div128(plo, c))
        };
        let (lo, hi) = (clamp64(lo), clamp64(hi));
        if lo > hi {
            return None;
        }
        req[*n] = req[*n].meet(Interval::new(lo, hi))?;
    }
    Some(())
}

fn forward(c: &Compiled, dom: &[Interval], fwd: &mut [Interval]) {
    for (i, op) in c.ops.iter().enumerate() {
        fwd[i] = match *op {
            Op::Var(v) => dom[v],
            Op::Const(k) => Interval::new(k, k),
            Op::Arith(o, a, b) => forward_arith(o, fwd[a], fwd[b]),
            Op::Cmp(o, a, b) => {
                let plain = forward_cmp(o, fwd[a], fwd[b]);
                match &c.cmp_lin[i] {
                    Some(lin) if plain == Interval::BOOL && lin.valid(c, fwd) => lin_decide(o, lin.range(fwd)),
                    _ => plain,
                }
            }
            Op::Not(a) => Interval::new(1 - fwd[a].hi, 1 - fwd[a].lo),
            Op::And(a, b) => {
                if fwd[a] == Interval::FALSE || fwd[b] == Interval::FALSE {
                    Interval::FALSE
                } else if fwd[a] == Interval::TRUE && fwd[b] == Interval::TRUE {
                    Interval::TRUE
                } else {
                    Interval::BOOL
                }
            }
            Op::Ite(x, a, b) => {
                if fwd[x] == Interval::TRUE {
                    fwd[a]
                } else if fwd[x] == Interval::FALSE {
                    fwd[b]
                } else {
                    fwd[a].hull(fwd[b])
                }
            }
        };
    }
}

fn set(req: &mut [Interval], i: usize, iv: Interval) -> Option<()> {
    req[i] = req[i].meet(iv)?;
    Some(())
}

fn backward(c: &Compiled, req: &mut [Interval]) -> Option<()> {
    for i in (0..c.ops.len()).rev() {
        let r = req[i];
        match c.ops[i] {
            Op::Var(_) | Op::Const(_) => {}
            Op::Arith(o, a, b) => {
                let (na, nb) = backward_arith(o, r, req[a], req[b])?;
                set(req, a, na)?;
                set(req, b, nb)?;
            }
            Op::Cmp(o, a, b) => {
                let op = if r == Interval::TRUE {
                    o
                } else if r == Interval::FALSE {
                    o.negate()
                } else {
                    continue;
                };
                if let Some(lin) = &c.cmp_lin[i] {
                    if lin.valid(c, req) {
                        lin_narrow(lin, op, req)?;
                    }
                }
                let (na, nb) = backward_cmp(op, req[a], req[b])?;
                set(req, a, na)?;
                set(req, b, nb)?;
            }
            Op::Not(a) => set(req, a, Interval::new(1 - r.hi, 1 - r.lo))?,
            Op::And(a, b) => {
                if r == Interval::TRUE {
                    set(req, a, Interval::TRUE)?;
                    set(req, b, Interval::TRUE)?;
                } else if r == Interval::FALSE {
                    if req[a] == Interval::TRUE {
                        set(req, b, Interval::FALSE)?;
                    } else if req[b] == Interval::TRUE {
                        set(req, a, Interval::FALSE)?;
                    }
                }
            }
            Op::Ite(x, a, b) => {
                if req[x] == Interval::TRUE {
                    set(req, a, r)?;
                } else if req[x] == Interval::FALSE {
                    set(req, b, r)?;
                } else {
                    let a_ok = req[a].meet(r).is_some();
                    let b_ok = req[b].meet(r).is_some();
                    match (a_ok, b_ok) {
                        (false, false) => return None,
                        (false, true) => {
                            set(req, x, Interval::FALSE)?;
                            set(req, b, r)?;
                        }
                        (true, false) => {
                            set(req, x, Interval::TRUE)?;
                            set(req, a, r)?;
                        }
                        (true, true) => {}
                    }
                }
            }
        }
    }
    Some(())
}

/// Alternates forward evaluation and backward narrowing until the variable
/// ranges stop changing or the pass limit is hit. Returns `None` when some
/// range becomes empty, otherwise whether every root is proven true.
pub(crate) fn propagate(
    c: &Compiled,
    dom: &mut [Interval],
    fwd: &mut Vec<Interval>,
    req: &mut Vec<Interval>,
    work: &mut u64,
) -> Option<bool> {
    fwd.resize(c.ops.len(), Interval::FULL);
    for _ in 0..MAX_PASSES {
        *work += 2 * c.ops.len() as u64 + 1;
        forward(c, dom, fwd);
        req.clear();
        req.extend_from_slice(fwd);
        for r in &c.roots {
            set(req, *r, Interval::TRUE)?;
        }
        backward(c, req)?;
        let mut changed = false;
        for (v, d) in dom.iter_mut().enumerate() {
            let n = d.meet(req[c.var_node[v]])?;
            if n != *d {
                *d = n;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    pairwise(c, req)?;
    forward(c, dom, fwd);
    Some(c.roots.iter().all(|r| fwd[*r] == Interval::TRUE))
}

/// Adds or subtracts pairs of decided linear comparisons whose variable
/// parts cancel. Catches cycles like `x < y && y < x` that single-constraint
/// narrowing only closes one unit per pass.
fn pairwise(c: &Compiled, req: &[Interval]) -> Option<()> {
    let mut facts: Vec<(&Lin, i128, i128)> = Vec::new();
    for (i, op) in c.ops.iter().enumerate() {
        let (Op::Cmp(o, _, _), Some(lin)) = (op, &c.cmp_lin[i]) else { continue };
        let o = if req[i] == Interval::TRUE {
            *o
        } else if req[i] == Interval::FALSE {
            o.negate()
        } else {
            continue;
        };
        if lin.terms.is_empty() || !lin.valid(c, req) {
            continue;
        }
        if let Some((l, u)) = diff_bounds(o) {
            facts.push((lin, l, u));
        }
    }
    for (i, (a, al, au)) in facts.iter().enumerate() {
        for (b, bl, bu) in &facts[i + 1..] {
            if a.terms.len() != b.terms.len() {
                continue;
            }
            let same = a.terms == b.terms;
            let opposite = a.terms.iter().zip(&b.terms).all(|(x, y)| x.0 == y.0 && x.1 == -y.1);
            // (a - ka) and (b - kb) are the variable parts
            let (lo, hi, k) = if opposite {
                (al + bl, au + bu, a.k as i128 + b.k as i128)
            } else if same {
                (al - bu, au - bl, a.k as i128 - b.k as i128)
            } else {
                continue;
            };
            if k < lo || k > hi {
                return None;
            }
        }
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_ranges() {
        assert_eq!(wrapped(0, 10), Interval::new(0, 10));
        assert_eq!(wrapped(I32_HI + 1, I32_HI + 5), Interval::new(I32_LO, I32_LO + 4));
        assert_eq!(wrapped(I32_HI, I32_HI + 1), Interval::FULL);
    }

    #[test]
    fn division_and_remainder() {
        assert_eq!(
            forward_arith(ArithOp::Div, Interval::new(10, 20), Interval::new(-2, 2)),
            Interval::new(-20, 20)
        );
        assert_eq!(
            forward_arith(ArithOp::Rem, Interval::new(0, 100), Interval::new(7, 7)),
            Interval::new(0, 6)
        );
        assert_eq!(
            forward_arith(ArithOp::Rem, Interval::new(-3, 100), Interval::new(0, 0)),
            Interval::new(0, 0)
        );
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(ceil_div(-7, 2), -3);
        assert_eq!(floor_div(7, -2), -4);
        assert_eq!(ceil_div(7, 2), 4);
    }
}
