#![allow(dead_code)]

use std::collections::BTreeMap;

use mctest_core::frontend::Program;
use mctest_core::pipeline::{build, prebuild, Built};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Parses, links and builds harnesses for `targets` (all user functions
/// when empty) from in-memory files.
pub fn build_sources(files: &[(&str, &str)], targets: &[&str]) -> Built {
    build_with_limit(files, targets, 3)
}

pub fn build_with_limit(files: &[(&str, &str)], targets: &[&str], limit: u32) -> Built {
    let sources: BTreeMap<String, String> = files.iter().map(|(p, t)| (p.to_string(), t.to_string())).collect();
    let program = prebuild(&sources).unwrap_or_else(|e| panic!("{e}"));
    let functions = if targets.is_empty() {
        user_functions(&program)
    } else {
        targets.iter().map(|s| s.to_string()).collect()
    };
    build(sources, program, functions, limit, Vec::new()).unwrap_or_else(|e| panic!("{e}"))
}

pub fn build_one(src: &str, targets: &[&str]) -> Built {
    build_sources(&[("t.mc", src)], targets)
}

pub fn user_functions(p: &Program) -> Vec<String> {
    mctest_core::frontend::list_functions(p, &[], &[]).0
}

pub fn corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

// ---- random straight MiniC programs with a reference evaluator ----

#[derive(Clone, Debug)]
pub enum IE {
    Lit(i32),
    Var(usize),
    Neg(Box<IE>),
    Bin(char, Box<IE>, Box<IE>),
    /// `t[((e % 4) + 4) % 4]`
    Read(Box<IE>),
    Call(Box<IE>, Box<IE>),
}

#[derive(Clone, Debug)]
pub enum BE {
    Lit(bool),
    Flag,
    Cmp(&'static str, IE, IE),
    Not(Box<BE>),
    And(Box<BE>, Box<BE>),
    Or(Box<BE>, Box<BE>),
}

#[derive(Clone, Debug)]
pub enum St {
    Set(usize, IE),
    SetFlag(BE),
    Store(IE, IE),
    If(BE, Vec<St>, Vec<St>),
    /// Counter index, bound, extra condition, body.
    Loop(usize, i32, BE, Vec<St>),
    Ret(IE),
    Assert(BE),
}

/// `int g(int a, int b)` and `int f(int p0, int p1, int p2)`. Int variables
/// 0..=2 are the parameters, 3..=4 locals.
#[derive(Clone, Debug)]
pub struct GenProgram {
    pub g_body: Vec<St>,
    pub g_ret: IE,
    pub f_body: Vec<St>,
    pub f_ret: IE,
    pub loops: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    DivByZero,
    ModByZero,
    Assert,
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    vars: usize,
    calls: bool,
    loops: usize,
}

impl Gen<'_> {
    fn lit(&mut self) -> i32 {
        match self.rng.gen_range(0..10) {
            0 => i32::MAX,
            1 => 0,
            _ => self.rng.gen_range(-20..=20),
        }
    }

    fn ie(&mut self, d: u32) -> IE {
        if d == 0 || self.rng.gen_bool(0.3) {
            return if self.rng.gen_bool(0.5) {
                IE::Lit(self.lit())
            } else {
                IE::Var(self.rng.gen_range(0..self.vars))
            };
        }
        match self.rng.gen_range(0..10) {
            0 => IE::Neg(Box::new(self.ie(d - 1))),
            1 => IE::Read(Box::new(self.ie(d - 1))),
            2 if self.calls => IE::Call(Box::new(self.ie(d - 1)), Box::new(self.ie(d - 1))),
            _ => {
                let op = ['+', '-', '*', '/', '%', '+', '-'][self.rng.gen_range(0..7)];
                IE::Bin(op, Box::new(self.ie(d - 1)), Box::new(self.ie(d - 1)))
            }
        }
    }

    fn be(&mut self, d: u32) -> BE {
        let pick = if d == 0 { self.rng.gen_range(0..3) } else { self.rng.gen_range(0..7) };
        match pick {
            0 => BE::Lit(self.rng.gen_bool(0.5)),
            1 => BE::Flag,
            2 | 3 => {
                let op = ["==", "!=", "<", "<=", ">", ">="][self.rng.gen_range(0..6)];
                BE::Cmp(op, self.ie(2), self.ie(2))
            }
            4 => BE::Not(Box::new(self.be(d - 1))),
            5 => BE::And(Box::new(self.be(d - 1)), Box::new(self.be(d - 1))),
            _ => BE::Or(Box::new(self.be(d - 1)), Box::new(self.be(d - 1))),
        }
    }

    fn stmts(&mut self, d: u32, n: usize) -> Vec<St> {
        (0..n).map(|_| self.stmt(d)).collect()
    }

    fn stmt(&mut self, d: u32) -> St {
        let pick = if d == 0 { self.rng.gen_range(0..4) } else { self.rng.gen_range(0..8) };
        match pick {
            0 | 1 => St::Set(self.rng.gen_range(0..self.vars), self.ie(3)),
            2 => St::SetFlag(self.be(2)),
            3 => St::Store(self.ie(2), self.ie(2)),
            4 | 5 => {
                let c = self.be(2);
                let n1 = self.rng.gen_range(1..3);
                let n2 = self.rng.gen_range(0..3);
                St::If(c, self.stmts(d - 1, n1), self.stmts(d - 1, n2))
            }
            6 => {
                let k = self.loops;
                self.loops += 1;
                let bound = self.rng.gen_range(0..5);
                let c = self.be(1);
                let n = self.rng.gen_range(1..3);
                St::Loop(k, bound, c, self.stmts(d - 1, n))
            }
            _ => {
                if self.rng.gen_bool(0.5) {
                    St::Ret(self.ie(2))
                } else {
                    St::Assert(self.be(1))
                }
            }
        }
    }
}

pub fn gen_program(rng: &mut ChaCha8Rng) -> GenProgram {
    let mut g = Gen {
        rng,
        vars: 4,
        calls: false,
        loops: 0,
    };
    let n = g.rng.gen_range(0..3);
    let g_body = g.stmts(1, n);
    let g_ret = g.ie(3);
    g.vars = 5;
    g.calls = true;
    let n = g.rng.gen_range(1..5);
    let f_body = g.stmts(2, n);
    let f_ret = g.ie(3);
    GenProgram {
        g_body,
        g_ret,
        f_body,
        f_ret,
        loops: g.loops,
    }
}

fn lit_text(v: i32) -> String {
    if v == i32::MIN {
        "(-2147483647 - 1)".to_string()
    } else if v < 0 {
        format!("(-{})", -(v as i64))
    } else {
        v.to_string()
    }
}

const F_VARS: [&str; 5] = ["p0", "p1", "p2", "v0", "v1"];
const G_VARS: [&str; 5] = ["a", "b", "w0", "w1", "unused"];

struct Render<'a> {
    vars: &'a [&'static str; 5],
}

impl Render<'_> {
    fn ie(&self, e: &IE) -> String {
        match e {
            IE::Lit(v) => lit_text(*v),
            IE::Var(i) => self.vars[*i].to_string(),
            IE::Neg(a) => format!("(-{})", self.ie(a)),
            IE::Bin(op, a, b) => format!("({} {op} {})", self.ie(a), self.ie(b)),
            IE::Read(i) => format!("t[(({} % 4) + 4) % 4]", self.ie(i)),
            IE::Call(a, b) => format!("g({}, {})", self.ie(a), self.ie(b)),
        }
    }

    fn be(&self, e: &BE) -> String {
        match e {
            BE::Lit(b) => b.to_string(),
            BE::Flag => "flag".to_string(),
            BE::Cmp(op, a, b) => format!("({} {op} {})", self.ie(a), self.ie(b)),
            BE::Not(a) => format!("!{}", self.be(a)),
            BE::And(a, b) => format!("({} && {})", self.be(a), self.be(b)),
            BE::Or(a, b) => format!("({} || {})", self.be(a), self.be(b)),
        }
    }

    fn block(&self, out: &mut String, body: &[St], ind: usize) {
        for s in body {
            self.stmt(out, s, ind);
        }
    }

    fn stmt(&self, out: &mut String, s: &St, ind: usize) {
        let pad = "    ".repeat(ind);
        match s {
            St::Set(v, e) => out.push_str(&format!("{pad}{} = {};\n", self.vars[*v], self.ie(e))),
            St::SetFlag(b) => out.push_str(&format!("{pad}flag = {};\n", self.be(b))),
            St::Store(i, e) => out.push_str(&format!("{pad}t[(({} % 4) + 4) % 4] = {};\n", self.ie(i), self.ie(e))),
            St::If(c, a, b) => {
                out.push_str(&format!("{pad}if ({}) {{\n", self.be(c)));
                self.block(out, a, ind + 1);
                if b.is_empty() {
                    out.push_str(&format!("{pad}}}\n"));
                } else {
                    out.push_str(&format!("{pad}}} else {{\n"));
                    self.block(out, b, ind + 1);
                    out.push_str(&format!("{pad}}}\n"));
                }
            }
            St::Loop(k, n, c, body) => {
                out.push_str(&format!("{pad}c{k} = 0;\n{pad}while (c{k} < {n} && {}) {{\n", self.be(c)));
                self.block(out, body, ind + 1);
                out.push_str(&format!("{pad}    c{k} = c{k} + 1;\n{pad}}}\n"));
            }
            St::Ret(e) => out.push_str(&format!("{pad}return {};\n", self.ie(e))),
            St::Assert(b) => out.push_str(&format!("{pad}assert({});\n", self.be(b))),
        }
    }
}

impl GenProgram {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let r = Render { vars: &G_VARS };
        out.push_str("int g(int a, int b) {\n    int w0 = 0;\n    int w1 = 1;\n    int unused = 0;\n    bool flag = false;\n    int t[4];\n");
        out.push_str("    t[0] = 0;\n    t[1] = 0;\n    t[2] = 0;\n    t[3] = 0;\n");
        for k in 0..self.loops {
            out.push_str(&format!("    int c{k} = 0;\n"));
        }
        r.block(&mut out, &self.g_body, 1);
        out.push_str(&format!("    return {};\n}}\n\n", r.ie(&self.g_ret)));

        let r = Render { vars: &F_VARS };
        out.push_str("int f(int p0, int p1, int p2) {\n    int v0 = 3;\n    int v1 = -2;\n    bool flag = true;\n    int t[4];\n");
        out.push_str("    t[0] = 5;\n    t[1] = 6;\n    t[2] = 7;\n    t[3] = 8;\n");
        for k in 0..self.loops {
            out.push_str(&format!("    int c{k} = 0;\n"));
        }
        r.block(&mut out, &self.f_body, 1);
        out.push_str(&format!("    return {};\n}}\n", r.ie(&self.f_ret)));
        out
    }

    /// Reference result of `f(args)`.
    pub fn eval(&self, args: [i32; 3]) -> Result<i32, Fault> {
        let mut fr = Frame {
            prog: self,
            vars: [args[0], args[1], args[2], 3, -2],
            flag: true,
            t: [5, 6, 7, 8],
        };
        match fr.block(&self.f_body)? {
            Some(v) => Ok(v),
            None => fr.ie(&self.f_ret),
        }
    }

    fn eval_g(&self, a: i32, b: i32) -> Result<i32, Fault> {
        let mut fr = Frame {
            prog: self,
            vars: [a, b, 0, 1, 0],
            flag: false,
            t: [0; 4],
        };
        match fr.block(&self.g_body)? {
            Some(v) => Ok(v),
            None => fr.ie(&self.g_ret),
        }
    }
}

struct Frame<'a> {
    prog: &'a GenProgram,
    vars: [i32; 5],
    flag: bool,
    t: [i32; 4],
}

fn slot(i: i32) -> usize {
    (i.wrapping_rem(4).wrapping_add(4).wrapping_rem(4)) as usize
}

impl Frame<'_> {
    fn ie(&mut self, e: &IE) -> Result<i32, Fault> {
        Ok(match e {
            IE::Lit(v) => *v,
            IE::Var(i) => self.vars[*i],
            IE::Neg(a) => self.ie(a)?.wrapping_neg(),
            IE::Bin(op, a, b) => {
                let x = self.ie(a)?;
                let y = self.ie(b)?;
                match op {
                    '+' => x.wrapping_add(y),
                    '-' => x.wrapping_sub(y),
                    '*' => x.wrapping_mul(y),
                    '/' if y == 0 => return Err(Fault::DivByZero),
                    '/' => x.wrapping_div(y),
                    '%' if y == 0 => return Err(Fault::ModByZero),
                    _ => x.wrapping_rem(y),
                }
            }
            IE::Read(i) => {
                let i = self.ie(i)?;
                self.t[slot(i)]
            }
            IE::Call(a, b) => {
                let x = self.ie(a)?;
                let y = self.ie(b)?;
                self.prog.eval_g(x, y)?
            }
        })
    }

    fn be(&mut self, e: &BE) -> Result<bool, Fault> {
        Ok(match e {
            BE::Lit(b) => *b,
            BE::Flag => self.flag,
            BE::Cmp(op, a, b) => {
                let x = self.ie(a)?;
                let y = self.ie(b)?;
                match *op {
                    "==" => x == y,
                    "!=" => x != y,
                    "<" => x < y,
                    "<=" => x <= y,
                    ">" => x > y,
                    _ => x >= y,
                }
            }
            BE::Not(a) => !self.be(a)?,
            BE::And(a, b) => self.be(a)? && self.be(b)?,
            BE::Or(a, b) => self.be(a)? || self.be(b)?,
        })
    }

    fn block(&mut self, body: &[St]) -> Result<Option<i32>, Fault> {
        for s in body {
            if let Some(v) = self.stmt(s)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn stmt(&mut self, s: &St) -> Result<Option<i32>, Fault> {
        match s {
            St::Set(v, e) => self.vars[*v] = self.ie(e)?,
            St::SetFlag(b) => self.flag = self.be(b)?,
            St::Store(i, e) => {
                let i = self.ie(i)?;
                let v = self.ie(e)?;
                self.t[slot(i)] = v;
            }
            St::If(c, a, b) => {
                let body = if self.be(c)? { a } else { b };
                return self.block(body);
            }
            St::Loop(_, n, c, body) => {
                let mut k = 0;
                while k < *n && self.be(c)? {
                    if let Some(v) = self.block(body)? {
                        return Ok(Some(v));
                    }
                    k += 1;
                }
            }
            St::Ret(e) => return Ok(Some(self.ie(e)?)),
            St::Assert(b) => {
                if !self.be(b)? {
                    return Err(Fault::Assert);
                }
            }
        }
        Ok(None)
    }
}

pub fn lit(v: i32) -> String {
    lit_text(v)
}
