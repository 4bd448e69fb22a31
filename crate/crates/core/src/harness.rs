//! Generated MiniC test harness: drivers, per-record symbolic initializers
//! and stubs for external functions.
//!
//! For `void bound(Point* this, Point min, Point max)` the output looks like
//!
//! ```text
//! void __SYM_Point(int baseId, Point* obj) {
//!     __sym_i32(baseId, &obj->x);
//!     __sym_i32(baseId + 1, &obj->y);
//! }
//!
//! void __DRIVER_bound() {
//!     Point* this;
//!     Point min;
//!     Point max;
//!     this = new Point;
//!     __SYM_Point(0, this);
//!     __SYM_Point(2, &min);
//!     __SYM_Point(4, &max);
//!     bound(this, min, max);
//! }
//! ```
//!
//! Records that can reach an address field get an initializer of the form
//! `int __SYM_R(int baseId, R* obj, int depth)` that returns the next free
//! symbol id, since how many symbols they bind depends on `depth`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::frontend::link::{SYM_BOOL, SYM_FRESH_BOOL, SYM_FRESH_I32, SYM_I32};
use crate::frontend::printer::declarator;
use crate::frontend::*;
use crate::ir::Width;

pub const DEFAULT_DEPTH_LIMIT: u32 = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub id: u32,
    pub path: String,
    pub width: Width,
    pub domain: Option<(i32, i32)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolMap {
    pub entries: Vec<SymbolEntry>,
}

impl SymbolMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&SymbolEntry> {
        self.entries.get(id as usize)
    }

    /// Inclusive value range of a symbol; bools are `[0, 1]`.
    pub fn range(&self, id: u32) -> (i32, i32) {
        match self.get(id) {
            Some(SymbolEntry { width: Width::Bool, .. }) => (0, 1),
            Some(SymbolEntry { domain: Some(d), .. }) => *d,
            _ => (i32::MIN, i32::MAX),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubPlan {
    pub external: String,
    pub stub_fn: String,
    /// Fresh-value tags: the return value first, then out-parameter leaves.
    pub tags: Vec<(i32, Width)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessPlan {
    pub target: String,
    pub driver_name: String,
    pub initializers: Vec<(String, String)>,
    pub stubs: Vec<StubPlan>,
    pub symbol_map: SymbolMap,
    pub depth_limit: u32,
    /// Problems with stubs that could only be generated approximately.
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("function {0} not found")]
    TargetNotFound(String),
    #[error("function {0} is external and cannot be tested")]
    TargetExternal(String),
    #[error("depth limit must be at least 1, got {0}")]
    BadDepthLimit(u32),
    #[error("generated harness failed to link:\n{0}")]
    Link(DiagnosticList),
}

pub fn driver_name(target: &str) -> String {
    format!("__DRIVER_{target}")
}

pub fn initializer_name(record: &str) -> String {
    format!("__SYM_{record}")
}

/// True when no address type is reachable through the record's value fields,
/// so it always binds the same number of symbols.
fn is_static_record(p: &Program, name: &str) -> bool {
    fn ty_static(p: &Program, ty: &Ty) -> bool {
        match ty {
            Ty::Int | Ty::Bool => true,
            Ty::Array(e, _) => ty_static(p, e),
            Ty::Record(n) => p.record(n).fields.iter().all(|f| ty_static(p, &f.ty)),
            _ => false,
        }
    }
    ty_static(p, &Ty::Record(name.to_string()))
}

/// Number of scalar leaves of a static record.
fn static_size(p: &Program, ty: &Ty) -> u32 {
    match ty {
        Ty::Int | Ty::Bool => 1,
        Ty::Array(e, n) => static_size(p, e) * n,
        Ty::Record(r) => p.record(r).fields.iter().map(|f| static_size(p, &f.ty)).sum(),
        _ => 0,
    }
}

/// Pre-order enumeration of scalar leaves reachable within the depth limit.
fn enumerate_leaves(p: &Program, ty: &Ty, path: &str, depth: u32, limit: u32, out: &mut Vec<(String, Width)>) {
    match ty {
        Ty::Int => out.push((path.to_string(), Width::I32)),
        Ty::Bool => out.push((path.to_string(), Width::Bool)),
        Ty::Record(r) => {
            for f in &p.record(r).fields {
                enumerate_leaves(p, &f.ty, &format!("{path}.{}", f.name), depth, limit, out);
            }
        }
        Ty::Array(e, n) => {
            for i in 0..*n {
                enumerate_leaves(p, e, &format!("{path}[{i}]"), depth, limit, out);
            }
        }
        Ty::Ptr(inner) => {
            if depth < limit {
                let sub = match **inner {
                    Ty::Record(_) => path.to_string(),
                    Ty::Int | Ty::Bool => format!("*{path}"),
                    _ => format!("(*{path})"),
                };
                enumerate_leaves(p, inner, &sub, depth + 1, limit, out);
            }
        }
        Ty::Null | Ty::Void => {}
    }
}

fn domain_for(f: &FuncDef, path: &str) -> Option<(i32, i32)> {
    let mut d = None;
    for a in &f.domains {
        let applies = match &a.path {
            None => true,
            Some(pp) => {
                path == pp
                    || path.strip_prefix(pp.as_str()).is_some_and(|rest| rest.starts_with('.') || rest.starts_with('['))
            }
        };
        if applies {
            d = Some((a.lo as i32, a.hi as i32));
        }
    }
    d
}

fn records_in(ty: &Ty, out: &mut Vec<String>) {
    match ty {
        Ty::Record(r) => out.push(r.clone()),
        Ty::Array(e, _) | Ty::Ptr(e) => records_in(e, out),
        _ => {}
    }
}

/// Records reachable from the given types through fields of any kind.
fn reachable_records(p: &Program, roots: &[&Ty]) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = Vec::new();
    for t in roots {
        records_in(t, &mut stack);
    }
    while let Some(r) = stack.pop() {
        if seen.insert(r.clone()) {
            for f in &p.record(&r).fields {
                records_in(&f.ty, &mut stack);
            }
        }
    }
    seen
}

/// Leaf types of an out-parameter's pointee that a stub fills in.
fn out_leaves(p: &Program, ty: &Ty, lv: &str, out: &mut Vec<(String, Width)>) {
    match ty {
        Ty::Int => out.push((lv.to_string(), Width::I32)),
        Ty::Bool => out.push((lv.to_string(), Width::Bool)),
        Ty::Record(r) => {
            for f in &p.record(r).fields {
                let sub = if let Some(ptr) = lv.strip_prefix('*') {
                    format!("{ptr}->{}", f.name)
                } else {
                    format!("{lv}.{}", f.name)
                };
                out_leaves(p, &f.ty, &sub, out);
            }
        }
        Ty::Array(e, n) => {
            let base = if lv.starts_with('*') { format!("({lv})") } else { lv.to_string() };
            for i in 0..*n {
                out_leaves(p, e, &format!("{base}[{i}]"), out);
            }
        }
        _ => {}
    }
}

struct StubShape {
    ret: Option<Width>,
    /// (parameter name, leaf lvalues)
    outs: Vec<(String, Vec<(String, Width)>)>,
}

fn stub_shape(p: &Program, f: &FuncDef) -> StubShape {
    let ret = match f.ret {
        Ty::Int => Some(Width::I32),
        Ty::Bool => Some(Width::Bool),
        _ => None,
    };
    let mut outs = Vec::new();
    for prm in &f.params {
        if let Ty::Ptr(inner) = &prm.ty {
            let mut leaves = Vec::new();
            out_leaves(p, inner, &format!("*{}", prm.name), &mut leaves);
            if !leaves.is_empty() {
                outs.push((prm.name.clone(), leaves));
            }
        }
    }
    StubShape { ret, outs }
}

/// Program-wide fresh tags for every external, in program order.
pub fn stub_tags(p: &Program) -> BTreeMap<String, Vec<(i32, Width)>> {
    let mut next = 0i32;
    let mut out = BTreeMap::new();
    for f in p.externals() {
        let shape = stub_shape(p, f);
        let mut tags = Vec::new();
        if let Some(w) = shape.ret {
            tags.push((next, w));
            next += 1;
        }
        for (_, leaves) in &shape.outs {
            for (_, w) in leaves {
                tags.push((next, *w));
                next += 1;
            }
        }
        out.insert(f.name.clone(), tags);
    }
    out
}

fn stub_warning(f: &FuncDef) -> Option<String> {
    match &f.ret {
        Ty::Record(_) | Ty::Ptr(_) | Ty::Array(..) => Some(format!(
            "{}: stub for external {} cannot produce symbolic values of type {}; it returns a zero value",
            f.loc, f.name, f.ret
        )),
        _ => None,
    }
}

pub fn plan_harness(p: &Program, target: &str, depth_limit: u32) -> Result<HarnessPlan, HarnessError> {
    if depth_limit < 1 {
        return Err(HarnessError::BadDepthLimit(depth_limit));
    }
    let f = p.function(target).ok_or_else(|| HarnessError::TargetNotFound(target.to_string()))?;
    if f.is_external() {
        return Err(HarnessError::TargetExternal(target.to_string()));
    }

    let mut leaves = Vec::new();
    for prm in &f.params {
        enumerate_leaves(p, &prm.ty, &prm.name, 0, depth_limit, &mut leaves);
    }
    let entries = leaves
        .into_iter()
        .enumerate()
        .map(|(i, (path, width))| SymbolEntry {
            id: i as u32,
            domain: if width == Width::I32 { domain_for(f, &path) } else { None },
            path,
            width,
        })
        .collect();

    let mut roots: Vec<&Ty> = f.params.iter().map(|p| &p.ty).collect();
    roots.push(&f.ret);
    let recs = reachable_records(p, &roots);
    let initializers = p
        .record_order
        .iter()
        .filter(|r| recs.contains(*r))
        .map(|r| (r.clone(), initializer_name(r)))
        .collect();

    let tags = stub_tags(p);
    let mut stubs = Vec::new();
    let mut warnings = Vec::new();
    for name in p.reachable_from(target) {
        let g = &p.functions[&name];
        if g.is_external() {
            warnings.extend(stub_warning(g));
            stubs.push(StubPlan {
                external: name.clone(),
                stub_fn: name.clone(),
                tags: tags[&name].clone(),
            });
        }
    }
    stubs.sort_by_key(|s| p.function_order.iter().position(|n| *n == s.external));

    Ok(HarnessPlan {
        target: target.to_string(),
        driver_name: driver_name(target),
        initializers,
        stubs,
        symbol_map: SymbolMap { entries },
        depth_limit,
        warnings,
    })
}

/// An assignable place in generated code. `ptr` is set when the place is
/// `*ptr`, so its address can be written without `&*`.
#[derive(Clone)]
struct Lv {
    text: String,
    ptr: Option<String>,
}

impl Lv {
    fn var(name: &str) -> Lv {
        Lv {
            text: name.to_string(),
            ptr: None,
        }
    }

    fn deref(ptr: &str) -> Lv {
        Lv {
            text: format!("(*{ptr})"),
            ptr: Some(ptr.to_string()),
        }
    }

    fn addr(&self) -> String {
        match &self.ptr {
            Some(p) => p.clone(),
            None => format!("&{}", self.text),
        }
    }

    fn field(&self, f: &str) -> Lv {
        let text = match &self.ptr {
            Some(p) => format!("{p}->{f}"),
            None => format!("{}.{f}", self.text),
        };
        Lv { text, ptr: None }
    }

    fn index(&self, i: u32) -> Lv {
        Lv {
            text: format!("{}[{i}]", self.text),
            ptr: None,
        }
    }
}

#[derive(Clone, Copy)]
enum Depth {
    Static(u32),
    /// `depth + k`
    Dynamic(u32),
}

impl Depth {
    fn plus1(self) -> Depth {
        match self {
            Depth::Static(d) => Depth::Static(d + 1),
            Depth::Dynamic(k) => Depth::Dynamic(k + 1),
        }
    }

    fn text(self) -> String {
        match self {
            Depth::Static(d) => d.to_string(),
            Depth::Dynamic(0) => "depth".into(),
            Depth::Dynamic(k) => format!("depth + {k}"),
        }
    }
}

/// Next symbol id: a literal in drivers, `var + k` in initializers.
#[derive(Clone, Copy)]
enum Cursor {
    Static(u32),
    Rel(&'static str, u32),
}

impl Cursor {
    fn text(self) -> String {
        match self {
            Cursor::Static(i) => i.to_string(),
            Cursor::Rel(v, 0) => v.to_string(),
            Cursor::Rel(v, k) => format!("{v} + {k}"),
        }
    }

    fn advance(&mut self, n: u32) {
        match self {
            Cursor::Static(i) => *i += n,
            Cursor::Rel(_, k) => *k += n,
        }
    }
}

struct Emitter<'a> {
    p: &'a Program,
    limit: u32,
    out: String,
    level: usize,
    uses_next: bool,
}

impl Emitter<'_> {
    fn line(&mut self, s: impl AsRef<str>) {
        for _ in 0..self.level {
            self.out.push_str("    ");
        }
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    /// Moves a relative cursor into the `next` variable.
    fn sync_next(&mut self, cur: &mut Cursor) {
        self.uses_next = true;
        match *cur {
            Cursor::Rel("next", 0) => {}
            c => {
                self.line(format!("next = {};", c.text()));
                *cur = Cursor::Rel("next", 0);
            }
        }
    }

    fn init(&mut self, lv: &Lv, ty: &Ty, depth: Depth, cur: &mut Cursor) {
        match ty {
            Ty::Int | Ty::Bool => {
                let f = if *ty == Ty::Int { SYM_I32 } else { SYM_BOOL };
                self.line(format!("{f}({}, {});", cur.text(), lv.addr()));
                cur.advance(1);
            }
            Ty::Record(r) => {
                let init = initializer_name(r);
                if is_static_record(self.p, r) {
                    self.line(format!("{init}({}, {});", cur.text(), lv.addr()));
                    cur.advance(static_size(self.p, ty));
                } else if let (Cursor::Static(id), Depth::Static(d)) = (*cur, depth) {
                    self.line(format!("{init}({id}, {}, {d});", lv.addr()));
                    let mut leaves = Vec::new();
                    enumerate_leaves(self.p, ty, "", d, self.limit, &mut leaves);
                    cur.advance(leaves.len() as u32);
                } else {
                    self.uses_next = true;
                    self.line(format!("next = {init}({}, {}, {});", cur.text(), lv.addr(), depth.text()));
                    *cur = Cursor::Rel("next", 0);
                }
            }
            Ty::Array(e, n) => {
                for i in 0..*n {
                    self.init(&lv.index(i), e, depth, cur);
                }
            }
            Ty::Ptr(inner) => {
                let pointee = declarator(inner, "").trim_end().to_string();
                match depth {
                    Depth::Static(d) => {
                        if d < self.limit {
                            self.line(format!("{} = new {pointee};", lv.text));
                            self.init(&Lv::deref(&lv.text), inner, depth.plus1(), cur);
                        } else {
                            self.line(format!("{} = null;", lv.text));
                        }
                    }
                    Depth::Dynamic(k) => {
                        self.sync_next(cur);
                        self.line(format!("if (depth + {} <= {}) {{", k + 1, self.limit));
                        self.level += 1;
                        self.line(format!("{} = new {pointee};", lv.text));
                        self.init(&Lv::deref(&lv.text), inner, depth.plus1(), cur);
                        self.sync_next(cur);
                        self.level -= 1;
                        self.line("} else {");
                        self.level += 1;
                        self.line(format!("{} = null;", lv.text));
                        self.level -= 1;
                        self.line("}");
                    }
                }
            }
            Ty::Null | Ty::Void => {}
        }
    }
}

pub fn gen_type_initializer(p: &Program, r: &RecordDef, plan: &HarnessPlan) -> String {
    let name = initializer_name(&r.name);
    let stat = is_static_record(p, &r.name);
    let mut e = Emitter {
        p,
        limit: plan.depth_limit,
        out: String::new(),
        level: 1,
        uses_next: false,
    };
    let obj = Lv::deref("obj");
    let mut cur = Cursor::Rel("baseId", 0);
    let depth = Depth::Dynamic(0);
    for f in &r.fields {
        e.init(&obj.field(&f.name), &f.ty, depth, &mut cur);
    }
    let mut out = String::new();
    if stat {
        let _ = writeln!(out, "void {name}(int baseId, {}* obj) {{", r.name);
        out.push_str(&e.out);
    } else {
        let _ = writeln!(out, "int {name}(int baseId, {}* obj, int depth) {{", r.name);
        if e.uses_next {
            out.push_str("    int next;\n");
        }
        out.push_str(&e.out);
        let _ = writeln!(out, "    return {};", cur.text());
    }
    out.push_str("}\n");
    out
}

pub fn gen_driver(p: &Program, plan: &HarnessPlan) -> String {
    let f = &p.functions[&plan.target];
    let mut e = Emitter {
        p,
        limit: plan.depth_limit,
        out: String::new(),
        level: 1,
        uses_next: false,
    };
    for prm in &f.params {
        e.line(format!("{};", declarator(&prm.ty, &prm.name)));
    }
    let mut cur = Cursor::Static(0);
    for prm in &f.params {
        e.init(&Lv::var(&prm.name), &prm.ty, Depth::Static(0), &mut cur);
    }
    let args: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
    e.line(format!("{}({});", plan.target, args.join(", ")));
    format!("void {}() {{\n{}}}\n", plan.driver_name, e.out)
}

pub fn gen_stub(p: &Program, f: &FuncDef, plan: &StubPlan) -> String {
    let shape = stub_shape(p, f);
    let params: Vec<String> = f.params.iter().map(|p| declarator(&p.ty, &p.name)).collect();
    let mut out = format!("{} {}({}) {{\n", f.ret, plan.stub_fn, params.join(", "));
    let mut tags = plan.tags.iter();
    let fresh = |w: Width| if w == Width::I32 { SYM_FRESH_I32 } else { SYM_FRESH_BOOL };
    let ret_tag = shape.ret.map(|_| *tags.next().expect("tag for return"));
    for (param, leaves) in &shape.outs {
        let _ = writeln!(out, "    if ({param} != null) {{");
        for (lv, w) in leaves {
            let (tag, _) = tags.next().expect("tag for out leaf");
            let _ = writeln!(out, "        {lv} = {}({tag});", fresh(*w));
        }
        out.push_str("    }\n");
    }
    match (&f.ret, ret_tag) {
        (Ty::Void, _) => {}
        (_, Some((tag, w))) => {
            let _ = writeln!(out, "    return {}({tag});", fresh(w));
        }
        (Ty::Ptr(_), None) => out.push_str("    return null;\n"),
        (t, None) => {
            let _ = writeln!(out, "    {};", declarator(t, "zero"));
            out.push_str("    return zero;\n");
        }
    }
    out.push_str("}\n");
    out
}

/// Full harness source for one plan.
pub fn harness_text(p: &Program, plan: &HarnessPlan) -> String {
    harness_text_many(p, std::slice::from_ref(plan))
}

fn harness_text_many(p: &Program, plans: &[HarnessPlan]) -> String {
    let mut parts = Vec::new();
    let mut inits: BTreeSet<&str> = BTreeSet::new();
    let mut stubs: BTreeMap<&str, &StubPlan> = BTreeMap::new();
    for plan in plans {
        inits.extend(plan.initializers.iter().map(|(r, _)| r.as_str()));
        for s in &plan.stubs {
            stubs.insert(&s.external, s);
        }
    }
    let limit = plans.first().map(|p| p.depth_limit).unwrap_or(DEFAULT_DEPTH_LIMIT);
    let proto = HarnessPlan {
        target: String::new(),
        driver_name: String::new(),
        initializers: vec![],
        stubs: vec![],
        symbol_map: SymbolMap::default(),
        depth_limit: limit,
        warnings: vec![],
    };
    for r in &p.record_order {
        if inits.contains(r.as_str()) {
            parts.push(gen_type_initializer(p, p.record(r), &proto));
        }
    }
    for name in &p.function_order {
        if let Some(s) = stubs.get(name.as_str()) {
            parts.push(gen_stub(p, &p.functions[name], s));
        }
    }
    for plan in plans {
        parts.push(gen_driver(p, plan));
    }
    parts.join("\n")
}

/// The generated functions' names.
fn generated_names(plans: &[HarnessPlan]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for plan in plans {
        out.insert(plan.driver_name.clone());
        out.extend(plan.initializers.iter().map(|(_, n)| n.clone()));
        out.extend(plan.stubs.iter().map(|s| s.stub_fn.clone()));
    }
    out
}

fn assemble(p: &Program, plans: &[HarnessPlan], unit_name: &str) -> Result<Program, HarnessError> {
    let text = harness_text_many(p, plans);
    let unit = SourceUnit::new(unit_name, &text);
    let ast = parse_unit(&unit).map_err(HarnessError::Link)?;
    let mut units = p.units.clone();
    units.push(ast);
    let mut linked = link_program(&units).map_err(HarnessError::Link)?;
    linked.generated = generated_names(plans);
    linked.generated.extend(p.generated.iter().cloned());
    Ok(linked)
}

/// The program plus the harness for one target.
pub fn assemble_unit(p: &Program, plan: &HarnessPlan) -> Result<Program, HarnessError> {
    assemble(p, std::slice::from_ref(plan), &format!("<harness:{}>", plan.target))
}

/// The plans with every external of the program stubbed, as used for the
/// project-wide harness.
fn project_plans(p: &Program, plans: &[HarnessPlan]) -> Vec<HarnessPlan> {
    let tags = stub_tags(p);
    let mut all = plans.to_vec();
    if let Some(first) = all.first_mut() {
        for f in p.externals() {
            if !first.stubs.iter().any(|s| s.external == f.name) {
                first.stubs.push(StubPlan {
                    external: f.name.clone(),
                    stub_fn: f.name.clone(),
                    tags: tags[&f.name].clone(),
                });
            }
        }
    }
    all
}

/// Harness source shared by all targets: initializers, stubs, then one
/// driver per plan.
pub fn project_harness_text(p: &Program, plans: &[HarnessPlan]) -> String {
    harness_text_many(p, &project_plans(p, plans))
}

/// The program plus the harnesses of all targets, sharing initializers and
/// stubs. Every external in the program is stubbed.
pub fn assemble_project(p: &Program, plans: &[HarnessPlan]) -> Result<Program, HarnessError> {
    assemble(p, &project_plans(p, plans), "<harness>")
}
