//! Syntax tree for MiniC.
//!
//! Every node carries a [`SrcLoc`]. Locations and the type slot filled in by
//! the checker do not take part in equality, so two trees compare equal when
//! they have the same shape regardless of where they came from.

use std::fmt;
use std::sync::Arc;

/// A position in a source unit, 1-based.
#[derive(Clone, Debug, Default, Eq, Hash, PartialOrd, Ord)]
pub struct SrcLoc {
    pub file: Arc<str>,
    pub line: u32,
    pub col: u32,
}

impl SrcLoc {
    pub fn new(file: &Arc<str>, line: u32, col: u32) -> Self {
        SrcLoc {
            file: Arc::clone(file),
            line,
            col,
        }
    }
}

impl PartialEq for SrcLoc {
    fn eq(&self, other: &Self) -> bool {
        self.line == other.line && self.col == other.col && self.file == other.file
    }
}

impl fmt::Display for SrcLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

/// MiniC types. `Null` and `Void` only ever appear as expression types.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Int,
    Bool,
    Record(String),
    Array(Box<Ty>, u32),
    Ptr(Box<Ty>),
    Null,
    Void,
}

impl Ty {
    pub fn ptr(inner: Ty) -> Ty {
        Ty::Ptr(Box::new(inner))
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Ty::Int | Ty::Bool | Ty::Ptr(_) | Ty::Null)
    }

    /// The base name and the array suffix, for declarator-style printing.
    pub fn split_declarator(&self) -> (&Ty, Vec<u32>) {
        let mut dims = Vec::new();
        let mut t = self;
        while let Ty::Array(elem, n) = t {
            dims.push(*n);
            t = elem;
        }
        (t, dims)
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => f.write_str("int"),
            Ty::Bool => f.write_str("bool"),
            Ty::Record(n) => f.write_str(n),
            Ty::Array(e, n) => write!(f, "{e}[{n}]"),
            Ty::Ptr(e) => write!(f, "{e}*"),
            Ty::Null => f.write_str("null"),
            Ty::Void => f.write_str("void"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SrcLoc,
    /// Filled in by the linker's type checker.
    pub ty: Option<Ty>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, loc: SrcLoc) -> Self {
        Expr { kind, loc, ty: None }
    }

    /// The checked type; panics if the expression was never checked.
    pub fn ty(&self) -> &Ty {
        self.ty
            .as_ref()
            .unwrap_or_else(|| panic!("unchecked expression at {}", self.loc))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Null,
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Field(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    AddrOf(Box<Expr>),
    Deref(Box<Expr>),
    Call(String, Vec<Expr>),
    New(Ty),
}

#[derive(Clone, Debug)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: SrcLoc,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Block(Vec<Stmt>),
    Decl {
        name: String,
        ty: Ty,
        init: Option<Expr>,
    },
    Assign {
        target: Expr,
        value: Expr,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    Return(Option<Expr>),
    Assert(Expr),
}

impl StmtKind {
    /// Statements that produce a coverage point. Blocks and bare
    /// declarations are not executable.
    pub fn is_executable(&self) -> bool {
        !matches!(
            self,
            StmtKind::Block(_) | StmtKind::Decl { init: None, .. }
        )
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub ty: Ty,
    pub loc: SrcLoc,
}

impl PartialEq for Param {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty
    }
}

/// Symbol-domain annotation attached to a function, written in a comment
/// as `@domain(lo, hi)` (all int inputs) or `@domain(path, lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainAnnotation {
    pub path: Option<String>,
    pub lo: i32,
    pub hi: i32,
}

#[derive(Clone, Debug)]
pub struct FuncDef {
    pub name: String,
    pub params: Vec<Param>,
    /// `Ty::Void` for procedures.
    pub ret: Ty,
    /// `None` marks an external declaration.
    pub body: Option<Vec<Stmt>>,
    pub domains: Vec<DomainAnnotation>,
    pub loc: SrcLoc,
}

impl PartialEq for FuncDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.ret == other.ret
            && self.body == other.body
            && self.domains == other.domains
    }
}

impl FuncDef {
    pub fn is_external(&self) -> bool {
        self.body.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct FieldDef {
    pub name: String,
    pub ty: Ty,
    pub loc: SrcLoc,
}

impl PartialEq for FieldDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty
    }
}

#[derive(Clone, Debug)]
pub struct RecordDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub loc: SrcLoc,
}

impl PartialEq for RecordDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.fields == other.fields
    }
}

impl RecordDef {
    pub fn field(&self, name: &str) -> Option<(usize, &FieldDef)> {
        self.fields.iter().enumerate().find(|(_, f)| f.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Record(RecordDef),
    Func(FuncDef),
}

/// One parsed source file.
#[derive(Clone, Debug, PartialEq)]
pub struct Ast {
    pub path: String,
    pub items: Vec<Item>,
}
