//! Recursive-descent parser for MiniC.
//!
//! Parsing stops at the first syntax error; the diagnostic names the token
//! that was found and the set of tokens that would have been accepted there.

use std::sync::Arc;

use super::ast::*;
use super::diag::{Diagnostic, DiagnosticList};
use super::lexer::{tokenize, Tok, Token};

/// A source file handed to the frontend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceUnit {
            path: path.into(),
            text: text.into(),
        }
    }
}

pub fn parse_unit(unit: &SourceUnit) -> Result<Ast, DiagnosticList> {
    let path: Arc<str> = Arc::from(unit.path.as_str());
    let toks = tokenize(&path, &unit.text).map_err(|d| DiagnosticList(vec![d]))?;
    let mut p = Parser {
        toks,
        pos: 0,
        expected: Vec::new(),
    };
    let items = p.items().map_err(|d| DiagnosticList(vec![d]))?;
    Ok(Ast {
        path: unit.path.clone(),
        items,
    })
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Descriptions of what would have been accepted at `pos`.
    expected: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn loc(&self) -> SrcLoc {
        self.toks[self.pos].loc.clone()
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        self.expected.clear();
        t
    }

    fn check(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            true
        } else {
            self.expected.push(t.to_string());
            false
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.check(t) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<Token> {
        if self.check(&t) {
            Ok(self.advance())
        } else {
            Err(self.error())
        }
    }

    fn error(&mut self) -> Diagnostic {
        let mut exp = std::mem::take(&mut self.expected);
        exp.sort();
        exp.dedup();
        let found = self.peek().to_string();
        let msg = match exp.len() {
            0 => format!("unexpected {found}"),
            1 => format!("expected {}, found {found}", exp[0]),
            _ => format!("expected one of {}, found {found}", exp.join(", ")),
        };
        Diagnostic::error(self.loc(), format!("syntax error: {msg}"))
    }

    fn ident(&mut self) -> PResult<(String, SrcLoc)> {
        if let Tok::Ident(name) = self.peek() {
            let name = name.clone();
            let loc = self.advance().loc;
            Ok((name, loc))
        } else {
            self.expected.push("identifier".into());
            Err(self.error())
        }
    }

    fn items(&mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        let mut domains = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Domain(d) => {
                    self.advance();
                    domains.push(d);
                }
                Tok::KwRecord => {
                    items.push(Item::Record(self.record()?));
                    domains.clear();
                }
                Tok::KwExternal => {
                    let loc = self.advance().loc;
                    let mut f = self.func_head(loc)?;
                    self.expect(Tok::Semi)?;
                    f.domains = std::mem::take(&mut domains);
                    items.push(Item::Func(f));
                }
                _ => {
                    let loc = self.loc();
                    self.expected.extend(["`record`".into(), "`external`".into(), "`void`".into()]);
                    let mut f = self.func_head(loc)?;
                    f.body = Some(self.block_body()?);
                    f.domains = std::mem::take(&mut domains);
                    items.push(Item::Func(f));
                }
            }
        }
        Ok(items)
    }

    fn record(&mut self) -> PResult<RecordDef> {
        let loc = self.expect(Tok::KwRecord)?.loc;
        let (name, _) = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut fields = Vec::new();
        while !self.eat(&Tok::RBrace) {
            self.skip_domains();
            let floc = self.loc();
            let base = self.base_type()?;
            let (fname, _) = self.ident()?;
            let ty = self.array_suffix(base)?;
            self.expect(Tok::Semi)?;
            fields.push(FieldDef {
                name: fname,
                ty,
                loc: floc,
            });
        }
        Ok(RecordDef { name, fields, loc })
    }

    fn skip_domains(&mut self) {
        while matches!(self.peek(), Tok::Domain(_)) {
            self.advance();
        }
    }

    /// `int`, `bool`, or a record name, followed by any number of `*`.
    fn base_type(&mut self) -> PResult<Ty> {
        let mut ty = match self.peek().clone() {
            Tok::KwInt => {
                self.advance();
                Ty::Int
            }
            Tok::KwBool => {
                self.advance();
                Ty::Bool
            }
            Tok::Ident(n) => {
                self.advance();
                Ty::Record(n)
            }
            _ => {
                self.expected.extend(["`int`".into(), "`bool`".into(), "type name".into()]);
                return Err(self.error());
            }
        };
        while self.eat(&Tok::Star) {
            ty = Ty::ptr(ty);
        }
        Ok(ty)
    }

    /// `[N]` suffixes; `int v[2][3]` is an array of 2 arrays of 3.
    fn array_suffix(&mut self, base: Ty) -> PResult<Ty> {
        let mut dims = Vec::new();
        while self.eat(&Tok::LBracket) {
            let loc = self.loc();
            let n = match *self.peek() {
                Tok::Int(n) => {
                    self.advance();
                    n
                }
                _ => {
                    self.expected.push("array length".into());
                    return Err(self.error());
                }
            };
            if n < 1 || n > u32::MAX as i64 {
                return Err(Diagnostic::error(loc, "array length must be at least 1"));
            }
            self.expect(Tok::RBracket)?;
            dims.push(n as u32);
        }
        Ok(dims
            .into_iter()
            .rev()
            .fold(base, |t, n| Ty::Array(Box::new(t), n)))
    }

    fn func_head(&mut self, loc: SrcLoc) -> PResult<FuncDef> {
        let ret = if self.eat(&Tok::KwVoid) {
            Ty::Void
        } else {
            self.base_type()?
        };
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let ploc = self.loc();
                let base = self.base_type()?;
                let (pname, _) = self.ident()?;
                let ty = self.array_suffix(base)?;
                params.push(Param {
                    name: pname,
                    ty,
                    loc: ploc,
                });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        Ok(FuncDef {
            name,
            params,
            ret,
            body: None,
            domains: Vec::new(),
            loc,
        })
    }

    fn block_body(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            self.skip_domains();
            if self.eat(&Tok::RBrace) {
                break;
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn starts_decl(&self) -> bool {
        match self.peek() {
            Tok::KwInt | Tok::KwBool => true,
            Tok::Ident(_) => {
                let mut n = 1;
                while *self.peek_at(n) == Tok::Star {
                    n += 1;
                }
                matches!(self.peek_at(n), Tok::Ident(_))
            }
            _ => false,
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let kind = match self.peek() {
            Tok::LBrace => StmtKind::Block(self.block_body()?),
            Tok::KwIf => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let then = Box::new(self.stmt()?);
                let els = if self.eat(&Tok::KwElse) {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                StmtKind::If { cond, then, els }
            }
            Tok::KwWhile => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = Box::new(self.stmt()?);
                StmtKind::While { cond, body }
            }
            Tok::KwReturn => {
                self.advance();
                if self.eat(&Tok::Semi) {
                    StmtKind::Return(None)
                } else {
                    let e = self.expr()?;
                    self.expect(Tok::Semi)?;
                    StmtKind::Return(Some(e))
                }
            }
            Tok::KwAssert => {
                self.advance();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                StmtKind::Assert(e)
            }
            _ if self.starts_decl() => {
                let base = self.base_type()?;
                let (name, _) = self.ident()?;
                let ty = self.array_suffix(base)?;
                let init = if self.eat(&Tok::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(Tok::Semi)?;
                StmtKind::Decl { name, ty, init }
            }
            _ => {
                let e = self.expr()?;
                if self.eat(&Tok::Assign) {
                    let value = self.expr()?;
                    self.expect(Tok::Semi)?;
                    StmtKind::Assign { target: e, value }
                } else {
                    self.expect(Tok::Semi)?;
                    StmtKind::Expr(e)
                }
            }
        };
        Ok(Stmt { kind, loc })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&mut self) -> Option<BinaryOp> {
        let op = match self.peek() {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            Tok::Percent => BinaryOp::Rem,
            _ => {
                self.expected.push("operator".into());
                return None;
            }
        };
        Some(op)
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let loc = self.advance().loc;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), loc);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let kind = match self.peek() {
            Tok::Minus => {
                self.advance();
                if let Tok::Int(v) = *self.peek() {
                    self.advance();
                    let e = Expr::new(ExprKind::Int(-v), loc);
                    return self.postfix(e);
                }
                ExprKind::Unary(UnaryOp::Neg, Box::new(self.unary()?))
            }
            Tok::Bang => {
                self.advance();
                ExprKind::Unary(UnaryOp::Not, Box::new(self.unary()?))
            }
            Tok::Amp => {
                self.advance();
                ExprKind::AddrOf(Box::new(self.unary()?))
            }
            Tok::Star => {
                self.advance();
                ExprKind::Deref(Box::new(self.unary()?))
            }
            _ => return self.postfix_primary(),
        };
        Ok(Expr::new(kind, loc))
    }

    fn postfix_primary(&mut self) -> PResult<Expr> {
        let e = self.primary()?;
        self.postfix(e)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            let loc = self.loc();
            if self.eat(&Tok::Dot) {
                let (f, _) = self.ident()?;
                e = Expr::new(ExprKind::Field(Box::new(e), f), loc);
            } else if self.eat(&Tok::Arrow) {
                let (f, _) = self.ident()?;
                let base_loc = e.loc.clone();
                let d = Expr::new(ExprKind::Deref(Box::new(e)), base_loc);
                e = Expr::new(ExprKind::Field(Box::new(d), f), loc);
            } else if self.eat(&Tok::LBracket) {
                let idx = self.expr()?;
                self.expect(Tok::RBracket)?;
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), loc);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                ExprKind::Int(v)
            }
            Tok::KwTrue => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::KwFalse => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::KwNull => {
                self.advance();
                ExprKind::Null
            }
            Tok::KwNew => {
                self.advance();
                ExprKind::New(self.base_type()?)
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(e);
            }
            Tok::Ident(name) => {
                self.advance();
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma)?;
                        }
                    }
                    ExprKind::Call(name, args)
                } else {
                    ExprKind::Var(name)
                }
            }
            _ => {
                self.expected.push("expression".into());
                return Err(self.error());
            }
        };
        Ok(Expr::new(kind, loc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Ast, DiagnosticList> {
        parse_unit(&SourceUnit::new("t.mc", s))
    }

    #[test]
    fn minimal_function() {
        let ast = parse("int id(int x){ return x; }").unwrap();
        assert_eq!(ast.items.len(), 1);
        let Item::Func(f) = &ast.items[0] else { panic!() };
        assert_eq!(f.name, "id");
        assert_eq!(f.params.len(), 1);
        assert_eq!(f.params[0].ty, Ty::Int);
    }

    #[test]
    fn record_with_two_fields() {
        let ast = parse("record Point { int x; int y; }").unwrap();
        let Item::Record(r) = &ast.items[0] else { panic!() };
        assert_eq!(r.name, "Point");
        assert_eq!(r.fields.len(), 2);
        assert_eq!((r.fields[0].name.as_str(), r.fields[1].name.as_str()), ("x", "y"));
    }

    #[test]
    fn missing_return_value_reports_single_error_at_brace() {
        let err = parse("int f(){ return }").unwrap_err();
        assert_eq!(err.len(), 1);
        let d = &err.0[0];
        assert_eq!((d.loc.line, d.loc.col), (1, 17));
        assert!(d.message.contains("expression"), "{}", d.message);
        assert!(d.message.contains("`;`"), "{}", d.message);
        assert!(d.message.contains("found `}`"), "{}", d.message);
    }

    #[test]
    fn precedence_and_associativity() {
        let ast = parse("int f(int a){ return a - 1 - 2 * a < 3 && !(a == 0); }").unwrap();
        let Item::Func(f) = &ast.items[0] else { panic!() };
        let StmtKind::Return(Some(e)) = &f.body.as_ref().unwrap()[0].kind else { panic!() };
        let ExprKind::Binary(BinaryOp::And, lhs, _) = &e.kind else { panic!("{e:?}") };
        let ExprKind::Binary(BinaryOp::Lt, sub, _) = &lhs.kind else { panic!() };
        let ExprKind::Binary(BinaryOp::Sub, inner, _) = &sub.kind else { panic!() };
        assert!(matches!(inner.kind, ExprKind::Binary(BinaryOp::Sub, _, _)));
    }

    #[test]
    fn declarations_versus_expressions() {
        let ast = parse(
            "record L { int v; L* next; } void f(L* l){ L* p = l; p->v = 1; int a[3]; a[0] = *(&a[1]); }",
        )
        .unwrap();
        let Item::Func(f) = &ast.items[1] else { panic!() };
        let body = f.body.as_ref().unwrap();
        assert!(matches!(body[0].kind, StmtKind::Decl { .. }));
        assert!(matches!(body[1].kind, StmtKind::Assign { .. }));
        let StmtKind::Decl { ty, .. } = &body[2].kind else { panic!() };
        assert_eq!(*ty, Ty::Array(Box::new(Ty::Int), 3));
    }

    #[test]
    fn external_and_annotations() {
        let ast = parse("// @domain(0, 9)\nexternal int rng();\n// @domain(x, 1, 2)\nint g(int x){ return x; }").unwrap();
        let Item::Func(f) = &ast.items[0] else { panic!() };
        assert!(f.is_external());
        assert_eq!(f.domains, vec![DomainAnnotation { path: None, lo: 0, hi: 9 }]);
        let Item::Func(g) = &ast.items[1] else { panic!() };
        assert_eq!(g.domains[0].path.as_deref(), Some("x"));
    }

    #[test]
    fn negative_literal_folds() {
        let ast = parse("int f(){ return -2147483648; }").unwrap();
        let Item::Func(f) = &ast.items[0] else { panic!() };
        let StmtKind::Return(Some(e)) = &f.body.as_ref().unwrap()[0].kind else { panic!() };
        assert_eq!(e.kind, ExprKind::Int(-2147483648));
    }
}
