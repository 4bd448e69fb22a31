use std::fmt;
use std::sync::Arc;

use super::ast::{DomainAnnotation, SrcLoc};
use super::diag::Diagnostic;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    // keywords
    KwInt,
    KwBool,
    KwVoid,
    KwRecord,
    KwExternal,
    KwIf,
    KwElse,
    KwWhile,
    KwReturn,
    KwAssert,
    KwTrue,
    KwFalse,
    KwNull,
    KwNew,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Arrow,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    AndAnd,
    OrOr,
    Bang,
    Amp,
    /// A `@domain(...)` annotation found in a comment.
    Domain(DomainAnnotation),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(n) => return write!(f, "identifier `{n}`"),
            Tok::Int(v) => return write!(f, "integer `{v}`"),
            Tok::KwInt => "`int`",
            Tok::KwBool => "`bool`",
            Tok::KwVoid => "`void`",
            Tok::KwRecord => "`record`",
            Tok::KwExternal => "`external`",
            Tok::KwIf => "`if`",
            Tok::KwElse => "`else`",
            Tok::KwWhile => "`while`",
            Tok::KwReturn => "`return`",
            Tok::KwAssert => "`assert`",
            Tok::KwTrue => "`true`",
            Tok::KwFalse => "`false`",
            Tok::KwNull => "`null`",
            Tok::KwNew => "`new`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Semi => "`;`",
            Tok::Comma => "`,`",
            Tok::Dot => "`.`",
            Tok::Arrow => "`->`",
            Tok::Assign => "`=`",
            Tok::EqEq => "`==`",
            Tok::NotEq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Percent => "`%`",
            Tok::AndAnd => "`&&`",
            Tok::OrOr => "`||`",
            Tok::Bang => "`!`",
            Tok::Amp => "`&`",
            Tok::Domain(_) => "annotation",
            Tok::Eof => "end of file",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub loc: SrcLoc,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "int" => Tok::KwInt,
        "bool" => Tok::KwBool,
        "void" => Tok::KwVoid,
        "record" => Tok::KwRecord,
        "external" => Tok::KwExternal,
        "if" => Tok::KwIf,
        "else" => Tok::KwElse,
        "while" => Tok::KwWhile,
        "return" => Tok::KwReturn,
        "assert" => Tok::KwAssert,
        "true" => Tok::KwTrue,
        "false" => Tok::KwFalse,
        "null" => Tok::KwNull,
        "new" => Tok::KwNew,
        _ => return None,
    })
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            // count characters, not UTF-8 continuation bytes
            self.col += 1;
        }
        Some(c)
    }
}

/// Tokenizes a whole unit. Lexical errors stop at the first bad character.
pub fn tokenize(path: &Arc<str>, text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor {
        src: text.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while matches!(cur.peek(), Some(c) if c.is_ascii_whitespace()) {
            cur.bump();
        }
        let loc = SrcLoc::new(path, cur.line, cur.col);
        let Some(c) = cur.peek() else {
            out.push(Token { tok: Tok::Eof, loc });
            return Ok(out);
        };
        // comments, possibly carrying annotations
        if c == b'/' && matches!(cur.peek2(), Some(b'/') | Some(b'*')) {
            let block = cur.peek2() == Some(b'*');
            cur.bump();
            cur.bump();
            let mut ann_locs = Vec::new();
            loop {
                match cur.peek() {
                    None if block => {
                        return Err(Diagnostic::error(loc, "unterminated block comment"));
                    }
                    None => break,
                    Some(b'\n') if !block => break,
                    Some(b'*') if block && cur.peek2() == Some(b'/') => break,
                    Some(b'@') => {
                        ann_locs.push((cur.pos, SrcLoc::new(path, cur.line, cur.col)));
                        cur.bump();
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            let end = cur.pos;
            if block {
                cur.bump();
                cur.bump();
            }
            for (at, aloc) in ann_locs {
                let rest = &text[at..end];
                if let Some(args) = rest.strip_prefix("@domain") {
                    let ann = parse_domain(args).map_err(|m| Diagnostic::error(aloc.clone(), m))?;
                    out.push(Token {
                        tok: Tok::Domain(ann),
                        loc: aloc,
                    });
                }
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = cur.pos;
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                cur.bump();
            }
            let word = &text[start..cur.pos];
            let tok = keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()));
            out.push(Token { tok, loc });
            continue;
        }
        if c.is_ascii_digit() {
            let start = cur.pos;
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
            let digits = &text[start..cur.pos];
            let v: i64 = digits
                .parse()
                .ok()
                .filter(|v| *v <= 1 << 31)
                .ok_or_else(|| Diagnostic::error(loc.clone(), format!("integer literal `{digits}` out of range")))?;
            out.push(Token { tok: Tok::Int(v), loc });
            continue;
        }
        cur.bump();
        let next = cur.peek();
        let two = |cur: &mut Cursor<'_>, t: Tok| {
            cur.bump();
            t
        };
        let tok = match (c, next) {
            (b'-', Some(b'>')) => two(&mut cur, Tok::Arrow),
            (b'=', Some(b'=')) => two(&mut cur, Tok::EqEq),
            (b'!', Some(b'=')) => two(&mut cur, Tok::NotEq),
            (b'<', Some(b'=')) => two(&mut cur, Tok::Le),
            (b'>', Some(b'=')) => two(&mut cur, Tok::Ge),
            (b'&', Some(b'&')) => two(&mut cur, Tok::AndAnd),
            (b'|', Some(b'|')) => two(&mut cur, Tok::OrOr),
            (b'{', _) => Tok::LBrace,
            (b'}', _) => Tok::RBrace,
            (b'(', _) => Tok::LParen,
            (b')', _) => Tok::RParen,
            (b'[', _) => Tok::LBracket,
            (b']', _) => Tok::RBracket,
            (b';', _) => Tok::Semi,
            (b',', _) => Tok::Comma,
            (b'.', _) => Tok::Dot,
            (b'=', _) => Tok::Assign,
            (b'<', _) => Tok::Lt,
            (b'>', _) => Tok::Gt,
            (b'+', _) => Tok::Plus,
            (b'-', _) => Tok::Minus,
            (b'*', _) => Tok::Star,
            (b'/', _) => Tok::Slash,
            (b'%', _) => Tok::Percent,
            (b'!', _) => Tok::Bang,
            (b'&', _) => Tok::Amp,
            _ => {
                let ch = text[cur.pos - 1..].chars().next().unwrap_or('?');
                return Err(Diagnostic::error(loc, format!("unexpected character `{ch}`")));
            }
        };
        out.push(Token { tok, loc });
    }
}

/// Parses the `(...)` part of a `@domain` annotation.
fn parse_domain(args: &str) -> Result<DomainAnnotation, String> {
    let args = args.trim_start();
    let inner = args
        .strip_prefix('(')
        .and_then(|a| a.split_once(')'))
        .map(|(inner, _)| inner)
        .ok_or("malformed @domain annotation, expected `@domain(lo, hi)` or `@domain(path, lo, hi)`")?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<i32>()
            .map_err(|_| format!("@domain bound `{s}` is not a 32-bit integer"))
    };
    let (path, lo, hi) = match parts.as_slice() {
        [lo, hi] => (None, num(lo)?, num(hi)?),
        [path, lo, hi] if !path.is_empty() => (Some(path.to_string()), num(lo)?, num(hi)?),
        _ => return Err("@domain expects 2 or 3 arguments".into()),
    };
    if lo > hi {
        return Err(format!("@domain has empty range [{lo}, {hi}]"));
    }
    Ok(DomainAnnotation { path, lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        let p: Arc<str> = Arc::from("t.mc");
        tokenize(&p, s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_keywords() {
        assert_eq!(
            toks("if (a->b <= 3) x = !y;"),
            vec![
                Tok::KwIf,
                Tok::LParen,
                Tok::Ident("a".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::Le,
                Tok::Int(3),
                Tok::RParen,
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Bang,
                Tok::Ident("y".into()),
                Tok::Semi,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn domain_annotations_in_comments() {
        let t = toks("// @domain(-8, 7)\n/* @domain(p.x, 0, 3) */ int");
        assert_eq!(
            t,
            vec![
                Tok::Domain(DomainAnnotation { path: None, lo: -8, hi: 7 }),
                Tok::Domain(DomainAnnotation {
                    path: Some("p.x".into()),
                    lo: 0,
                    hi: 3
                }),
                Tok::KwInt,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn locations_are_one_based() {
        let p: Arc<str> = Arc::from("t.mc");
        let t = tokenize(&p, "int\n  x").unwrap();
        assert_eq!((t[1].loc.line, t[1].loc.col), (2, 3));
    }

    #[test]
    fn bad_character_is_reported() {
        let p: Arc<str> = Arc::from("t.mc");
        let err = tokenize(&p, "int $").unwrap_err();
        assert_eq!(err.to_string(), "t.mc:1:5: error: unexpected character `$`");
    }

    #[test]
    fn empty_domain_rejected() {
        let p: Arc<str> = Arc::from("t.mc");
        assert!(tokenize(&p, "// @domain(3, 1)\n").is_err());
    }
}
