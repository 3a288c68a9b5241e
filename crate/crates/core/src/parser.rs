//! Recursive descent parser for `.sec` program files.
//!
//! ```text
//! expr    := appexpr | "if" expr "then" expr "else" expr
//!          | "fn" IDENT ":" anntype "=>" expr
//!          | "letrec" IDENT "(" IDENT ":" anntype ")" ":" anntype "!" privset
//!            "=" expr "in" expr
//! appexpr := atom { atom }                      (left-associative)
//! atom    := "true" | "false" | IDENT | "(" expr ")"
//!          | "sign" IDENT "{" expr "}" | "dopriv" IDENT "{" expr "}"
//!          | "check" IDENT "{" expr "}"
//!          | "test" IDENT "{" expr "}" "else" "{" expr "}"
//! anntype := ("bool" | "(" anntype ")") [ "-" privset "->" anntype ]
//! privset := "{" [ IDENT { "," IDENT } ] "}"
//! ```
//!
//! An identifier parses as a bound variable when a binder for it is in
//! scope, as a builtin constant when the builtin table knows it, and as a
//! free variable otherwise (the typechecker rejects those).

use thiserror::Error;

use crate::builtins;
use crate::lexer::{tokenize, LexError, Tok, Token};
use crate::syntax::{AnnType, Expr, ExprKind, Principal, PrivSet, Privilege, Span};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{line}:{col}: unexpected {found}, expected {}", expected.join(" or "))]
    Unexpected {
        line: u32,
        col: u32,
        found: String,
        expected: Vec<String>,
    },
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scope: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = self.peek();
        Err(ParseError::Unexpected {
            line: t.line,
            col: t.col,
            found: t.tok.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Token> {
        if self.peek().tok == tok {
            Ok(self.advance())
        } else {
            self.unexpected(&[what])
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, Token)> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                let t = self.advance();
                Ok((name, t))
            }
            _ => self.unexpected(&[what]),
        }
    }

    fn span_from(&self, start: &Token, end: &Token) -> Span {
        Span::new(start.line, start.col, end.end_line, end.end_col)
    }

    fn expr(&mut self) -> PResult<Expr> {
        match self.peek().tok {
            Tok::If => {
                let start = self.advance();
                let cond = self.expr()?;
                self.expect(Tok::Then, "`then`")?;
                let then = self.expr()?;
                self.expect(Tok::Else, "`else`")?;
                let els = self.expr()?;
                let span = self.span_from(&start, &self.tokens[self.pos.saturating_sub(1)]);
                Ok(Expr::with_span(
                    ExprKind::If(Box::new(cond), Box::new(then), Box::new(els)),
                    span,
                ))
            }
            Tok::Fn => {
                let start = self.advance();
                let (param, _) = self.expect_ident("parameter name")?;
                self.expect(Tok::Colon, "`:`")?;
                let ann = self.anntype()?;
                self.expect(Tok::FatArrow, "`=>`")?;
                self.scope.push(param.clone());
                let body = self.expr();
                self.scope.pop();
                let body = body?;
                let span = self.span_from(&start, &self.tokens[self.pos.saturating_sub(1)]);
                Ok(Expr::with_span(
                    ExprKind::Lam {
                        param,
                        param_ann: ann,
                        body: Box::new(body),
                    },
                    span,
                ))
            }
            Tok::LetRec => {
                let start = self.advance();
                let (name, _) = self.expect_ident("function name")?;
                self.expect(Tok::LParen, "`(`")?;
                let (param, _) = self.expect_ident("parameter name")?;
                self.expect(Tok::Colon, "`:`")?;
                let param_ann = self.anntype()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Colon, "`:`")?;
                let ret_ann = self.anntype()?;
                self.expect(Tok::Bang, "`!`")?;
                let latent = self.privset()?;
                self.expect(Tok::Eq, "`=`")?;
                self.scope.push(name.clone());
                self.scope.push(param.clone());
                let body = self.expr();
                self.scope.pop(); // param scopes over the body only
                let body = body?;
                self.expect(Tok::In, "`in`")?;
                let rest = self.expr();
                self.scope.pop();
                let rest = rest?;
                let span = self.span_from(&start, &self.tokens[self.pos.saturating_sub(1)]);
                Ok(Expr::with_span(
                    ExprKind::LetRec {
                        name,
                        param,
                        param_ann,
                        ret_ann,
                        latent,
                        body: Box::new(body),
                        rest: Box::new(rest),
                    },
                    span,
                ))
            }
            _ => self.appexpr(),
        }
    }

    fn starts_atom(tok: &Tok) -> bool {
        matches!(
            tok,
            Tok::True
                | Tok::False
                | Tok::Ident(_)
                | Tok::LParen
                | Tok::Sign
                | Tok::DoPriv
                | Tok::Check
                | Tok::Test
        )
    }

    fn appexpr(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        while Self::starts_atom(&self.peek().tok) {
            let arg = self.atom()?;
            let span = e.span.join(arg.span);
            e = Expr::with_span(ExprKind::App(Box::new(e), Box::new(arg)), span);
        }
        Ok(e)
    }

    fn braced_body(&mut self) -> PResult<Expr> {
        self.expect(Tok::LBrace, "`{`")?;
        let body = self.expr()?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(body)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().tok.clone() {
            Tok::True => {
                let t = self.advance();
                Ok(Expr::with_span(ExprKind::True, self.span_from(&t, &t)))
            }
            Tok::False => {
                let t = self.advance();
                Ok(Expr::with_span(ExprKind::False, self.span_from(&t, &t)))
            }
            Tok::Ident(name) => {
                let t = self.advance();
                let span = self.span_from(&t, &t);
                let kind = if self.scope.contains(&name) {
                    ExprKind::Var(name)
                } else if builtins::is_builtin(&name) {
                    ExprKind::Const(name)
                } else {
                    ExprKind::Var(name)
                };
                Ok(Expr::with_span(kind, span))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Sign => {
                let start = self.advance();
                let (name, _) = self.expect_ident("principal name")?;
                let body = self.braced_body()?;
                let span = self.span_from(&start, &self.tokens[self.pos.saturating_sub(1)]);
                Ok(Expr::with_span(
                    ExprKind::Signs(Principal::new(name), Box::new(body)),
                    span,
                ))
            }
            Tok::DoPriv => {
                let start = self.advance();
                let (name, _) = self.expect_ident("privilege name")?;
                let body = self.braced_body()?;
                let span = self.span_from(&start, &self.tokens[self.pos.saturating_sub(1)]);
                Ok(Expr::with_span(
                    ExprKind::DoPriv(Privilege::new(name), Box::new(body)),
                    span,
                ))
            }
            Tok::Check => {
                let start = self.advance();
                let (name, _) = self.expect_ident("privilege name")?;
                let body = self.braced_body()?;
                let span = self.span_from(&start, &self.tokens[self.pos.saturating_sub(1)]);
                Ok(Expr::with_span(
                    ExprKind::Check(Privilege::new(name), Box::new(body)),
                    span,
                ))
            }
            Tok::Test => {
                let start = self.advance();
                let (name, _) = self.expect_ident("privilege name")?;
                let then = self.braced_body()?;
                self.expect(Tok::Else, "`else`")?;
                let els = self.braced_body()?;
                let span = self.span_from(&start, &self.tokens[self.pos.saturating_sub(1)]);
                Ok(Expr::with_span(
                    ExprKind::Test(Privilege::new(name), Box::new(then), Box::new(els)),
                    span,
                ))
            }
            _ => self.unexpected(&["an expression"]),
        }
    }

    fn anntype(&mut self) -> PResult<AnnType> {
        let left = match self.peek().tok {
            Tok::BoolTy => {
                self.advance();
                AnnType::Bool
            }
            Tok::LParen => {
                self.advance();
                let t = self.anntype()?;
                self.expect(Tok::RParen, "`)`")?;
                t
            }
            _ => return self.unexpected(&["`bool`", "`(`"]),
        };
        if self.peek().tok == Tok::Minus {
            self.advance();
            let latent = self.privset()?;
            self.expect(Tok::Arrow, "`->`")?;
            let result = self.anntype()?; // right-associative
            Ok(AnnType::arrow(left, latent, result))
        } else {
            Ok(left)
        }
    }

    fn privset(&mut self) -> PResult<PrivSet> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut set = PrivSet::new();
        if self.peek().tok == Tok::RBrace {
            self.advance();
            return Ok(set);
        }
        loop {
            let (name, _) = self.expect_ident("privilege name")?;
            set.insert(Privilege::new(name));
            match self.peek().tok {
                Tok::Comma => {
                    self.advance();
                }
                Tok::RBrace => {
                    self.advance();
                    return Ok(set);
                }
                _ => return self.unexpected(&["`,`", "`}`"]),
            }
        }
    }
}

/// Parses a complete program; trailing input is rejected.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scope: Vec::new(),
    };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return p.unexpected(&["end of input"]);
    }
    Ok(e)
}

/// Parses an annotated type, e.g. `bool-{p}->bool`.
pub fn parse_anntype(source: &str) -> Result<AnnType, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scope: Vec::new(),
    };
    let t = p.anntype()?;
    if p.peek().tok != Tok::Eof {
        return p.unexpected(&["end of input"]);
    }
    Ok(t)
}
