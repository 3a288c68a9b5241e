//! Tokenizer for `.sec` program files. `#` starts a comment to end of line.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    True,
    False,
    If,
    Then,
    Else,
    Fn,
    LetRec,
    In,
    Sign,
    DoPriv,
    Check,
    Test,
    BoolTy,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Bang,
    Eq,
    FatArrow,
    Minus,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::If => "`if`",
            Tok::Then => "`then`",
            Tok::Else => "`else`",
            Tok::Fn => "`fn`",
            Tok::LetRec => "`letrec`",
            Tok::In => "`in`",
            Tok::Sign => "`sign`",
            Tok::DoPriv => "`dopriv`",
            Tok::Check => "`check`",
            Tok::Test => "`test`",
            Tok::BoolTy => "`bool`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::Colon => "`:`",
            Tok::Comma => "`,`",
            Tok::Bang => "`!`",
            Tok::Eq => "`=`",
            Tok::FatArrow => "`=>`",
            Tok::Minus => "`-`",
            Tok::Arrow => "`->`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: unexpected character {ch:?}")]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub ch: char,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "true" => Tok::True,
        "false" => Tok::False,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "fn" => Tok::Fn,
        "letrec" => Tok::LetRec,
        "in" => Tok::In,
        "sign" => Tok::Sign,
        "dopriv" => Tok::DoPriv,
        "check" => Tok::Check,
        "test" => Tok::Test,
        "bool" => Tok::BoolTy,
        _ => return None,
    })
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = source.chars().peekable();

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr, $len:expr) => {
            tokens.push(Token {
                tok: $tok,
                line: $l,
                col: $c,
                end_line: $l,
                end_col: $c + $len,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (l, sc) = (line, col);
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, l, sc, 1);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, l, sc, 1);
            }
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, l, sc, 1);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, l, sc, 1);
            }
            ':' => {
                chars.next();
                col += 1;
                push!(Tok::Colon, l, sc, 1);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, l, sc, 1);
            }
            '!' => {
                chars.next();
                col += 1;
                push!(Tok::Bang, l, sc, 1);
            }
            '=' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::FatArrow, l, sc, 2);
                } else {
                    push!(Tok::Eq, l, sc, 1);
                }
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, l, sc, 2);
                } else {
                    push!(Tok::Minus, l, sc, 1);
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let len = word.chars().count() as u32;
                let tok = keyword(&word).unwrap_or(Tok::Ident(word));
                push!(tok, l, sc, len);
            }
            other => {
                return Err(LexError {
                    line,
                    col,
                    ch: other,
                })
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        col,
        end_line: line,
        end_col: col,
    });
    Ok(tokens)
}
