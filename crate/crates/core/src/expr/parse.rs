//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | power
//! power  := atom ("^" factor)?
//! atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-u1^2`
//! is `-(u1^2)` while `2^-u1` is `2^(-u1)`.

use super::{BinaryOp, Expr, Function};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(x) => format!("number {x}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn syntax(position: usize, expected: &[&str], found: &Token) -> Error {
    Error::Syntax {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.describe(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Token::Plus, start)),
            b'-' => out.push((Token::Minus, start)),
            b'*' => out.push((Token::Star, start)),
            b'/' => out.push((Token::Slash, start)),
            b'^' => out.push((Token::Caret, start)),
            b'(' => out.push((Token::LParen, start)),
            b')' => out.push((Token::RParen, start)),
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let mantissa = &text[i..j];
                if !mantissa.bytes().any(|b| b.is_ascii_digit()) {
                    return Err(Error::Syntax {
                        position: start,
                        expected: vec!["digit".into()],
                        found: "`.`".into(),
                    });
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    let digits_start = k;
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    if k == digits_start {
                        return Err(Error::Syntax {
                            position: k,
                            expected: vec!["exponent digits".into()],
                            found: text[k..]
                                .chars()
                                .next()
                                .map(|c| format!("`{c}`"))
                                .unwrap_or_else(|| "end of input".into()),
                        });
                    }
                    j = k;
                }
                let value: f64 = text[i..j].parse().map_err(|_| Error::Syntax {
                    position: start,
                    expected: vec!["number".into()],
                    found: format!("`{}`", &text[i..j]),
                })?;
                if !value.is_finite() {
                    return Err(Error::Syntax {
                        position: start,
                        expected: vec!["finite number".into()],
                        found: format!("`{}`", &text[i..j]),
                    });
                }
                out.push((Token::Number(value), start));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((Token::Ident(text[i..j].to_string()), start));
                i = j;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    position: start,
                    expected: vec!["expression".into()],
                    found: format!("`{ch}`"),
                });
            }
        }
        i += 1;
    }
    out.push((Token::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.bump();
            let right = self.term()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut left = self.factor()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.bump();
            let right = self.factor()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if *self.peek() == Token::Minus {
            self.bump();
            return Ok(Expr::Negate(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let position = self.offset();
        match self.bump() {
            Token::Number(x) => Ok(Expr::Constant(x)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let function = Function::from_name(&name)
                        .ok_or(Error::UnknownSymbol { name, position })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::call(function, arg));
                }
                match self.names.iter().position(|n| *n == name) {
                    Some(index) => Ok(Expr::Coordinate(index)),
                    None => Err(Error::UnknownSymbol { name, position }),
                }
            }
            other => Err(syntax(
                position,
                &["number", "identifier", "`(`", "`-`"],
                &other,
            )),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let position = self.offset();
        match self.bump() {
            Token::RParen => Ok(()),
            other => Err(syntax(position, &["`)`", "operator"], &other)),
        }
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse `text` into an expression over the named coordinates.
pub fn parse_expression(text: &str, coordinate_names: &[String]) -> Result<Expr> {
    for (i, name) in coordinate_names.iter().enumerate() {
        if !is_identifier(name) {
            return Err(Error::InvalidInput(format!(
                "coordinate name `{name}` is not an identifier"
            )));
        }
        if coordinate_names[..i].contains(name) {
            return Err(Error::InvalidInput(format!(
                "coordinate name `{name}` is repeated"
            )));
        }
    }
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        names: coordinate_names,
    };
    if *parser.peek() == Token::End {
        return Err(syntax(0, &["expression"], &Token::End));
    }
    let e = parser.expr()?;
    let position = parser.offset();
    match parser.peek() {
        Token::End => Ok(e),
        other => Err(syntax(position, &["operator", "end of input"], other)),
    }
}
