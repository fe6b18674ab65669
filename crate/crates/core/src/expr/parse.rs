//! Recursive-descent parser.
//!
//! Precedence from loosest to tightest: `+ -`, `* /`, unary minus, `^`.
//! `^` is right associative and its exponent may carry a unary minus.

use super::ast::{BinaryOp, Node, UnaryOp};
use crate::error::{Error, Result};

/// Identifiers accepted as the coordinate variable.
pub const VARIABLE_NAMES: [&str; 3] = ["V", "v", "x"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal = &text[start..i];
            let value = literal.parse::<f64>().map_err(|_| Error::Lex {
                offset: start,
                message: format!("malformed number `{literal}`"),
            })?;
            out.push(Token {
                tok: Tok::Num(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                offset: start,
            });
        } else if b"+-*/^(),".contains(&c) {
            out.push(Token {
                tok: Tok::Sym(c as char),
                offset: i,
            });
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(Error::Lex {
                offset: i,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    out.push(Token {
        tok: Tok::End,
        offset: text.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    variable: Option<String>,
}

/// Parses `text`, returning the tree and the variable name it uses (if any).
pub fn parse_tree(text: &str) -> Result<(Node, Option<String>)> {
    let mut p = Parser {
        tokens: lex(text)?,
        pos: 0,
        variable: None,
    };
    let node = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(Error::Syntax {
            offset: t.offset,
            message: "unexpected trailing input".into(),
        });
    }
    Ok((node, p.variable))
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, sym: char) -> bool {
        if self.peek().tok == Tok::Sym(sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: char) -> Result<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            let t = self.peek();
            let found = match &t.tok {
                Tok::End => "end of input".to_string(),
                other => format!("{other:?}"),
            };
            Err(Error::Syntax {
                offset: t.offset,
                message: format!("expected `{sym}`, found {found}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            Ok(Node::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Node> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, t.offset),
            Tok::End => Err(Error::Syntax {
                offset: t.offset,
                message: "unexpected end of input".into(),
            }),
            Tok::Sym(c) => Err(Error::Syntax {
                offset: t.offset,
                message: format!("unexpected `{c}`"),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Node> {
        if self.peek().tok == Tok::Sym('(') {
            self.pos += 1;
            let node = if let Some(op) = UnaryOp::from_name(&name) {
                Node::Unary(op, Box::new(self.expr()?))
            } else if name == "pow" {
                let base = self.expr()?;
                self.expect(',')?;
                let exponent = self.expr()?;
                Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent))
            } else {
                return Err(Error::UnknownIdentifier { offset, name });
            };
            self.expect(')')?;
            return Ok(node);
        }
        match name.as_str() {
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "e" => Ok(Node::Const(std::f64::consts::E)),
            n if VARIABLE_NAMES.contains(&n) => {
                match &self.variable {
                    Some(existing) if existing != n => {
                        return Err(Error::MultipleVariables {
                            first: existing.clone(),
                            second: name,
                        })
                    }
                    _ => self.variable = Some(name),
                }
                Ok(Node::Var)
            }
            _ => Err(Error::UnknownIdentifier { offset, name }),
        }
    }
}
