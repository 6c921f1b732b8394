//! Expression parser for dynamics and triggering functions.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("+" | "-") unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | ident | "(" expr ")" | "max" "(" expr "," expr ")" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ]
//!         | "." digit { digit } [ exponent ] ;
//! ident   = (letter | "_") { letter | digit | "_" } ;
//! ```
//!
//! Exponents must evaluate to non-negative integer constants and divisors
//! must be non-zero constants, so every `max`-free expression denotes a
//! polynomial.

use super::expr::Expr;
use super::polynomial::{Polynomial, VarList};
use super::KernelError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, KernelError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos: start });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| KernelError::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            out.push(Token {
                tok: Tok::Num(v),
                pos: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        return Err(KernelError::Syntax {
            pos: start,
            msg: format!("unexpected character `{c}`"),
        });
    }
    Ok(out)
}

/// Parsed expression tree, variables already resolved to indices.
#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>, usize),
    Pow(Box<Node>, Box<Node>, usize),
    Max(Box<Node>, Box<Node>, usize),
}

struct Parser<'a> {
    toks: Vec<Token>,
    at: usize,
    vars: &'a [String],
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.pos).unwrap_or(self.len)
    }

    fn err(&self, msg: impl Into<String>) -> KernelError {
        KernelError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), KernelError> {
        if self.peek() == Some(&t) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Node, KernelError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, KernelError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    let pos = self.pos();
                    self.at += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?), pos);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, KernelError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.at += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.at += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, KernelError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            let pos = self.pos();
            self.at += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp), pos));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, KernelError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                if name == "max" && self.peek() == Some(&Tok::LParen) {
                    self.at += 1;
                    let a = self.expr()?;
                    self.expect(Tok::Comma, "`,` in max(a, b)")?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Node::Max(Box::new(a), Box::new(b), pos));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Node::Var(i)),
                    None => Err(KernelError::UnknownVariable(name)),
                }
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(_) => Err(self.err("expected a number, variable or `(`")),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

fn parse_tree(text: &str, vars: &[String]) -> Result<Node, KernelError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        vars,
        len: text.len(),
    };
    let node = p.expr()?;
    if p.at != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(node)
}

fn exponent_of(p: &Polynomial, pos: usize) -> Result<u32, KernelError> {
    match p.as_constant() {
        Some(c) if c >= 0.0 && c.fract() == 0.0 && c <= u32::MAX as f64 => Ok(c as u32),
        _ => Err(KernelError::Syntax {
            pos,
            msg: "exponent must be a non-negative integer constant".into(),
        }),
    }
}

fn to_poly(node: &Node, vars: &VarList) -> Result<Polynomial, KernelError> {
    Ok(match node {
        Node::Num(v) => Polynomial::constant(vars.clone(), *v),
        Node::Var(i) => Polynomial::var(vars.clone(), *i),
        Node::Neg(a) => -to_poly(a, vars)?,
        Node::Add(a, b) => to_poly(a, vars)? + to_poly(b, vars)?,
        Node::Sub(a, b) => to_poly(a, vars)? - to_poly(b, vars)?,
        Node::Mul(a, b) => to_poly(a, vars)? * to_poly(b, vars)?,
        Node::Div(a, b, pos) => {
            let d = to_poly(b, vars)?;
            match d.as_constant() {
                Some(c) if c != 0.0 => to_poly(a, vars)?.scale(1.0 / c),
                _ => {
                    return Err(KernelError::Syntax {
                        pos: *pos,
                        msg: "division is only allowed by non-zero constants".into(),
                    })
                }
            }
        }
        Node::Pow(a, e, pos) => {
            let k = exponent_of(&to_poly(e, vars)?, *pos)?;
            to_poly(a, vars)?.pow(k)
        }
        Node::Max(_, _, pos) => {
            return Err(KernelError::Syntax {
                pos: *pos,
                msg: "max(.,.) is not polynomial; use parse_expr".into(),
            })
        }
    })
}

fn contains_max(node: &Node) -> bool {
    match node {
        Node::Num(_) | Node::Var(_) => false,
        Node::Neg(a) => contains_max(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => contains_max(a) || contains_max(b),
        Node::Div(a, b, _) | Node::Pow(a, b, _) => contains_max(a) || contains_max(b),
        Node::Max(..) => true,
    }
}

fn to_expr(node: &Node, vars: &VarList) -> Result<Expr, KernelError> {
    if !contains_max(node) {
        return Ok(Expr::poly(&to_poly(node, vars)?));
    }
    Ok(match node {
        Node::Neg(a) => Expr::scaled(-1.0, to_expr(a, vars)?),
        Node::Add(a, b) => Expr::sum(vec![to_expr(a, vars)?, to_expr(b, vars)?]),
        Node::Sub(a, b) => Expr::sum(vec![
            to_expr(a, vars)?,
            Expr::scaled(-1.0, to_expr(b, vars)?),
        ]),
        Node::Mul(a, b) => Expr::product(to_expr(a, vars)?, to_expr(b, vars)?),
        Node::Div(a, b, pos) => {
            let d = to_poly(b, vars).ok().and_then(|d| d.as_constant());
            match d {
                Some(c) if c != 0.0 => Expr::scaled(1.0 / c, to_expr(a, vars)?),
                _ => {
                    return Err(KernelError::Syntax {
                        pos: *pos,
                        msg: "division is only allowed by non-zero constants".into(),
                    })
                }
            }
        }
        Node::Pow(a, e, pos) => {
            let k = exponent_of(&to_poly(e, vars)?, *pos)?;
            Expr::powi(to_expr(a, vars)?, k as i32)
        }
        Node::Max(a, b, _) => Expr::max(to_expr(a, vars)?, to_expr(b, vars)?),
        Node::Num(_) | Node::Var(_) => unreachable!("max-free leaves handled above"),
    })
}

/// Parse a polynomial expression over `vars`.
pub fn parse_poly(text: &str, vars: &VarList) -> Result<Polynomial, KernelError> {
    let tree = parse_tree(text, vars)?;
    to_poly(&tree, vars)
}

/// Parse an expression that may contain `max(a, b)`.
pub fn parse_expr(text: &str, vars: &VarList) -> Result<Expr, KernelError> {
    let tree = parse_tree(text, vars)?;
    to_expr(&tree, vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symkernel::polynomial::var_list;

    #[test]
    fn evaluates_simple_polynomial() {
        let v = var_list(&["x1", "x2"]);
        let p = parse_poly("x1^2 + 2*x2", &v).unwrap();
        assert_eq!(p.eval(&[3.0, 1.0]), 11.0);
    }

    #[test]
    fn unary_minus() {
        let v = var_list(&["x1"]);
        let p = parse_poly("-x1", &v).unwrap();
        assert_eq!(p.eval(&[0.8]), -0.8);
        let q = parse_poly("-x1^2", &v).unwrap();
        assert_eq!(q.eval(&[3.0]), -9.0);
    }

    #[test]
    fn scientific_literals_and_division() {
        let v = var_list(&["x"]);
        let p = parse_poly("1.5e-3*x/2 + .5E+1", &v).unwrap();
        assert_eq!(p.eval(&[2.0]), 1.5e-3 + 5.0);
    }

    #[test]
    fn reports_position_of_syntax_errors() {
        let v = var_list(&["x"]);
        match parse_poly("x + * 2", &v) {
            Err(KernelError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_poly("(x + 1", &v),
            Err(KernelError::Syntax { pos: 6, .. })
        ));
        assert!(matches!(
            parse_poly("x ^ 1.5", &v),
            Err(KernelError::Syntax { .. })
        ));
        assert!(matches!(
            parse_poly("1 / x", &v),
            Err(KernelError::Syntax { .. })
        ));
    }

    #[test]
    fn unknown_variable() {
        let v = var_list(&["x"]);
        assert!(matches!(
            parse_poly("x + y", &v),
            Err(KernelError::UnknownVariable(name)) if name == "y"
        ));
    }

    #[test]
    fn max_requires_expr_parser() {
        let v = var_list(&["x"]);
        assert!(parse_poly("max(x, 0)", &v).is_err());
        let e = parse_expr("max(x, 0) - 1", &v).unwrap();
        assert_eq!(e.eval(&[3.0]), 2.0);
        assert_eq!(e.eval(&[-3.0]), -1.0);
    }
}
