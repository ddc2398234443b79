//! Arithmetic expressions over `x1 … xd`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | xN | name '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! so `-x1^2` is `-(x1^2)` and `2^3^2` is `2^(3^2)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sqrt,
    Exp,
    Log,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sqrt" => (Func::Sqrt, 1),
            "exp" => (Func::Exp, 1),
            "log" => (Func::Log, 1),
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
    max_var: usize,
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    max_var: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, at: usize, msg: impl std::fmt::Display) -> Error {
        Error::Model(format!("parse error at column {} of '{}': {msg}", at + 1, self.src))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(self.pos, format!("expected '{}'", c as char)))
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let start = match self.peek() {
            None => return Err(self.err(self.pos, "unexpected end of expression")),
            Some(_) => self.pos,
        };
        let c = self.bytes[start];
        if c == b'(' {
            self.pos += 1;
            let inner = self.sum()?;
            self.expect(b')')?;
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = &self.src[start..self.pos];
            if let Some(digits) = name.strip_prefix('x') {
                if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                    let k: usize = digits.parse().map_err(|_| self.err(start, "variable index too large"))?;
                    if k == 0 {
                        return Err(self.err(start, "variables are numbered from x1"));
                    }
                    self.max_var = self.max_var.max(k);
                    return Ok(Node::Var(k - 1));
                }
            }
            let (func, arity) = Func::lookup(name).ok_or_else(|| self.err(start, format!("unknown name '{name}'")))?;
            self.expect(b'(')?;
            let mut args = vec![self.sum()?];
            while self.eat(b',') {
                args.push(self.sum()?);
            }
            self.expect(b')')?;
            if args.len() != arity {
                return Err(self.err(start, format!("{name} takes {arity} argument(s), got {}", args.len())));
            }
            return Ok(Node::Call(func, args));
        }
        Err(self.err(start, format!("unexpected character '{}'", c as char)))
    }

    fn number(&mut self, start: usize) -> Result<Node> {
        let b = self.bytes;
        let mut end = start;
        while end < b.len() && (b[end].is_ascii_digit() || b[end] == b'.') {
            end += 1;
        }
        if end < b.len() && (b[end] == b'e' || b[end] == b'E') {
            let mut k = end + 1;
            if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                k += 1;
            }
            if k < b.len() && b[k].is_ascii_digit() {
                while k < b.len() && b[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = &self.src[start..end];
        let value: f64 = text.parse().map_err(|_| self.err(start, format!("malformed number '{text}'")))?;
        self.pos = end;
        Ok(Node::Num(value))
    }
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            max_var: 0,
        };
        let root = p.sum()?;
        if p.peek().is_some() {
            return Err(p.err(p.pos, "unexpected trailing input"));
        }
        Ok(Self {
            source: src.to_string(),
            root,
            max_var: p.max_var,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest variable index referenced (1-based); 0 for a constant.
    pub fn max_variable(&self) -> usize {
        self.max_var
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.max_var {
            return Err(Error::Model(format!(
                "expression '{}' references x{} but the input has {} values",
                self.source,
                self.max_var,
                x.len()
            )));
        }
        let y = eval(&self.root, x).map_err(|what| {
            Error::Domain(format!("{what} while evaluating '{}' at x = {x:?}", self.source))
        })?;
        if y.is_nan() {
            return Err(Error::Domain(format!("'{}' is undefined at x = {x:?}", self.source)));
        }
        Ok(y)
    }
}

fn eval(node: &Node, x: &[f64]) -> std::result::Result<f64, String> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(k) => x[*k],
        Node::Neg(a) => -eval(a, x)?,
        Node::Add(a, b) => eval(a, x)? + eval(b, x)?,
        Node::Sub(a, b) => eval(a, x)? - eval(b, x)?,
        Node::Mul(a, b) => eval(a, x)? * eval(b, x)?,
        Node::Div(a, b) => eval(a, x)? / eval(b, x)?,
        Node::Pow(a, b) => {
            let (base, exponent) = (eval(a, x)?, eval(b, x)?);
            // libm pow is not correctly rounded; a square is, as one product.
            if exponent == 2.0 {
                base * base
            } else {
                base.powf(exponent)
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], x)?;
            match f {
                Func::Sqrt if a < 0.0 => return Err(format!("sqrt of negative value {a}")),
                Func::Sqrt => a.sqrt(),
                Func::Log if a <= 0.0 => return Err(format!("log of non-positive value {a}")),
                Func::Log => a.ln(),
                Func::Exp => a.exp(),
                Func::Abs => a.abs(),
                Func::Min => a.min(eval(&args[1], x)?),
                Func::Max => a.max(eval(&args[1], x)?),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expression::parse(src).unwrap().evaluate(x).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("x1 + x2", &[1.0, 2.0]), 3.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("-x1^2", &[3.0]), -9.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("min(x1, 2) + max(x1, 2) + abs(-1.5e0)", &[5.0]), 8.5);
        assert_eq!(ev("exp(log(7))", &[]), 7.0f64.ln().exp());
        assert_eq!(ev("1.5E+2 + .5", &[]), 150.5);
        assert_eq!(Expression::parse("3").unwrap().max_variable(), 0);
        assert_eq!(Expression::parse("x10 - x2").unwrap().max_variable(), 10);
    }

    #[test]
    fn parse_errors_report_column() {
        let e = Expression::parse("x1 + * x2").unwrap_err().to_string();
        assert!(e.contains("column 6"), "{e}");
        let e = Expression::parse("foo(x1)").unwrap_err().to_string();
        assert!(e.contains("unknown name 'foo'") && e.contains("column 1"), "{e}");
        assert!(Expression::parse("(x1").is_err());
        assert!(Expression::parse("x0").is_err());
        assert!(Expression::parse("min(1)").is_err());
        assert!(Expression::parse("x1 x2").is_err());
        assert!(Expression::parse("").is_err());
    }

    #[test]
    fn domain_errors_echo_the_input() {
        let e = Expression::parse("sqrt(x1)").unwrap().evaluate(&[-1.0, 0.0]).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
        assert!(e.to_string().contains("-1.0"), "{e}");
        assert!(Expression::parse("log(x1)").unwrap().evaluate(&[0.0]).is_err());
        assert!(Expression::parse("x1 - x1").unwrap().evaluate(&[f64::INFINITY]).is_err());
        assert!(Expression::parse("x3").unwrap().evaluate(&[1.0, 2.0]).is_err());
    }
}
