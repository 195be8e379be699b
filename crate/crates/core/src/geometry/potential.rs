//! Plain-text potential specifications. A potential is an expression in the
//! global coordinates of the surface (named `x` and `y`), built from sums,
//! products, powers, `exp`, `log` and trigonometric pieces. Parsed once,
//! evaluated many times.

use crate::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// The potential V of the mean field equation. `One` is the default.
#[derive(Clone)]
pub enum Potential {
    One,
    Expr(Arc<PotentialExpr>),
}

impl Potential {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(Potential::Expr(Arc::new(PotentialExpr::parse(text)?)))
    }

    pub fn eval(&self, coords: [f64; 2]) -> f64 {
        match self {
            Potential::One => 1.0,
            Potential::Expr(e) => e.eval(coords[0], coords[1]),
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Potential::One)
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::One => write!(f, "1"),
            Potential::Expr(e) => write!(f, "{}", e.source),
        }
    }
}

#[derive(Debug)]
enum Node {
    Num(f64),
    VarX,
    VarY,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, i32),
    Exp(Box<Node>),
    Log(Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Sqrt(Box<Node>),
}

impl Node {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::VarX => x,
            Node::VarY => y,
            Node::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Node::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Node::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Node::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Node::Neg(a) => -a.eval(x, y),
            Node::Pow(a, n) => a.eval(x, y).powi(*n),
            Node::Exp(a) => a.eval(x, y).exp(),
            Node::Log(a) => a.eval(x, y).ln(),
            Node::Sin(a) => a.eval(x, y).sin(),
            Node::Cos(a) => a.eval(x, y).cos(),
            Node::Sqrt(a) => a.eval(x, y).sqrt(),
        }
    }
}

/// A parsed expression tree.
pub struct PotentialExpr {
    root: Node,
    source: String,
}

impl fmt::Debug for PotentialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PotentialExpr({})", self.source)
    }
}

impl PotentialExpr {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { bytes: text.as_bytes(), pos: 0 };
        p.skip_ws();
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(Error::ExprParse {
                at: p.pos,
                message: format!("unexpected trailing input `{}`", &text[p.pos..]),
            });
        }
        Ok(PotentialExpr { root, source: text.to_string() })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.root.eval(x, y)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut node = self.term()?;
        loop {
            if self.eat(b'+') {
                node = Node::Add(Box::new(node), Box::new(self.term()?));
            } else if self.eat(b'-') {
                node = Node::Sub(Box::new(node), Box::new(self.term()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.power()?;
        loop {
            if self.eat(b'*') {
                node = Node::Mul(Box::new(node), Box::new(self.power()?));
            } else if self.eat(b'/') {
                node = Node::Div(Box::new(node), Box::new(self.power()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.unary()?;
        if self.eat(b'^') {
            let neg = self.eat(b'-');
            let start = self.pos;
            while self.peek().map_or(false, |c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(Error::ExprParse { at: self.pos, message: "expected integer exponent".into() });
            }
            let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
            let mut n: i32 = digits.parse().map_err(|_| Error::ExprParse {
                at: start,
                message: "exponent out of range".into(),
            })?;
            if neg {
                n = -n;
            }
            self.skip_ws();
            Ok(Node::Pow(Box::new(base), n))
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(Error::ExprParse { at: self.pos, message: "expected `)`".into() });
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(Error::ExprParse { at: self.pos, message: "expected expression".into() }),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.peek().map_or(false, |c| {
            c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E'
        }) {
            // allow exponent signs directly after e/E
            if (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
                && matches!(self.bytes.get(self.pos + 1), Some(b'+') | Some(b'-'))
            {
                self.pos += 1;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| Error::ExprParse {
            at: start,
            message: format!("bad number `{text}`"),
        })?;
        self.skip_ws();
        Ok(Node::Num(v))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.peek().map_or(false, |c| c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        match name.as_str() {
            "x" | "t" => Ok(Node::VarX),
            "y" | "s" => Ok(Node::VarY),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "exp" | "log" | "sin" | "cos" | "sqrt" => {
                if !self.eat(b'(') {
                    return Err(Error::ExprParse {
                        at: self.pos,
                        message: format!("expected `(` after `{name}`"),
                    });
                }
                let arg = Box::new(self.expr()?);
                if !self.eat(b')') {
                    return Err(Error::ExprParse { at: self.pos, message: "expected `)`".into() });
                }
                Ok(match name.as_str() {
                    "exp" => Node::Exp(arg),
                    "log" => Node::Log(arg),
                    "sin" => Node::Sin(arg),
                    "cos" => Node::Cos(arg),
                    _ => Node::Sqrt(arg),
                })
            }
            _ => Err(Error::ExprParse { at: start, message: format!("unknown identifier `{name}`") }),
        }
    }
}
