//! Small expression grammar for coefficient functions of one variable.
//!
//! Supported: numeric literals, the variable (`x` or `t`, interchangeable),
//! `pi`, `e`, `+ - * /`, `^` with a constant exponent, and the functions
//! `sin`, `cos`, `abs`, `clamp(v, lo, hi)`. Evaluation carries a forward-mode
//! derivative so phase derivatives stay analytic.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, f64),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Abs(Box<Node>),
    Clamp(Box<Node>, f64, f64),
}

/// Parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("trailing input in expression '{src}'")));
        }
        Ok(Self {
            source: src.trim().to_string(),
            root,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            source: format!("{c}"),
            root: Node::Const(c),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_constant(&self) -> bool {
        !self.root.has_var()
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.root.eval(v).0
    }

    /// Value and first derivative with respect to the variable.
    pub fn eval_dual(&self, v: f64) -> (f64, f64) {
        self.root.eval(v)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Node {
    fn has_var(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var => true,
            Node::Neg(a) | Node::Pow(a, _) | Node::Sin(a) | Node::Cos(a) | Node::Abs(a) => {
                a.has_var()
            }
            Node::Clamp(a, _, _) => a.has_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.has_var() || b.has_var()
            }
        }
    }

    fn eval(&self, v: f64) -> (f64, f64) {
        match self {
            Node::Const(c) => (*c, 0.0),
            Node::Var => (v, 1.0),
            Node::Neg(a) => {
                let (x, dx) = a.eval(v);
                (-x, -dx)
            }
            Node::Add(a, b) => {
                let (x, dx) = a.eval(v);
                let (y, dy) = b.eval(v);
                (x + y, dx + dy)
            }
            Node::Sub(a, b) => {
                let (x, dx) = a.eval(v);
                let (y, dy) = b.eval(v);
                (x - y, dx - dy)
            }
            Node::Mul(a, b) => {
                let (x, dx) = a.eval(v);
                let (y, dy) = b.eval(v);
                (x * y, dx * y + x * dy)
            }
            Node::Div(a, b) => {
                let (x, dx) = a.eval(v);
                let (y, dy) = b.eval(v);
                (x / y, (dx * y - x * dy) / (y * y))
            }
            Node::Pow(a, k) => {
                let (x, dx) = a.eval(v);
                if *k == 0.0 {
                    return (1.0, 0.0);
                }
                if k.fract() == 0.0 && k.abs() < 64.0 {
                    let n = *k as i32;
                    (x.powi(n), *k * x.powi(n - 1) * dx)
                } else {
                    (x.powf(*k), *k * x.powf(*k - 1.0) * dx)
                }
            }
            Node::Sin(a) => {
                let (x, dx) = a.eval(v);
                (x.sin(), x.cos() * dx)
            }
            Node::Cos(a) => {
                let (x, dx) = a.eval(v);
                (x.cos(), -x.sin() * dx)
            }
            Node::Abs(a) => {
                let (x, dx) = a.eval(v);
                (x.abs(), if x >= 0.0 { dx } else { -dx })
            }
            Node::Clamp(a, lo, hi) => {
                let (x, dx) = a.eval(v);
                if x < *lo {
                    (*lo, 0.0)
                } else if x > *hi {
                    (*hi, 0.0)
                } else {
                    (x, dx)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected '{op}'")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            if exp.has_var() {
                return Err(Error::Parse("exponent must be constant".into()));
            }
            let k = exp.eval(0.0).0;
            return Ok(Node::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn constant_arg(&mut self) -> Result<f64> {
        let n = self.expr()?;
        if n.has_var() {
            return Err(Error::Parse("clamp bounds must be constant".into()));
        }
        Ok(n.eval(0.0).0)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let n = self.expr()?;
                self.expect(')')?;
                Ok(n)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" | "t" => Ok(Node::Var),
                    "pi" => Ok(Node::Const(std::f64::consts::PI)),
                    "e" => Ok(Node::Const(std::f64::consts::E)),
                    "sin" | "cos" | "abs" => {
                        self.expect('(')?;
                        let a = Box::new(self.expr()?);
                        self.expect(')')?;
                        Ok(match name.as_str() {
                            "sin" => Node::Sin(a),
                            "cos" => Node::Cos(a),
                            _ => Node::Abs(a),
                        })
                    }
                    "clamp" => {
                        self.expect('(')?;
                        let a = Box::new(self.expr()?);
                        self.expect(',')?;
                        let lo = self.constant_arg()?;
                        self.expect(',')?;
                        let hi = self.constant_arg()?;
                        self.expect(')')?;
                        if lo > hi {
                            return Err(Error::Parse("clamp with lo > hi".into()));
                        }
                        Ok(Node::Clamp(a, lo, hi))
                    }
                    other => Err(Error::Parse(format!("unknown identifier '{other}'"))),
                }
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}
