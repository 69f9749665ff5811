//! A tiny expression language for forcing terms, boundary data and exact
//! solutions in experiment configs.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 'x1' | 'x2' | 'pi' | call | '(' expr ')'
//! call    := name '(' expr (',' expr)* ')' | 'norm' '(' 'x' ')'
//! ```
//!
//! Functions: `abs`, `min`, `max`, `sqrt`, `exp`, `ln`, `sin`, `cos`,
//! `norm(x)` (Euclidean norm of the position) and `dist(a, b)` (distance from
//! the position to the point `(a, b)`).

use std::sync::Arc;

use crate::{Error, Field, Point, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X1,
    X2,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Min,
    Max,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Dist,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "sqrt" => (Func::Sqrt, 1),
            "exp" => (Func::Exp, 1),
            "ln" => (Func::Ln, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "dist" => (Func::Dist, 2),
            _ => return None,
        })
    }
}

/// A parsed expression over the position `x = (x1, x2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            root,
            source: src.trim().to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: Point) -> f64 {
        eval(&self.root, x)
    }

    /// Returns the value if the expression does not depend on position.
    pub fn constant_value(&self) -> Option<f64> {
        fn is_const(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::X1 | Node::X2 | Node::Norm => false,
                Node::Neg(a) => is_const(a),
                Node::Bin(_, a, b) => is_const(a) && is_const(b),
                Node::Call(f, args) => *f != Func::Dist && args.iter().all(is_const),
            }
        }
        is_const(&self.root).then(|| self.eval([0.0, 0.0]))
    }

    pub fn into_field(self) -> Field {
        if let Some(c) = self.constant_value() {
            return Field::constant(c);
        }
        let e = Arc::new(self);
        Field::from_fn(move |x| e.eval(x))
    }
}

fn eval(n: &Node, x: Point) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::X1 => x[0],
        Node::X2 => x[1],
        Node::Norm => x[0].hypot(x[1]),
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], x);
            match f {
                Func::Abs => a.abs(),
                Func::Min => a.min(eval(&args[1], x)),
                Func::Max => a.max(eval(&args[1], x)),
                Func::Sqrt => a.sqrt(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Dist => (x[0] - a).hypot(x[1] - eval(&args[1], x)),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Expr {
            column: self.pos + 1,
            message: format!("{msg} in `{}`", self.src),
        }
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
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
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
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < b.len() && (b[self.pos] == b'+' || b[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < b.len() && b[self.pos].is_ascii_digit() {
                while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_alphanumeric() || b[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match name {
            "x1" => return Ok(Node::X1),
            "x2" => return Ok(Node::X2),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "norm" => {
                self.expect(b'(')?;
                if self.peek() != Some(b'x') {
                    return Err(self.error("norm takes the position `x`"));
                }
                self.pos += 1;
                self.expect(b')')?;
                return Ok(Node::Norm);
            }
            _ => {}
        }
        let Some((func, arity)) = Func::lookup(name) else {
            self.pos = start;
            return Err(self.error(&format!("unknown identifier `{name}`")));
        };
        self.expect(b'(')?;
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        self.expect(b')')?;
        if args.len() != arity {
            return Err(self.error(&format!("`{name}` takes {arity} argument(s)")));
        }
        Ok(Node::Call(func, args))
    }
}
