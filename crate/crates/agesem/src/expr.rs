//! Arithmetic expression parser/evaluator for scenario data in the
//! variables `t`, `a`, `x`.
//!
//! Grammar (whitespace-insensitive, full input must be consumed):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?          // right-associative
//! atom   := number | 'pi' | 't' | 'a' | 'x'
//!         | ('sin'|'cos'|'exp'|'sqrt') '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2 = -4`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    A,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree; every node carries the byte offset it started at, used
/// for evaluation-error reporting.
#[derive(Debug, Clone)]
pub enum ExprAst {
    Num { value: f64, offset: usize },
    Pi { offset: usize },
    Var { var: Var, offset: usize },
    Unary { op: UnaryFn, arg: Box<ExprAst>, offset: usize },
    Binary { op: BinOp, lhs: Box<ExprAst>, rhs: Box<ExprAst>, offset: usize },
}

impl ExprAst {
    pub fn offset(&self) -> usize {
        match self {
            ExprAst::Num { offset, .. }
            | ExprAst::Pi { offset }
            | ExprAst::Var { offset, .. }
            | ExprAst::Unary { offset, .. }
            | ExprAst::Binary { offset, .. } => *offset,
        }
    }

    /// Structural equality, ignoring source offsets.
    pub fn structurally_equal(&self, other: &ExprAst) -> bool {
        match (self, other) {
            (ExprAst::Num { value: a, .. }, ExprAst::Num { value: b, .. }) => a == b,
            (ExprAst::Pi { .. }, ExprAst::Pi { .. }) => true,
            (ExprAst::Var { var: a, .. }, ExprAst::Var { var: b, .. }) => a == b,
            (
                ExprAst::Unary { op: oa, arg: aa, .. },
                ExprAst::Unary { op: ob, arg: ab, .. },
            ) => oa == ob && aa.structurally_equal(ab),
            (
                ExprAst::Binary { op: oa, lhs: la, rhs: ra, .. },
                ExprAst::Binary { op: ob, lhs: lb, rhs: rb, .. },
            ) => oa == ob && la.structurally_equal(lb) && ra.structurally_equal(rb),
            _ => false,
        }
    }
}

/// Parse `src` into an expression tree. The whole input must parse.
pub fn parse(src: &str) -> Result<ExprAst> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    p.skip_ws();
    let ast = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Syntax {
            offset: p.pos,
            expected: "operator or end of input".into(),
        });
    }
    Ok(ast)
}

/// Evaluate at the point `(t, a, x)` in IEEE double arithmetic.
pub fn evaluate(ast: &ExprAst, t: f64, a: f64, x: f64) -> Result<f64> {
    match ast {
        ExprAst::Num { value, .. } => Ok(*value),
        ExprAst::Pi { .. } => Ok(std::f64::consts::PI),
        ExprAst::Var { var, .. } => Ok(match var {
            Var::T => t,
            Var::A => a,
            Var::X => x,
        }),
        ExprAst::Unary { op, arg, offset } => {
            let v = evaluate(arg, t, a, x)?;
            match op {
                UnaryFn::Sin => Ok(v.sin()),
                UnaryFn::Cos => Ok(v.cos()),
                UnaryFn::Exp => Ok(v.exp()),
                UnaryFn::Neg => Ok(-v),
                UnaryFn::Sqrt => {
                    if v < 0.0 {
                        Err(Error::Eval {
                            offset: *offset,
                            message: format!("sqrt of negative value {v}"),
                        })
                    } else {
                        Ok(v.sqrt())
                    }
                }
            }
        }
        ExprAst::Binary { op, lhs, rhs, offset } => {
            let l = evaluate(lhs, t, a, x)?;
            let r = evaluate(rhs, t, a, x)?;
            match op {
                BinOp::Add => Ok(l + r),
                BinOp::Sub => Ok(l - r),
                BinOp::Mul => Ok(l * r),
                BinOp::Pow => Ok(l.powf(r)),
                BinOp::Div => {
                    if r == 0.0 {
                        Err(Error::Eval {
                            offset: *offset,
                            message: "division by zero".into(),
                        })
                    } else {
                        Ok(l / r)
                    }
                }
            }
        }
    }
}

/// Canonical fully-parenthesized printer; `parse(print(ast))` reproduces
/// `ast` up to source offsets.
pub fn print(ast: &ExprAst) -> String {
    match ast {
        ExprAst::Num { value, .. } => format!("{value}"),
        ExprAst::Pi { .. } => "pi".into(),
        ExprAst::Var { var, .. } => match var {
            Var::T => "t".into(),
            Var::A => "a".into(),
            Var::X => "x".into(),
        },
        ExprAst::Unary { op, arg, .. } => match op {
            UnaryFn::Neg => format!("(-{})", print(arg)),
            UnaryFn::Sin => format!("sin({})", print(arg)),
            UnaryFn::Cos => format!("cos({})", print(arg)),
            UnaryFn::Exp => format!("exp({})", print(arg)),
            UnaryFn::Sqrt => format!("sqrt({})", print(arg)),
        },
        ExprAst::Binary { op, lhs, rhs, .. } => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            format!("({}{}{})", print(lhs), sym, print(rhs))
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let start = self.pos;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            self.skip_ws();
            let rhs = self.term()?;
            lhs = ExprAst::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), offset: start };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprAst> {
        let start = self.pos;
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            self.skip_ws();
            let rhs = self.factor()?;
            lhs = ExprAst::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), offset: start };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExprAst> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
            self.skip_ws();
            let arg = self.factor()?;
            return Ok(ExprAst::Unary { op: UnaryFn::Neg, arg: Box::new(arg), offset: start });
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst> {
        let start = self.pos;
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let exp = self.factor()?;
            return Ok(ExprAst::Binary {
                op: BinOp::Pow,
                lhs: Box::new(base),
                rhs: Box::new(exp),
                offset: start,
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst> {
        let start = self.pos;
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(Error::Syntax { offset: self.pos, expected: "`)`".into() });
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            _ => Err(Error::Syntax {
                offset: self.pos,
                expected: "number, variable, function call or `(`".into(),
            }),
        }
        .map(|ast| {
            // keep the node anchored at the first byte of the atom
            let _ = start;
            ast
        })
    }

    fn number(&mut self) -> Result<ExprAst> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // not an exponent suffix; treat `e`/`E` as a following token
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: "a numeric literal".into(),
        })?;
        self.skip_ws();
        Ok(ExprAst::Num { value, offset: start })
    }

    fn identifier(&mut self) -> Result<ExprAst> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        match name.as_str() {
            "pi" => Ok(ExprAst::Pi { offset: start }),
            "t" => Ok(ExprAst::Var { var: Var::T, offset: start }),
            "a" => Ok(ExprAst::Var { var: Var::A, offset: start }),
            "x" => Ok(ExprAst::Var { var: Var::X, offset: start }),
            "sin" | "cos" | "exp" | "sqrt" => {
                if !self.eat(b'(') {
                    return Err(Error::Syntax { offset: self.pos, expected: "`(`".into() });
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(Error::Syntax { offset: self.pos, expected: "`)`".into() });
                }
                let op = match name.as_str() {
                    "sin" => UnaryFn::Sin,
                    "cos" => UnaryFn::Cos,
                    "exp" => UnaryFn::Exp,
                    _ => UnaryFn::Sqrt,
                };
                Ok(ExprAst::Unary { op, arg: Box::new(arg), offset: start })
            }
            _ => Err(Error::UnknownIdentifier { name, offset: start }),
        }
    }
}
