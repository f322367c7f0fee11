//! Scalar expression language for fields on a coordinate ball.
//!
//! Expressions are immutable trees shared through `Arc`, so cloning is cheap
//! and a parsed field can be handed to many threads. Evaluation is generic
//! over [`Scalar`]: plain `f64`, first-order jets, or second-order jets with
//! exact Hessians.

mod jet;
mod parse;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

pub use jet::{Jet1, Jet2, Scalar};
pub use parse::{parse, parse_with_dim};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based coordinate index; printed as `x1`, `x2`, ...
    Var(usize),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Call(Func, Expr),
}

/// A shared, immutable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn constant(c: f64) -> Expr {
        Expr::raw(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(index: usize) -> Expr {
        Expr::raw(Node::Var(index))
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_constant() {
            let v = match func {
                Func::Sin => c.sin(),
                Func::Cos => c.cos(),
                Func::Exp => c.exp(),
                Func::Log if c > 0.0 => c.ln(),
                Func::Sqrt if c >= 0.0 => c.sqrt(),
                Func::Tanh => c.tanh(),
                _ => return Expr::raw(Node::Call(func, arg)),
            };
            return Expr::constant(v);
        }
        Expr::raw(Node::Call(func, arg))
    }

    pub fn sin(self) -> Expr {
        Expr::call(Func::Sin, self)
    }
    pub fn cos(self) -> Expr {
        Expr::call(Func::Cos, self)
    }
    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }
    pub fn ln(self) -> Expr {
        Expr::call(Func::Log, self)
    }
    pub fn sqrt(self) -> Expr {
        Expr::call(Func::Sqrt, self)
    }
    pub fn tanh(self) -> Expr {
        Expr::call(Func::Tanh, self)
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        match exponent.as_constant() {
            Some(e) if e == 0.0 => return Expr::one(),
            Some(e) if e == 1.0 => return self,
            _ => {}
        }
        if let (Some(b), Some(e)) = (self.as_constant(), exponent.as_constant()) {
            if b > 0.0 || e.fract() == 0.0 {
                return Expr::constant(b.powf(e));
            }
        }
        Expr::raw(Node::Pow(self, exponent))
    }

    pub fn powi(self, n: i32) -> Expr {
        self.pow(Expr::constant(n as f64))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// True when no coordinate appears in the tree.
    pub fn is_constant(&self) -> bool {
        match self.node() {
            Node::Const(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call(_, a) => a.is_constant(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Number of coordinates the expression needs (highest variable index + 1).
    pub fn arity(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Var(i) => i + 1,
            Node::Neg(a) | Node::Call(_, a) => a.arity(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.arity().max(b.arity()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_scalar::<f64>(x)
    }

    pub fn eval_jet1(&self, x: &[f64]) -> Result<Jet1> {
        self.eval_scalar::<Jet1>(x)
    }

    /// Value, exact gradient and exact Hessian at `x`.
    pub fn eval_jet2(&self, x: &[f64]) -> Result<Jet2> {
        self.eval_scalar::<Jet2>(x)
    }

    pub fn eval_scalar<T: Scalar>(&self, x: &[f64]) -> Result<T> {
        Ok(match self.node() {
            Node::Const(c) => T::constant(*c),
            Node::Var(i) => {
                let value = *x.get(*i).ok_or(Error::Dimension {
                    expected: i + 1,
                    got: x.len(),
                })?;
                T::variable(*i, value)
            }
            Node::Neg(a) => -a.eval_scalar::<T>(x)?,
            Node::Add(a, b) => a.eval_scalar::<T>(x)? + b.eval_scalar::<T>(x)?,
            Node::Sub(a, b) => a.eval_scalar::<T>(x)? - b.eval_scalar::<T>(x)?,
            Node::Mul(a, b) => a.eval_scalar::<T>(x)? * b.eval_scalar::<T>(x)?,
            Node::Div(a, b) => a.eval_scalar::<T>(x)? / b.eval_scalar::<T>(x)?,
            Node::Pow(a, b) => {
                let base = a.eval_scalar::<T>(x)?;
                let v = base.value();
                if b.is_constant() {
                    let e = b.eval(x)?;
                    if e.fract() == 0.0 && e.abs() < 1024.0 {
                        let n = e as i32;
                        let f = v.powi(n);
                        let df = if n == 0 { 0.0 } else { e * v.powi(n - 1) };
                        let d2f = if n == 0 || n == 1 {
                            0.0
                        } else {
                            e * (e - 1.0) * v.powi(n - 2)
                        };
                        base.chain(f, df, d2f)
                    } else {
                        if v < 0.0 {
                            return Err(self.domain_error("pow", v, x));
                        }
                        base.chain(
                            v.powf(e),
                            e * v.powf(e - 1.0),
                            e * (e - 1.0) * v.powf(e - 2.0),
                        )
                    }
                } else {
                    if v <= 0.0 {
                        return Err(self.domain_error("pow", v, x));
                    }
                    let exponent = b.eval_scalar::<T>(x)?;
                    (exponent * base.chain(v.ln(), 1.0 / v, -1.0 / (v * v))).chain_exp()
                }
            }
            Node::Call(func, a) => {
                let u = a.eval_scalar::<T>(x)?;
                let v = u.value();
                match func {
                    Func::Sin => u.chain(v.sin(), v.cos(), -v.sin()),
                    Func::Cos => u.chain(v.cos(), -v.sin(), -v.cos()),
                    Func::Exp => u.chain_exp(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(self.domain_error("log", v, x));
                        }
                        u.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(self.domain_error("sqrt", v, x));
                        }
                        let s = v.sqrt();
                        u.chain(s, 0.5 / s, -0.25 / (s * v))
                    }
                    Func::Tanh => {
                        let t = v.tanh();
                        let sech2 = 1.0 - t * t;
                        u.chain(t, sech2, -2.0 * t * sech2)
                    }
                }
            }
        })
    }

    fn domain_error(&self, function: &'static str, argument: f64, x: &[f64]) -> Error {
        Error::Domain {
            function,
            argument,
            expr: self.to_string(),
            point: x.to_vec(),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `index`.
    pub fn diff(&self, index: usize) -> Expr {
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == index {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => -a.diff(index),
            Node::Add(a, b) => a.diff(index) + b.diff(index),
            Node::Sub(a, b) => a.diff(index) - b.diff(index),
            Node::Mul(a, b) => a.diff(index) * b.clone() + a.clone() * b.diff(index),
            Node::Div(a, b) => {
                a.diff(index) / b.clone() - a.clone() * b.diff(index) / (b.clone() * b.clone())
            }
            Node::Pow(a, b) => {
                if b.is_constant() {
                    b.clone() * a.clone().pow(b.clone() - 1.0) * a.diff(index)
                } else {
                    self.clone()
                        * (b.diff(index) * a.clone().ln() + b.clone() * a.diff(index) / a.clone())
                }
            }
            Node::Call(func, a) => {
                let da = a.diff(index);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match func {
                    Func::Sin => a.clone().cos(),
                    Func::Cos => -a.clone().sin(),
                    Func::Exp => self.clone(),
                    Func::Log => Expr::one() / a.clone(),
                    Func::Sqrt => Expr::constant(0.5) / self.clone(),
                    Func::Tanh => Expr::one() - self.clone().powi(2),
                };
                outer * da
            }
        }
    }

    /// Replace every coordinate `x_i` by `values[i]`.
    pub fn substitute(&self, values: &[Expr]) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => values.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Node::Neg(a) => -a.substitute(values),
            Node::Add(a, b) => a.substitute(values) + b.substitute(values),
            Node::Sub(a, b) => a.substitute(values) - b.substitute(values),
            Node::Mul(a, b) => a.substitute(values) * b.substitute(values),
            Node::Div(a, b) => a.substitute(values) / b.substitute(values),
            Node::Pow(a, b) => a.substitute(values).pow(b.substitute(values)),
            Node::Call(f, a) => Expr::call(*f, a.substitute(values)),
        }
    }

    /// Squared Euclidean norm of the coordinate vector, `x1^2 + ... + xn^2`.
    pub fn radius_squared(dim: usize) -> Expr {
        (0..dim)
            .map(|i| Expr::var(i).powi(2))
            .fold(Expr::zero(), |acc, t| acc + t)
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Pow(..) => 4,
            Node::Const(c) if *c < 0.0 || c.is_nan() => 0,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self.node() {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, 3)
            }
            Node::Add(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " + ")?;
                b.write_at(f, 2)
            }
            Node::Sub(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " - ")?;
                b.write_at(f, 2)
            }
            Node::Mul(a, b) => {
                a.write_at(f, 2)?;
                write!(f, "*")?;
                b.write_at(f, 3)
            }
            Node::Div(a, b) => {
                a.write_at(f, 2)?;
                write!(f, "/")?;
                b.write_at(f, 3)
            }
            Node::Pow(a, b) => {
                a.write_at(f, 5)?;
                write!(f, "^")?;
                b.write_at(f, 3)
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

trait ChainExp {
    fn chain_exp(self) -> Self;
}

impl<T: Scalar> ChainExp for T {
    fn chain_exp(self) -> Self {
        let e = self.value().exp();
        self.chain(e, e, e)
    }
}

/// Canonical printer: minimal parentheses, shortest round-trip number format.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), _) if a == 0.0 => rhs,
            (_, Some(b)) if b == 0.0 => self,
            _ => Expr::raw(Node::Add(self, rhs)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (Some(a), _) if a == 0.0 => -rhs,
            (_, Some(b)) if b == 0.0 => self,
            _ => Expr::raw(Node::Sub(self, rhs)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 0.0 => Expr::zero(),
            (Some(a), _) if a == 1.0 => rhs,
            (_, Some(b)) if b == 1.0 => self,
            _ => Expr::raw(Node::Mul(self, rhs)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::constant(a / b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 1.0 => self,
            _ => Expr::raw(Node::Div(self, rhs)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Expr::raw(Node::Neg(self)),
        }
    }
}

macro_rules! scalar_rhs {
    ($tr:ident, $method:ident) => {
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                $tr::$method(self, Expr::constant(rhs))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $tr::$method(Expr::constant(self), rhs)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $tr::$method(self.clone(), rhs.clone())
            }
        }
    };
}

scalar_rhs!(Add, add);
scalar_rhs!(Sub, sub);
scalar_rhs!(Mul, mul);
scalar_rhs!(Div, div);
