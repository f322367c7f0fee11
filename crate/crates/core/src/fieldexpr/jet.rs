//! Forward-mode jets used to propagate exact derivatives through expressions.
//!
//! `Jet1` carries the gradient, `Jet2` the gradient and the Hessian. Entries
//! beyond the active dimension stay zero, so a single fixed layout serves
//! n = 2 and n = 3.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::MAX_DIM;

/// Numeric type an expression can be evaluated in.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    /// Coordinate function `x_index` evaluated at `value`.
    fn variable(index: usize, value: f64) -> Self;
    fn value(&self) -> f64;
    /// Apply a scalar function given its value and first two derivatives at `self.value()`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn variable(_index: usize, value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn chain(self, f: f64, _df: f64, _d2f: f64) -> Self {
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet1 {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
}

impl Scalar for Jet1 {
    fn constant(c: f64) -> Self {
        Jet1 {
            value: c,
            grad: [0.0; MAX_DIM],
        }
    }
    fn variable(index: usize, value: f64) -> Self {
        let mut grad = [0.0; MAX_DIM];
        grad[index] = 1.0;
        Jet1 { value, grad }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn chain(self, f: f64, df: f64, _d2f: f64) -> Self {
        Jet1 {
            value: f,
            grad: self.grad.map(|g| df * g),
        }
    }
}

impl Add for Jet1 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut grad = self.grad;
        for (g, og) in grad.iter_mut().zip(o.grad) {
            *g += og;
        }
        Jet1 {
            value: self.value + o.value,
            grad,
        }
    }
}

impl Sub for Jet1 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for Jet1 {
    type Output = Self;
    fn neg(self) -> Self {
        Jet1 {
            value: -self.value,
            grad: self.grad.map(|g| -g),
        }
    }
}

impl Mul for Jet1 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut grad = [0.0; MAX_DIM];
        for i in 0..MAX_DIM {
            grad[i] = self.grad[i] * o.value + self.value * o.grad[i];
        }
        Jet1 {
            value: self.value * o.value,
            grad,
        }
    }
}

impl Div for Jet1 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.value;
        self * o.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet2 {
    pub fn first_order(&self) -> Jet1 {
        Jet1 {
            value: self.value,
            grad: self.grad,
        }
    }
}

impl Scalar for Jet2 {
    fn constant(c: f64) -> Self {
        Jet2 {
            value: c,
            ..Default::default()
        }
    }
    fn variable(index: usize, value: f64) -> Self {
        let mut grad = [0.0; MAX_DIM];
        grad[index] = 1.0;
        Jet2 {
            value,
            grad,
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Jet2 {
            value: f,
            grad: self.grad.map(|g| df * g),
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        };
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                out.hess[i][j] = d2f * self.grad[i] * self.grad[j] + df * self.hess[i][j];
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.value += o.value;
        for i in 0..MAX_DIM {
            self.grad[i] += o.grad[i];
            for j in 0..MAX_DIM {
                self.hess[i][j] += o.hess[i][j];
            }
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Self;
    fn neg(self) -> Self {
        Jet2 {
            value: -self.value,
            grad: self.grad.map(|g| -g),
            hess: self.hess.map(|row| row.map(|h| -h)),
        }
    }
}

impl Mul for Jet2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Jet2 {
            value: self.value * o.value,
            ..Default::default()
        };
        for i in 0..MAX_DIM {
            out.grad[i] = self.grad[i] * o.value + self.value * o.grad[i];
            for j in 0..MAX_DIM {
                out.hess[i][j] = self.hess[i][j] * o.value
                    + self.value * o.hess[i][j]
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i];
            }
        }
        out
    }
}

impl Div for Jet2 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.value;
        self * o.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_second_order() {
        let x = Jet2::variable(0, 2.0);
        let y = Jet2::variable(1, 3.0);
        let p = x * y;
        assert_eq!(p.value, 6.0);
        assert_eq!(p.grad, [3.0, 2.0, 0.0]);
        assert_eq!(p.hess[0][1], 1.0);
        assert_eq!(p.hess[1][0], 1.0);
        assert_eq!(p.hess[0][0], 0.0);
    }

    #[test]
    fn quotient_matches_closed_form() {
        // 1/x at x = 2: -1/4, 2/8
        let x = Jet2::variable(0, 2.0);
        let q = Jet2::constant(1.0) / x;
        assert!((q.value - 0.5).abs() < 1e-15);
        assert!((q.grad[0] + 0.25).abs() < 1e-15);
        assert!((q.hess[0][0] - 0.25).abs() < 1e-15);
    }
}
