//! Recursive-descent parser.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative because its exponent is parsed as `unary`.

use super::{Expr, Func, Node};
use crate::error::{Error, Result};
use crate::MAX_DIM;

/// Parse with variables `x1..x3` allowed.
pub fn parse(src: &str) -> Result<Expr> {
    parse_with_dim(src, MAX_DIM)
}

/// Parse, rejecting variables beyond `x{dim}`.
pub fn parse_with_dim(src: &str, dim: usize) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        dim,
    };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::raw(Node::Add(lhs, rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::raw(Node::Sub(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::raw(Node::Mul(lhs, rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::raw(Node::Div(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expr::raw(Node::Neg(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::raw(Node::Pow(base, exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse::<f64>()
            .map(|v| Expr::raw(Node::Const(v)))
            .map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");

        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error(&format!("expected `(` after `{name}`")));
            }
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            if args.len() != 1 {
                return Err(Error::Arity {
                    offset: start,
                    name: name.to_string(),
                    got: args.len(),
                });
            }
            return Ok(Expr::raw(Node::Call(
                func,
                args.pop().expect("one argument"),
            )));
        }
        if name == "pi" {
            return Ok(Expr::raw(Node::Const(std::f64::consts::PI)));
        }
        if let Some(index) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if (1..=self.dim).contains(&index) && !name[1..].starts_with('0') {
                return Ok(Expr::raw(Node::Var(index - 1)));
            }
        }
        Err(Error::UnknownIdentifier {
            offset: start,
            name: name.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syntax_error_reports_offset() {
        match parse("x1 + * x2").unwrap_err() {
            Error::Syntax { offset, .. } => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        match parse("(x1 + x2").unwrap_err() {
            Error::Syntax { offset, .. } => assert_eq!(offset, 8),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("   "), Err(Error::Syntax { offset: 0, .. })));
    }

    #[test]
    fn unknown_identifiers_and_dimension() {
        assert!(matches!(
            parse("y + 1"),
            Err(Error::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse_with_dim("x1 + x3", 2),
            Err(Error::UnknownIdentifier { offset: 5, .. })
        ));
        assert!(parse_with_dim("x1 + x2", 2).is_ok());
        assert!(parse("x0").is_err());
        assert!(parse("x01").is_err());
    }

    #[test]
    fn arity_is_checked() {
        assert!(matches!(
            parse("sin(x1, x2)"),
            Err(Error::Arity {
                got: 2,
                offset: 0,
                ..
            })
        ));
    }

    #[test]
    fn numbers() {
        for (src, v) in [("1e-3", 1e-3), (".5", 0.5), ("2.", 2.0), ("1.5E+2", 150.0)] {
            assert_eq!(parse(src).unwrap().eval(&[]).unwrap(), v);
        }
        // `2e` is the number 2 followed by an identifier
        assert!(parse("2e").is_err());
    }
}
