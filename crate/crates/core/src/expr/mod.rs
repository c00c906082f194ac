//! Scalar coordinate expressions: parsing, printing and second-order jet
//! evaluation.
//!
//! An [`Expr`] is a small AST over the coordinates `u^0 .. u^{N-1}`. It is
//! evaluated either to a plain value or to a [`Jet2`] carrying the value, the
//! gradient and the (exactly symmetric) Hessian, propagated with the chain
//! rule through every node.

mod jet;
mod parse;
mod print;

use std::fmt;
use std::ops;

pub use jet::Jet2;
pub use parse::parse_expression;
pub use print::ExprDisplay;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Function {
    pub const ALL: [Function; 5] = [
        Function::Sin,
        Function::Cos,
        Function::Exp,
        Function::Ln,
        Function::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Ln => "ln",
            Function::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree over coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    Coordinate(usize),
    Negate(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Box<Expr>),
}

impl Expr {
    /// Constant node; negative values become `Negate(Constant(|c|))`, which is
    /// the shape the parser produces.
    pub fn constant(c: f64) -> Expr {
        if c < 0.0 {
            Expr::Negate(Box::new(Expr::Constant(-c)))
        } else {
            Expr::Constant(c)
        }
    }

    pub fn coord(index: usize) -> Expr {
        Expr::Coordinate(index)
    }

    pub fn zero() -> Expr {
        Expr::Constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::Constant(1.0)
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn call(function: Function, arg: Expr) -> Expr {
        Expr::Call(function, Box::new(arg))
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, self, exponent)
    }

    pub fn powi(self, exponent: i32) -> Expr {
        self.pow(Expr::constant(exponent as f64))
    }

    /// True for the literal zero constant (the only form treated as a
    /// structural zero, e.g. for off-diagonal entries).
    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Constant(c) if *c == 0.0)
    }

    /// True when the tree contains no coordinate.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Constant(_) => true,
            Expr::Coordinate(_) => false,
            Expr::Negate(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// One past the largest coordinate index used (0 for constant trees).
    pub fn min_dimension(&self) -> usize {
        match self {
            Expr::Constant(_) => 0,
            Expr::Coordinate(i) => i + 1,
            Expr::Negate(a) | Expr::Call(_, a) => a.min_dimension(),
            Expr::Binary(_, a, b) => a.min_dimension().max(b.min_dimension()),
        }
    }

    /// Replace every coordinate `u^i` by `substitution[i]`.
    pub fn substitute(&self, substitution: &[Expr]) -> Expr {
        match self {
            Expr::Constant(c) => Expr::Constant(*c),
            Expr::Coordinate(i) => substitution[*i].clone(),
            Expr::Negate(a) => Expr::Negate(Box::new(a.substitute(substitution))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(substitution))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(substitution)),
                Box::new(b.substitute(substitution)),
            ),
        }
    }

    /// Plain value at `point`; overflow to a non-finite value is a domain
    /// error, as in [`Expr::eval_jet2`].
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        let v = self.eval_node(point)?;
        finite(self, v)
    }

    fn eval_node(&self, point: &[f64]) -> Result<f64> {
        match self {
            Expr::Constant(c) => Ok(*c),
            Expr::Coordinate(i) => point.get(*i).copied().ok_or(Error::DimensionMismatch {
                expected: i + 1,
                found: point.len(),
            }),
            Expr::Negate(a) => Ok(-a.eval_node(point)?),
            Expr::Call(f, a) => {
                let x = a.eval_node(point)?;
                match f {
                    Function::Sin => Ok(x.sin()),
                    Function::Cos => Ok(x.cos()),
                    Function::Exp => Ok(x.exp()),
                    Function::Ln => {
                        if x <= 0.0 {
                            Err(self.domain_error(format!("logarithm of {x}")))
                        } else {
                            Ok(x.ln())
                        }
                    }
                    Function::Sqrt => {
                        if x <= 0.0 {
                            Err(self.domain_error(format!("square root of {x}")))
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval_node(point)?;
                let y = b.eval_node(point)?;
                match op {
                    BinaryOp::Add => Ok(x + y),
                    BinaryOp::Sub => Ok(x - y),
                    BinaryOp::Mul => Ok(x * y),
                    BinaryOp::Div => {
                        if y == 0.0 {
                            Err(self.domain_error("division by zero".into()))
                        } else {
                            Ok(x / y)
                        }
                    }
                    BinaryOp::Pow => {
                        let v = if b.is_constant() {
                            power_checked(self, x, y)?.0
                        } else {
                            if x <= 0.0 {
                                return Err(self.domain_error(format!(
                                    "variable exponent on non-positive base {x}"
                                )));
                            }
                            (y * x.ln()).exp()
                        };
                        finite(self, v)
                    }
                }
            }
        }
    }

    /// Value, gradient and Hessian at `point`.
    pub fn eval_jet2(&self, point: &[f64]) -> Result<Jet2> {
        jet::eval(self, point)
    }

    fn domain_error(&self, reason: String) -> Error {
        Error::Domain {
            node: self.display_default().to_string(),
            reason,
        }
    }

    /// Printer using the default coordinate names `u1, u2, ...`.
    pub fn display_default(&self) -> ExprDisplay<'_> {
        ExprDisplay::new(self, None)
    }

    /// Printer using the given coordinate names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay::new(self, Some(names))
    }
}

fn finite(node: &Expr, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(node.domain_error(format!("non-finite value {v}")))
    }
}

/// `base^exponent` for a constant exponent together with the first two
/// derivatives with respect to the base.
pub(crate) fn power_checked(node: &Expr, base: f64, exponent: f64) -> Result<(f64, f64, f64)> {
    let integral = exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64;
    if base < 0.0 && !integral {
        return Err(node.domain_error(format!(
            "fractional power {exponent} of negative base {base}"
        )));
    }
    if base == 0.0 && exponent < 2.0 && !(integral && exponent >= 0.0) {
        return Err(node.domain_error(format!("power {exponent} of zero base")));
    }
    let (v, d1, d2) = if integral {
        let k = exponent as i32;
        let v = base.powi(k);
        let d1 = if k == 0 { 0.0 } else { exponent * base.powi(k - 1) };
        let d2 = if k == 0 || k == 1 {
            0.0
        } else {
            exponent * (exponent - 1.0) * base.powi(k - 2)
        };
        (v, d1, d2)
    } else {
        (
            base.powf(exponent),
            exponent * base.powf(exponent - 1.0),
            exponent * (exponent - 1.0) * base.powf(exponent - 2.0),
        )
    };
    if !(v.is_finite() && d1.is_finite() && d2.is_finite()) {
        return Err(node.domain_error(format!("power {exponent} of {base} is not finite")));
    }
    Ok((v, d1, d2))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display_default().fmt(f)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, self, rhs)
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Negate(Box::new(self))
    }
}

/// Sum of the given terms, `0` when empty.
pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(|acc, t| acc + t)
        .unwrap_or_else(Expr::zero)
}

/// Linear combination `Σ coeffs[k] * terms[k]`, dropping zero coefficients
/// and unit multipliers.
pub fn linear_combination(coeffs: &[f64], terms: &[Expr]) -> Expr {
    let mut out: Option<Expr> = None;
    for (&c, t) in coeffs.iter().zip(terms) {
        if c == 0.0 || t.is_zero_literal() {
            continue;
        }
        let magnitude = c.abs();
        let term = if magnitude == 1.0 {
            t.clone()
        } else {
            Expr::Constant(magnitude) * t.clone()
        };
        out = Some(match out {
            None if c < 0.0 => -term,
            None => term,
            Some(acc) if c < 0.0 => acc - term,
            Some(acc) => acc + term,
        });
    }
    out.unwrap_or_else(Expr::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn constant_canonicalizes_sign() {
        assert_eq!(
            Expr::constant(-2.0),
            Expr::Negate(Box::new(Expr::Constant(2.0)))
        );
    }

    #[test]
    fn substitute_replaces_coordinates() {
        let e = parse_expression("u1 * u2", &names(2)).unwrap();
        let s = e.substitute(&[Expr::Constant(3.0), Expr::coord(0)]);
        assert_eq!(s.eval(&[5.0, 0.0]).unwrap(), 15.0);
    }

    #[test]
    fn linear_combination_signs() {
        let terms = [Expr::coord(0), Expr::coord(1), Expr::coord(0)];
        let e = linear_combination(&[-1.0, 2.5, 0.0], &terms);
        assert_eq!(e.eval(&[2.0, 4.0]).unwrap(), 8.0);
        assert!(linear_combination(&[0.0], &terms[..1]).is_zero_literal());
    }

    #[test]
    fn eval_domain_errors() {
        let n = names(1);
        for text in ["ln(u1)", "sqrt(u1)", "1/u1", "u1^0.5"] {
            let e = parse_expression(text, &n).unwrap();
            assert!(
                matches!(e.eval(&[-1.0]), Err(Error::Domain { .. })) || text == "1/u1",
                "{text}"
            );
        }
        let e = parse_expression("1/u1", &n).unwrap();
        assert!(matches!(e.eval(&[0.0]), Err(Error::Domain { .. })));
        let e = parse_expression("u1^3", &n).unwrap();
        assert_eq!(e.eval(&[-2.0]).unwrap(), -8.0);
    }
}
