use super::{power_checked, BinaryOp, Expr, Function};
use crate::error::{Error, Result};

/// Value, gradient and Hessian of a scalar field at a point.
///
/// The Hessian is stored row-major; every operation computes the upper
/// triangle and mirrors it, so `hess(j, k)` and `hess(k, j)` are the same bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Jet2 {
    pub fn constant(n: usize, value: f64) -> Jet2 {
        Jet2 {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    pub fn variable(n: usize, index: usize, value: f64) -> Jet2 {
        let mut j = Jet2::constant(n, value);
        j.grad[index] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess(&self, j: usize, k: usize) -> f64 {
        self.hess[j * self.dim() + k]
    }

    /// Hessian as nested rows.
    pub fn hessian(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|j| self.hess[j * n..(j + 1) * n].to_vec()).collect()
    }

    fn symmetric(n: usize, value: f64, grad: Vec<f64>, entry: impl Fn(usize, usize) -> f64) -> Jet2 {
        let mut hess = vec![0.0; n * n];
        for j in 0..n {
            for k in j..n {
                let h = entry(j, k);
                hess[j * n + k] = h;
                hess[k * n + j] = h;
            }
        }
        Jet2 { value, grad, hess }
    }

    /// `f(self)` given `f`, `f'` and `f''` at the current value.
    pub fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.dim();
        let grad = self.grad.iter().map(|g| f1 * g).collect();
        Jet2::symmetric(n, f0, grad, |j, k| {
            f1 * self.hess(j, k) + f2 * self.grad[j] * self.grad[k]
        })
    }

    pub fn add(&self, other: &Jet2) -> Jet2 {
        let n = self.dim();
        let grad = (0..n).map(|j| self.grad[j] + other.grad[j]).collect();
        Jet2::symmetric(n, self.value + other.value, grad, |j, k| {
            self.hess(j, k) + other.hess(j, k)
        })
    }

    pub fn sub(&self, other: &Jet2) -> Jet2 {
        let n = self.dim();
        let grad = (0..n).map(|j| self.grad[j] - other.grad[j]).collect();
        Jet2::symmetric(n, self.value - other.value, grad, |j, k| {
            self.hess(j, k) - other.hess(j, k)
        })
    }

    pub fn neg(&self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }

    pub fn mul(&self, other: &Jet2) -> Jet2 {
        let n = self.dim();
        let (a, b) = (self.value, other.value);
        let grad = (0..n).map(|j| self.grad[j] * b + a * other.grad[j]).collect();
        Jet2::symmetric(n, a * b, grad, |j, k| {
            self.hess(j, k) * b
                + a * other.hess(j, k)
                + self.grad[j] * other.grad[k]
                + other.grad[j] * self.grad[k]
        })
    }

    /// Quotient; the caller guarantees a nonzero denominator.
    pub fn div(&self, other: &Jet2) -> Jet2 {
        let n = self.dim();
        let b = other.value;
        let q = self.value / b;
        let grad: Vec<f64> = (0..n).map(|j| (self.grad[j] - q * other.grad[j]) / b).collect();
        let gq = grad.clone();
        Jet2::symmetric(n, q, grad, |j, k| {
            (self.hess(j, k) - q * other.hess(j, k) - gq[j] * other.grad[k] - other.grad[j] * gq[k])
                / b
        })
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            value: c * self.value,
            grad: self.grad.iter().map(|g| c * g).collect(),
            hess: self.hess.iter().map(|h| c * h).collect(),
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Jet2) {
        self.value += c * other.value;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += c * o;
        }
        for (h, o) in self.hess.iter_mut().zip(&other.hess) {
            *h += c * o;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }
}

pub(super) fn eval(expr: &Expr, point: &[f64]) -> Result<Jet2> {
    let jet = eval_node(expr, point)?;
    if !jet.is_finite() {
        return Err(Error::Domain {
            node: expr.to_string(),
            reason: "non-finite derivatives".into(),
        });
    }
    Ok(jet)
}

fn eval_node(expr: &Expr, point: &[f64]) -> Result<Jet2> {
    let n = point.len();
    match expr {
        Expr::Constant(c) => Ok(Jet2::constant(n, *c)),
        Expr::Coordinate(i) => {
            if *i >= n {
                return Err(Error::DimensionMismatch {
                    expected: i + 1,
                    found: n,
                });
            }
            Ok(Jet2::variable(n, *i, point[*i]))
        }
        Expr::Negate(a) => Ok(eval_node(a, point)?.neg()),
        Expr::Call(f, a) => {
            let x = eval_node(a, point)?;
            let v = x.value;
            match f {
                Function::Sin => Ok(x.compose(v.sin(), v.cos(), -v.sin())),
                Function::Cos => Ok(x.compose(v.cos(), -v.sin(), -v.cos())),
                Function::Exp => {
                    let e = v.exp();
                    if !e.is_finite() {
                        return Err(expr.domain_error(format!("exp overflow at {v}")));
                    }
                    Ok(x.compose(e, e, e))
                }
                Function::Ln => {
                    if v <= 0.0 {
                        return Err(expr.domain_error(format!("logarithm of {v}")));
                    }
                    Ok(x.compose(v.ln(), 1.0 / v, -1.0 / (v * v)))
                }
                Function::Sqrt => {
                    if v <= 0.0 {
                        return Err(expr.domain_error(format!("square root of {v}")));
                    }
                    let s = v.sqrt();
                    Ok(x.compose(s, 0.5 / s, -0.25 / (s * v)))
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let x = eval_node(a, point)?;
            match op {
                BinaryOp::Pow if b.is_constant() => {
                    let exponent = b.eval(point)?;
                    let (f0, f1, f2) = power_checked(expr, x.value, exponent)?;
                    Ok(x.compose(f0, f1, f2))
                }
                BinaryOp::Pow => {
                    if x.value <= 0.0 {
                        return Err(expr.domain_error(format!(
                            "variable exponent on non-positive base {}",
                            x.value
                        )));
                    }
                    let y = eval_node(b, point)?;
                    let lnx = x.compose(x.value.ln(), 1.0 / x.value, -1.0 / (x.value * x.value));
                    let prod = y.mul(&lnx);
                    let e = prod.value.exp();
                    if !e.is_finite() {
                        return Err(expr.domain_error("power overflow".into()));
                    }
                    Ok(prod.compose(e, e, e))
                }
                _ => {
                    let y = eval_node(b, point)?;
                    match op {
                        BinaryOp::Add => Ok(x.add(&y)),
                        BinaryOp::Sub => Ok(x.sub(&y)),
                        BinaryOp::Mul => Ok(x.mul(&y)),
                        BinaryOp::Div => {
                            if y.value == 0.0 {
                                return Err(expr.domain_error("division by zero".into()));
                            }
                            Ok(x.div(&y))
                        }
                        BinaryOp::Pow => unreachable!(),
                    }
                }
            }
        }
    }
}
