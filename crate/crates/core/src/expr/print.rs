use std::fmt;

use super::{BinaryOp, Expr};

/// Canonical printer: emits the minimal parentheses needed for the parser to
/// rebuild the same tree.
pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: Option<&'a [String]>,
}

impl<'a> ExprDisplay<'a> {
    pub(super) fn new(expr: &'a Expr, names: Option<&'a [String]>) -> Self {
        ExprDisplay { expr, names }
    }

    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Constant(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Expr::Constant(c) => write!(f, "{c}"),
            Expr::Coordinate(i) => match self.names.and_then(|n| n.get(*i)) {
                Some(name) => f.write_str(name),
                None => write!(f, "u{}", i + 1),
            },
            Expr::Negate(a) => {
                f.write_str("-")?;
                self.child(a, 3, f)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, f)?;
                f.write_str(")")
            }
            Expr::Binary(op, a, b) => {
                let (left_min, right_min) = match op {
                    BinaryOp::Add | BinaryOp::Sub => (1, 2),
                    BinaryOp::Mul | BinaryOp::Div => (2, 3),
                    BinaryOp::Pow => (5, 3),
                };
                self.child(a, left_min, f)?;
                match op {
                    BinaryOp::Add | BinaryOp::Sub => write!(f, " {} ", op.symbol())?,
                    _ => write!(f, "{}", op.symbol())?,
                }
                self.child(b, right_min, f)
            }
        }
    }

    fn child(&self, e: &Expr, min_precedence: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if precedence(e) < min_precedence {
            f.write_str("(")?;
            self.write(e, f)?;
            f.write_str(")")
        } else {
            self.write(e, f)
        }
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Constant(_) | Expr::Coordinate(_) | Expr::Call(..) => 5,
        Expr::Binary(BinaryOp::Pow, ..) => 4,
        Expr::Negate(_) => 3,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_expression;

    fn roundtrip(text: &str) -> String {
        let names: Vec<String> = vec!["x".into(), "y".into()];
        let e = parse_expression(text, &names).unwrap();
        let printed = e.display(&names).to_string();
        assert_eq!(parse_expression(&printed, &names).unwrap(), e, "{text} -> {printed}");
        printed
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(roundtrip("(x + y) * 2"), "(x + y)*2");
        assert_eq!(roundtrip("x - (y - 1)"), "x - (y - 1)");
        assert_eq!(roundtrip("(x - y) - 1"), "x - y - 1");
        assert_eq!(roundtrip("(-x)^2"), "(-x)^2");
        assert_eq!(roundtrip("-x^2"), "-x^2");
        assert_eq!(roundtrip("(x^2)^3"), "(x^2)^3");
        assert_eq!(roundtrip("x^(2^3)"), "x^2^3");
        assert_eq!(roundtrip("x / (y * 2)"), "x/(y*2)");
        assert_eq!(roundtrip("-(x*y)"), "-(x*y)");
        assert_eq!(roundtrip("x*-y"), "x*-y");
        assert_eq!(roundtrip("sqrt(x + 1)/2.5e-3"), "sqrt(x + 1)/0.0025");
    }
}
