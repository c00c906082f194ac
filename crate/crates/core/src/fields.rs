//! Matrix-valued expression fields (metrics and affinors), their pointwise
//! jets, and constant linear coordinate changes acting on them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{linear_combination, parse_expression, Expr};
use crate::tensor::{Tensor3, Tensor4};

/// Largest dimension accepted anywhere in the toolkit.
pub const MAX_DIMENSION: usize = 8;

/// Square matrix of expressions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    dim: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    pub fn new(rows: Vec<Vec<Expr>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::InvalidInput(format!(
                "matrix dimension {dim} outside 1..={MAX_DIMENSION}"
            )));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend(row);
        }
        if let Some(bad) = entries.iter().find(|e| e.min_dimension() > dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.min_dimension(),
            });
        }
        Ok(ExprMatrix { dim, entries })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Expr) -> Result<Self> {
        ExprMatrix::new(
            (0..dim)
                .map(|i| (0..dim).map(|j| f(i, j)).collect())
                .collect(),
        )
    }

    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>], coordinate_names: &[String]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_expression(s.as_ref(), coordinate_names))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let m = ExprMatrix::new(parsed)?;
        if m.dim != coordinate_names.len() {
            return Err(Error::DimensionMismatch {
                expected: coordinate_names.len(),
                found: m.dim,
            });
        }
        Ok(m)
    }

    pub fn diagonal(entries: Vec<Expr>) -> Result<Self> {
        let n = entries.len();
        let mut rows = vec![vec![Expr::zero(); n]; n];
        for (i, e) in entries.into_iter().enumerate() {
            rows[i][i] = e;
        }
        ExprMatrix::new(rows)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        ExprMatrix::diagonal(vec![Expr::one(); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<Expr>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// Printed entries, row by row.
    pub fn to_strings(&self, coordinate_names: &[String]) -> Vec<Vec<String>> {
        self.entries
            .chunks(self.dim)
            .map(|r| r.iter().map(|e| e.display(coordinate_names).to_string()).collect())
            .collect()
    }

    /// Structural diagonality: every off-diagonal entry is the literal `0`.
    pub fn is_structurally_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j).is_zero_literal()))
    }

    pub fn diagonal_entries(&self) -> Vec<Expr> {
        (0..self.dim).map(|i| self.get(i, i).clone()).collect()
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(point)?;
        let values = self
            .entries
            .iter()
            .map(|e| e.eval(point))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(self.dim, self.dim, &values))
    }

    pub fn jet(&self, point: &[f64]) -> Result<MatrixJet> {
        self.check_point(point)?;
        let n = self.dim;
        let jets = self
            .entries
            .iter()
            .map(|e| e.eval_jet2(point))
            .collect::<Result<Vec<_>>>()?;
        let value = DMatrix::from_fn(n, n, |i, j| jets[i * n + j].value);
        let grad = Tensor3::from_fn(n, |i, j, k| jets[i * n + j].grad[k]);
        let hess = Tensor4::from_fn(n, |i, j, k, l| jets[i * n + j].hess(k, l));
        Ok(MatrixJet { value, grad, hess })
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> ExprMatrix {
        ExprMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(f).collect(),
        }
    }
}

/// Value, first and second partial derivatives of a matrix field.
///
/// `grad[(i, j, k)] = ∂M_ij/∂u^k`, `hess[(i, j, k, l)] = ∂²M_ij/∂u^k∂u^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixJet {
    pub value: DMatrix<f64>,
    pub grad: Tensor3,
    pub hess: Tensor4,
}

impl MatrixJet {
    pub fn dim(&self) -> usize {
        self.value.nrows()
    }

    /// `a * self + b * other`, the jet of a pencil member.
    pub fn combine(&self, a: f64, other: &MatrixJet, b: f64) -> MatrixJet {
        let n = self.dim();
        MatrixJet {
            value: &self.value * a + &other.value * b,
            grad: Tensor3::from_fn(n, |i, j, k| a * self.grad[(i, j, k)] + b * other.grad[(i, j, k)]),
            hess: Tensor4::from_fn(n, |i, j, k, l| {
                a * self.hess[(i, j, k, l)] + b * other.hess[(i, j, k, l)]
            }),
        }
    }

    pub fn first_order(&self) -> AffinorJet {
        AffinorJet {
            value: self.value.clone(),
            grad: self.grad.clone(),
        }
    }
}

/// Value and first partial derivatives of an affinor, `grad[(i, j, k)] =
/// ∂V^i_j/∂u^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinorJet {
    pub value: DMatrix<f64>,
    pub grad: Tensor3,
}

/// Anything that yields an affinor with its first derivatives at a point.
pub trait AffinorSource: Sync {
    fn dim(&self) -> usize;
    fn value(&self, point: &[f64]) -> Result<DMatrix<f64>>;
    fn jet(&self, point: &[f64]) -> Result<AffinorJet>;
}

/// Contravariant metric `g^{ij}(u)` given by expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField(pub ExprMatrix);

impl MetricField {
    pub fn new(components: ExprMatrix) -> Self {
        MetricField(components)
    }

    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>], coordinate_names: &[String]) -> Result<Self> {
        Ok(MetricField(ExprMatrix::parse(rows, coordinate_names)?))
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Ok(MetricField(ExprMatrix::identity(dim)?))
    }

    pub fn diagonal(entries: Vec<Expr>) -> Result<Self> {
        Ok(MetricField(ExprMatrix::diagonal(entries)?))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn components(&self) -> &ExprMatrix {
        &self.0
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.0.eval(point)
    }

    pub fn jet(&self, point: &[f64]) -> Result<MatrixJet> {
        self.0.jet(point)
    }

    /// Components in the new coordinates `ũ = A u`:
    /// `g̃^{ij}(ũ) = A_ia A_jb g^{ab}(A⁻¹ũ)`.
    pub fn transformed(&self, change: &LinearChange) -> Result<MetricField> {
        Ok(MetricField(change.transform_contravariant(&self.0)?))
    }
}

/// Mixed (1,1) tensor field `V^i_j(u)`; row = upper index.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinorField(pub ExprMatrix);

impl AffinorField {
    pub fn new(components: ExprMatrix) -> Self {
        AffinorField(components)
    }

    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>], coordinate_names: &[String]) -> Result<Self> {
        Ok(AffinorField(ExprMatrix::parse(rows, coordinate_names)?))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Ok(AffinorField(ExprMatrix::identity(dim)?))
    }

    pub fn diagonal(entries: Vec<Expr>) -> Result<Self> {
        Ok(AffinorField(ExprMatrix::diagonal(entries)?))
    }

    pub fn components(&self) -> &ExprMatrix {
        &self.0
    }

    /// `Ṽ(ũ) = A V(A⁻¹ũ) A⁻¹`.
    pub fn transformed(&self, change: &LinearChange) -> Result<AffinorField> {
        Ok(AffinorField(change.transform_mixed(&self.0)?))
    }
}

impl AffinorSource for AffinorField {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.0.eval(point)
    }

    fn jet(&self, point: &[f64]) -> Result<AffinorJet> {
        Ok(self.0.jet(point)?.first_order())
    }
}

/// Constant linear change of coordinates `ũ = A u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearChange {
    pub forward: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

impl LinearChange {
    pub fn new(forward: DMatrix<f64>) -> Result<Self> {
        if !forward.is_square() {
            return Err(Error::InvalidInput("coordinate change must be square".into()));
        }
        let det = forward.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "coordinate change is singular (det {det:e})"
            )));
        }
        let inverse = forward
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("coordinate change is not invertible".into()))?;
        Ok(LinearChange { forward, inverse })
    }

    pub fn dim(&self) -> usize {
        self.forward.nrows()
    }

    pub fn inverted(&self) -> LinearChange {
        LinearChange {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// Old coordinates as expressions in the new ones: `u = A⁻¹ ũ`.
    pub fn substitution(&self) -> Vec<Expr> {
        let n = self.dim();
        let coords: Vec<Expr> = (0..n).map(Expr::coord).collect();
        (0..n)
            .map(|i| {
                let row: Vec<f64> = (0..n).map(|j| self.inverse[(i, j)]).collect();
                linear_combination(&row, &coords)
            })
            .collect()
    }

    /// New coordinates of an old point.
    pub fn apply(&self, point: &[f64]) -> Vec<f64> {
        let v = &self.forward * nalgebra::DVector::from_column_slice(point);
        v.iter().copied().collect()
    }

    /// Old coordinates of a new point.
    pub fn pull(&self, point: &[f64]) -> Vec<f64> {
        let v = &self.inverse * nalgebra::DVector::from_column_slice(point);
        v.iter().copied().collect()
    }

    pub fn transform_scalar(&self, e: &Expr) -> Expr {
        e.substitute(&self.substitution())
    }

    fn transform_with(
        &self,
        m: &ExprMatrix,
        left: &DMatrix<f64>,
        right: &DMatrix<f64>,
    ) -> Result<ExprMatrix> {
        let n = self.dim();
        if m.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.dim(),
            });
        }
        let subst = self.substitution();
        let moved: Vec<Expr> = (0..n * n)
            .map(|k| m.get(k / n, k % n).substitute(&subst))
            .collect();
        ExprMatrix::from_fn(n, |i, j| {
            let coeffs: Vec<f64> = (0..n * n)
                .map(|k| left[(i, k / n)] * right[(k % n, j)])
                .collect();
            linear_combination(&coeffs, &moved)
        })
    }

    /// Contravariant rank-2: `A M Aᵀ`.
    pub fn transform_contravariant(&self, m: &ExprMatrix) -> Result<ExprMatrix> {
        self.transform_with(m, &self.forward, &self.forward.transpose())
    }

    /// Mixed (1,1): `A M A⁻¹`.
    pub fn transform_mixed(&self, m: &ExprMatrix) -> Result<ExprMatrix> {
        self.transform_with(m, &self.forward, &self.inverse)
    }

    /// Covariant rank-2: `A⁻ᵀ M A⁻¹`.
    pub fn transform_covariant(&self, m: &ExprMatrix) -> Result<ExprMatrix> {
        self.transform_with(m, &self.inverse.transpose(), &self.inverse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn parse_rejects_wrong_shapes() {
        let n = names(2);
        assert!(ExprMatrix::parse(&[vec!["1", "0"]], &n).is_err());
        assert!(ExprMatrix::parse(&[vec!["1", "0"], vec!["0"]], &n).is_err());
        assert!(ExprMatrix::parse(&[vec!["1", "u3"], vec!["0", "1"]], &n).is_err());
    }

    #[test]
    fn matrix_jet_layout() {
        let n = names(2);
        let m = ExprMatrix::parse(&[vec!["u1*u2", "0"], vec!["0", "u2^2"]], &n).unwrap();
        let j = m.jet(&[2.0, 3.0]).unwrap();
        assert_eq!(j.value[(0, 0)], 6.0);
        assert_eq!(j.grad[(0, 0, 0)], 3.0);
        assert_eq!(j.grad[(1, 1, 1)], 6.0);
        assert_eq!(j.hess[(0, 0, 0, 1)], 1.0);
        assert_eq!(j.hess[(1, 1, 1, 1)], 2.0);
    }

    #[test]
    fn linear_change_round_trip() {
        let n = names(2);
        let v = AffinorField::parse(&[vec!["u1", "u2"], vec!["1", "u1*u2"]], &n).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.25, 2.0]);
        let change = LinearChange::new(a).unwrap();
        let moved = v.transformed(&change).unwrap();
        let p = [0.3, -1.2];
        let q = change.apply(&p);
        let expect = &change.forward * v.value(&p).unwrap() * &change.inverse;
        let got = moved.value(&q).unwrap();
        assert!((expect - got).abs().max() < 1e-13);
        let back = moved.transformed(&change.inverted()).unwrap();
        assert!((back.value(&p).unwrap() - v.value(&p).unwrap()).abs().max() < 1e-13);
    }
}
