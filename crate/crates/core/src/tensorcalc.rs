//! Pointwise tensor calculus on expression fields.
//!
//! Conventions (used by every check downstream):
//!
//! * the input metric is contravariant, `g^{ij}`; the covariant metric and its
//!   derivatives are always derived from it;
//! * `Γ^i_{jk} = ½ g^{is}(∂_j g_{sk} + ∂_k g_{js} − ∂_s g_{jk})`;
//! * `R^i_{jkl} = ∂_k Γ^i_{jl} − ∂_l Γ^i_{jk} + Γ^i_{pk} Γ^p_{jl} − Γ^i_{pl} Γ^p_{jk}`;
//! * `R^{ij}_{kl} = g^{is} R^j_{skl}`, `Γ^{ij}_k = g^{is} Γ^j_{sk}`.
//!
//! With these signs the round unit sphere has `R^{12}_{21} = 1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::{AffinorJet, AffinorSource, MatrixJet, MetricField};
use crate::tensor::{Tensor3, Tensor4};

/// `|det g^{ij}|` below this is treated as singular when no sampling plan
/// supplies its own floor.
pub const DEFAULT_SINGULAR_DET: f64 = 1e-12;

/// Metric data at one point.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub point: Vec<f64>,
    pub det: f64,
    /// `g^{ij}`
    pub g_up: DMatrix<f64>,
    /// `g_{ij}`
    pub g_dn: DMatrix<f64>,
    /// `∂g^{ij}/∂u^k` at `(i, j, k)`
    pub dg_up: Tensor3,
    /// `∂²g^{ij}/∂u^k∂u^l` at `(i, j, k, l)`
    pub d2g_up: Tensor4,
    /// `∂g_{ij}/∂u^k`
    pub dg_dn: Tensor3,
    /// `Γ^i_{jk}` at `(i, j, k)`
    pub gamma: Tensor3,
    /// `∂Γ^i_{jk}/∂u^l` at `(i, j, k, l)`
    pub dgamma: Tensor4,
    /// `R^i_{jkl}`
    pub riemann_mixed: Tensor4,
    /// `R^{ij}_{kl}`
    pub riemann_up: Tensor4,
}

/// Christoffel symbols, curvature and the rest of [`PointFrame`] for `g` at
/// `point`.
pub fn metric_point_data(g: &MetricField, point: &[f64]) -> Result<PointFrame> {
    frame_from_jet(&g.jet(point)?, point, DEFAULT_SINGULAR_DET)
}

/// [`metric_point_data`] from an already evaluated metric jet.
pub fn frame_from_jet(jet: &MatrixJet, point: &[f64], det_floor: f64) -> Result<PointFrame> {
    let n = jet.dim();
    let g_up = jet.value.clone();
    let det = g_up.determinant();
    if !det.is_finite() || det.abs() <= det_floor {
        return Err(Error::SingularMetric {
            det,
            point: point.to_vec(),
        });
    }
    let g_dn = g_up.clone().try_inverse().ok_or_else(|| Error::SingularMetric {
        det,
        point: point.to_vec(),
    })?;
    let dg_up = jet.grad.clone();
    let d2g_up = jet.hess.clone();

    // ∂_k g_ab = -g_ap ∂_k g^pq g_qb
    let dg_dn = Tensor3::from_fn(n, |a, b, k| {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                s += g_dn[(a, p)] * dg_up[(p, q, k)] * g_dn[(q, b)];
            }
        }
        -s
    });
    // ∂_l ∂_k g_ab, differentiating the expression above once more
    let d2g_dn = Tensor4::from_fn(n, |a, b, k, l| {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                s += dg_dn[(a, p, l)] * dg_up[(p, q, k)] * g_dn[(q, b)]
                    + g_dn[(a, p)] * d2g_up[(p, q, k, l)] * g_dn[(q, b)]
                    + g_dn[(a, p)] * dg_up[(p, q, k)] * dg_dn[(q, b, l)];
            }
        }
        -s
    });

    // Christoffel symbols of the first kind, Γ_{s,jk}, and their derivatives.
    let first = Tensor3::from_fn(n, |s, j, k| {
        0.5 * (dg_dn[(s, k, j)] + dg_dn[(j, s, k)] - dg_dn[(j, k, s)])
    });
    let dfirst = Tensor4::from_fn(n, |s, j, k, l| {
        0.5 * (d2g_dn[(s, k, j, l)] + d2g_dn[(j, s, k, l)] - d2g_dn[(j, k, s, l)])
    });
    let gamma = Tensor3::from_fn(n, |i, j, k| (0..n).map(|s| g_up[(i, s)] * first[(s, j, k)]).sum());
    let dgamma = Tensor4::from_fn(n, |i, j, k, l| {
        (0..n)
            .map(|s| dg_up[(i, s, l)] * first[(s, j, k)] + g_up[(i, s)] * dfirst[(s, j, k, l)])
            .sum()
    });
    let riemann_mixed = Tensor4::from_fn(n, |i, j, k, l| {
        let mut r = dgamma[(i, j, l, k)] - dgamma[(i, j, k, l)];
        for p in 0..n {
            r += gamma[(i, p, k)] * gamma[(p, j, l)] - gamma[(i, p, l)] * gamma[(p, j, k)];
        }
        r
    });
    let riemann_up = Tensor4::from_fn(n, |i, j, k, l| {
        (0..n).map(|s| g_up[(i, s)] * riemann_mixed[(j, s, k, l)]).sum()
    });

    Ok(PointFrame {
        point: point.to_vec(),
        det,
        g_up,
        g_dn,
        dg_up,
        d2g_up,
        dg_dn,
        gamma,
        dgamma,
        riemann_mixed,
        riemann_up,
    })
}

impl PointFrame {
    pub fn dim(&self) -> usize {
        self.g_up.nrows()
    }

    /// Magnitude of the terms that make up `R^{ij}_{kl}`: the raising
    /// metric times the larger of `|∂Γ|` and `|Γ|²`.
    pub fn curvature_scale(&self) -> f64 {
        let g = self.g_up.amax();
        let gamma = self.gamma.max_abs();
        g * self.dgamma.max_abs().max(gamma * gamma)
    }

    /// `Γ^{ij}_k = g^{is} Γ^j_{sk}` at `(i, j, k)`.
    pub fn christoffel_raised(&self) -> Tensor3 {
        let n = self.dim();
        Tensor3::from_fn(n, |i, j, k| {
            (0..n).map(|s| self.g_up[(i, s)] * self.gamma[(j, s, k)]).sum()
        })
    }

    /// `b^{ij}_k = −g^{is} Γ^j_{sk}`, the local coefficient of the bracket.
    pub fn bracket_b(&self) -> Tensor3 {
        let raised = self.christoffel_raised();
        Tensor3::from_fn(self.dim(), |i, j, k| -raised[(i, j, k)])
    }

    /// `g_{is} w^s_j`.
    pub fn lower(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g_dn * w
    }

    /// `∇_j ∇_k h` (covariant Hessian) from a scalar gradient and Hessian.
    pub fn covariant_hessian(&self, grad: &[f64], hess: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |j, k| {
            hess[(j, k)] - (0..n).map(|p| self.gamma[(p, j, k)] * grad[p]).sum::<f64>()
        })
    }
}

/// Nijenhuis tensor `N^k_{ij}` stored at `(k, i, j)`.
pub fn nijenhuis_from_jet(v: &AffinorJet) -> Tensor3 {
    let n = v.value.nrows();
    let val = &v.value;
    let d = &v.grad;
    Tensor3::from_fn(n, |k, i, j| {
        let mut s = 0.0;
        for p in 0..n {
            s += val[(p, i)] * d[(k, j, p)] - val[(p, j)] * d[(k, i, p)]
                + val[(k, p)] * d[(p, i, j)]
                - val[(k, p)] * d[(p, j, i)];
        }
        s
    })
}

/// Nijenhuis tensor of `v` at `point`, `N^k_{ij}` at `(k, i, j)`.
pub fn nijenhuis(v: &dyn AffinorSource, point: &[f64]) -> Result<Tensor3> {
    Ok(nijenhuis_from_jet(&v.jet(point)?))
}

/// Haantjes tensor from an affinor value and its Nijenhuis tensor,
/// `H^i_{jk}` at `(i, j, k)`.
pub fn haantjes_from_parts(val: &DMatrix<f64>, nij: &Tensor3) -> Tensor3 {
    let n = val.nrows();
    let sq = val * val;
    // N^s_{rk} V^r_j at (s, j, k) and N^s_{jr} V^r_k at (s, j, k)
    let nv_left = Tensor3::from_fn(n, |s, j, k| (0..n).map(|r| nij[(s, r, k)] * val[(r, j)]).sum());
    let nv_right = Tensor3::from_fn(n, |s, j, k| (0..n).map(|r| nij[(s, j, r)] * val[(r, k)]).sum());
    Tensor3::from_fn(n, |i, j, k| {
        let mut h = 0.0;
        for s in 0..n {
            h += sq[(i, s)] * nij[(s, j, k)] - val[(i, s)] * nv_left[(s, j, k)]
                - val[(i, s)] * nv_right[(s, j, k)];
            for r in 0..n {
                h += nij[(i, s, r)] * val[(s, j)] * val[(r, k)];
            }
        }
        h
    })
}

pub fn haantjes_from_jet(v: &AffinorJet) -> Tensor3 {
    haantjes_from_parts(&v.value, &nijenhuis_from_jet(v))
}

/// Haantjes tensor of `v` at `point`, `H^i_{jk}` at `(i, j, k)`.
pub fn haantjes(v: &dyn AffinorSource, point: &[f64]) -> Result<Tensor3> {
    Ok(haantjes_from_jet(&v.jet(point)?))
}

/// `∇_k w^i_j` stored at `(i, j, k)`.
pub fn covariant_derivative_from_parts(frame: &PointFrame, w: &AffinorJet) -> Tensor3 {
    let n = frame.dim();
    Tensor3::from_fn(n, |i, j, k| {
        let mut s = w.grad[(i, j, k)];
        for p in 0..n {
            s += frame.gamma[(i, p, k)] * w.value[(p, j)] - frame.gamma[(p, j, k)] * w.value[(i, p)];
        }
        s
    })
}

/// `∇_k w^i_j` for the Levi-Civita connection of `g`, stored at `(i, j, k)`.
pub fn covariant_derivative_affinor(
    g: &MetricField,
    w: &dyn AffinorSource,
    point: &[f64],
) -> Result<Tensor3> {
    let frame = metric_point_data(g, point)?;
    Ok(covariant_derivative_from_parts(&frame, &w.jet(point)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::AffinorField;
    use std::f64::consts::FRAC_PI_4;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("u{i}")).collect()
    }

    fn sphere() -> MetricField {
        MetricField::parse(&[vec!["1", "0"], vec!["0", "1/sin(u1)^2"]], &names(2)).unwrap()
    }

    #[test]
    fn euclidean_is_flat() {
        let f = metric_point_data(&MetricField::euclidean(3).unwrap(), &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(f.gamma.max_abs(), 0.0);
        assert_eq!(f.riemann_up.max_abs(), 0.0);
    }

    #[test]
    fn sphere_christoffels() {
        // covariant diag(1, sin²θ): Γ¹₂₂ = −sinθ cosθ, Γ²₁₂ = cotθ
        let f = metric_point_data(&sphere(), &[FRAC_PI_4, 0.3]).unwrap();
        assert!((f.gamma[(0, 1, 1)] + 0.5).abs() < 1e-14);
        assert!((f.gamma[(1, 0, 1)] - 1.0).abs() < 1e-14);
        assert!((f.gamma[(1, 1, 0)] - 1.0).abs() < 1e-14);
        assert!((f.riemann_up[(0, 1, 1, 0)] - 1.0).abs() < 1e-12);
        assert!((f.riemann_up[(0, 1, 0, 1)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_metric_is_reported() {
        let g = MetricField::parse(&[vec!["u1", "0"], vec!["0", "1"]], &names(2)).unwrap();
        assert!(matches!(
            metric_point_data(&g, &[0.0, 1.0]),
            Err(Error::SingularMetric { .. })
        ));
    }

    #[test]
    fn nijenhuis_examples() {
        let n = names(2);
        let id = AffinorField::identity(2).unwrap();
        assert_eq!(nijenhuis(&id, &[0.4, 0.7]).unwrap().max_abs(), 0.0);
        let diag = AffinorField::parse(&[vec!["u1", "0"], vec!["0", "u2"]], &n).unwrap();
        assert_eq!(nijenhuis(&diag, &[0.4, 0.7]).unwrap().max_abs(), 0.0);
        let swapped = AffinorField::parse(&[vec!["u2", "0"], vec!["0", "u1"]], &n).unwrap();
        let t = nijenhuis(&swapped, &[1.0, 2.0]).unwrap();
        assert_eq!(t[(0, 0, 1)], 1.0);
        assert_eq!(t[(0, 1, 0)], -1.0);
    }

    #[test]
    fn covariant_derivative_examples() {
        let g = sphere();
        let id = AffinorField::identity(2).unwrap();
        let p = [0.9, -0.4];
        assert!(covariant_derivative_affinor(&g, &id, &p).unwrap().max_abs() < 1e-15);
        let scaled = AffinorField::parse(&[vec!["u1", "0"], vec!["0", "u1"]], &names(2)).unwrap();
        let d = covariant_derivative_affinor(&g, &scaled, &p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let expect = if i == j && k == 0 { 1.0 } else { 0.0 };
                    assert!((d[(i, j, k)] - expect).abs() < 1e-14);
                }
            }
        }
    }
}
