//! Sampled verification of metric compatibility, non-local bracket
//! conditions, Hamiltonian affinors and semi-Hamiltonian relations.
//!
//! Every residual is scale-normalized: an equation `A = B` between tensors
//! contributes `max|A − B| / (1 + max(max|A|, max|B|))`, and a vanishing
//! condition `T = 0` on a tensor built from a field and its derivatives
//! contributes `max|T| / (1 + max|inputs|)`.

use nalgebra::DMatrix;

use crate::diag::{min_gap, sorted_eigenvalues};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{AffinorField, AffinorJet, AffinorSource, MatrixJet, MetricField};
use crate::report::{CheckReport, PointResult, ReportBuilder};
use crate::sampling::{reciprocal_condition, sample_points, Guard, SamplingPlan};
use crate::tensor::{compare, matrix_max_abs, max_abs, scaled_residual, Tensor3};
use crate::tensorcalc::{
    covariant_derivative_from_parts, frame_from_jet, haantjes_from_jet, metric_point_data,
    nijenhuis_from_jet, PointFrame, DEFAULT_SINGULAR_DET,
};

/// Pencil members whose metric has reciprocal condition number below this
/// are skipped rather than evaluated.
pub const COMBINATION_RCOND_FLOOR: f64 = 1e-8;
/// Step of the finite differences used for assembled affinors.
pub const ASSEMBLY_FD_STEP: f64 = 1e-3;

/// Metric, `L` affinors and the constant symmetric `L×L` matrix `μ`.
///
/// `L = 0` is a local (Dubrovin–Novikov) bracket; `L = 1`, `w = 1`,
/// `μ = (K)` is the constant-curvature (Mokhov–Ferapontov) case.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalStructure {
    pub g: MetricField,
    pub affinors: Vec<AffinorField>,
    pub mu: DMatrix<f64>,
}

impl NonlocalStructure {
    pub fn new(g: MetricField, affinors: Vec<AffinorField>, mu: DMatrix<f64>) -> Result<Self> {
        let n = g.dim();
        for w in &affinors {
            if w.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.dim(),
                });
            }
        }
        let l = affinors.len();
        if mu.nrows() != l || mu.ncols() != l {
            return Err(Error::BadMu(format!(
                "expected {l}x{l}, found {}x{}",
                mu.nrows(),
                mu.ncols()
            )));
        }
        Ok(NonlocalStructure { g, affinors, mu })
    }

    /// Local bracket of a flat metric.
    pub fn local(g: MetricField) -> Self {
        NonlocalStructure {
            g,
            affinors: Vec::new(),
            mu: DMatrix::zeros(0, 0),
        }
    }

    /// Constant-curvature bracket with curvature `k`.
    pub fn constant_curvature(g: MetricField, k: f64) -> Result<Self> {
        let n = g.dim();
        NonlocalStructure::new(g, vec![AffinorField::identity(n)?], DMatrix::from_element(1, 1, k))
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn len(&self) -> usize {
        self.affinors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.affinors.is_empty()
    }

    /// `μ` must be symmetric and non-degenerate when `L > 0`.
    pub fn validate_mu(&self) -> Result<()> {
        validate_mu(&self.mu)
    }

    pub fn transformed(&self, change: &crate::fields::LinearChange) -> Result<Self> {
        Ok(NonlocalStructure {
            g: self.g.transformed(change)?,
            affinors: self
                .affinors
                .iter()
                .map(|w| w.transformed(change))
                .collect::<Result<_>>()?,
            mu: self.mu.clone(),
        })
    }
}

pub fn validate_mu(mu: &DMatrix<f64>) -> Result<()> {
    let l = mu.nrows();
    if mu.ncols() != l {
        return Err(Error::BadMu("not square".into()));
    }
    if l == 0 {
        return Ok(());
    }
    let scale = matrix_max_abs(mu);
    if mu.iter().any(|x| !x.is_finite()) {
        return Err(Error::BadMu("non-finite entry".into()));
    }
    if (mu - mu.transpose()).amax() > 1e-12 * (1.0 + scale) {
        return Err(Error::BadMu("not symmetric".into()));
    }
    if scale == 0.0 || reciprocal_condition(mu) < 1e-12 {
        return Err(Error::BadMu("singular".into()));
    }
    Ok(())
}

/// Hamiltonian density `h` and structural-flow potentials `f_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianData {
    pub h: Expr,
    pub f: Vec<Expr>,
}

/// A system `u_t = V(u) u_x`, given either by explicit components or by a
/// non-local structure together with `(h, f_n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum HydroSystem {
    Explicit(AffinorField),
    Hamiltonian(AssembledAffinor),
}

impl HydroSystem {
    pub fn hamiltonian_data(&self) -> Option<HamiltonianData> {
        match self {
            HydroSystem::Explicit(_) => None,
            HydroSystem::Hamiltonian(a) => Some(HamiltonianData {
                h: a.h.clone(),
                f: a.f.clone(),
            }),
        }
    }
}

impl AffinorSource for HydroSystem {
    fn dim(&self) -> usize {
        match self {
            HydroSystem::Explicit(v) => AffinorSource::dim(v),
            HydroSystem::Hamiltonian(a) => a.dim(),
        }
    }

    fn value(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            HydroSystem::Explicit(v) => v.value(point),
            HydroSystem::Hamiltonian(a) => a.value(point),
        }
    }

    fn jet(&self, point: &[f64]) -> Result<AffinorJet> {
        match self {
            HydroSystem::Explicit(v) => v.jet(point),
            HydroSystem::Hamiltonian(a) => a.jet(point),
        }
    }
}

// ---------------------------------------------------------------------------
// Pointwise building blocks

fn singular(point: &[f64], det: f64) -> Error {
    Error::SingularMetric {
        det,
        point: point.to_vec(),
    }
}

fn inverse_checked(m: &DMatrix<f64>, point: &[f64]) -> Result<DMatrix<f64>> {
    let det = m.determinant();
    if !det.is_finite() || det.abs() <= DEFAULT_SINGULAR_DET {
        return Err(singular(point, det));
    }
    m.clone().try_inverse().ok_or_else(|| singular(point, det))
}

/// `v^i_j = g₁^{is} g_{2,sj}`, i.e. `g₁ · g₂⁻¹`.
pub fn pencil_affinor(g1: &MetricField, g2: &MetricField, point: &[f64]) -> Result<DMatrix<f64>> {
    let inv = inverse_checked(&g2.eval(point)?, point)?;
    Ok(g1.eval(point)? * inv)
}

/// Value and first derivatives of `g₁ g₂⁻¹` from the metric jets.
pub fn pencil_affinor_jet(j1: &MatrixJet, j2: &MatrixJet, point: &[f64]) -> Result<AffinorJet> {
    let n = j1.dim();
    let inv = inverse_checked(&j2.value, point)?;
    let value = &j1.value * &inv;
    let mut grad = Tensor3::zeros(n);
    for k in 0..n {
        let d1 = DMatrix::from_fn(n, n, |a, b| j1.grad[(a, b, k)]);
        let d2 = DMatrix::from_fn(n, n, |a, b| j2.grad[(a, b, k)]);
        let dv = (&d1 - &value * &d2) * &inv;
        for i in 0..n {
            for j in 0..n {
                grad[(i, j, k)] = dv[(i, j)];
            }
        }
    }
    Ok(AffinorJet { value, grad })
}

/// Pencil eigenvalues sorted by (real, imaginary) and their smallest
/// pairwise distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilSpectrum {
    pub eigenvalues: Vec<num_complex::Complex64>,
    pub gap: f64,
}

/// Roots of `det(g₁ − λ g₂) = 0`, as eigenvalues of the pencil affinor.
pub fn pencil_eigenvalues(g1: &MetricField, g2: &MetricField, point: &[f64]) -> Result<PencilSpectrum> {
    let v = pencil_affinor(g1, g2, point)?;
    let eigenvalues = sorted_eigenvalues(&v);
    let gap = min_gap(&eigenvalues);
    Ok(PencilSpectrum { eigenvalues, gap })
}

/// Bracket coefficients `b^{ij}_k = −g^{is}Γ^j_{sk}` with the residuals of
/// `∂_k g^{ij} = b^{ij}_k + b^{ji}_k` and `g^{is}b^{jk}_s = g^{js}b^{ik}_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketCoefficients {
    pub b: Tensor3,
    pub derivative_residual: f64,
    pub symmetry_residual: f64,
}

pub fn compute_b(g: &MetricField, point: &[f64]) -> Result<BracketCoefficients> {
    Ok(bracket_coefficients(&metric_point_data(g, point)?))
}

fn bracket_coefficients(frame: &PointFrame) -> BracketCoefficients {
    let n = frame.dim();
    let b = frame.bracket_b();
    let sum = Tensor3::from_fn(n, |i, j, k| b[(i, j, k)] + b[(j, i, k)]);
    let derivative_residual = compare(frame.dg_up.as_slice(), sum.as_slice());
    let t = Tensor3::from_fn(n, |i, j, k| {
        (0..n).map(|s| frame.g_up[(i, s)] * b[(j, k, s)]).sum()
    });
    let swapped = Tensor3::from_fn(n, |i, j, k| t[(j, i, k)]);
    let symmetry_residual = compare(t.as_slice(), swapped.as_slice());
    BracketCoefficients {
        b,
        derivative_residual,
        symmetry_residual,
    }
}

fn symmetric_residual(m: &DMatrix<f64>) -> f64 {
    compare(m.as_slice(), m.transpose().as_slice())
}

/// Residual of `T(i, j, k) = T(i, k, j)`.
fn last_pair_symmetric_residual(t: &Tensor3) -> f64 {
    let swapped = Tensor3::from_fn(t.dim(), |i, j, k| t[(i, k, j)]);
    compare(t.as_slice(), swapped.as_slice())
}

fn commutator_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    compare((a * b).as_slice(), (b * a).as_slice())
}

/// Largest entry of an affinor and its first derivatives.
fn jet_scale(v: &AffinorJet) -> f64 {
    matrix_max_abs(&v.value).max(v.grad.max_abs())
}

/// Right-hand side of the Gauss equation,
/// `Σ μ^{mn} ((w_m)^i_l (w_n)^j_k − (w_m)^j_l (w_n)^i_k)` at `(i, j, k, l)`.
pub fn gauss_rhs(affinors: &[DMatrix<f64>], mu: &DMatrix<f64>, n: usize) -> crate::tensor::Tensor4 {
    crate::tensor::Tensor4::from_fn(n, |i, j, k, l| {
        let mut s = 0.0;
        for (m, wm) in affinors.iter().enumerate() {
            for (q, wn) in affinors.iter().enumerate() {
                let c = mu[(m, q)];
                if c != 0.0 {
                    s += c * (wm[(i, l)] * wn[(j, k)] - wm[(j, l)] * wn[(i, k)]);
                }
            }
        }
        s
    })
}

pub const FERAPONTOV_CONDITIONS: [&str; 6] = [
    "metric-symmetry",
    "lowered-affinor-symmetry",
    "codazzi",
    "gauss",
    "affinor-commutativity",
    "raised-affinor-symmetry",
];

/// Residuals of the Ferapontov conditions for one structure at one point.
/// Affinor conditions are reported only when `L > 0`.
fn ferapontov_residuals(
    frame: &PointFrame,
    affinors: &[AffinorJet],
    mu: &DMatrix<f64>,
    suffix: &str,
    out: &mut PointResult,
) {
    let n = frame.dim();
    out.push(format!("metric-symmetry{suffix}"), symmetric_residual(&frame.g_up));
    if !affinors.is_empty() {
        let lowered = affinors
            .iter()
            .map(|w| symmetric_residual(&frame.lower(&w.value)))
            .fold(0.0, f64::max);
        out.push(format!("lowered-affinor-symmetry{suffix}"), lowered);
        let codazzi = affinors
            .iter()
            .map(|w| last_pair_symmetric_residual(&covariant_derivative_from_parts(frame, w)))
            .fold(0.0, f64::max);
        out.push(format!("codazzi{suffix}"), codazzi);
    }
    let values: Vec<DMatrix<f64>> = affinors.iter().map(|w| w.value.clone()).collect();
    let rhs = gauss_rhs(&values, mu, n);
    out.push(
        format!("gauss{suffix}"),
        compare(frame.riemann_up.as_slice(), rhs.as_slice()),
    );
    if !affinors.is_empty() {
        let mut comm = 0.0_f64;
        for a in 0..values.len() {
            for b in a + 1..values.len() {
                comm = comm.max(commutator_residual(&values[a], &values[b]));
            }
        }
        out.push(format!("affinor-commutativity{suffix}"), comm);
        let raised = values
            .iter()
            .map(|w| symmetric_residual(&(&frame.g_up * w.transpose())))
            .fold(0.0, f64::max);
        out.push(format!("raised-affinor-symmetry{suffix}"), raised);
    }
}

fn lambda_label(l1: f64, l2: f64) -> String {
    format!("[{l1},{l2}]")
}

/// Metric frame of `λ₁g₁ + λ₂g₂`, or `None` when the combination is
/// singular or too ill-conditioned to evaluate.
fn combination_frame(
    j1: &MatrixJet,
    j2: &MatrixJet,
    (l1, l2): (f64, f64),
    point: &[f64],
    det_floor: f64,
) -> Option<PointFrame> {
    let jet = j1.combine(l1, j2, l2);
    if reciprocal_condition(&jet.value) < COMBINATION_RCOND_FLOOR {
        return None;
    }
    frame_from_jet(&jet, point, det_floor).ok()
}

// ---------------------------------------------------------------------------
// Sampling helpers

fn prepare(
    name: &str,
    plan: &SamplingPlan,
    dim: usize,
    guards: &[Guard<'_>],
) -> Result<(ReportBuilder, Vec<Vec<f64>>)> {
    plan.check_dim(dim)?;
    let samples = sample_points(plan, guards)?;
    let mut builder = ReportBuilder::new(name, plan);
    builder.add_sample_stats(&samples);
    Ok((builder, samples.points))
}

/// Explains `skipped[..]` counters when some pencil member was skipped.
fn skipped_note(report: &mut CheckReport) {
    if report.extras.keys().any(|k| k.starts_with("skipped")) {
        report.notes.push(format!(
            "pencil members with |det| <= det_floor or reciprocal condition below \
             {COMBINATION_RCOND_FLOOR:e} were skipped; counts are in extras"
        ));
    }
}

// ---------------------------------------------------------------------------
// Checks

/// Vanishing of the curvature `R^{ij}_{kl}`, scaled by the size of the
/// Christoffel terms it is assembled from.
pub fn check_riemann_flat(g: &MetricField, plan: &SamplingPlan) -> Result<CheckReport> {
    let guards = [Guard::metric_det("g", g, plan.det_floor)];
    let (mut b, points) = prepare("riemann-flat", plan, g.dim(), &guards)?;
    b.declare("riemann-flat");
    b.evaluate(&points, |p| {
        let frame = frame_from_jet(&g.jet(p)?, p, plan.det_floor)?;
        let mut r = PointResult::new();
        let max = frame.riemann_up.max_abs();
        r.push("riemann-flat", scaled_residual(max, frame.curvature_scale()));
        Ok(r)
    });
    Ok(b.finish())
}

/// Self-consistency of the bracket coefficients derived from the
/// Levi-Civita connection.
pub fn check_levi_civita_consistency(g: &MetricField, plan: &SamplingPlan) -> Result<CheckReport> {
    let guards = [Guard::metric_det("g", g, plan.det_floor)];
    let (mut b, points) = prepare("levi-civita-consistency", plan, g.dim(), &guards)?;
    b.declare("metric-derivative-split");
    b.declare("raised-b-symmetry");
    b.evaluate(&points, |p| {
        let frame = frame_from_jet(&g.jet(p)?, p, plan.det_floor)?;
        let bc = bracket_coefficients(&frame);
        let mut r = PointResult::new();
        r.push("metric-derivative-split", bc.derivative_residual);
        r.push("raised-b-symmetry", bc.symmetry_residual);
        Ok(r)
    });
    Ok(b.finish())
}

fn pair_guards<'a>(g1: &'a MetricField, g2: &'a MetricField, plan: &SamplingPlan) -> Vec<Guard<'a>> {
    vec![
        Guard::metric_det("g1", g1, plan.det_floor),
        Guard::metric_det("g2", g2, plan.det_floor),
    ]
}

fn check_pair_dims(g1: &MetricField, g2: &MetricField) -> Result<()> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch {
            expected: g1.dim(),
            found: g2.dim(),
        });
    }
    Ok(())
}

/// Distinctness of the pencil eigenvalues. Points where the gap is at or
/// below `gap_floor` count as violations.
pub fn check_nonsingular(g1: &MetricField, g2: &MetricField, plan: &SamplingPlan) -> Result<CheckReport> {
    check_pair_dims(g1, g2)?;
    let guards = [
        Guard::evaluable("g1", |p| g1.eval(p).map(|_| ())),
        Guard::metric_det("g2", g2, plan.det_floor),
    ];
    let (mut b, points) = prepare("nonsingular-pencil", plan, g1.dim(), &guards)?;
    b.declare("distinct-eigenvalues");
    let gaps: Vec<f64> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|p| pencil_eigenvalues(g1, g2, p).map(|s| s.gap).unwrap_or(f64::NAN))
            .collect()
    };
    let mut min = f64::INFINITY;
    for (p, gap) in points.iter().zip(&gaps) {
        if gap.is_nan() {
            b.reject("evaluation: singular metric");
            continue;
        }
        min = min.min(*gap);
        let mut r = PointResult::new();
        r.push("distinct-eigenvalues", if *gap > plan.gap_floor { 0.0 } else { 1.0 });
        b.accept(p, r);
    }
    if min.is_finite() {
        b.extra("min_gap", min);
    }
    b.note(format!(
        "distinct-eigenvalues residual is 1 at points whose eigenvalue gap is <= {:e}",
        plan.gap_floor
    ));
    Ok(b.finish())
}

fn pencil_check(
    name: &str,
    g1: &MetricField,
    g2: &MetricField,
    plan: &SamplingPlan,
    with_nijenhuis: bool,
    with_curvature: bool,
) -> Result<CheckReport> {
    check_pair_dims(g1, g2)?;
    let guards = pair_guards(g1, g2, plan);
    let (mut b, points) = prepare(name, plan, g1.dim(), &guards)?;
    if with_nijenhuis {
        b.declare("pencil-nijenhuis");
    }
    for &(l1, l2) in &plan.lambda_samples {
        b.declare(&format!("connection-pencil{}", lambda_label(l1, l2)));
        if with_curvature {
            b.declare(&format!("curvature-pencil{}", lambda_label(l1, l2)));
        }
    }
    b.evaluate(&points, |p| {
        let j1 = g1.jet(p)?;
        let j2 = g2.jet(p)?;
        let f1 = frame_from_jet(&j1, p, plan.det_floor)?;
        let f2 = frame_from_jet(&j2, p, plan.det_floor)?;
        let mut r = PointResult::new();
        if with_nijenhuis {
            let v = pencil_affinor_jet(&j1, &j2, p)?;
            let nij = nijenhuis_from_jet(&v);
            r.push("pencil-nijenhuis", scaled_residual(nij.max_abs(), jet_scale(&v)));
        }
        let c1 = f1.christoffel_raised();
        let c2 = f2.christoffel_raised();
        for &(l1, l2) in &plan.lambda_samples {
            let label = lambda_label(l1, l2);
            let Some(frame) = combination_frame(&j1, &j2, (l1, l2), p, plan.det_floor) else {
                r.count(format!("skipped{label}"), 1.0);
                continue;
            };
            let combined: Vec<f64> = c1
                .as_slice()
                .iter()
                .zip(c2.as_slice())
                .map(|(a, b)| l1 * a + l2 * b)
                .collect();
            r.push(
                format!("connection-pencil{label}"),
                compare(frame.christoffel_raised().as_slice(), &combined),
            );
            if with_curvature {
                let combined: Vec<f64> = f1
                    .riemann_up
                    .as_slice()
                    .iter()
                    .zip(f2.riemann_up.as_slice())
                    .map(|(a, b)| l1 * a + l2 * b)
                    .collect();
                r.push(
                    format!("curvature-pencil{label}"),
                    compare(frame.riemann_up.as_slice(), &combined),
                );
            }
        }
        Ok(r)
    });
    let mut report = b.finish();
    skipped_note(&mut report);
    Ok(report)
}

/// Almost compatibility: vanishing Nijenhuis tensor of `g₁g₂⁻¹` and the
/// connection pencil identity `Γ^{ij}_k(λ₁g₁+λ₂g₂) = λ₁Γ^{ij}_{1,k} + λ₂Γ^{ij}_{2,k}`.
pub fn check_almost_compatible(g1: &MetricField, g2: &MetricField, plan: &SamplingPlan) -> Result<CheckReport> {
    pencil_check("almost-compatible", g1, g2, plan, true, false)
}

/// Compatibility: the connection and curvature pencil identities for every
/// `λ` pair in the plan.
pub fn check_compatible(g1: &MetricField, g2: &MetricField, plan: &SamplingPlan) -> Result<CheckReport> {
    pencil_check("compatible-metrics", g1, g2, plan, false, true)
}

fn structure_jets(s: &NonlocalStructure, p: &[f64]) -> Result<Vec<AffinorJet>> {
    s.affinors.iter().map(|w| w.jet(p)).collect()
}

fn structure_guards<'a>(label: &str, s: &'a NonlocalStructure, plan: &SamplingPlan) -> Vec<Guard<'a>> {
    let mut guards = vec![Guard::metric_det(label, &s.g, plan.det_floor)];
    for (n, w) in s.affinors.iter().enumerate() {
        guards.push(Guard::evaluable(&format!("{label}.w{}", n + 1), move |p| {
            w.value(p).map(|_| ())
        }));
    }
    guards
}

/// Ferapontov's conditions for a non-local bracket of hydrodynamic type:
/// symmetry of `g_{ik}w^k_j`, the Codazzi equation `∇_k w^i_j = ∇_j w^i_k`,
/// the Gauss equation, commutativity of the affinors, and symmetry of
/// `g^{is}w^j_s`. For `L = 0` the Gauss equation is flatness.
pub fn check_ferapontov(s: &NonlocalStructure, plan: &SamplingPlan) -> Result<CheckReport> {
    if !s.is_empty() {
        s.validate_mu()?;
    }
    let guards = structure_guards("g", s, plan);
    let (mut b, points) = prepare("ferapontov", plan, s.dim(), &guards)?;
    for c in FERAPONTOV_CONDITIONS {
        if s.is_empty() && c != "metric-symmetry" && c != "gauss" {
            continue;
        }
        b.declare(c);
    }
    b.evaluate(&points, |p| {
        let frame = frame_from_jet(&s.g.jet(p)?, p, plan.det_floor)?;
        let jets = structure_jets(s, p)?;
        let mut r = PointResult::new();
        ferapontov_residuals(&frame, &jets, &s.mu, "", &mut r);
        Ok(r)
    });
    Ok(b.finish())
}

fn block_diagonal(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (la, lb) = (a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(la + lb, la + lb);
    m.view_mut((0, 0), (la, la)).copy_from(a);
    m.view_mut((la, la), (lb, lb)).copy_from(b);
    m
}

/// Compatibility of two non-local brackets. Each structure must satisfy
/// the Ferapontov conditions on its own (reported as `leg1:`/`leg2:`
/// records); every pencil member `λ₁S₁ + λ₂S₂` (metric `λ₁g₁ + λ₂g₂`,
/// concatenated affinors, `μ = diag(λ₁μ₁, λ₂μ₂)`) must satisfy them too,
/// along with the cross conditions `g₁^{is}(w_{2,n})^j_s` and
/// `g₂^{is}(w_{1,n})^j_s` symmetric and `[w_{1,m}, w_{2,n}] = 0`.
pub fn check_bracket_pair_compatibility(
    s1: &NonlocalStructure,
    s2: &NonlocalStructure,
    plan: &SamplingPlan,
) -> Result<CheckReport> {
    check_pair_dims(&s1.g, &s2.g)?;
    let leg1 = check_ferapontov(s1, plan)?;
    let leg2 = check_ferapontov(s2, plan)?;

    let mut guards = structure_guards("g1", s1, plan);
    guards.extend(structure_guards("g2", s2, plan));
    let (mut b, points) = prepare("bracket-pencil", plan, s1.dim(), &guards)?;
    for (prefix, leg) in [("leg1:", &leg1), ("leg2:", &leg2)] {
        for c in &leg.conditions {
            b.declare_with(&format!("{prefix}{}", c.condition_id), c.tol_pass, c.tol_fail);
        }
    }
    let has_cross = !s1.is_empty() || !s2.is_empty();
    if has_cross {
        b.declare("cross-symmetry-g1-w2");
        b.declare("cross-symmetry-g2-w1");
        b.declare("cross-commutativity");
    }

    b.evaluate(&points, |p| {
        let j1 = s1.g.jet(p)?;
        let j2 = s2.g.jet(p)?;
        let f1 = frame_from_jet(&j1, p, plan.det_floor)?;
        let f2 = frame_from_jet(&j2, p, plan.det_floor)?;
        let w1 = structure_jets(s1, p)?;
        let w2 = structure_jets(s2, p)?;
        let mut r = PointResult::new();
        ferapontov_residuals(&f1, &w1, &s1.mu, "", &mut r);
        for (id, _) in r.residuals.iter_mut() {
            *id = format!("leg1:{id}");
        }
        let mut r2 = PointResult::new();
        ferapontov_residuals(&f2, &w2, &s2.mu, "", &mut r2);
        r.residuals
            .extend(r2.residuals.into_iter().map(|(id, v)| (format!("leg2:{id}"), v)));

        if has_cross {
            let sym1 = w2
                .iter()
                .map(|w| symmetric_residual(&(&f1.g_up * w.value.transpose())))
                .fold(0.0, f64::max);
            let sym2 = w1
                .iter()
                .map(|w| symmetric_residual(&(&f2.g_up * w.value.transpose())))
                .fold(0.0, f64::max);
            let mut comm = 0.0_f64;
            for a in &w1 {
                for c in &w2 {
                    comm = comm.max(commutator_residual(&a.value, &c.value));
                }
            }
            r.push("cross-symmetry-g1-w2", sym1);
            r.push("cross-symmetry-g2-w1", sym2);
            r.push("cross-commutativity", comm);
        }

        for &(l1, l2) in &plan.lambda_samples {
            let label = lambda_label(l1, l2);
            let Some(frame) = combination_frame(&j1, &j2, (l1, l2), p, plan.det_floor) else {
                r.count(format!("skipped{label}"), 1.0);
                continue;
            };
            let mut affinors = Vec::new();
            let mut mu1 = DMatrix::zeros(0, 0);
            let mut mu2 = DMatrix::zeros(0, 0);
            if l1 != 0.0 {
                affinors.extend(w1.iter().cloned());
                mu1 = &s1.mu * l1;
            }
            if l2 != 0.0 {
                affinors.extend(w2.iter().cloned());
                mu2 = &s2.mu * l2;
            }
            let mu = block_diagonal(&mu1, &mu2);
            ferapontov_residuals(&frame, &affinors, &mu, &label, &mut r);
        }
        Ok(r)
    });
    for (k, leg) in [(1, &leg1), (2, &leg2)] {
        if leg.verdict != crate::report::Verdict::Pass {
            b.note(format!(
                "structure {k} does not satisfy the Ferapontov conditions on its own ({})",
                leg.verdict
            ));
        }
    }
    let mut report = b.finish();
    skipped_note(&mut report);
    Ok(report)
}

/// Relations satisfied by every non-locally Hamiltonian affinor:
/// `g_{is}V^s_j = g_{js}V^s_i` and `∇_jV^i_k = ∇_kV^i_j`.
pub fn check_hamiltonian_affinor(
    v: &dyn AffinorSource,
    g: &MetricField,
    plan: &SamplingPlan,
) -> Result<CheckReport> {
    if v.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: v.dim(),
        });
    }
    let guards = [
        Guard::metric_det("g", g, plan.det_floor),
        Guard::evaluable("V", |p| v.value(p).map(|_| ())),
    ];
    let (mut b, points) = prepare("hamiltonian-affinor", plan, g.dim(), &guards)?;
    b.declare("lowered-affinor-symmetry");
    b.declare("codazzi");
    b.evaluate(&points, |p| {
        let frame = frame_from_jet(&g.jet(p)?, p, plan.det_floor)?;
        let jet = v.jet(p)?;
        let mut r = PointResult::new();
        r.push("lowered-affinor-symmetry", symmetric_residual(&frame.lower(&jet.value)));
        r.push(
            "codazzi",
            last_pair_symmetric_residual(&covariant_derivative_from_parts(&frame, &jet)),
        );
        Ok(r)
    });
    Ok(b.finish())
}

/// Closedness of `ω_s = (∂h/∂u^j) w^j_s`, the local condition for a
/// potential `f` with `∂f/∂u^s = ω_s` to exist.
pub fn check_structural_flow_integrability(
    h: &Expr,
    w: &AffinorField,
    plan: &SamplingPlan,
) -> Result<CheckReport> {
    let n = AffinorSource::dim(w);
    if h.min_dimension() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.min_dimension(),
        });
    }
    let guards = [
        Guard::evaluable("h", |p| h.eval_jet2(p).map(|_| ())),
        Guard::evaluable("w", |p| w.value(p).map(|_| ())),
    ];
    let (mut b, points) = prepare("structural-flow", plan, n, &guards)?;
    b.declare("closedness");
    b.evaluate(&points, |p| {
        let hj = h.eval_jet2(p)?;
        let wj = w.jet(p)?;
        // dω(s, r) = ∂_r ω_s
        let domega = DMatrix::from_fn(n, n, |s, r| {
            (0..n)
                .map(|j| hj.hess(j, r) * wj.value[(j, s)] + hj.grad[j] * wj.grad[(j, s, r)])
                .sum::<f64>()
        });
        let mut r = PointResult::new();
        r.push("closedness", symmetric_residual(&domega));
        Ok(r)
    });
    Ok(b.finish())
}

/// `V^i_j = g^{is}∇_s∇_j h + Σ μ^{mn} (w_m)^i_j f_n` at `point`.
pub fn assemble_hamiltonian_affinor(
    s: &NonlocalStructure,
    h: &Expr,
    f: &[Expr],
    point: &[f64],
) -> Result<DMatrix<f64>> {
    if f.len() != s.len() {
        return Err(Error::ArityMismatch {
            expected: s.len(),
            found: f.len(),
        });
    }
    let frame = metric_point_data(&s.g, point)?;
    let hj = h.eval_jet2(point)?;
    let hess = DMatrix::from_fn(point.len(), point.len(), |j, k| hj.hess(j, k));
    let mut v = &frame.g_up * frame.covariant_hessian(&hj.grad, &hess);
    if !f.is_empty() {
        let fv = f.iter().map(|e| e.eval(point)).collect::<Result<Vec<_>>>()?;
        for (m, w) in s.affinors.iter().enumerate() {
            let coeff: f64 = (0..f.len()).map(|q| s.mu[(m, q)] * fv[q]).sum();
            if coeff != 0.0 {
                v += w.value(point)? * coeff;
            }
        }
    }
    Ok(v)
}

/// The affinor of the system generated by a non-local structure and
/// `(h, f_n)`, as a field. Values are exact jet evaluations; first
/// derivatives use fourth-order central differences with step `fd_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledAffinor {
    pub structure: NonlocalStructure,
    pub h: Expr,
    pub f: Vec<Expr>,
    pub fd_step: f64,
}

impl AssembledAffinor {
    pub fn new(structure: NonlocalStructure, h: Expr, f: Vec<Expr>) -> Result<Self> {
        if f.len() != structure.len() {
            return Err(Error::ArityMismatch {
                expected: structure.len(),
                found: f.len(),
            });
        }
        let n = structure.dim();
        if let Some(bad) = std::iter::once(&h).chain(&f).find(|e| e.min_dimension() > n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.min_dimension(),
            });
        }
        Ok(AssembledAffinor {
            structure,
            h,
            f,
            fd_step: ASSEMBLY_FD_STEP,
        })
    }
}

impl AffinorSource for AssembledAffinor {
    fn dim(&self) -> usize {
        self.structure.dim()
    }

    fn value(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        assemble_hamiltonian_affinor(&self.structure, &self.h, &self.f, point)
    }

    fn jet(&self, point: &[f64]) -> Result<AffinorJet> {
        let n = self.dim();
        let value = self.value(point)?;
        let step = self.fd_step;
        let mut grad = Tensor3::zeros(n);
        let mut q = point.to_vec();
        for k in 0..n {
            let mut at = |offset: f64| {
                q[k] = point[k] + offset;
                self.value(&q)
            };
            let p2 = at(2.0 * step)?;
            let p1 = at(step)?;
            let m1 = at(-step)?;
            let m2 = at(-2.0 * step)?;
            q[k] = point[k];
            let d = (&m2 - &p2 + (&p1 - &m1) * 8.0) / (12.0 * step);
            for i in 0..n {
                for j in 0..n {
                    grad[(i, j, k)] = d[(i, j)];
                }
            }
        }
        Ok(AffinorJet { value, grad })
    }
}

fn check_diagonal_lists(v: &[Expr], g: Option<&[Expr]>) -> Result<usize> {
    let n = v.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty list of characteristic speeds".into()));
    }
    if let Some(g) = g {
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.len(),
            });
        }
    }
    let all = v.iter().chain(g.into_iter().flatten());
    if let Some(bad) = all.clone().find(|e| e.min_dimension() > n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.min_dimension(),
        });
    }
    Ok(n)
}

/// Both sides of `∂_j V^i = ½ (∂_j g_i / g_i)(V^j − V^i)` for all `i ≠ j`, in
/// row-major order of `(i, j)`.
pub fn tsarev_terms(v: &[Expr], g: &[Expr], point: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let vj = v.iter().map(|e| e.eval_jet2(point)).collect::<Result<Vec<_>>>()?;
    let gj = g.iter().map(|e| e.eval_jet2(point)).collect::<Result<Vec<_>>>()?;
    let n = v.len();
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        if gj[i].value == 0.0 {
            return Err(Error::Domain {
                node: g[i].to_string(),
                reason: "vanishing metric coefficient".into(),
            });
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            lhs.push(vj[i].grad[j]);
            rhs.push(0.5 * gj[i].grad[j] / gj[i].value * (vj[j].value - vj[i].value));
        }
    }
    Ok((lhs, rhs))
}

/// The relation between the characteristic speeds `V^i` of a diagonal
/// system and a diagonal covariant metric `g_i` of a Hamiltonian structure.
pub fn check_tsarev_relation(v: &[Expr], g: &[Expr], plan: &SamplingPlan) -> Result<CheckReport> {
    let n = check_diagonal_lists(v, Some(g))?;
    let floor = plan.det_floor;
    let guards = [
        Guard::new(format!("|g_i| <= {floor:e}"), move |p| {
            for e in g {
                if e.eval(p)?.abs() <= floor {
                    return Ok(false);
                }
            }
            Ok(true)
        }),
        Guard::evaluable("V", |p| {
            v.iter().try_for_each(|e| e.eval_jet2(p).map(|_| ()))
        }),
    ];
    let (mut b, points) = prepare("tsarev-relation", plan, n, &guards)?;
    b.declare("tsarev");
    b.evaluate(&points, |p| {
        let (lhs, rhs) = tsarev_terms(v, g, p)?;
        let mut r = PointResult::new();
        r.push("tsarev", compare(&lhs, &rhs));
        Ok(r)
    });
    Ok(b.finish())
}

/// Both sides of the semi-Hamiltonian relation
/// `∂_k(∂_jV^i/(V^j−V^i)) = ∂_j(∂_kV^i/(V^k−V^i))` for pairwise distinct
/// `(i, j, k)` with `j < k`, in lexicographic order.
pub fn semihamiltonian_terms(v: &[Expr], point: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let jets = v.iter().map(|e| e.eval_jet2(point)).collect::<Result<Vec<_>>>()?;
    let n = v.len();
    // ∂_k (∂_j V^i / (V^j − V^i))
    let term = |i: usize, j: usize, k: usize| -> Result<f64> {
        let d = jets[j].value - jets[i].value;
        if d == 0.0 {
            return Err(Error::EigenvalueCollision {
                gap: 0.0,
                point: point.to_vec(),
            });
        }
        let num = jets[i].grad[j];
        let dd = jets[j].grad[k] - jets[i].grad[k];
        Ok(jets[i].hess(j, k) / d - num * dd / (d * d))
    };
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in j + 1..n {
                if i == j || i == k {
                    continue;
                }
                lhs.push(term(i, j, k)?);
                rhs.push(term(i, k, j)?);
            }
        }
    }
    Ok((lhs, rhs))
}

/// Smallest `|V^i − V^j|` over `i ≠ j` (infinite for one component).
pub fn speed_gap(v: &[Expr], point: &[f64]) -> Result<f64> {
    let vals = v.iter().map(|e| e.eval(point)).collect::<Result<Vec<_>>>()?;
    let mut gap = f64::INFINITY;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            gap = gap.min((vals[i] - vals[j]).abs());
        }
    }
    Ok(gap)
}

/// Tsarev's semi-Hamiltonian condition for a diagonal system with
/// characteristic speeds `V^i`. Points where two speeds come within
/// `gap_floor` of each other are rejected.
pub fn check_semihamiltonian(v: &[Expr], plan: &SamplingPlan) -> Result<CheckReport> {
    let n = check_diagonal_lists(v, None)?;
    let floor = plan.gap_floor;
    let guards = [Guard::new(format!("speed gap <= {floor:e}"), move |p| {
        Ok(speed_gap(v, p)? > floor)
    })];
    let (mut b, points) = prepare("semi-hamiltonian", plan, n, &guards)?;
    b.declare("semi-hamiltonian");
    b.evaluate(&points, |p| {
        let (lhs, rhs) = semihamiltonian_terms(v, p)?;
        let mut r = PointResult::new();
        r.push("semi-hamiltonian", compare(&lhs, &rhs));
        Ok(r)
    });
    if n < 3 {
        b.note("fewer than three components: the relation is vacuous");
    }
    Ok(b.finish())
}

/// Residuals of the diagonal-case conditions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomicResiduals {
    /// `2g^i ∂_k(w_n)^i = ((w_n)^i − (w_n)^k) ∂_k g^i`, `i ≠ k`.
    pub weingarten: f64,
    /// `R^{ij}_{ji} = Σ μ^{mn}(w_m)^i(w_n)^j`, `i ≠ j`.
    pub curvature: f64,
    /// `R^{ij}_{kl} = 0` unless `{k, l} = {i, j}`.
    pub off_block: f64,
}

fn require_diagonal(label: &str, m: &crate::fields::ExprMatrix, points: &[Vec<f64>]) -> Result<()> {
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            if i == j || m.get(i, j).is_zero_literal() {
                continue;
            }
            for p in points {
                if !m.get(i, j).eval(p).is_ok_and(|x| x == 0.0) {
                    return Err(Error::NotDiagonal {
                        field: label.to_string(),
                        row: i,
                        col: j,
                    });
                }
            }
        }
    }
    Ok(())
}

pub fn holonomic_residuals(s: &NonlocalStructure, point: &[f64]) -> Result<HolonomicResiduals> {
    let n = s.dim();
    let frame = metric_point_data(&s.g, point)?;
    let jets = structure_jets(s, point)?;
    let gj = &frame.g_up;

    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for w in &jets {
        for i in 0..n {
            for k in 0..n {
                if i == k {
                    continue;
                }
                lhs.push(2.0 * gj[(i, i)] * w.grad[(i, i, k)]);
                rhs.push((w.value[(i, i)] - w.value[(k, k)]) * frame.dg_up[(i, i, k)]);
            }
        }
    }
    let weingarten = compare(&lhs, &rhs);

    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut off = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lhs.push(frame.riemann_up[(i, j, j, i)]);
                let mut s_ij = 0.0;
                for (m, wm) in jets.iter().enumerate() {
                    for (q, wq) in jets.iter().enumerate() {
                        s_ij += s.mu[(m, q)] * wm.value[(i, i)] * wq.value[(j, j)];
                    }
                }
                rhs.push(s_ij);
            }
            for k in 0..n {
                for l in 0..n {
                    if (i != k && i != l) || (j != k && j != l) {
                        off.push(frame.riemann_up[(i, j, k, l)]);
                    }
                }
            }
        }
    }
    Ok(HolonomicResiduals {
        weingarten,
        curvature: compare(&lhs, &rhs),
        off_block: scaled_residual(max_abs(&off), frame.riemann_up.max_abs()),
    })
}

/// Conditions for a structure whose metric and affinors are all diagonal.
pub fn check_holonomic_diagonal_structure(s: &NonlocalStructure, plan: &SamplingPlan) -> Result<CheckReport> {
    if !s.is_empty() {
        s.validate_mu()?;
    }
    let guards = structure_guards("g", s, plan);
    let (mut b, points) = prepare("holonomic-diagonal", plan, s.dim(), &guards)?;
    require_diagonal("g", s.g.components(), &points)?;
    for (n, w) in s.affinors.iter().enumerate() {
        require_diagonal(&format!("w{}", n + 1), w.components(), &points)?;
    }
    b.declare("diagonal-codazzi");
    b.declare("diagonal-gauss");
    b.declare("off-block-curvature");
    b.evaluate(&points, |p| {
        let h = holonomic_residuals(s, p)?;
        let mut r = PointResult::new();
        r.push("diagonal-codazzi", h.weingarten);
        r.push("diagonal-gauss", h.curvature);
        r.push("off-block-curvature", h.off_block);
        Ok(r)
    });
    Ok(b.finish())
}

/// Haantjes tensor residual `max|H| / (1 + max|V, ∂V|)` from an affinor jet.
pub fn haantjes_residual(v: &AffinorJet) -> f64 {
    scaled_residual(haantjes_from_jet(v).max_abs(), jet_scale(v))
}

/// Nijenhuis tensor residual `max|N| / (1 + max|V, ∂V|)`.
pub fn nijenhuis_residual(v: &AffinorJet) -> f64 {
    scaled_residual(nijenhuis_from_jet(v).max_abs(), jet_scale(v))
}
