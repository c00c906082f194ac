//! Seeded rejection sampling of evaluation points.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::MetricField;

pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_TOL_PASS: f64 = 1e-8;
pub const DEFAULT_TOL_FAIL: f64 = 1e-6;
pub const DEFAULT_DET_FLOOR: f64 = 1e-6;
pub const DEFAULT_GAP_FLOOR: f64 = 1e-6;
/// Draw budget per requested point before giving up.
pub const OVERSAMPLING: usize = 100;

pub fn default_lambdas() -> Vec<(f64, f64)> {
    vec![(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (2.0, 3.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub seed: u64,
    pub count: usize,
    /// Per-coordinate `[lo, hi]`.
    pub bounds: Vec<(f64, f64)>,
    pub det_floor: f64,
    pub gap_floor: f64,
    pub lambda_samples: Vec<(f64, f64)>,
    pub tol_pass: f64,
    pub tol_fail: f64,
}

impl SamplingPlan {
    /// Defaults on the cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        SamplingPlan {
            seed: 0,
            count: DEFAULT_SAMPLES,
            bounds: vec![(lo, hi); dim],
            det_floor: DEFAULT_DET_FLOOR,
            gap_floor: DEFAULT_GAP_FLOOR,
            lambda_samples: default_lambdas(),
            tol_pass: DEFAULT_TOL_PASS,
            tol_fail: DEFAULT_TOL_FAIL,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidPlan("count must be at least 1".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidPlan("empty sampling box".into()));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidPlan(format!(
                    "coordinate {i}: need lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.det_floor > 0.0) {
            return Err(Error::InvalidPlan("det_floor must be positive".into()));
        }
        if !(self.gap_floor >= 0.0) {
            return Err(Error::InvalidPlan("gap_floor must be non-negative".into()));
        }
        if !(self.tol_pass > 0.0 && self.tol_pass <= self.tol_fail) {
            return Err(Error::InvalidPlan(format!(
                "tolerances must satisfy 0 < pass <= fail, got {} and {}",
                self.tol_pass, self.tol_fail
            )));
        }
        Ok(())
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// A named acceptance predicate on candidate points. Errors (for instance
/// domain errors while evaluating a field) reject the point.
pub struct Guard<'a> {
    pub name: String,
    test: Box<dyn Fn(&[f64]) -> Result<bool> + Sync + 'a>,
}

impl<'a> Guard<'a> {
    pub fn new(name: impl Into<String>, test: impl Fn(&[f64]) -> Result<bool> + Sync + 'a) -> Self {
        Guard {
            name: name.into(),
            test: Box::new(test),
        }
    }

    pub fn accepts(&self, point: &[f64]) -> Result<bool> {
        (self.test)(point)
    }

    /// `|det g^{ij}| > floor`, rejecting points where `g` cannot be evaluated.
    pub fn metric_det(label: &str, g: &'a MetricField, floor: f64) -> Self {
        Guard::new(format!("{label}: |det| <= {floor:e}"), move |p| {
            Ok(g.eval(p)?.determinant().abs() > floor)
        })
    }

    /// Rejects points where `f` fails (domain errors and the like).
    pub fn evaluable(label: &str, f: impl Fn(&[f64]) -> Result<()> + Sync + 'a) -> Self {
        Guard::new(format!("{label}: not evaluable"), move |p| f(p).map(|_| true))
    }
}

/// Accepted points plus rejection statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub drawn: usize,
    pub rejections: BTreeMap<String, usize>,
}

impl SampleSet {
    pub fn rejected(&self) -> usize {
        self.rejections.values().sum()
    }
}

/// Uniform rejection sampling in the plan's box, deterministic in the seed.
pub fn sample_points(plan: &SamplingPlan, guards: &[Guard<'_>]) -> Result<SampleSet> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut points = Vec::with_capacity(plan.count);
    let mut rejections = BTreeMap::new();
    let budget = plan.count.saturating_mul(OVERSAMPLING);
    let mut drawn = 0;
    while points.len() < plan.count && drawn < budget {
        drawn += 1;
        let p: Vec<f64> = plan
            .bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
            .collect();
        let mut rejected_by = None;
        for g in guards {
            match g.accepts(&p) {
                Ok(true) => {}
                Ok(false) => {
                    rejected_by = Some(g.name.clone());
                    break;
                }
                Err(e) => {
                    rejected_by = Some(format!("{}: {}", g.name, error_kind(&e)));
                    break;
                }
            }
        }
        match rejected_by {
            None => points.push(p),
            Some(reason) => *rejections.entry(reason).or_insert(0) += 1,
        }
    }
    if points.len() < plan.count {
        return Err(Error::Exhausted {
            accepted: points.len(),
            requested: plan.count,
            drawn,
        });
    }
    Ok(SampleSet {
        points,
        drawn,
        rejections,
    })
}

/// Short stable label for an error, used as a rejection reason key.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Syntax { .. } => "syntax error",
        Error::UnknownSymbol { .. } => "unknown symbol",
        Error::Domain { .. } => "domain error",
        Error::DimensionMismatch { .. } => "dimension mismatch",
        Error::SingularMetric { .. } => "singular metric",
        Error::Exhausted { .. } => "exhausted",
        Error::BadMu(_) => "bad mu",
        Error::PreconditionFailed(_) => "precondition failed",
        Error::ArityMismatch { .. } => "arity mismatch",
        Error::NotDiagonal { .. } => "not diagonal",
        Error::NonSemisimple { .. } => "non-semisimple",
        Error::ComplexCharacteristics { .. } => "complex characteristics",
        Error::EigenvalueCollision { .. } => "eigenvalue collision",
        Error::IntegrationBlowup { .. } => "integration blowup",
        Error::GenerationFailed(_) => "generation failed",
        Error::UnknownExample(_) => "unknown example",
        Error::InvalidPlan(_) => "invalid plan",
        Error::InvalidInput(_) => "invalid input",
    }
}

/// Ratio of smallest to largest singular value; 0 for singular matrices.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ExprMatrix;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn deterministic_in_seed() {
        let plan = SamplingPlan::cube(2, 0.0, 1.0).with_seed(7).with_count(4);
        let a = sample_points(&plan, &[]).unwrap();
        let b = sample_points(&plan, &[]).unwrap();
        assert_eq!(a.points.len(), 4);
        assert_eq!(a, b);
        assert!(a.points.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
        let c = sample_points(&plan.clone().with_seed(8), &[]).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn determinant_guard() {
        let g = MetricField::new(
            ExprMatrix::parse(&[vec!["u1", "0"], vec!["0", "1"]], &names(2)).unwrap(),
        );
        let plan = SamplingPlan::cube(2, -1.0, 1.0).with_count(200);
        let guard = Guard::metric_det("g", &g, 1e-6);
        let s = sample_points(&plan, &[guard]).unwrap();
        assert!(s.points.iter().all(|p| p[0].abs() > 1e-6));
    }

    #[test]
    fn exhausted_when_guard_never_accepts() {
        let plan = SamplingPlan::cube(1, 0.0, 1.0).with_count(3);
        let never = Guard::new("never", |_| Ok(false));
        match sample_points(&plan, &[never]) {
            Err(Error::Exhausted { accepted: 0, requested: 3, drawn: 300 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_plans() {
        assert!(SamplingPlan::cube(1, 1.0, 0.0).validate().is_err());
        assert!(SamplingPlan::cube(1, 0.0, 1.0).with_count(0).validate().is_err());
        let mut p = SamplingPlan::cube(1, 0.0, 1.0);
        p.det_floor = 0.0;
        assert!(p.validate().is_err());
    }
}
