//! Per-condition residual statistics and verdicts.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sampling::{error_kind, SampleSet, SamplingPlan};

/// Share of inconclusive points above which a condition is inconclusive.
pub const GRAY_FRACTION: f64 = 0.05;
/// Minimum share of requested points that must be evaluated.
pub const MIN_ACCEPTED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Fail dominates inconclusive, which dominates pass.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub condition_id: String,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Vec<f64>,
    pub tol_pass: f64,
    pub tol_fail: f64,
    /// Points at which this condition was evaluated.
    pub evaluated: usize,
    /// Points with residual in `[tol_pass, tol_fail)`.
    pub gray: usize,
    /// Points with residual at or above `tol_fail`.
    pub failed: usize,
    pub verdict: Verdict,
}

impl ConditionRecord {
    pub fn failed_fraction(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.failed as f64 / self.evaluated as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub seed: u64,
    pub requested: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejections: BTreeMap<String, usize>,
    pub tol_pass: f64,
    pub tol_fail: f64,
    pub conditions: Vec<ConditionRecord>,
    pub notes: Vec<String>,
    pub extras: BTreeMap<String, f64>,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn condition(&self, id: &str) -> Option<&ConditionRecord> {
        self.conditions.iter().find(|c| c.condition_id == id)
    }

    pub fn max_residual(&self) -> f64 {
        self.conditions
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.max_residual))
    }
}

/// Residuals produced at one sample point, in a fixed condition order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointResult {
    pub residuals: Vec<(String, f64)>,
    /// Named counters, summed over points into the report's extras.
    pub counters: Vec<(String, f64)>,
}

impl PointResult {
    pub fn new() -> Self {
        PointResult::default()
    }

    pub fn push(&mut self, id: impl Into<String>, residual: f64) {
        self.residuals.push((id.into(), residual));
    }

    pub fn count(&mut self, name: impl Into<String>, amount: f64) {
        self.counters.push((name.into(), amount));
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    id: String,
    tol_pass: f64,
    tol_fail: f64,
    max: f64,
    sum: f64,
    evaluated: usize,
    gray: usize,
    failed: usize,
    worst: Vec<f64>,
}

impl Accumulator {
    fn add(&mut self, residual: f64, point: &[f64]) {
        // Non-finite residuals are violations; store a finite sentinel so the
        // report stays serializable.
        let r = if residual.is_finite() { residual } else { f64::MAX };
        if self.evaluated == 0 || r > self.max {
            self.max = r;
            self.worst = point.to_vec();
        }
        self.sum += r.min(1e300);
        self.evaluated += 1;
        if r >= self.tol_fail {
            self.failed += 1;
        } else if r >= self.tol_pass {
            self.gray += 1;
        }
    }

    fn finish(self) -> ConditionRecord {
        let verdict = if self.failed > 0 {
            Verdict::Fail
        } else if self.evaluated > 0 && self.gray as f64 >= GRAY_FRACTION * self.evaluated as f64
        {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        ConditionRecord {
            mean_residual: if self.evaluated == 0 {
                0.0
            } else {
                self.sum / self.evaluated as f64
            },
            condition_id: self.id,
            max_residual: self.max,
            worst_point: self.worst,
            tol_pass: self.tol_pass,
            tol_fail: self.tol_fail,
            evaluated: self.evaluated,
            gray: self.gray,
            failed: self.failed,
            verdict,
        }
    }
}

/// Folds point results into a [`CheckReport`] in a fixed order.
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    check_name: String,
    seed: u64,
    requested: usize,
    tol_pass: f64,
    tol_fail: f64,
    accepted: usize,
    rejections: BTreeMap<String, usize>,
    conditions: Vec<Accumulator>,
    notes: Vec<String>,
    extras: BTreeMap<String, f64>,
}

impl ReportBuilder {
    pub fn new(check_name: impl Into<String>, plan: &SamplingPlan) -> Self {
        ReportBuilder {
            check_name: check_name.into(),
            seed: plan.seed,
            requested: plan.count,
            tol_pass: plan.tol_pass,
            tol_fail: plan.tol_fail,
            accepted: 0,
            rejections: BTreeMap::new(),
            conditions: Vec::new(),
            notes: Vec::new(),
            extras: BTreeMap::new(),
        }
    }

    /// Registers a condition with the plan's tolerances, so that it shows
    /// up in the report even if never evaluated.
    pub fn declare(&mut self, id: &str) {
        let (p, f) = (self.tol_pass, self.tol_fail);
        self.declare_with(id, p, f);
    }

    pub fn declare_with(&mut self, id: &str, tol_pass: f64, tol_fail: f64) {
        if let Some(acc) = self.conditions.iter_mut().find(|c| c.id == id) {
            acc.tol_pass = tol_pass;
            acc.tol_fail = tol_fail;
            return;
        }
        self.conditions.push(Accumulator {
            id: id.to_string(),
            tol_pass,
            tol_fail,
            max: 0.0,
            sum: 0.0,
            evaluated: 0,
            gray: 0,
            failed: 0,
            worst: Vec::new(),
        });
    }

    pub fn record(&mut self, id: &str, residual: f64, point: &[f64]) {
        if !self.conditions.iter().any(|c| c.id == id) {
            self.declare(id);
        }
        let acc = self
            .conditions
            .iter_mut()
            .find(|c| c.id == id)
            .expect("declared above");
        acc.add(residual, point);
    }

    pub fn add_sample_stats(&mut self, samples: &SampleSet) {
        for (k, v) in &samples.rejections {
            *self.rejections.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn reject(&mut self, reason: impl Into<String>) {
        *self.rejections.entry(reason.into()).or_insert(0) += 1;
    }

    pub fn accept(&mut self, point: &[f64], result: PointResult) {
        self.accepted += 1;
        for (id, r) in &result.residuals {
            self.record(id, *r, point);
        }
        for (name, amount) in result.counters {
            *self.extras.entry(name).or_insert(0.0) += amount;
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    pub fn extra(&mut self, name: impl Into<String>, value: f64) {
        self.extras.insert(name.into(), value);
    }

    /// Evaluates `f` at every point in parallel and folds the outcomes in
    /// point order. Errors reject the point under their error kind.
    pub fn evaluate<F>(&mut self, points: &[Vec<f64>], f: F)
    where
        F: Fn(&[f64]) -> Result<PointResult> + Sync,
    {
        let outcomes: Vec<Result<PointResult>> = points.par_iter().map(|p| f(p)).collect();
        for (p, outcome) in points.iter().zip(outcomes) {
            match outcome {
                Ok(result) => self.accept(p, result),
                Err(e) => self.reject(format!("evaluation: {}", error_kind(&e))),
            }
        }
    }

    pub fn finish(self) -> CheckReport {
        let conditions: Vec<ConditionRecord> =
            self.conditions.into_iter().map(Accumulator::finish).collect();
        let mut notes = self.notes;
        let enough = self.accepted as f64 >= MIN_ACCEPTED_FRACTION * self.requested as f64;
        let verdict = if !enough {
            notes.push(format!(
                "only {} of {} requested points could be evaluated",
                self.accepted, self.requested
            ));
            Verdict::Inconclusive
        } else {
            conditions
                .iter()
                .fold(Verdict::Pass, |v, c| v.combine(c.verdict))
        };
        CheckReport {
            check_name: self.check_name,
            seed: self.seed,
            requested: self.requested,
            accepted: self.accepted,
            rejected: self.rejections.values().sum(),
            rejections: self.rejections,
            tol_pass: self.tol_pass,
            tol_fail: self.tol_fail,
            conditions,
            notes,
            extras: self.extras,
            verdict,
        }
    }
}
