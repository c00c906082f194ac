//! JSON definition files: fields, structures and the checks to run on them.

use std::collections::BTreeMap;

use hydrocheck::checks::CheckKind;
use hydrocheck::corpus::{NamedExample, Payload};
use hydrocheck::criteria::{validate_mu, AssembledAffinor, HydroSystem, NonlocalStructure};
use hydrocheck::expr::{parse_expression, BinaryOp, Expr};
use hydrocheck::fields::{AffinorField, ExprMatrix, MetricField, MAX_DIMENSION};
use hydrocheck::report::Verdict;
use hydrocheck::sampling::SamplingPlan;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Raw matrix of expression strings, row by row.
pub type Rows = Vec<Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefinitionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    pub coordinates: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, Rows>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub affinors: BTreeMap<String, Rows>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub structures: BTreeMap<String, StructureDef>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub systems: BTreeMap<String, SystemDef>,
    #[serde(default, skip_serializing_if = "PlanOverrides::is_empty")]
    pub plan: PlanOverrides,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckDef>,
}

/// A non-local bracket: metric name, affinor names and the constant `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDef {
    pub metric: String,
    #[serde(default)]
    pub affinors: Vec<String>,
    #[serde(default)]
    pub mu: Vec<Vec<f64>>,
}

/// A system given either as an alias of an affinor, or assembled from a
/// structure, a density `h` and one density `f` per affinor of the
/// structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affinor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDef {
    pub check: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(default, skip_serializing_if = "PlanOverrides::is_empty")]
    pub plan: PlanOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
    /// Free-form note on where the expectation comes from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
}

/// Partial sampling settings layered over the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// One `[lo, hi]` per coordinate, or a single pair for all of them.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_pass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_fail: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_floor: Option<f64>,
}

impl PlanOverrides {
    pub fn is_empty(&self) -> bool {
        *self == PlanOverrides::default()
    }

    /// `other` wins wherever it sets a value.
    pub fn layered(&self, other: &PlanOverrides) -> PlanOverrides {
        PlanOverrides {
            samples: other.samples.or(self.samples),
            seed: other.seed.or(self.seed),
            bounds: other.bounds.clone().or_else(|| self.bounds.clone()),
            tol_pass: other.tol_pass.or(self.tol_pass),
            tol_fail: other.tol_fail.or(self.tol_fail),
            lambda: other.lambda.clone().or_else(|| self.lambda.clone()),
            det_floor: other.det_floor.or(self.det_floor),
            gap_floor: other.gap_floor.or(self.gap_floor),
        }
    }

    /// Default plan on `[0, 1]^dim` with these overrides applied.
    pub fn to_plan(&self, dim: usize, path: &str) -> Result<SamplingPlan> {
        let mut plan = SamplingPlan::cube(dim, 0.0, 1.0);
        if let Some(n) = self.samples {
            plan.count = n;
        }
        if let Some(s) = self.seed {
            plan.seed = s;
        }
        if let Some(b) = &self.bounds {
            plan.bounds = match b.len() {
                1 => vec![(b[0][0], b[0][1]); dim],
                n if n == dim => b.iter().map(|p| (p[0], p[1])).collect(),
                n => {
                    return Err(CliError::schema(
                        format!("{path}.box"),
                        format!("expected 1 or {dim} intervals, found {n}"),
                    ))
                }
            };
        }
        if let Some(t) = self.tol_pass {
            plan.tol_pass = t;
        }
        if let Some(t) = self.tol_fail {
            plan.tol_fail = t;
        }
        if let Some(l) = &self.lambda {
            plan.lambda_samples = l.iter().map(|p| (p[0], p[1])).collect();
        }
        if let Some(d) = self.det_floor {
            plan.det_floor = d;
        }
        if let Some(g) = self.gap_floor {
            plan.gap_floor = g;
        }
        plan.validate()
            .map_err(|e| CliError::schema(path.to_string(), e.to_string()))?;
        Ok(plan)
    }
}

/// A check entry with its name resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub kind: CheckKind,
    pub args: Vec<String>,
    pub h: Option<Expr>,
    pub plan: PlanOverrides,
    pub expect: Option<Verdict>,
}

/// A validated definition file with every expression parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub file: DefinitionFile,
    pub metrics: BTreeMap<String, MetricField>,
    pub affinors: BTreeMap<String, AffinorField>,
    pub structures: BTreeMap<String, NonlocalStructure>,
    pub systems: BTreeMap<String, HydroSystem>,
    pub checks: Vec<CheckEntry>,
}

/// Fields bound to the argument slots of one check.
#[derive(Debug, Clone)]
pub enum Bound {
    Metric(MetricField),
    MetricPair(MetricField, MetricField),
    Structure(NonlocalStructure),
    StructurePair(NonlocalStructure, NonlocalStructure),
    AgainstMetric(HydroSystem, MetricField),
    Flow(Expr, AffinorField),
    Diagonal { v: Vec<Expr>, g: Option<Vec<Expr>> },
    System(HydroSystem),
    Simultaneous(MetricField, MetricField, Vec<HydroSystem>),
}

/// What an argument slot accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Metric,
    Structure,
    System,
}

impl Slot {
    fn noun(self) -> &'static str {
        match self {
            Slot::Metric => "metric",
            Slot::Structure => "structure or metric",
            Slot::System => "affinor or system",
        }
    }
}

/// Fixed slots of each check; `simultaneous-diagonal` also takes any
/// number of trailing affinors or systems.
fn slots(kind: CheckKind) -> &'static [Slot] {
    use CheckKind::*;
    match kind {
        RiemannFlat | LeviCivitaConsistency => &[Slot::Metric],
        NonsingularPencil | AlmostCompatible | CompatibleMetrics | SimultaneousDiagonal => {
            &[Slot::Metric, Slot::Metric]
        }
        Ferapontov | HolonomicDiagonal => &[Slot::Structure],
        BracketPencil => &[Slot::Structure, Slot::Structure],
        HamiltonianAffinor | TsarevRelation => &[Slot::System, Slot::Metric],
        StructuralFlow | SemiHamiltonian | Diagonalizable | FrobeniusIntegrability
        | RiemannInvariants2d => &[Slot::System],
    }
}

/// Argument signature for help output, e.g. `METRIC METRIC`.
pub fn signature(kind: CheckKind) -> String {
    let mut parts: Vec<&str> = slots(kind)
        .iter()
        .map(|s| match s {
            Slot::Metric => "METRIC",
            Slot::Structure => "STRUCTURE",
            Slot::System => "AFFINOR",
        })
        .collect();
    if kind == CheckKind::SimultaneousDiagonal {
        parts.push("[AFFINOR...]");
    }
    if kind == CheckKind::StructuralFlow {
        parts.push("+ h");
    }
    parts.join(" ")
}

fn json_path(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." {
        "$".into()
    } else {
        format!("$.{s}")
    }
}

/// Parses JSON text; unknown keys and type errors report the JSON path.
pub fn parse_file(text: &str) -> Result<DefinitionFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = json_path(e.path());
        CliError::schema(path, e.into_inner().to_string())
    })
}

fn parse_expr(text: &str, names: &[String], location: String) -> Result<Expr> {
    parse_expression(text, names).map_err(|source| CliError::Expression { location, source })
}

fn parse_matrix(rows: &Rows, names: &[String], path: &str) -> Result<ExprMatrix> {
    let n = names.len();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        let shape = rows.iter().map(|r| r.len().to_string()).collect::<Vec<_>>();
        return Err(CliError::schema(
            path,
            format!("expected a {n}x{n} matrix, found row lengths [{}]", shape.join(", ")),
        ));
    }
    let mut parsed = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let mut out = Vec::with_capacity(n);
        for (j, s) in row.iter().enumerate() {
            out.push(parse_expr(s, names, format!("{path}[{i}][{j}]"))?);
        }
        parsed.push(out);
    }
    ExprMatrix::new(parsed).map_err(|e| CliError::schema(path, e.to_string()))
}

impl Definition {
    pub fn dim(&self) -> usize {
        self.file.coordinates.len()
    }

    pub fn coordinates(&self) -> &[String] {
        &self.file.coordinates
    }

    /// Validates names, shapes and references, and parses every expression.
    pub fn resolve(file: DefinitionFile, max_dim: usize) -> Result<Definition> {
        let names = file.coordinates.clone();
        let n = names.len();
        if n == 0 {
            return Err(CliError::schema("$.coordinates", "at least one coordinate is required"));
        }
        let limit = max_dim.min(MAX_DIMENSION);
        if n > limit {
            return Err(CliError::schema(
                "$.coordinates",
                format!("dimension {n} exceeds the maximum of {limit}"),
            ));
        }
        if let Some(d) = file.dimension {
            if d != n {
                return Err(CliError::schema(
                    "$.dimension",
                    format!("dimension {d} does not match {n} coordinates"),
                ));
            }
        }
        for (i, c) in names.iter().enumerate() {
            let ok = c.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic() || ch == '_')
                && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
            if !ok {
                return Err(CliError::schema(
                    format!("$.coordinates[{i}]"),
                    format!("`{c}` is not an identifier"),
                ));
            }
            if names[..i].contains(c) {
                return Err(CliError::schema(
                    format!("$.coordinates[{i}]"),
                    format!("duplicate coordinate `{c}`"),
                ));
            }
        }
        let mut metrics = BTreeMap::new();
        for (k, rows) in &file.metrics {
            let m = parse_matrix(rows, &names, &format!("$.metrics.{k}"))?;
            metrics.insert(k.clone(), MetricField::new(m));
        }
        let mut affinors = BTreeMap::new();
        for (k, rows) in &file.affinors {
            let m = parse_matrix(rows, &names, &format!("$.affinors.{k}"))?;
            affinors.insert(k.clone(), AffinorField::new(m));
        }
        let mut structures = BTreeMap::new();
        for (k, def) in &file.structures {
            let path = format!("$.structures.{k}");
            let g = metrics.get(&def.metric).cloned().ok_or_else(|| {
                CliError::schema(format!("{path}.metric"), format!("no metric named `{}`", def.metric))
            })?;
            let mut ws = Vec::new();
            for (i, a) in def.affinors.iter().enumerate() {
                ws.push(affinors.get(a).cloned().ok_or_else(|| {
                    CliError::schema(format!("{path}.affinors[{i}]"), format!("no affinor named `{a}`"))
                })?);
            }
            let l = ws.len();
            if def.mu.len() != l || def.mu.iter().any(|r| r.len() != l) {
                return Err(CliError::schema(
                    format!("{path}.mu"),
                    format!("expected a {l}x{l} matrix for {l} affinors"),
                ));
            }
            let mu = DMatrix::from_fn(l, l, |i, j| def.mu[i][j]);
            validate_mu(&mu).map_err(|e| CliError::schema(format!("{path}.mu"), e.to_string()))?;
            let s = NonlocalStructure::new(g, ws, mu)
                .map_err(|e| CliError::schema(format!("{path}.mu"), e.to_string()))?;
            structures.insert(k.clone(), s);
        }
        let mut systems = BTreeMap::new();
        for (k, def) in &file.systems {
            let path = format!("$.systems.{k}");
            if affinors.contains_key(k) {
                return Err(CliError::schema(path, format!("`{k}` is also an affinor name")));
            }
            let (structure, h) = match (&def.affinor, &def.structure, &def.h) {
                (Some(a), None, None) if def.f.is_empty() => {
                    let v = affinors.get(a).cloned().ok_or_else(|| {
                        CliError::schema(format!("{path}.affinor"), format!("no affinor named `{a}`"))
                    })?;
                    systems.insert(k.clone(), HydroSystem::Explicit(v));
                    continue;
                }
                (None, Some(s), Some(h)) => (s, h),
                _ => {
                    return Err(CliError::schema(
                        path,
                        "give either `affinor`, or `structure`, `h` and `f`",
                    ))
                }
            };
            let s = structures.get(structure).cloned().ok_or_else(|| {
                CliError::schema(
                    format!("{path}.structure"),
                    format!("no structure named `{structure}`"),
                )
            })?;
            let h = parse_expr(h, &names, format!("{path}.h"))?;
            let f = def
                .f
                .iter()
                .enumerate()
                .map(|(i, t)| parse_expr(t, &names, format!("{path}.f[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let a = AssembledAffinor::new(s, h, f)
                .map_err(|e| CliError::schema(format!("{path}.f"), e.to_string()))?;
            systems.insert(k.clone(), HydroSystem::Hamiltonian(a));
        }
        file.plan.to_plan(n, "$.plan")?;

        let mut def = Definition {
            metrics,
            affinors,
            structures,
            systems,
            checks: Vec::new(),
            file,
        };
        let mut checks = Vec::new();
        for (i, c) in def.file.checks.iter().enumerate() {
            let path = format!("$.checks[{i}]");
            let kind: CheckKind = c
                .check
                .parse()
                .map_err(|e: hydrocheck::Error| CliError::schema(format!("{path}.check"), e.to_string()))?;
            let h = c
                .h
                .as_ref()
                .map(|t| parse_expr(t, &names, format!("{path}.h")))
                .transpose()?;
            def.file.plan.layered(&c.plan).to_plan(n, &format!("{path}.plan"))?;
            let entry = CheckEntry {
                kind,
                args: c.args.clone(),
                h,
                plan: c.plan.clone(),
                expect: c.expect,
            };
            def.bind(&entry, &path)?;
            checks.push(entry);
        }
        def.checks = checks;
        Ok(def)
    }

    fn metric_slot(&self, name: &str) -> Option<MetricField> {
        self.metrics
            .get(name)
            .cloned()
            .or_else(|| self.structures.get(name).map(|s| s.g.clone()))
    }

    fn structure_slot(&self, name: &str) -> Option<NonlocalStructure> {
        self.structures
            .get(name)
            .cloned()
            .or_else(|| self.metrics.get(name).map(|g| NonlocalStructure::local(g.clone())))
    }

    fn system_slot(&self, name: &str) -> Option<HydroSystem> {
        self.affinors
            .get(name)
            .map(|v| HydroSystem::Explicit(v.clone()))
            .or_else(|| self.systems.get(name).cloned())
    }

    /// Binds the named arguments of `entry` to fields. `path` locates the
    /// entry in error messages.
    pub fn bind(&self, entry: &CheckEntry, path: &str) -> Result<Bound> {
        use CheckKind::*;
        let kind = entry.kind;
        let fixed = slots(kind);
        let args = &entry.args;
        let variadic = kind == SimultaneousDiagonal;
        if args.len() < fixed.len() || (!variadic && args.len() > fixed.len()) {
            return Err(CliError::schema(
                format!("{path}.args"),
                format!(
                    "`{kind}` takes {} ({}), found {} argument(s)",
                    if variadic { "at least two arguments" } else { "arguments" },
                    signature(kind),
                    args.len()
                ),
            ));
        }
        let missing = |i: usize, slot: Slot| {
            CliError::schema(
                format!("{path}.args[{i}]"),
                format!("no {} named `{}`", slot.noun(), args[i]),
            )
        };
        let metric = |i: usize| self.metric_slot(&args[i]).ok_or_else(|| missing(i, Slot::Metric));
        let structure =
            |i: usize| self.structure_slot(&args[i]).ok_or_else(|| missing(i, Slot::Structure));
        let system = |i: usize| self.system_slot(&args[i]).ok_or_else(|| missing(i, Slot::System));
        let needed = match kind {
            FrobeniusIntegrability => Some(3),
            RiemannInvariants2d => Some(2),
            _ => None,
        };
        if let Some(d) = needed.filter(|&d| d != self.dim()) {
            return Err(CliError::schema(
                format!("{path}.check"),
                format!("`{kind}` needs {d} coordinates, the file has {}", self.dim()),
            ));
        }
        if kind != StructuralFlow && entry.h.is_some() {
            return Err(CliError::schema(format!("{path}.h"), format!("`{kind}` takes no `h`")));
        }
        Ok(match kind {
            RiemannFlat | LeviCivitaConsistency => Bound::Metric(metric(0)?),
            NonsingularPencil | AlmostCompatible | CompatibleMetrics => {
                Bound::MetricPair(metric(0)?, metric(1)?)
            }
            SimultaneousDiagonal => {
                let rest = (2..args.len()).map(system).collect::<Result<Vec<_>>>()?;
                Bound::Simultaneous(metric(0)?, metric(1)?, rest)
            }
            Ferapontov | HolonomicDiagonal => Bound::Structure(structure(0)?),
            BracketPencil => Bound::StructurePair(structure(0)?, structure(1)?),
            HamiltonianAffinor => Bound::AgainstMetric(system(0)?, metric(1)?),
            StructuralFlow => {
                let h = entry.h.clone().ok_or_else(|| {
                    CliError::schema(format!("{path}.h"), "`structural-flow` needs a density `h`")
                })?;
                let w = self
                    .affinors
                    .get(&args[0])
                    .cloned()
                    .ok_or_else(|| missing(0, Slot::System))?;
                Bound::Flow(h, w)
            }
            TsarevRelation | SemiHamiltonian => {
                let v = self.affinors.get(&args[0]).ok_or_else(|| missing(0, Slot::System))?;
                let v = diagonal_of(v.components(), &args[0])?;
                let g = if kind == TsarevRelation {
                    let m = metric(1)?;
                    let up = diagonal_of(m.components(), &args[1])?;
                    // The relation is stated for the covariant diagonal.
                    Some(
                        up.into_iter()
                            .map(|e| Expr::binary(BinaryOp::Div, Expr::one(), e))
                            .collect(),
                    )
                } else {
                    None
                };
                Bound::Diagonal { v, g }
            }
            Diagonalizable | FrobeniusIntegrability | RiemannInvariants2d => {
                Bound::System(system(0)?)
            }
        })
    }

    /// Arguments for `kind` when the file leaves no choice, for `--check`
    /// on a file without a matching entry.
    pub fn infer_args(&self, kind: CheckKind) -> Result<Vec<String>> {
        use CheckKind::*;
        let metrics: Vec<String> = self.metrics.keys().cloned().collect();
        let structures: Vec<String> = self.structures.keys().cloned().collect();
        let systems: Vec<String> = self
            .affinors
            .keys()
            .chain(self.systems.keys())
            .cloned()
            .collect();
        let fail = |what: &str| {
            CliError::schema(
                "$.checks",
                format!(
                    "cannot infer arguments for `{kind}` ({what}); add an entry to `checks`"
                ),
            )
        };
        let exactly = |v: &[String], k: usize, what: &str| {
            if v.len() == k {
                Ok(v.to_vec())
            } else {
                Err(fail(&format!("need exactly {k} {what}, found {}", v.len())))
            }
        };
        let one_structure = || {
            if structures.len() == 1 {
                Ok(structures.clone())
            } else if structures.is_empty() {
                exactly(&metrics, 1, "metric")
            } else {
                Err(fail("several structures"))
            }
        };
        let one_metric = || {
            if metrics.len() == 1 {
                Ok(metrics.clone())
            } else if metrics.is_empty() && structures.len() == 1 {
                Ok(structures.clone())
            } else {
                Err(fail(&format!("need exactly 1 metric, found {}", metrics.len())))
            }
        };
        match kind {
            RiemannFlat | LeviCivitaConsistency => one_metric(),
            NonsingularPencil | AlmostCompatible | CompatibleMetrics => {
                exactly(&metrics, 2, "metrics")
            }
            SimultaneousDiagonal => {
                let mut args = exactly(&metrics, 2, "metrics")?;
                args.extend(systems.iter().cloned());
                Ok(args)
            }
            Ferapontov | HolonomicDiagonal => one_structure(),
            BracketPencil => {
                if structures.len() == 2 {
                    Ok(structures.clone())
                } else if structures.len() == 1 {
                    Ok(vec![structures[0].clone(), structures[0].clone()])
                } else {
                    Err(fail(&format!("need 1 or 2 structures, found {}", structures.len())))
                }
            }
            HamiltonianAffinor | TsarevRelation => {
                let mut args = exactly(&systems, 1, "affinor or system")?;
                args.extend(one_metric()?);
                Ok(args)
            }
            StructuralFlow => Err(fail("a density `h` is required")),
            SemiHamiltonian | Diagonalizable | FrobeniusIntegrability | RiemannInvariants2d => {
                exactly(&systems, 1, "affinor or system")
            }
        }
    }

    /// Plan for `entry`: defaults, then the file plan, the entry plan and
    /// finally `cli`.
    pub fn plan_for(&self, entry: &CheckEntry, cli: &PlanOverrides) -> Result<SamplingPlan> {
        self.file
            .plan
            .layered(&entry.plan)
            .layered(cli)
            .to_plan(self.dim(), "plan")
    }
}

fn diagonal_of(m: &ExprMatrix, name: &str) -> Result<Vec<Expr>> {
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            if i != j && !m.get(i, j).is_zero_literal() {
                return Err(hydrocheck::Error::NotDiagonal {
                    field: name.to_string(),
                    row: i,
                    col: j,
                }
                .into());
            }
        }
    }
    Ok(m.diagonal_entries())
}

fn rows_of(m: &ExprMatrix, names: &[String]) -> Rows {
    m.to_strings(names)
}

/// Definition file equivalent to a corpus example, with its expectations
/// as checks.
pub fn from_example(ex: &NamedExample) -> DefinitionFile {
    let names = &ex.coordinates;
    let mut metrics = BTreeMap::new();
    let mut affinors = BTreeMap::new();
    let mut structures = BTreeMap::new();
    let args_for: Box<dyn Fn(CheckKind) -> Vec<String>> = match &ex.payload {
        Payload::Metric(g) => {
            metrics.insert("g".to_string(), rows_of(g.components(), names));
            Box::new(|_| vec!["g".into()])
        }
        Payload::MetricPair(g1, g2) => {
            metrics.insert("g1".to_string(), rows_of(g1.components(), names));
            metrics.insert("g2".to_string(), rows_of(g2.components(), names));
            Box::new(|_| vec!["g1".into(), "g2".into()])
        }
        Payload::Affinor(v) => {
            affinors.insert("v".to_string(), rows_of(v.components(), names));
            Box::new(|_| vec!["v".into()])
        }
        Payload::Structure(s) => {
            metrics.insert("g".to_string(), rows_of(s.g.components(), names));
            let ws: Vec<String> = (1..=s.affinors.len()).map(|i| format!("w{i}")).collect();
            for (w, a) in ws.iter().zip(&s.affinors) {
                affinors.insert(w.clone(), rows_of(a.components(), names));
            }
            let l = s.affinors.len();
            let mu = (0..l).map(|i| (0..l).map(|j| s.mu[(i, j)]).collect()).collect();
            structures.insert(
                "s".to_string(),
                StructureDef {
                    metric: "g".into(),
                    affinors: ws,
                    mu,
                },
            );
            Box::new(|k| match k {
                CheckKind::RiemannFlat | CheckKind::LeviCivitaConsistency => vec!["g".into()],
                CheckKind::BracketPencil => vec!["s".into(), "s".into()],
                _ => vec!["s".into()],
            })
        }
    };
    let checks = ex
        .expectations
        .iter()
        .map(|e| CheckDef {
            check: e.check.name().to_string(),
            args: args_for(e.check),
            h: None,
            plan: PlanOverrides::default(),
            expect: Some(e.verdict),
            basis: Some(e.basis.as_str().to_string()),
        })
        .collect();
    DefinitionFile {
        description: Some(ex.description.clone()),
        dimension: Some(ex.dim()),
        coordinates: names.clone(),
        metrics,
        affinors,
        structures,
        systems: BTreeMap::new(),
        plan: PlanOverrides {
            bounds: Some(ex.bounds.iter().map(|&(lo, hi)| [lo, hi]).collect()),
            ..PlanOverrides::default()
        },
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(json: &str) -> Result<Definition> {
        Definition::resolve(parse_file(json)?, MAX_DIMENSION)
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = file(r#"{"coordinates":["u1"],"metrics":{"g":[["1"]]},"plan":{"sample":3}}"#)
            .unwrap_err();
        match err {
            CliError::Schema { path, .. } => assert!(path.starts_with("$.plan"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_entry() {
        let err = file(r#"{"coordinates":["u1","u2"],"metrics":{"g":[["1","0"],["0","u1*"]]}}"#)
            .unwrap_err();
        match err {
            CliError::Expression { location, source } => {
                assert_eq!(location, "$.metrics.g[1][1]");
                assert!(matches!(source, hydrocheck::Error::Syntax { position: 3, .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shape_and_reference_errors() {
        assert!(matches!(
            file(r#"{"coordinates":["u1","u2"],"metrics":{"g":[["1","0"]]}}"#),
            Err(CliError::Schema { .. })
        ));
        assert!(matches!(
            file(r#"{"coordinates":["u1"],"structures":{"s":{"metric":"nope"}}}"#),
            Err(CliError::Schema { .. })
        ));
        let err = file(
            r#"{"coordinates":["u1"],"metrics":{"g":[["1"]]},"affinors":{"w":[["1"]]},
                "structures":{"s":{"metric":"g","affinors":["w"],"mu":[[1,2]]}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "$.structures.s.mu"));
    }

    #[test]
    fn mu_must_be_symmetric() {
        let err = file(
            r#"{"coordinates":["u1"],"metrics":{"g":[["1"]]},"affinors":{"a":[["1"]],"b":[["u1"]]},
                "structures":{"s":{"metric":"g","affinors":["a","b"],"mu":[[1,2],[0,1]]}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, ref message }
            if path == "$.structures.s.mu" && message.contains("symmetric")));
    }

    #[test]
    fn systems_alias_affinors_or_assemble_structures() {
        let d = file(
            r#"{"coordinates":["u1"],"metrics":{"g":[["1"]]},"affinors":{"v":[["u1"]]},
                "structures":{"s":{"metric":"g"}},
                "systems":{"a":{"affinor":"v"},"h":{"structure":"s","h":"u1^3/6"}}}"#,
        )
        .unwrap();
        assert!(matches!(d.systems["a"], HydroSystem::Explicit(_)));
        assert!(matches!(d.systems["h"], HydroSystem::Hamiltonian(_)));
        let err = file(
            r#"{"coordinates":["u1"],"affinors":{"v":[["u1"]]},
                "systems":{"a":{"affinor":"v","h":"u1"}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "$.systems.a"));
    }

    #[test]
    fn diagonal_required_for_semi_hamiltonian() {
        let err = file(
            r#"{"coordinates":["u1","u2"],"affinors":{"v":[["u1","1"],["0","u2"]]},
                "checks":[{"check":"semi-hamiltonian","args":["v"]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Core(hydrocheck::Error::NotDiagonal { .. })));
    }

    #[test]
    fn inference_is_unambiguous_only() {
        let d = file(r#"{"coordinates":["u1"],"metrics":{"a":[["1"]],"b":[["u1"]]}}"#).unwrap();
        assert_eq!(d.infer_args(CheckKind::CompatibleMetrics).unwrap(), ["a", "b"]);
        assert!(d.infer_args(CheckKind::RiemannFlat).is_err());
        assert!(d.infer_args(CheckKind::Ferapontov).is_err());
    }

    #[test]
    fn box_broadcasts() {
        let o = PlanOverrides {
            bounds: Some(vec![[-1.0, 2.0]]),
            ..Default::default()
        };
        assert_eq!(o.to_plan(3, "p").unwrap().bounds, vec![(-1.0, 2.0); 3]);
    }
}
