//! Runs the checks of a definition and collects a run report.

use std::path::Path;

use hydrocheck::checks::CheckKind;
use hydrocheck::corpus::corpus_get;
use hydrocheck::criteria::{
    check_almost_compatible, check_bracket_pair_compatibility, check_compatible,
    check_ferapontov, check_hamiltonian_affinor, check_holonomic_diagonal_structure,
    check_levi_civita_consistency, check_nonsingular, check_riemann_flat, check_semihamiltonian,
    check_structural_flow_integrability, check_tsarev_relation,
};
use hydrocheck::diag::{
    check_diagonalizable, check_riemann_invariants_2d, check_simultaneous_diagonalization,
    frobenius_integrability_check, FROBENIUS_FD_STEP,
};
use hydrocheck::fields::AffinorSource;
use hydrocheck::report::{CheckReport, ReportBuilder, Verdict};
use hydrocheck::sampling::SamplingPlan;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::definition::{from_example, parse_file, Bound, CheckEntry, Definition, PlanOverrides};
use crate::error::{CliError, Result};

/// Check names accepted on the command line with the library operation each
/// one runs.
pub const CLI_CHECKS: [(&str, &str); 16] = [
    ("riemann-flat", "criteria::check_riemann_flat"),
    ("levi-civita-consistency", "criteria::check_levi_civita_consistency"),
    ("nonsingular-pencil", "criteria::check_nonsingular"),
    ("almost-compatible", "criteria::check_almost_compatible"),
    ("compatible-metrics", "criteria::check_compatible"),
    ("ferapontov", "criteria::check_ferapontov"),
    ("bracket-pencil", "criteria::check_bracket_pair_compatibility"),
    ("hamiltonian-affinor", "criteria::check_hamiltonian_affinor"),
    ("structural-flow", "criteria::check_structural_flow_integrability"),
    ("tsarev-relation", "criteria::check_tsarev_relation"),
    ("semi-hamiltonian", "criteria::check_semihamiltonian"),
    ("holonomic-diagonal", "criteria::check_holonomic_diagonal_structure"),
    ("diagonalizable", "diag::check_diagonalizable"),
    ("simultaneous-diagonal", "diag::check_simultaneous_diagonalization"),
    ("frobenius-integrability", "diag::frobenius_integrability_check"),
    ("riemann-invariants-2d", "diag::check_riemann_invariants_2d"),
];

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub fn exit_status(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Where the definition comes from: a file or a corpus example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    File(std::path::PathBuf),
    Corpus(String),
}

impl Input {
    pub fn parse(spec: &str) -> Input {
        match spec.strip_prefix("corpus:") {
            Some(id) => Input::Corpus(id.to_string()),
            None => Input::File(spec.into()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Input::File(p) => p.display().to_string(),
            Input::Corpus(id) => format!("corpus:{id}"),
        }
    }

    /// The definition text, as read from disk or exported from the corpus.
    pub fn text(&self) -> Result<String> {
        match self {
            Input::File(p) => read_file(p),
            Input::Corpus(id) => {
                let ex = corpus_get(id)?;
                Ok(serde_json::to_string_pretty(&from_example(&ex)).expect("serializable"))
            }
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::FileNotFound(path.to_path_buf())
        } else {
            CliError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub args: Vec<String>,
    pub expected: Option<Verdict>,
    pub plan: SamplingPlan,
    pub report: CheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub input: String,
    pub input_sha256: String,
    pub coordinates: Vec<String>,
    /// Plan from the file and the command line, before per-check overrides.
    pub plan: SamplingPlan,
    pub checks: Vec<CheckOutcome>,
    pub verdict: Verdict,
    pub exit_status: i32,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Checks selected with `--check`; empty runs every entry in the file.
    pub checks: Vec<CheckKind>,
    pub plan: PlanOverrides,
    pub max_dim: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            checks: Vec::new(),
            plan: PlanOverrides::default(),
            max_dim: hydrocheck::fields::MAX_DIMENSION,
        }
    }
}

/// Loads `input` and runs the selected checks.
pub fn run(input: &Input, options: &RunOptions) -> Result<RunReport> {
    let text = input.text()?;
    let def = Definition::resolve(parse_file(&text)?, options.max_dim)?;
    run_definition(&def, &input.label(), &sha256_hex(&text), options)
}

/// Entries to run: every file entry, or for each `--check` the entries of
/// that kind, falling back to inferred arguments.
pub fn select(def: &Definition, options: &RunOptions) -> Result<Vec<CheckEntry>> {
    if options.checks.is_empty() {
        if def.checks.is_empty() {
            return Err(CliError::schema(
                "$.checks",
                "the file lists no checks; pass --check NAME",
            ));
        }
        return Ok(def.checks.clone());
    }
    let mut out = Vec::new();
    for &kind in &options.checks {
        let listed: Vec<CheckEntry> = def.checks.iter().filter(|c| c.kind == kind).cloned().collect();
        if listed.is_empty() {
            let entry = CheckEntry {
                kind,
                args: def.infer_args(kind)?,
                h: None,
                plan: PlanOverrides::default(),
                expect: None,
            };
            def.bind(&entry, "--check")?;
            out.push(entry);
        } else {
            out.extend(listed);
        }
    }
    Ok(out)
}

pub fn run_definition(
    def: &Definition,
    label: &str,
    digest: &str,
    options: &RunOptions,
) -> Result<RunReport> {
    let entries = select(def, options)?;
    let plan = def.file.plan.layered(&options.plan).to_plan(def.dim(), "plan")?;
    let mut checks = Vec::with_capacity(entries.len());
    for entry in &entries {
        let plan = def.plan_for(entry, &options.plan)?;
        let bound = def.bind(entry, "--check")?;
        let report = match execute(entry.kind, &bound, &plan) {
            Ok(r) => r,
            Err(e) if e.is_input_error() => return Err(e.into()),
            Err(e) => unusable(entry.kind, &plan, &e),
        };
        checks.push(CheckOutcome {
            check: entry.kind.name().to_string(),
            args: entry.args.clone(),
            expected: entry.expect,
            plan,
            report,
        });
    }
    let verdict = checks
        .iter()
        .fold(Verdict::Pass, |v, c| v.combine(c.report.verdict));
    Ok(RunReport {
        tool: "hydrocheck".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: label.to_string(),
        input_sha256: digest.to_string(),
        coordinates: def.coordinates().to_vec(),
        plan,
        checks,
        verdict,
        exit_status: exit_status(verdict),
    })
}

/// Report for a check that stopped on a mathematical obstruction. Complex
/// characteristics, non-semisimple pencils and failed preconditions decide
/// the check negatively; anything else leaves it open.
fn unusable(kind: CheckKind, plan: &SamplingPlan, e: &hydrocheck::Error) -> CheckReport {
    use hydrocheck::Error::*;
    let mut b = ReportBuilder::new(kind.name(), plan);
    b.note(format!("check stopped: {e}"));
    let mut report = b.finish();
    report.verdict = match e {
        ComplexCharacteristics { .. } | NonSemisimple { .. } | PreconditionFailed(_) => {
            Verdict::Fail
        }
        _ => Verdict::Inconclusive,
    };
    report
}

/// Runs one bound check.
pub fn execute(kind: CheckKind, bound: &Bound, plan: &SamplingPlan) -> hydrocheck::Result<CheckReport> {
    use CheckKind::*;
    let mismatch = || {
        hydrocheck::Error::InvalidInput(format!("arguments do not fit `{kind}`"))
    };
    match (kind, bound) {
        (RiemannFlat, Bound::Metric(g)) => check_riemann_flat(g, plan),
        (LeviCivitaConsistency, Bound::Metric(g)) => check_levi_civita_consistency(g, plan),
        (NonsingularPencil, Bound::MetricPair(a, b)) => check_nonsingular(a, b, plan),
        (AlmostCompatible, Bound::MetricPair(a, b)) => check_almost_compatible(a, b, plan),
        (CompatibleMetrics, Bound::MetricPair(a, b)) => check_compatible(a, b, plan),
        (Ferapontov, Bound::Structure(s)) => check_ferapontov(s, plan),
        (HolonomicDiagonal, Bound::Structure(s)) => check_holonomic_diagonal_structure(s, plan),
        (BracketPencil, Bound::StructurePair(a, b)) => check_bracket_pair_compatibility(a, b, plan),
        (HamiltonianAffinor, Bound::AgainstMetric(v, g)) => check_hamiltonian_affinor(v, g, plan),
        (StructuralFlow, Bound::Flow(h, w)) => check_structural_flow_integrability(h, w, plan),
        (TsarevRelation, Bound::Diagonal { v, g: Some(g) }) => check_tsarev_relation(v, g, plan),
        (SemiHamiltonian, Bound::Diagonal { v, g: None }) => check_semihamiltonian(v, plan),
        (Diagonalizable, Bound::System(v)) => check_diagonalizable(v, plan),
        (FrobeniusIntegrability, Bound::System(v)) => {
            frobenius_integrability_check(v, plan, FROBENIUS_FD_STEP)
        }
        (RiemannInvariants2d, Bound::System(v)) => check_riemann_invariants_2d(v, plan),
        (SimultaneousDiagonal, Bound::Simultaneous(a, b, ws)) => {
            let ws: Vec<&dyn AffinorSource> = ws.iter().map(|w| w as &dyn AffinorSource).collect();
            check_simultaneous_diagonalization(a, b, &ws, plan)
        }
        _ => Err(mismatch()),
    }
}
