//! Built-in reference fields with known outcomes, and random generators of
//! compatible metric pairs and diagonalizable bi-Hamiltonian instances.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checks::CheckKind;
use crate::criteria::{
    check_almost_compatible, check_bracket_pair_compatibility, check_compatible, check_ferapontov,
    check_holonomic_diagonal_structure, check_levi_civita_consistency, check_nonsingular,
    check_riemann_flat, HydroSystem, NonlocalStructure,
};
use crate::diag::{
    check_diagonalizable, check_riemann_invariants_2d, check_simultaneous_diagonalization,
    frobenius_integrability_check, FROBENIUS_FD_STEP,
};
use crate::error::{Error, Result};
use crate::expr::{sum, Expr};
use crate::fields::{AffinorField, AffinorSource, ExprMatrix, LinearChange, MetricField, MAX_DIMENSION};
use crate::report::{CheckReport, Verdict};
use crate::sampling::SamplingPlan;

/// What an expected verdict rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Stated in the literature the example comes from.
    Literature,
    /// Immediate from the form of the fields.
    Immediate,
    /// Established by an independent computation.
    Computed,
}

impl Basis {
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Literature => "literature",
            Basis::Immediate => "immediate",
            Basis::Computed => "computed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expectation {
    pub check: CheckKind,
    pub verdict: Verdict,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Metric(MetricField),
    MetricPair(MetricField, MetricField),
    Affinor(AffinorField),
    Structure(NonlocalStructure),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedExample {
    pub id: String,
    pub description: String,
    pub coordinates: Vec<String>,
    pub payload: Payload,
    /// Recommended sampling box.
    pub bounds: Vec<(f64, f64)>,
    pub expectations: Vec<Expectation>,
}

impl NamedExample {
    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    /// Default plan on the recommended box.
    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan::cube(self.dim(), 0.0, 1.0).with_bounds(self.bounds.clone())
    }

    /// Runs `check` on the payload; checks that do not apply to the payload
    /// kind are input errors.
    pub fn run(&self, check: CheckKind, plan: &SamplingPlan) -> Result<CheckReport> {
        run_on_payload(&self.payload, check, plan)
    }
}

/// Dispatches a check to the payload it applies to.
pub fn run_on_payload(payload: &Payload, check: CheckKind, plan: &SamplingPlan) -> Result<CheckReport> {
    use CheckKind::*;
    match (payload, check) {
        (Payload::Metric(g), RiemannFlat) => check_riemann_flat(g, plan),
        (Payload::Metric(g), LeviCivitaConsistency) => check_levi_civita_consistency(g, plan),
        (Payload::Metric(g), Ferapontov) => check_ferapontov(&NonlocalStructure::local(g.clone()), plan),
        (Payload::MetricPair(g1, g2), NonsingularPencil) => check_nonsingular(g1, g2, plan),
        (Payload::MetricPair(g1, g2), AlmostCompatible) => check_almost_compatible(g1, g2, plan),
        (Payload::MetricPair(g1, g2), CompatibleMetrics) => check_compatible(g1, g2, plan),
        (Payload::MetricPair(g1, g2), SimultaneousDiagonal) => {
            check_simultaneous_diagonalization(g1, g2, &[], plan)
        }
        (Payload::Affinor(v), Diagonalizable) => check_diagonalizable(v, plan),
        (Payload::Affinor(v), FrobeniusIntegrability) => {
            frobenius_integrability_check(v, plan, FROBENIUS_FD_STEP)
        }
        (Payload::Affinor(v), RiemannInvariants2d) => check_riemann_invariants_2d(v, plan),
        (Payload::Structure(s), RiemannFlat) => check_riemann_flat(&s.g, plan),
        (Payload::Structure(s), LeviCivitaConsistency) => check_levi_civita_consistency(&s.g, plan),
        (Payload::Structure(s), Ferapontov) => check_ferapontov(s, plan),
        (Payload::Structure(s), HolonomicDiagonal) => check_holonomic_diagonal_structure(s, plan),
        (Payload::Structure(s), BracketPencil) => check_bracket_pair_compatibility(s, s, plan),
        (_, check) => Err(Error::InvalidInput(format!(
            "check `{check}` does not apply to this payload"
        ))),
    }
}

fn coordinate_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn parse_rows(rows: &[&[&str]], names: &[String]) -> Vec<Vec<String>> {
    debug_assert_eq!(rows.len(), names.len());
    rows.iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect()
}

const WDVV_BOX: (f64, f64) = (-2.0, 2.0);

fn expect(check: CheckKind, verdict: Verdict, basis: Basis) -> Expectation {
    Expectation {
        check,
        verdict,
        basis,
    }
}

/// Identifiers in their documented order.
pub fn corpus_list() -> Vec<String> {
    let mut ids: Vec<String> = ["wdvv_system", "wdvv_g1", "wdvv_g2", "sphere_mf_K1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    ids.extend((1..=MAX_DIMENSION).map(|n| format!("euclidean_{n}")));
    ids.push("swapped_diag".to_string());
    ids
}

/// A fresh copy of the named example.
pub fn corpus_get(id: &str) -> Result<NamedExample> {
    use Verdict::*;
    let unknown = || Error::UnknownExample(id.to_string());
    let example = match id {
        "wdvv_system" => {
            let names = coordinate_names("a", 3);
            let v = AffinorField::parse(
                &parse_rows(&[&["0", "1", "0"], &["0", "0", "1"], &["-a3", "2*a2", "-a1"]], &names),
                &names,
            )?;
            NamedExample {
                id: id.into(),
                description: "Affinor of the first-order form of the associativity (WDVV) \
                              equation in three components: integrable but not diagonalizable"
                    .into(),
                coordinates: names,
                payload: Payload::Affinor(v),
                bounds: vec![WDVV_BOX; 3],
                expectations: vec![
                    expect(CheckKind::Diagonalizable, Fail, Basis::Literature),
                    expect(CheckKind::FrobeniusIntegrability, Fail, Basis::Computed),
                ],
            }
        }
        "wdvv_g1" => {
            let names = coordinate_names("a", 3);
            let g = MetricField::parse(
                &parse_rows(
                    &[
                        &["-3/2", "a1/2", "a2"],
                        &["a1/2", "a2", "3*a3/2"],
                        &["a2", "3*a3/2", "2*(a2^2 - a1*a3)"],
                    ],
                    &names,
                ),
                &names,
            )?;
            NamedExample {
                id: id.into(),
                description: "Flat metric of the first-order Hamiltonian structure of the \
                              associativity equation"
                    .into(),
                coordinates: names,
                payload: Payload::Metric(g),
                bounds: vec![WDVV_BOX; 3],
                expectations: vec![
                    expect(CheckKind::RiemannFlat, Pass, Basis::Literature),
                    expect(CheckKind::Ferapontov, Pass, Basis::Literature),
                    expect(CheckKind::LeviCivitaConsistency, Pass, Basis::Immediate),
                ],
            }
        }
        "wdvv_g2" => {
            let names = coordinate_names("a", 3);
            let g = MetricField::parse(
                &parse_rows(
                    &[&["0", "0", "1"], &["0", "1", "-a1"], &["1", "-a1", "a1^2 + 2*a2"]],
                    &names,
                ),
                &names,
            )?;
            NamedExample {
                id: id.into(),
                description: "Flat metric of the third-order Hamiltonian structure of the \
                              associativity equation (printed as g_1 in its source; it is the \
                              second metric of the pair)"
                    .into(),
                coordinates: names,
                payload: Payload::Metric(g),
                bounds: vec![WDVV_BOX; 3],
                expectations: vec![
                    expect(CheckKind::RiemannFlat, Pass, Basis::Literature),
                    expect(CheckKind::Ferapontov, Pass, Basis::Literature),
                    expect(CheckKind::LeviCivitaConsistency, Pass, Basis::Immediate),
                ],
            }
        }
        "sphere_mf_K1" => {
            let names = coordinate_names("u", 2);
            let g = MetricField::parse(
                &parse_rows(&[&["1", "0"], &["0", "1/sin(u1)^2"]], &names),
                &names,
            )?;
            NamedExample {
                id: id.into(),
                description: "Round unit sphere: constant-curvature bracket with L = 1, \
                              w = identity, mu = (1)"
                    .into(),
                coordinates: names,
                payload: Payload::Structure(NonlocalStructure::constant_curvature(g, 1.0)?),
                bounds: vec![(0.2, 2.9), (0.0, 1.0)],
                expectations: vec![
                    expect(CheckKind::Ferapontov, Pass, Basis::Literature),
                    expect(CheckKind::HolonomicDiagonal, Pass, Basis::Literature),
                    expect(CheckKind::LeviCivitaConsistency, Pass, Basis::Immediate),
                    expect(CheckKind::BracketPencil, Pass, Basis::Immediate),
                ],
            }
        }
        "swapped_diag" => {
            let names = coordinate_names("u", 2);
            let g1 = MetricField::parse(&parse_rows(&[&["u2", "0"], &["0", "u1"]], &names), &names)?;
            let g2 = MetricField::euclidean(2)?;
            NamedExample {
                id: id.into(),
                description: "Metric pair whose pencil affinor is diag(u2, u1), with \
                              non-vanishing Nijenhuis tensor N^1_12 = u2 - u1"
                    .into(),
                coordinates: names,
                payload: Payload::MetricPair(g1, g2),
                bounds: vec![(0.5, 1.5); 2],
                expectations: vec![
                    expect(CheckKind::AlmostCompatible, Fail, Basis::Computed),
                    expect(CheckKind::CompatibleMetrics, Fail, Basis::Computed),
                ],
            }
        }
        other => {
            let n: usize = other
                .strip_prefix("euclidean_")
                .and_then(|s| s.parse().ok())
                .filter(|n| (1..=MAX_DIMENSION).contains(n))
                .ok_or_else(unknown)?;
            NamedExample {
                id: id.into(),
                description: format!("Euclidean metric in {n} dimensions"),
                coordinates: coordinate_names("u", n),
                payload: Payload::Metric(MetricField::euclidean(n)?),
                bounds: vec![(-1.0, 1.0); n],
                expectations: vec![
                    expect(CheckKind::RiemannFlat, Pass, Basis::Immediate),
                    expect(CheckKind::Ferapontov, Pass, Basis::Immediate),
                    expect(CheckKind::LeviCivitaConsistency, Pass, Basis::Immediate),
                ],
            }
        }
    };
    Ok(example)
}

// ---------------------------------------------------------------------------
// Generators

/// Random rational with denominator in `1..=8`, in `[lo, hi]`.
fn rational(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let q: i64 = rng.gen_range(1..=8);
    let p_lo = (lo * q as f64).ceil() as i64;
    let p_hi = (hi * q as f64).floor() as i64;
    rng.gen_range(p_lo..=p_hi) as f64 / q as f64
}

/// Exponent vectors of all monomials in `n` variables of total degree
/// `1..=degree`, in graded lexicographic order.
fn monomials(n: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            if left == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(n, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 1..=degree {
        rec(n, d, &mut Vec::new(), &mut out);
    }
    out
}

fn monomial(exponents: &[usize], vars: &[usize]) -> Expr {
    let mut factors = Vec::new();
    for (&e, &v) in exponents.iter().zip(vars) {
        match e {
            0 => {}
            1 => factors.push(Expr::coord(v)),
            e => factors.push(Expr::coord(v).powi(e as i32)),
        }
    }
    factors
        .into_iter()
        .reduce(|a, b| a * b)
        .unwrap_or_else(Expr::one)
}

/// A polynomial in the coordinates `vars` with random rational
/// coefficients in `[−2, 2]`, shifted so that it is at least `floor` on
/// `[0, 1]^vars`. Returns the expression and an upper bound on its value.
fn positive_polynomial(rng: &mut ChaCha8Rng, vars: &[usize], degree: usize, floor: f64) -> (Expr, f64) {
    let mut terms = Vec::new();
    let mut negative = 0.0;
    let mut positive = 0.0;
    for exps in monomials(vars.len(), degree) {
        let c = rational(rng, -2.0, 2.0);
        if c == 0.0 {
            continue;
        }
        if c < 0.0 {
            negative += -c;
        } else {
            positive += c;
        }
        terms.push(Expr::constant(c) * monomial(&exps, vars));
    }
    let c0 = rational(rng, floor, 2.0) + negative;
    let mut all = vec![Expr::constant(c0)];
    all.extend(terms);
    (sum(all), c0 + positive)
}

/// Single-variable polynomials `f^i(u^i)` with pairwise disjoint ranges on
/// `[0, 1]`, all at least `2`.
fn separated_functions(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> Vec<Expr> {
    let mut out = Vec::with_capacity(n);
    let mut next_floor = 2.0;
    for i in 0..n {
        let (p, upper) = positive_polynomial(rng, &[i], degree.max(1), 0.0);
        // p ranges in [0, upper]; shift it to start at next_floor.
        out.push(Expr::constant(next_floor) + p);
        next_floor += upper + 1.0;
    }
    out
}

/// Options of [`generate_theorem3_pair_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Theorem3Options {
    /// Use one shared constant for every `f^i` (a singular but compatible
    /// pair).
    pub shared_constant: Option<f64>,
}

/// A generated pair `g₂ = diag(g^i(u))`, `g₁ = diag(f^i(u^i) g^i(u))` on
/// the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem3Pair {
    pub g1: MetricField,
    pub g2: MetricField,
    pub g: Vec<Expr>,
    pub f: Vec<Expr>,
    pub bounds: Vec<(f64, f64)>,
}

pub fn generate_theorem3_pair(seed: u64, n: usize, degree: usize) -> Result<(MetricField, MetricField)> {
    let pair = generate_theorem3_pair_with(seed, n, degree, Theorem3Options::default())?;
    Ok((pair.g1, pair.g2))
}

/// Compatible diagonal pair with random positive polynomial `g^i` of the
/// given total degree and random `f^i(u^i)` with disjoint ranges.
pub fn generate_theorem3_pair_with(
    seed: u64,
    n: usize,
    degree: usize,
    options: Theorem3Options,
) -> Result<Theorem3Pair> {
    if !(2..=MAX_DIMENSION).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "dimension must be in 2..={MAX_DIMENSION}, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..n).collect();
    let g: Vec<Expr> = (0..n)
        .map(|_| positive_polynomial(&mut rng, &all, degree, 0.125).0)
        .collect();
    let f = match options.shared_constant {
        Some(c) => vec![Expr::constant(c); n],
        None => separated_functions(&mut rng, n, degree),
    };
    let g2 = MetricField::diagonal(g.clone())?;
    let g1 = MetricField::diagonal(f.iter().zip(&g).map(|(f, g)| f.clone() * g.clone()).collect())?;
    Ok(Theorem3Pair {
        g1,
        g2,
        g,
        f,
        bounds: vec![(0.0, 1.0); n],
    })
}

/// Fields of a generated instance in the coordinates where they are
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenFields {
    pub s1: NonlocalStructure,
    pub s2: NonlocalStructure,
    pub v: AffinorField,
    pub bounds: Vec<(f64, f64)>,
}

/// A bi-Hamiltonian diagonalizable system in disguise: every field is
/// diagonal in hidden coordinates `u` and emitted in `ũ = A u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem6Instance {
    pub s1: NonlocalStructure,
    pub s2: NonlocalStructure,
    pub system: HydroSystem,
    pub change: LinearChange,
    /// A box in the emitted coordinates whose preimage lies in the hidden
    /// unit cube.
    pub bounds: Vec<(f64, f64)>,
    pub hidden: HiddenFields,
}

impl Theorem6Instance {
    pub fn v(&self) -> &AffinorField {
        match &self.system {
            HydroSystem::Explicit(v) => v,
            HydroSystem::Hamiltonian(_) => unreachable!("generated systems are explicit"),
        }
    }
}

const CHANGE_RETRIES: usize = 100;

/// Random `A = I + E` with entries of `E` in `{−1/4, −3/16, …, 1/4}`,
/// redrawn until reasonably conditioned.
fn random_change(rng: &mut ChaCha8Rng, n: usize) -> Result<LinearChange> {
    for _ in 0..CHANGE_RETRIES {
        let a = DMatrix::from_fn(n, n, |i, j| {
            let e = rng.gen_range(-4..=4) as f64 / 16.0;
            if i == j {
                1.0 + e
            } else {
                e
            }
        });
        let sv = a.clone().singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() < 10.0 {
            return LinearChange::new(a);
        }
    }
    Err(Error::GenerationFailed(format!(
        "no well-conditioned coordinate change after {CHANGE_RETRIES} draws"
    )))
}

/// Builds a nonsingular pair of compatible brackets and a system
/// Hamiltonian for both, diagonal in hidden coordinates on `[0, 1]^n`:
///
/// * `g₂ = diag(φ_i(u^i))`, `g₁ = diag(f^i(u^i) φ_i(u^i))` (both flat, with
///   distinct pencil eigenvalues `f^i`);
/// * `legs = 0`: local brackets; `legs = 1`: each bracket gets the affinor
///   `diag(c(u¹), 0, …, 0)` with `μ = (1)`, which satisfies the diagonal
///   Codazzi and Gauss conditions for a separable flat metric;
/// * `V = diag(ψ_i(u^i))` with disjoint ranges.
///
/// All fields are then expressed in `ũ = A u` for a random `A`.
pub fn generate_theorem6_instance(seed: u64, n: usize, legs: usize) -> Result<Theorem6Instance> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidInput(format!("dimension must be 2 or 3, got {n}")));
    }
    if legs > 1 {
        return Err(Error::InvalidInput(format!("legs must be 0 or 1, got {legs}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: Vec<Expr> = (0..n)
        .map(|i| positive_polynomial(&mut rng, &[i], 2, 0.125).0)
        .collect();
    let f = separated_functions(&mut rng, n, 1);
    let psi = separated_functions(&mut rng, n, 2);
    let g2 = MetricField::diagonal(phi.clone())?;
    let g1 = MetricField::diagonal(f.iter().zip(&phi).map(|(f, p)| f.clone() * p.clone()).collect())?;
    let leg_affinors = |rng: &mut ChaCha8Rng| -> Result<Vec<AffinorField>> {
        if legs == 0 {
            return Ok(Vec::new());
        }
        let (c, _) = positive_polynomial(rng, &[0], 2, 0.125);
        let mut entries = vec![Expr::zero(); n];
        entries[0] = c;
        Ok(vec![AffinorField::diagonal(entries)?])
    };
    let mu = || {
        if legs == 0 {
            DMatrix::zeros(0, 0)
        } else {
            DMatrix::from_element(1, 1, 1.0)
        }
    };
    let hidden_s1 = NonlocalStructure::new(g1, leg_affinors(&mut rng)?, mu())?;
    let hidden_s2 = NonlocalStructure::new(g2, leg_affinors(&mut rng)?, mu())?;
    let hidden_v = AffinorField::diagonal(psi)?;
    let change = random_change(&mut rng, n)?;

    let inverse = &change.inverse;
    let radius = 0.5 / (0..n)
        .map(|i| (0..n).map(|j| inverse[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let center = change.apply(&vec![0.5; n]);
    // Shrink slightly so that rounding cannot push samples off the cube.
    let bounds = center
        .iter()
        .map(|c| (c - 0.999 * radius, c + 0.999 * radius))
        .collect();

    Ok(Theorem6Instance {
        s1: hidden_s1.transformed(&change)?,
        s2: hidden_s2.transformed(&change)?,
        system: HydroSystem::Explicit(hidden_v.transformed(&change)?),
        change,
        bounds,
        hidden: HiddenFields {
            s1: hidden_s1,
            s2: hidden_s2,
            v: hidden_v,
            bounds: vec![(0.0, 1.0); n],
        },
    })
}

/// Off-diagonal share of the Frobenius norm of a real matrix.
pub fn real_off_diagonal_mass(m: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    let mut off = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let x = m[(i, j)] * m[(i, j)];
            total += x;
            if i != j {
                off += x;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (off / total).sqrt()
    }
}

/// Largest off-diagonal mass of the instance's fields pulled back through
/// `A⁻¹` and evaluated at `points` of the hidden cube.
pub fn theorem6_round_trip_mass(instance: &Theorem6Instance, points: &[Vec<f64>]) -> Result<f64> {
    let back = instance.change.inverted();
    let mut fields: Vec<ExprMatrix> = Vec::new();
    for s in [&instance.s1, &instance.s2] {
        fields.push(back.transform_contravariant(s.g.components())?);
        for w in &s.affinors {
            fields.push(back.transform_mixed(w.components())?);
        }
    }
    fields.push(back.transform_mixed(instance.v().components())?);
    let mut worst = 0.0_f64;
    for p in points {
        for m in &fields {
            worst = worst.max(real_off_diagonal_mass(&m.eval(p)?));
        }
    }
    Ok(worst)
}

/// Dimension check helper shared by callers that mix payload kinds.
pub fn payload_dim(payload: &Payload) -> usize {
    match payload {
        Payload::Metric(g) | Payload::MetricPair(g, _) => g.dim(),
        Payload::Affinor(v) => AffinorSource::dim(v),
        Payload::Structure(s) => s.dim(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_contains_named_entries() {
        let ids = corpus_list();
        for id in ["wdvv_system", "wdvv_g1", "wdvv_g2", "sphere_mf_K1", "swapped_diag", "euclidean_3"] {
            assert!(ids.iter().any(|x| x == id), "{id}");
        }
        for id in &ids {
            assert_eq!(&corpus_get(id).unwrap().id, id);
        }
        assert!(matches!(corpus_get("nope"), Err(Error::UnknownExample(_))));
        assert!(matches!(corpus_get("euclidean_9"), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials(2, 2).len(), 5);
        assert_eq!(monomials(3, 1), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn compatible_pair_generation_is_deterministic_and_positive() {
        let a = generate_theorem3_pair_with(1, 3, 2, Theorem3Options::default()).unwrap();
        let b = generate_theorem3_pair_with(1, 3, 2, Theorem3Options::default()).unwrap();
        assert_eq!(a, b);
        for p in [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.3, 0.9, 0.1]] {
            for g in &a.g {
                assert!(g.eval(&p).unwrap() >= 0.125 - 1e-12);
            }
            let f: Vec<f64> = a.f.iter().map(|f| f.eval(&p).unwrap()).collect();
            assert!(f.iter().all(|&x| x >= 2.0));
        }
    }

    #[test]
    fn separated_ranges_are_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = separated_functions(&mut rng, 3, 2);
        let range = |e: &Expr, i: usize| {
            let vals: Vec<f64> = (0..=100)
                .map(|k| {
                    let mut p = vec![0.5; 3];
                    p[i] = k as f64 / 100.0;
                    e.eval(&p).unwrap()
                })
                .collect();
            (vals.iter().cloned().fold(f64::INFINITY, f64::min), vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        };
        let r: Vec<(f64, f64)> = f.iter().enumerate().map(|(i, e)| range(e, i)).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(r[i].1 < r[j].0 || r[j].1 < r[i].0);
            }
        }
    }

    #[test]
    fn diagonal_instance_box_maps_into_hidden_cube() {
        let inst = generate_theorem6_instance(3, 3, 1).unwrap();
        for corner in 0..8 {
            let p: Vec<f64> = (0..3)
                .map(|k| if corner >> k & 1 == 1 { inst.bounds[k].1 } else { inst.bounds[k].0 })
                .collect();
            let u = inst.change.pull(&p);
            assert!(u.iter().all(|&x| (0.0..=1.0).contains(&x)), "{u:?}");
        }
    }
}
