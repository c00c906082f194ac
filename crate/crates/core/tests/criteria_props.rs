use hydrocheck::corpus::{corpus_get, generate_theorem3_pair, Payload};
use hydrocheck::criteria::{
    assemble_hamiltonian_affinor, check_almost_compatible, check_compatible, check_ferapontov,
    check_hamiltonian_affinor, check_holonomic_diagonal_structure, check_nonsingular,
    check_semihamiltonian, check_structural_flow_integrability, holonomic_residuals,
    semihamiltonian_terms, AssembledAffinor, NonlocalStructure,
};
use hydrocheck::expr::{linear_combination, parse_expression, Expr};
use hydrocheck::fields::{AffinorField, ExprMatrix, LinearChange, MetricField};
use hydrocheck::report::{CheckReport, Verdict};
use hydrocheck::sampling::SamplingPlan;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("u{i}")).collect()
}

fn ex(text: &str, n: usize) -> Expr {
    parse_expression(text, &names(n)).unwrap()
}

fn metric(rows: &[&[&str]]) -> MetricField {
    let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
    MetricField::parse(&rows, &names(rows.len())).unwrap()
}

fn corpus_metric(id: &str) -> MetricField {
    match corpus_get(id).unwrap().payload {
        Payload::Metric(g) => g,
        Payload::Structure(s) => s.g,
        _ => panic!("{id} is not a metric"),
    }
}

/// A positive definite metric with generic polynomial entries.
fn generic_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricField {
    let mut rows = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut terms = vec![Expr::one()];
            let mut coeffs = vec![if i == j { 3.0 } else { 0.0 }];
            for k in 0..n {
                terms.push(Expr::coord(k));
                coeffs.push(rng.gen_range(-0.5..0.5));
                terms.push(Expr::coord(k).powi(2));
                coeffs.push(rng.gen_range(-0.5..0.5));
            }
            let e = linear_combination(&coeffs, &terms);
            rows[i][j] = e.clone();
            rows[j][i] = e;
        }
    }
    MetricField::new(ExprMatrix::new(rows).unwrap())
}

/// Verdict of the Nijenhuis record against the combined verdict of the
/// connection-pencil records.
fn nijenhuis_and_pencil_verdicts(rep: &CheckReport) -> (Verdict, Verdict) {
    let nij = rep.condition("pencil-nijenhuis").unwrap().verdict;
    let pencil = rep
        .conditions
        .iter()
        .filter(|c| c.condition_id.starts_with("connection-pencil"))
        .fold(Verdict::Pass, |v, c| v.combine(c.verdict));
    (nij, pencil)
}

#[test]
fn nijenhuis_criterion_agrees_with_connection_pencil() {
    let mut pairs: Vec<(String, MetricField, MetricField, Vec<(f64, f64)>)> = Vec::new();
    let swapped = corpus_get("swapped_diag").unwrap();
    if let Payload::MetricPair(a, b) = &swapped.payload {
        pairs.push(("swapped_diag".into(), a.clone(), b.clone(), swapped.bounds.clone()));
    }
    let wdvv_box = vec![(-2.0, 2.0); 3];
    pairs.push(("wdvv".into(), corpus_metric("wdvv_g1"), corpus_metric("wdvv_g2"), wdvv_box.clone()));
    pairs.push(("wdvv_self".into(), corpus_metric("wdvv_g1"), corpus_metric("wdvv_g1"), wdvv_box));
    for seed in 0..4 {
        let (a, b) = generate_theorem3_pair(seed, 3, 2).unwrap();
        pairs.push((format!("generated/{seed}"), a, b, vec![(0.0, 1.0); 3]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..4 {
        let a = generic_metric(&mut rng, 2 + k % 2);
        let b = generic_metric(&mut rng, 2 + k % 2);
        let n = a.dim();
        pairs.push((format!("generic/{k}"), a, b, vec![(-1.0, 1.0); n]));
    }
    let mut seen = [0usize; 2];
    for (label, a, b, bounds) in pairs {
        let plan = SamplingPlan::cube(a.dim(), 0.0, 1.0).with_bounds(bounds).with_count(32);
        assert!(plan.lambda_samples.len() >= 3);
        let rep = check_almost_compatible(&a, &b, &plan).unwrap();
        let (nij, pencil) = nijenhuis_and_pencil_verdicts(&rep);
        assert_eq!(nij, pencil, "{label}: {rep:#?}");
        seen[(nij == Verdict::Pass) as usize] += 1;
    }
    // Both directions of the equivalence are exercised.
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}

#[test]
fn nonsingular_almost_compatible_pairs_are_compatible() {
    for seed in 10..16 {
        let (a, b) = generate_theorem3_pair(seed, 3, 2).unwrap();
        let plan = SamplingPlan::cube(3, 0.0, 1.0).with_count(32).with_seed(seed);
        let nonsingular = check_nonsingular(&a, &b, &plan).unwrap().verdict;
        let almost = check_almost_compatible(&a, &b, &plan).unwrap();
        if nonsingular == Verdict::Pass && almost.condition("pencil-nijenhuis").unwrap().verdict == Verdict::Pass {
            let rep = check_compatible(&a, &b, &plan).unwrap();
            for c in rep.conditions.iter().filter(|c| c.condition_id.starts_with("curvature-pencil")) {
                assert_eq!(c.verdict, Verdict::Pass, "seed {seed}: {c:?}");
            }
        } else {
            panic!("generated pair {seed} should be nonsingular and almost compatible");
        }
    }
}

#[test]
fn perturbed_generated_pair_is_not_compatible() {
    let (g1, g2) = generate_theorem3_pair(2, 2, 1).unwrap();
    let bent = MetricField::new(
        ExprMatrix::from_fn(2, |i, j| {
            let e = g1.components().get(i, j).clone();
            if i != j {
                e + Expr::coord(0) * Expr::coord(1)
            } else {
                e
            }
        })
        .unwrap(),
    );
    let plan = SamplingPlan::cube(2, 0.0, 1.0);
    assert_eq!(check_almost_compatible(&bent, &g2, &plan).unwrap().verdict, Verdict::Fail);
    assert_eq!(check_compatible(&bent, &g2, &plan).unwrap().verdict, Verdict::Fail);
}

#[test]
fn assembled_affinors_are_hamiltonian() {
    let sphere = corpus_get("sphere_mf_K1").unwrap();
    let Payload::Structure(s) = sphere.payload.clone() else { panic!() };
    let plan = sphere.plan();
    for h in ["u1^2*u2", "cos(u1) + u2^3", "exp(u2)*sin(u1)"] {
        let h = ex(h, 2);
        // With w = identity the flow condition reads dh = df.
        let flow = check_structural_flow_integrability(&h, &s.affinors[0], &plan).unwrap();
        assert_eq!(flow.verdict, Verdict::Pass);
        let v = AssembledAffinor::new(s.clone(), h.clone(), vec![h.clone()]).unwrap();
        let rep = check_hamiltonian_affinor(&v, &s.g, &plan).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:#?}");
    }
    let flat = NonlocalStructure::local(corpus_metric("wdvv_g2"));
    let plan = SamplingPlan::cube(3, -2.0, 2.0).with_count(32);
    for h in ["u1*u2*u3", "u1^3 - u2*u3^2", "exp(u1/4)*u2"] {
        let v = AssembledAffinor::new(flat.clone(), ex(h, 3), vec![]).unwrap();
        let rep = check_hamiltonian_affinor(&v, &flat.g, &plan).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{h}: {rep:#?}");
    }
}

#[test]
fn assembled_affinor_on_sphere_matches_closed_form() {
    let Payload::Structure(s) = corpus_get("sphere_mf_K1").unwrap().payload else { panic!() };
    let h = ex("u1^2*u2", 2);
    let (x, y) = (0.9, 0.4);
    let v = assemble_hamiltonian_affinor(&s, &h, std::slice::from_ref(&h), &[x, y]).unwrap();
    // Covariant metric diag(1, sin²x); Γ¹₂₂ = −sin x cos x, Γ²₁₂ = cot x.
    // ∇∇h = [[2y, 2x − cot x · x²], [·, sin x cos x · 2xy]], V = g⁻¹∇∇h + h·I.
    let (s_, c_) = (x.sin(), x.cos());
    let cot = c_ / s_;
    let hess_cov = DMatrix::from_row_slice(2, 2, &[
        2.0 * y,
        2.0 * x - cot * x * x,
        2.0 * x - cot * x * x,
        s_ * c_ * 2.0 * x * y,
    ]);
    let g_up = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0 / (s_ * s_)]);
    let expected = g_up * hess_cov + DMatrix::identity(2, 2) * (x * x * y);
    assert!((v - expected).amax() < 1e-10);
}

/// Second-order central differences of `q_ij = ∂_jV^i / (V^j − V^i)` from
/// plain values.
fn semihamiltonian_oracle(v: &[Expr], p: &[f64], i: usize, j: usize, k: usize) -> f64 {
    let h = 1e-4;
    let q = |p: &[f64]| {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[j] += h;
        b[j] -= h;
        let dv = (v[i].eval(&a).unwrap() - v[i].eval(&b).unwrap()) / (2.0 * h);
        dv / (v[j].eval(p).unwrap() - v[i].eval(p).unwrap())
    };
    let mut a = p.to_vec();
    let mut b = p.to_vec();
    a[k] += h;
    b[k] -= h;
    (q(&a) - q(&b)) / (2.0 * h)
}

#[test]
fn semihamiltonian_terms_match_finite_differences() {
    let v = vec![ex("u2 + u3^2", 3), ex("0", 3), ex("1", 3)];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(1.5..2.5)).collect();
        let (lhs, rhs) = semihamiltonian_terms(&v, &p).unwrap();
        // Triples (i, j, k) with j < k and i ∉ {j, k}: (0,1,2), (1,0,2), (2,0,1).
        for (n, (i, j, k)) in [(0, 1, 2), (1, 0, 2), (2, 0, 1)].into_iter().enumerate() {
            let l = semihamiltonian_oracle(&v, &p, i, j, k);
            let r = semihamiltonian_oracle(&v, &p, i, k, j);
            assert!((lhs[n] - l).abs() < 1e-5 * (1.0 + l.abs()), "{} vs {l}", lhs[n]);
            assert!((rhs[n] - r).abs() < 1e-5 * (1.0 + r.abs()), "{} vs {r}", rhs[n]);
        }
    }
    let plan = SamplingPlan::cube(3, 1.5, 2.5);
    let rep = check_semihamiltonian(&v, &plan).unwrap();
    assert!(rep.max_residual() > 0.0);
}

#[test]
fn holonomic_residuals_match_closed_form() {
    // Sphere metric with w = diag(u1, u1), μ = (1).
    let g = metric(&[&["1", "0"], &["0", "1/sin(u1)^2"]]);
    let w = AffinorField::diagonal(vec![Expr::coord(0), Expr::coord(0)]).unwrap();
    let s = NonlocalStructure::new(g, vec![w], DMatrix::from_element(1, 1, 1.0)).unwrap();
    for x in [0.5, 1.0, 2.0] {
        let p = [x, 0.3];
        let res = holonomic_residuals(&s, &p).unwrap();
        // Weingarten: only (i, k) = (2, 1) is non-trivial:
        // lhs 2 g² ∂₁w² = 2/sin²x, rhs (w² − w¹) ∂₁g² = 0.
        let lhs = 2.0 / x.sin().powi(2);
        let oracle = lhs / (1.0 + lhs);
        assert!((res.weingarten - oracle).abs() < 1e-8 * (1.0 + oracle), "{} vs {oracle}", res.weingarten);
        // Gauss: R^{12}_{21} = 1 for the unit sphere, rhs = w¹w² = x².
        let oracle = (1.0 - x * x).abs() / (1.0 + 1.0f64.max(x * x));
        assert!((res.curvature - oracle).abs() < 1e-8, "{} vs {oracle}", res.curvature);
        assert!(res.off_block < 1e-12);
    }
    let plan = SamplingPlan::cube(2, 0.0, 1.0).with_bounds(vec![(0.2, 2.9), (0.0, 1.0)]);
    assert_eq!(check_holonomic_diagonal_structure(&s, &plan).unwrap().verdict, Verdict::Fail);
}

#[test]
fn verdicts_survive_linear_changes() {
    let change = LinearChange::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.9])).unwrap();
    let swapped = corpus_get("swapped_diag").unwrap();
    let Payload::MetricPair(a, b) = &swapped.payload else { panic!() };
    let (ta, tb) = (a.transformed(&change).unwrap(), b.transformed(&change).unwrap());
    // Sample the image of the original box's inscribed region by pushing
    // the original sample points through the change.
    let plan = swapped.plan().with_count(32);
    let original = check_almost_compatible(a, b, &plan).unwrap();
    let corners: Vec<Vec<f64>> = [[0.5, 0.5], [0.5, 1.5], [1.5, 0.5], [1.5, 1.5]]
        .iter()
        .map(|p| change.apply(p))
        .collect();
    // A box inside the image parallelogram, around the image of the center.
    let c = change.apply(&[1.0, 1.0]);
    let r = 0.2;
    for corner in &corners {
        assert!((corner[0] - c[0]).abs() > r && (corner[1] - c[1]).abs() > r);
    }
    let moved_plan = SamplingPlan::cube(2, 0.0, 1.0)
        .with_bounds(vec![(c[0] - r, c[0] + r), (c[1] - r, c[1] + r)])
        .with_count(32);
    let moved = check_almost_compatible(&ta, &tb, &moved_plan).unwrap();
    assert_eq!(original.verdict, moved.verdict);
    let ratio = moved.condition("pencil-nijenhuis").unwrap().max_residual
        / original.condition("pencil-nijenhuis").unwrap().max_residual;
    assert!((0.1..10.0).contains(&ratio), "{ratio}");

    let Payload::Structure(s) = corpus_get("sphere_mf_K1").unwrap().payload else { panic!() };
    let ts = s.transformed(&change).unwrap();
    let c = change.apply(&[1.5, 0.5]);
    let plan = SamplingPlan::cube(2, 0.0, 1.0).with_bounds(vec![(c[0] - 0.2, c[0] + 0.2), (c[1] - 0.2, c[1] + 0.2)]);
    assert_eq!(check_ferapontov(&ts, &plan).unwrap().verdict, Verdict::Pass);
    let bad = NonlocalStructure::new(ts.g.clone(), ts.affinors.clone(), DMatrix::from_element(1, 1, 2.0)).unwrap();
    assert_eq!(check_ferapontov(&bad, &plan).unwrap().verdict, Verdict::Fail);
}
