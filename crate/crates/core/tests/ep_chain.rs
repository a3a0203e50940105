//! The double zero of the two-shell family and the objects built on it.

use num_complex::Complex64 as C;
use std::sync::OnceLock;

use resonance::degeneracy::{
    double_delta_family, find_double_zero, track_zero, DegeneracyOptions, DegeneracyResult, EpReport, ParamPoint, TrackStatus,
};
use resonance::gamow::{build_jordan_chain, chain_identities, ChainOptions};
use resonance::grid::GridSpec;
use resonance::solver::JostSolver;
use resonance::spectral::{build_basis, pole_order_fit, represent_operator, ContourSpec, GreensEvaluator, OpFunction};
use resonance::zeros::{count_zeros_in_box, find_zeros, s_matrix, SearchBox};
use resonance::PotentialSpec;

struct Ep {
    family: PotentialSpec,
    deg: DegeneracyResult,
    spec: PotentialSpec,
    solver: JostSolver,
}

fn ep() -> &'static Ep {
    static EP: OnceLock<Ep> = OnceLock::new();
    EP.get_or_init(|| {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/ep.json");
        let fx: EpReport = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let family = double_delta_family(1.0, 2.2, 2.5, [fx.p_star[0], fx.p_star[1]]).unwrap();
        let seed = ParamPoint { p: fx.p_star.clone(), k: fx.k_m.into() };
        let deg = find_double_zero(&family, 0, &seed, &DegeneracyOptions::default()).unwrap();
        let spec = family.with_params(&deg.p_star).unwrap();
        let solver = JostSolver::with_defaults(&spec, 0).unwrap();
        Ep { family, deg, spec, solver }
    })
}

#[test]
fn seeding_from_the_fixture_reproduces_it() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/ep.json");
    let fx: EpReport = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let e = ep();
    assert!((e.deg.k_m - C::from(fx.k_m)).norm() < 1e-10);
    for (a, b) in e.deg.p_star.iter().zip(&fx.p_star) {
        assert!((a - b).abs() < 1e-9 * b.abs());
    }
}

#[test]
fn tight_box_counts_two() {
    let e = ep();
    assert_eq!(count_zeros_in_box(&e.solver, &SearchBox::around(e.deg.k_m, 0.05)).unwrap(), 2);
    let census = find_zeros(&e.solver, &SearchBox::around(e.deg.k_m, 0.05)).unwrap();
    assert_eq!(census.len(), 1);
    assert_eq!(census[0].multiplicity, 2);
}

#[test]
fn cauchy_and_ode_derivatives_agree() {
    let e = ep();
    let k = C::new(1.7, -0.35);
    let a = e.solver.jost_derivatives(k, 2, 0.05, 64).unwrap();
    let b = e.solver.jost_derivatives_ode(k, 2).unwrap();
    for n in 1..=2 {
        assert!((a.d(n) - b.d(n)).norm() <= 1e-7 * b.d(n).norm().max(1.0), "order {n}");
    }
}

#[test]
fn second_k_derivative_solves_its_equation() {
    // phi'' + k^2 phi = 0 between shells, hence phidd'' + k^2 phidd + 4 k phid + 2 phi = 0
    let e = ep();
    let k = e.deg.k_m;
    let fam = e.solver.regular_family(k, 2);
    let (phi, phid, phidd) = (&fam[0], &fam[1], &fam[2]);
    let r = &e.solver.grid.r;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 2..r.len() - 2 {
        let h = r[j + 1] - r[j];
        let uniform = (r[j] - r[j - 1] - h).abs() < 1e-12 && (r[j + 2] - r[j + 1] - h).abs() < 1e-12 && (r[j - 1] - r[j - 2] - h).abs() < 1e-12;
        let away = (r[j - 2] > 1.0 || r[j + 2] < 1.0) && (r[j - 2] > 2.2 || r[j + 2] < 2.2);
        if !uniform || !away || r[j] > e.spec.cutoff {
            continue;
        }
        let du = phidd.du();
        let d2 = (-du[j + 2] + 8.0 * du[j + 1] - 8.0 * du[j - 1] + du[j - 2]) / (12.0 * h);
        let res = d2 + k * k * phidd.u()[j] + 4.0 * k * phid.u()[j] + 2.0 * phi.u()[j];
        worst = worst.max(res.norm());
        scale = scale.max((4.0 * k * phid.u()[j]).norm());
    }
    assert!(worst <= 1e-6 * scale, "{worst} vs {scale}");
}

#[test]
fn straight_path_runs_into_the_double_zero() {
    let e = ep();
    let p = &e.deg.p_star;
    // approach along the first parameter from below; follow one of the split zeros
    let start = vec![p[0] - 0.05, p[1]];
    let zeros = find_zeros(&JostSolver::with_defaults(&e.family.with_params(&start).unwrap(), 0).unwrap(), &SearchBox::around(e.deg.k_m, 0.2))
        .unwrap();
    assert!(!zeros.is_empty());
    let path: Vec<Vec<f64>> = (0..=200).map(|i| vec![start[0] + 0.1 * i as f64 / 200.0, p[1]]).collect();
    let tr = track_zero(&e.family, 0, &path, zeros[0].k, &DegeneracyOptions::default()).unwrap();
    match tr.status {
        TrackStatus::DoubleZeroEncountered { p: hit, .. } => {
            assert!((hit[0] - p[0]).abs().hypot(hit[1] - p[1]) < 1e-3, "{hit:?} vs {p:?}");
        }
        other => panic!("expected a double zero, got {other:?}"),
    }
}

#[test]
fn scattering_matrix_has_a_simple_pole_at_a_simple_zero() {
    let e = ep();
    let zeros = find_zeros(&e.solver, &SearchBox::new((0.5, 8.5), (-1.2, -0.01))).unwrap();
    let z = zeros.iter().find(|z| z.multiplicity == 1).unwrap();
    let dir = C::from_polar(1.0, 0.7);
    let ds = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3];
    let xs: Vec<f64> = ds.iter().map(|d: &f64| d.ln()).collect();
    let ys: Vec<f64> = ds.iter().map(|&d| s_matrix(&e.solver, z.k + dir * d).unwrap().norm().ln()).collect();
    let order = -resonance::degeneracy::slope(&xs, &ys);
    assert!((order - 1.0).abs() <= 0.02, "{order}");
}

#[test]
fn greens_function_pole_orders() {
    let e = ep();
    let ev = GreensEvaluator::new(&e.spec, 0, &GridSpec::default(), &[0.7, 1.9]).unwrap();
    let ds = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3];
    let at_ep = pole_order_fit(&ev, e.deg.k_m * e.deg.k_m, true, 0.7, 1.9, &ds).unwrap();
    assert!((at_ep - 2.0).abs() <= 0.05, "{at_ep}");
    let zeros = find_zeros(&e.solver, &SearchBox::new((0.5, 8.5), (-1.2, -0.01))).unwrap();
    let z = zeros.iter().find(|z| z.multiplicity == 1).unwrap();
    let simple = pole_order_fit(&ev, z.k, false, 0.7, 1.9, &ds).unwrap();
    assert!((simple - 1.0).abs() <= 0.02, "{simple}");
}

#[test]
fn operator_blocks_at_the_double_zero() {
    let e = ep();
    let basis = build_basis(&e.spec, 0, &GridSpec::default(), &ContourSpec::default(), Some(&e.deg), C::new(1.0, 0.0), &ChainOptions::default())
        .unwrap();
    let em = basis.chain.as_ref().unwrap().energy();
    let block = |f: OpFunction| {
        let b = represent_operator(&f, &basis).jordan_block.unwrap();
        (C::from(b.eigenvalue), C::from(b.offdiag))
    };
    let close = |a: C, b: C| (a - b).norm() <= 1e-12 * b.norm().max(1.0);

    let (d, o) = block(OpFunction::Identity);
    assert!(close(d, em) && close(o, C::new(1.0, 0.0)));

    let z = C::new(3.0, 0.5);
    let (d, o) = block(OpFunction::Resolvent(z.into()));
    assert!(close(d, 1.0 / (z - em)) && close(o, 1.0 / ((z - em) * (z - em))));

    let t = 1.3;
    let (d, o) = block(OpFunction::propagator(t));
    let ph = (C::new(0.0, -t) * em).exp();
    assert!(close(d, ph) && close(o, C::new(0.0, -t) * ph));

    // a different X only rescales the off-diagonal entry by X^2
    let x = C::new(0.0, 1.0);
    let b = represent_operator(&OpFunction::Identity, &basis.with_x(x)).jordan_block.unwrap();
    assert!(close(C::from(b.offdiag), x * x));
}

#[test]
fn normalized_rules_hold_for_other_x() {
    let e = ep();
    let opts = ChainOptions::default();
    let chain = build_jordan_chain(&e.solver, &e.deg, C::new(2.0, 0.0), &opts).unwrap();
    let (ids, ints) = chain_identities(&e.solver, &chain, &opts).unwrap();
    assert!(ids.max() <= 1e-6);
    assert!(ints.u_sq.norm() <= 1e-6);
    assert!(ints.uhat_sq.norm() <= 1e-6);
    assert!((ints.u_uhat - 1.0).norm() <= 1e-6);
}

#[test]
fn chain_is_covariant_under_scaling() {
    let e = ep();
    let s = 1.6;
    let family = e.family.scaled(s);
    let seed = ParamPoint { p: e.deg.p_star.iter().map(|p| p * s).collect(), k: e.deg.k_m * s };
    let deg = find_double_zero(&family, 0, &seed, &DegeneracyOptions::default()).unwrap();
    assert!((deg.k_m - e.deg.k_m * s).norm() <= 1e-8 * deg.k_m.norm());
    let solver = JostSolver::with_defaults(&family.with_params(&deg.p_star).unwrap(), 0).unwrap();
    let opts = ChainOptions::default();
    let (ids, _) = chain_identities(&solver, &build_jordan_chain(&solver, &deg, C::new(1.0, 0.0), &opts).unwrap(), &opts).unwrap();
    let (ids0, _) = chain_identities(&e.solver, &build_jordan_chain(&e.solver, &e.deg, C::new(1.0, 0.0), &opts).unwrap(), &opts).unwrap();
    assert!(ids.max() <= 1e-6 && ids0.max() <= 1e-6);
}
