//! The acceptance checks, shared by the `verify` command and the acceptance
//! test target.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::degeneracy::{find_double_zero, monodromy_loop, splitting_fit, DegeneracyOptions, DegeneracyResult, EpReport, ParamPoint};
use crate::error::{Error, Result};
use crate::gamow::{
    berggren_integral, build_jordan_chain, chain_identities, jordan_defects, normalize_simple, ChainOptions, JordanChain,
};
use crate::grid::GridSpec;
use crate::output::{check_schema, SCHEMA};
use crate::potential::{closed_form_jost, PotentialSpec};
use crate::propagation::{propagate_survival, CnOptions};
use crate::regulated::RegOptions;
use crate::solver::{JostSolver, SolverOptions};
use crate::spectral::{
    build_basis, evolve_survival, expand_function, fit_linear_chain, laurent_coefficients, resolvent_expansion, BasisSet,
    ContourSpec, GreenQuery, GreensEvaluator, SurvivalOptions, TestFunction,
};
use crate::zeros::{certify_double, find_zeros, s_matrix, SearchBox, ZeroOptions};

type C = Complex64;

/// Upper bounds used by the checks. `all` in an override map sets every one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub oracle: f64,
    pub unitarity: f64,
    pub symmetry: f64,
    pub bound_norm: f64,
    pub berggren: f64,
    pub ep_residual: f64,
    pub split_exponent: f64,
    pub ep_norm: f64,
    pub chain_identity: f64,
    pub chain_norm: f64,
    pub jordan_u: f64,
    pub jordan_uhat: f64,
    pub resolvent: f64,
    pub laurent: f64,
    pub contour_independence: f64,
    pub x_invariance: f64,
    pub completeness: f64,
    pub survival: f64,
    pub linear_coefficient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle: 1e-8,
            unitarity: 1e-10,
            symmetry: 1e-10,
            bound_norm: 1e-7,
            berggren: 1e-5,
            ep_residual: 1e-9,
            split_exponent: 0.05,
            ep_norm: 1e-6,
            chain_identity: 1e-5,
            chain_norm: 1e-6,
            jordan_u: 1e-4,
            jordan_uhat: 1e-3,
            resolvent: 1e-4,
            laurent: 1e-5,
            contour_independence: 1e-6,
            x_invariance: 1e-8,
            completeness: 1e-4,
            survival: 1e-3,
            linear_coefficient: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn with_overrides(map: &BTreeMap<String, f64>) -> Result<Tolerances> {
        let mut value = serde_json::to_value(Tolerances::default())?;
        let obj = value.as_object_mut().expect("struct serializes to an object");
        for (name, &v) in map {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {v}")));
            }
            if name == "all" {
                for x in obj.values_mut() {
                    *x = v.into();
                }
            } else if obj.contains_key(name) {
                obj.insert(name.clone(), v.into());
            } else {
                return Err(Error::Config(format!("unknown tolerance {name}")));
            }
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Lower bounds that are part of the criteria rather than tolerances.
const D2_MIN: f64 = 1e-4;
const SIMPLE_NORM_MIN: f64 = 1e-3;
const ABLATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub detail: String,
}

impl Criterion {
    pub fn line(&self) -> String {
        let vals: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        let mut s = format!("{} {:>2} {:<28} {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.name, vals.join(" "));
        if !self.detail.is_empty() {
            s.push_str(&format!(" ({})", self.detail));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema: String,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
}

/// Everything the checks need besides the fixed reference models.
#[derive(Debug, Clone)]
pub struct VerifyInputs {
    /// Two-parameter family realizing the double zero.
    pub family: PotentialSpec,
    pub fixture: EpReport,
    pub grid: GridSpec,
    pub contour: ContourSpec,
    pub nu: Vec<f64>,
    pub seed: u64,
    pub test_function: TestFunction,
    pub tolerances: Tolerances,
}

impl VerifyInputs {
    pub fn new(family: PotentialSpec, fixture: EpReport) -> Result<Self> {
        check_schema(&fixture.schema)?;
        Ok(VerifyInputs {
            family,
            fixture,
            grid: GridSpec::default(),
            contour: ContourSpec { k_max: 240.0, ..ContourSpec::default() },
            nu: RegOptions::default().nu,
            seed: 1,
            test_function: TestFunction::gaussian(1.6, 0.1),
            tolerances: Tolerances::default(),
        })
    }
}

/// One-shell reference model.
pub fn one_shell() -> PotentialSpec {
    PotentialSpec::delta_shells(&[(1.0, 4.0)], 1.5).expect("valid reference potential")
}

/// Attractive square well, `V = -4` on `[0, 1]`.
pub fn square_well() -> PotentialSpec {
    PotentialSpec::square_well(-4.0, 1.0).expect("valid reference potential")
}

pub fn one_shell_box() -> SearchBox {
    SearchBox::new((0.5, 4.5), (-1.2, -0.01))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn complex_grid() -> Vec<C> {
    let mut out = Vec::new();
    for x in linspace(0.2, 5.0, 10) {
        for y in linspace(-1.0, -0.01, 10) {
            out.push(C::new(x, y));
        }
    }
    out
}

struct Ctx<'a> {
    inp: &'a VerifyInputs,
    tol: &'a Tolerances,
    copts: ChainOptions,
    dopts: DegeneracyOptions,
}

type Measured = BTreeMap<String, f64>;

fn make(id: u32, name: &str, body: Result<(bool, Measured, String)>) -> Criterion {
    match body {
        Ok((passed, measured, detail)) => Criterion { id, name: name.to_string(), passed, measured, detail },
        Err(e) => Criterion { id, name: name.to_string(), passed: false, measured: Measured::new(), detail: format!("{}: {e}", e.kind()) },
    }
}

fn solver(spec: &PotentialSpec, l: u32, grid: &GridSpec) -> Result<JostSolver> {
    JostSolver::new(spec, l, grid, SolverOptions::default())
}

fn oracle(cx: &Ctx, ep_spec: &PotentialSpec) -> Result<(bool, Measured, String)> {
    let mut worst: f64 = 0.0;
    for spec in [one_shell(), ep_spec.clone()] {
        let s = solver(&spec, 0, &cx.inp.grid)?;
        for k in complex_grid() {
            let exact = closed_form_jost(&spec, k)?;
            worst = worst.max((s.jost(k)? - exact).norm() / exact.norm());
        }
    }
    let m = Measured::from([("max_rel_error".to_string(), worst)]);
    Ok((worst <= cx.tol.oracle, m, String::new()))
}

fn unitarity(cx: &Ctx, ep_spec: &PotentialSpec) -> Result<(bool, Measured, String)> {
    let mut s_dev: f64 = 0.0;
    let mut sym: f64 = 0.0;
    for (spec, l) in [(one_shell(), 0), (ep_spec.clone(), 0), (square_well(), 1)] {
        let s = solver(&spec, l, &cx.inp.grid)?;
        for k in linspace(0.05, 10.0, 100) {
            s_dev = s_dev.max((s_matrix(&s, C::new(k, 0.0))?.norm() - 1.0).abs());
        }
        for k in complex_grid() {
            let a = s.jost(-k.conj())?;
            let b = s.jost(k)?.conj();
            sym = sym.max((a - b).norm() / b.norm());
        }
    }
    let m = Measured::from([("max_abs_s_minus_1".to_string(), s_dev), ("max_reflection_error".to_string(), sym)]);
    Ok((s_dev <= cx.tol.unitarity && sym <= cx.tol.symmetry, m, String::new()))
}

fn bound_rule(cx: &Ctx) -> Result<(bool, Measured, String)> {
    let s = solver(&square_well(), 0, &cx.inp.grid)?;
    let zeros = find_zeros(&s, &SearchBox::new((-0.5, 0.5), (0.05, 3.0)))?;
    if zeros.is_empty() {
        return Ok((false, Measured::new(), "no bound state found".to_string()));
    }
    let mut disc: f64 = 0.0;
    let mut imag: f64 = 0.0;
    let mut positive = true;
    for z in &zeros {
        let st = normalize_simple(&s, z, &cx.copts)?;
        disc = disc.max(st.discrepancy.unwrap_or(f64::INFINITY));
        imag = imag.max(st.n2.im.abs() / st.n2.norm());
        positive &= st.n2.re > 0.0;
    }
    let mut double = zeros[0].clone();
    double.multiplicity = 2;
    let rejected = matches!(certify_double(&s, double.k, &ZeroOptions::default()), Err(Error::BoundDegeneracyImpossible(_)))
        && matches!(normalize_simple(&s, &double, &cx.copts), Err(Error::MultiplicityMismatch { .. }));
    let m = Measured::from([
        ("bound_states".to_string(), zeros.len() as f64),
        ("max_rel_discrepancy".to_string(), disc),
        ("max_rel_imag".to_string(), imag),
    ]);
    let detail = if rejected { String::new() } else { "double bound candidate was not rejected".to_string() };
    Ok((disc <= cx.tol.bound_norm && imag <= cx.tol.bound_norm && positive && rejected, m, detail))
}

fn berggren_rule(cx: &Ctx) -> Result<(bool, Measured, String)> {
    let s = solver(&one_shell(), 0, &cx.inp.grid)?;
    let zeros = find_zeros(&s, &one_shell_box())?;
    let mut disc: f64 = 0.0;
    for z in &zeros {
        disc = disc.max(normalize_simple(&s, z, &cx.copts)?.discrepancy.unwrap_or(f64::INFINITY));
    }
    let m = Measured::from([("resonances".to_string(), zeros.len() as f64), ("max_rel_discrepancy".to_string(), disc)]);
    Ok((!zeros.is_empty() && disc <= cx.tol.berggren, m, String::new()))
}

fn ep_certification(cx: &Ctx, deg: &DegeneracyResult) -> Result<(bool, Measured, String)> {
    let (rf, rdf) = deg.residuals();
    let d2 = deg.jost.d2().norm();
    let fit = splitting_fit(&cx.inp.family, 0, deg, &[1.0, 0.0], &[1e-6, 1e-5, 1e-4, 1e-3], &cx.dopts)?;
    let mono = monodromy_loop(&cx.inp.family, 0, deg, 1e-3, 48, &cx.dopts)?;
    let m = Measured::from([
        ("abs_f".to_string(), rf),
        ("abs_df".to_string(), rdf),
        ("abs_d2f".to_string(), d2),
        ("split_exponent".to_string(), fit.exponent),
    ]);
    let ok = rf <= cx.tol.ep_residual
        && rdf <= cx.tol.ep_residual
        && d2 >= D2_MIN
        && (fit.exponent - 0.5).abs() <= cx.tol.split_exponent
        && mono.swapped;
    let detail = if mono.swapped { String::new() } else { "monodromy loop did not swap the zeros".to_string() };
    Ok((ok, m, detail))
}

fn degeneracy_criterion(cx: &Ctx, ep_solver: &JostSolver, chain: &JordanChain) -> Result<(bool, Measured, String)> {
    let at_ep = berggren_integral(ep_solver, &chain.phi, &chain.phi, &cx.copts.reg)?.value.norm();
    let mut simple_min = f64::INFINITY;
    let mut count = 0;
    let one = solver(&one_shell(), 0, &cx.inp.grid)?;
    let censuses = [(ep_solver, SearchBox::new((0.5, 8.5), (-1.2, -0.01))), (&one, one_shell_box())];
    for (s, bx) in censuses {
        for z in find_zeros(s, &bx)? {
            if z.multiplicity != 1 {
                continue;
            }
            let st = normalize_simple(s, &z, &cx.copts)?;
            simple_min = simple_min.min(st.n2_integral.map_or(0.0, |v| v.norm()));
            count += 1;
        }
    }
    let m = Measured::from([
        ("abs_int_phi2_at_ep".to_string(), at_ep),
        ("min_abs_int_phi2_simple".to_string(), simple_min),
        ("simple_zeros".to_string(), count as f64),
    ]);
    Ok((at_ep <= cx.tol.ep_norm && simple_min >= SIMPLE_NORM_MIN && count > 0, m, String::new()))
}

fn chain_criterion(cx: &Ctx, ep_solver: &JostSolver, chain: &JordanChain) -> Result<(bool, Measured, String)> {
    let mut raw: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for x in [C::new(1.0, 0.0), C::new(2.0, 0.0), C::new(0.0, 1.0)] {
        let (ids, _) = chain_identities(ep_solver, &chain.with_x(x), &cx.copts)?;
        raw = raw.max(ids.phidot_phi).max(ids.phidot_sq).max(ids.completed_square).max(ids.chain_norm);
        norm = norm.max(ids.u_sq).max(ids.uhat_sq).max(ids.u_uhat);
    }
    let m = Measured::from([("max_identity_residual".to_string(), raw), ("max_normalized_rule_residual".to_string(), norm)]);
    Ok((raw <= cx.tol.chain_identity && norm <= cx.tol.chain_norm, m, String::new()))
}

fn jordan_criterion(cx: &Ctx, ep_solver: &JostSolver, chain: &JordanChain) -> Result<(bool, Measured, String)> {
    let (du, duh, _) = jordan_defects(ep_solver, chain, 1e-3)?;
    let m = Measured::from([("rel_h_minus_e_u".to_string(), du), ("rel_h_minus_e_uhat_minus_u".to_string(), duh)]);
    Ok((du <= cx.tol.jordan_u && duh <= cx.tol.jordan_uhat, m, String::new()))
}

/// Twenty random `(E, r, r')` above the contour and away from the poles.
pub fn random_queries(basis: &BasisSet, seed: u64, n: usize) -> Vec<GreenQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poles: Vec<C> = basis.simple_states().map(|s| s.k).chain(basis.chain.as_ref().map(|c| c.k_m)).collect();
    let big_r = basis.cutoff();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let k = C::new(rng.gen_range(0.5..basis.contour.k_turn - 0.2), rng.gen_range(-0.5 * basis.contour.gamma..0.6));
        let r = rng.gen_range(0.05..big_r - 0.05);
        let rp = rng.gen_range(0.05..big_r - 0.05);
        if poles.iter().any(|p| (p - k).norm() < 0.1) {
            continue;
        }
        out.push(GreenQuery { e: (k * k).into(), r, rp });
    }
    out
}

fn resolvent_criterion(cx: &Ctx, basis: &BasisSet, ep_spec: &PotentialSpec) -> Result<(bool, Measured, String)> {
    let qs = random_queries(basis, cx.inp.seed, 20);
    let radii: Vec<f64> = qs.iter().flat_map(|q| [q.r, q.rp]).chain([0.7, 1.9, 0.4, 2.3]).collect();
    let ev = GreensEvaluator::new(ep_spec, 0, &cx.inp.grid, &radii)?;
    let expansion = resolvent_expansion(basis, &qs)?;
    let mut worst: f64 = 0.0;
    for (q, v) in qs.iter().zip(&expansion) {
        let d = ev.eval(C::from(q.e).sqrt(), q.r, q.rp)?;
        worst = worst.max((v - d).norm() / d.norm());
    }
    let deep = resolvent_expansion(&basis.with_contour(&basis.contour.deepened(2.0))?, &qs)?;
    let rescaled = resolvent_expansion(&basis.with_x(C::new(0.7, 1.3)), &qs)?;
    let rel = |a: &[C], b: &[C]| a.iter().zip(b).map(|(x, y)| (x - y).norm() / y.norm()).fold(0.0, f64::max);
    let indep = rel(&deep, &expansion);
    let xinv = rel(&rescaled, &expansion);
    let chain = basis.chain.as_ref().ok_or(Error::MultiplicityMismatch { expected: 2, found: 0 })?;
    let mut laurent: f64 = 0.0;
    let big_r = basis.cutoff();
    for (r, rp) in [(0.7, 1.9), (0.4, 2.3)] {
        let (c2, _) = laurent_coefficients(|e| ev.eval(e.sqrt(), r, rp), chain.energy(), 0.1, 64)?;
        let u = |x: f64| chain.u.value_at(&basis.solver.grid, big_r, x);
        let expect = chain.x_m * chain.x_m * u(r) * u(rp);
        laurent = laurent.max((c2 - expect).norm() / expect.norm());
    }
    let m = Measured::from([
        ("max_rel_vs_direct".to_string(), worst),
        ("laurent_rel".to_string(), laurent),
        ("contour_deepening_rel".to_string(), indep),
        ("x_rescaling_rel".to_string(), xinv),
    ]);
    let ok = worst <= cx.tol.resolvent && laurent <= cx.tol.laurent && indep <= cx.tol.contour_independence && xinv <= cx.tol.x_invariance;
    Ok((ok, m, String::new()))
}

fn completeness_criterion(cx: &Ctx, basis: &BasisSet) -> Result<(bool, Measured, String)> {
    let chi = &cx.inp.test_function;
    let full = expand_function(basis, chi, false)?;
    let ablated = expand_function(basis, chi, true)?;
    let ratio = ablated.residual / full.residual;
    let m = Measured::from([("residual".to_string(), full.residual), ("ablated_residual".to_string(), ablated.residual)]);
    Ok((full.residual <= cx.tol.completeness && ratio >= ABLATION_FACTOR, m, String::new()))
}

/// Times of the resonance-dominated window.
pub fn survival_window() -> Vec<f64> {
    (5..=20).map(|i| 0.1 * i as f64).collect()
}

fn survival_criterion(cx: &Ctx, basis: &BasisSet, ep_spec: &PotentialSpec) -> Result<(bool, Measured, String)> {
    let chi = &cx.inp.test_function;
    let ts = survival_window();
    let spectral = evolve_survival(basis, chi, &ts, &SurvivalOptions::default())?;
    let direct = propagate_survival(ep_spec, 0, chi, &ts, &CnOptions::default())?;
    let worst = spectral
        .iter()
        .zip(&direct)
        .map(|(s, d)| (C::from(s.amplitude) - d).norm() / d.norm())
        .fold(0.0, f64::max);
    let chain = basis.chain.as_ref().ok_or(Error::MultiplicityMismatch { expected: 2, found: 0 })?;
    let (_, b) = fit_linear_chain(&spectral, chain.energy());
    let ev = GreensEvaluator::new(ep_spec, 0, &cx.inp.grid, &[])?;
    let (c2, _) = laurent_coefficients(|e| ev.matrix_element(e.sqrt(), chi), chain.energy(), 0.1, 64)?;
    let expect = -C::i() * c2;
    let lin = (b - expect).norm() / expect.norm();
    let a = basis.pair(&chain.u.f, &chi.on_grid(&basis.solver.grid));
    let overlap = -C::i() * chain.x_m * chain.x_m * a * a;
    let lin_overlap = (b - overlap).norm() / overlap.norm();
    let m = Measured::from([
        ("max_rel_vs_direct".to_string(), worst),
        ("linear_coefficient_rel".to_string(), lin),
        ("linear_coefficient_vs_overlap_rel".to_string(), lin_overlap),
    ]);
    let ok = worst <= cx.tol.survival && lin <= cx.tol.linear_coefficient && lin_overlap <= cx.tol.linear_coefficient;
    Ok((ok, m, String::new()))
}

/// Runs all checks. Failures of individual computations are reported as
/// failed criteria rather than errors.
pub fn run_all(inp: &VerifyInputs) -> VerifyReport {
    let cx = Ctx {
        inp,
        tol: &inp.tolerances,
        copts: ChainOptions { reg: RegOptions { nu: inp.nu.clone(), ..RegOptions::default() }, ..ChainOptions::default() },
        dopts: DegeneracyOptions { grid: inp.grid.clone(), ..DegeneracyOptions::default() },
    };
    let seed = ParamPoint { p: inp.fixture.p_star.clone(), k: inp.fixture.k_m.into() };
    let deg = find_double_zero(&inp.family, 0, &seed, &cx.dopts);
    let ep_spec = deg.as_ref().map_err(clone_err).and_then(|d| inp.family.with_params(&d.p_star));
    let ep_solver = ep_spec.as_ref().map_err(clone_err).and_then(|s| solver(s, 0, &inp.grid));
    let chain = match (&deg, &ep_solver) {
        (Ok(d), Ok(s)) => build_jordan_chain(s, d, C::new(1.0, 0.0), &cx.copts),
        (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
    };
    let basis = match (&deg, &ep_spec) {
        (Ok(d), Ok(spec)) => build_basis(spec, 0, &inp.grid, &inp.contour, Some(d), C::new(1.0, 0.0), &cx.copts),
        (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
    };
    let with_ep = |f: &dyn Fn(&PotentialSpec) -> Result<(bool, Measured, String)>| ep_spec.as_ref().map_err(clone_err).and_then(f);
    let with_chain = |f: &dyn Fn(&JostSolver, &JordanChain) -> Result<(bool, Measured, String)>| match (&ep_solver, &chain) {
        (Ok(s), Ok(c)) => f(s, c),
        (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
    };
    let with_basis = |f: &dyn Fn(&BasisSet, &PotentialSpec) -> Result<(bool, Measured, String)>| match (&basis, &ep_spec) {
        (Ok(b), Ok(s)) => f(b, s),
        (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
    };
    let criteria = vec![
        make(1, "oracle-equivalence", with_ep(&|s| oracle(&cx, s))),
        make(2, "unitarity-and-symmetry", with_ep(&|s| unitarity(&cx, s))),
        make(3, "bound-state-rule", bound_rule(&cx)),
        make(4, "berggren-rule", berggren_rule(&cx)),
        make(5, "ep-certification", deg.as_ref().map_err(clone_err).and_then(|d| ep_certification(&cx, d))),
        make(6, "degeneracy-criterion", with_chain(&|s, c| degeneracy_criterion(&cx, s, c))),
        make(7, "jordan-chain-identities", with_chain(&|s, c| chain_criterion(&cx, s, c))),
        make(8, "jordan-relation-on-grid", with_chain(&|s, c| jordan_criterion(&cx, s, c))),
        make(9, "resolvent-expansion", with_basis(&|b, s| resolvent_criterion(&cx, b, s))),
        make(10, "completeness", with_basis(&|b, _| completeness_criterion(&cx, b))),
        make(11, "time-evolution", with_basis(&|b, s| survival_criterion(&cx, b, s))),
    ];
    VerifyReport { schema: SCHEMA.to_string(), passed: criteria.iter().all(|c| c.passed), criteria }
}

/// Errors are not `Clone`; shared failures are re-raised as configuration
/// errors carrying the original kind and message.
fn clone_err(e: &Error) -> Error {
    Error::Config(format!("{}: {e}", e.kind()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides() {
        let t = Tolerances::with_overrides(&BTreeMap::from([("all".to_string(), 1e-15)])).unwrap();
        assert_eq!(t.survival, 1e-15);
        let t = Tolerances::with_overrides(&BTreeMap::from([("oracle".to_string(), 1e-3)])).unwrap();
        assert_eq!(t.oracle, 1e-3);
        assert_eq!(t.survival, 1e-3);
        assert!(Tolerances::with_overrides(&BTreeMap::from([("nope".to_string(), 1.0)])).is_err());
        assert!(Tolerances::with_overrides(&BTreeMap::from([("oracle".to_string(), -1.0)])).is_err());
    }
}
