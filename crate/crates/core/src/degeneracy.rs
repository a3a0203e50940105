//! Double zeros of the Jost function in a two-parameter potential family:
//! Newton search, zero tracking along parameter paths, square-root splitting
//! and the monodromy of the two zeros around the branch point.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::output::{Cx, SCHEMA};
use crate::potential::PotentialSpec;
use crate::solver::{JostData, JostSolver, SolverOptions};
use crate::zeros::{record, ZeroRecord};

type C = Complex64;

/// A potential depending on real parameters.
pub trait Family {
    fn spec_at(&self, p: &[f64]) -> Result<PotentialSpec>;
}

/// A spec whose `free_params` slots are the parameters.
impl Family for PotentialSpec {
    fn spec_at(&self, p: &[f64]) -> Result<PotentialSpec> {
        self.with_params(p)
    }
}

/// Family given by a closure.
pub struct FnFamily<F>(pub F);

impl<F: Fn(&[f64]) -> Result<PotentialSpec>> Family for FnFamily<F> {
    fn spec_at(&self, p: &[f64]) -> Result<PotentialSpec> {
        (self.0)(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub p: Vec<f64>,
    pub k: C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Relative step of the central parameter differences.
    pub fd_rel: f64,
    pub d2_min: f64,
    pub cauchy_rho: f64,
    pub cauchy_points: usize,
    /// `|f'|` below which a tracked zero is declared to have met its partner.
    pub dz_threshold: f64,
    pub grid: GridSpec,
    pub solver: SolverOptions,
}

impl Default for DegeneracyOptions {
    fn default() -> Self {
        DegeneracyOptions {
            max_iter: 60,
            tol: 1e-10,
            fd_rel: 1e-5,
            d2_min: 1e-4,
            cauchy_rho: 0.05,
            cauchy_points: 64,
            dz_threshold: 0.05,
            grid: GridSpec::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl DegeneracyOptions {
    pub fn solver_for(&self, spec: &PotentialSpec, l: u32) -> Result<JostSolver> {
        JostSolver::new(spec, l, &self.grid, self.solver)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyResult {
    pub p_star: Vec<f64>,
    pub k_m: C,
    /// `f, f', f'', f'''` at `k_m` from the Cauchy circle.
    pub jost: JostData,
    pub newton_iters: usize,
    pub jacobian_cond: f64,
}

impl DegeneracyResult {
    pub fn residuals(&self) -> (f64, f64) {
        (self.jost.f().norm(), self.jost.d1().norm())
    }

    pub fn to_json(&self) -> EpReport {
        let (rf, rdf) = self.residuals();
        EpReport {
            schema: SCHEMA.to_string(),
            p_star: self.p_star.clone(),
            k_m: self.k_m.into(),
            residuals: EpResiduals { f: rf, df: rdf },
            f2: self.jost.d2().into(),
            f3: self.jost.d3().into(),
            newton_iters: self.newton_iters,
            jacobian_cond: self.jacobian_cond,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpResiduals {
    pub f: f64,
    pub df: f64,
}

/// EP search result as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpReport {
    pub schema: String,
    pub p_star: Vec<f64>,
    pub k_m: Cx,
    pub residuals: EpResiduals,
    pub f2: Cx,
    pub f3: Cx,
    pub newton_iters: usize,
    pub jacobian_cond: f64,
}

/// `(f, f', f'')` at `(k, p)` from the ODE route.
fn jost3(family: &dyn Family, l: u32, p: &[f64], k: C, opts: &DegeneracyOptions) -> Result<[C; 3]> {
    let spec = family.spec_at(p)?;
    let d = opts.solver_for(&spec, l)?.jost_derivatives_ode(k, 2)?;
    Ok([d.f(), d.d1(), d.d2()])
}

/// Central differences of `(f, f')` in each parameter at fixed `k`.
fn param_derivs(family: &dyn Family, l: u32, p: &[f64], k: C, opts: &DegeneracyOptions) -> Result<Vec<(C, C)>> {
    let mut out = Vec::with_capacity(p.len());
    for j in 0..p.len() {
        let h = opts.fd_rel * p[j].abs().max(1.0);
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        pp[j] += h;
        pm[j] -= h;
        let a = jost3(family, l, &pp, k, opts)?;
        let b = jost3(family, l, &pm, k, opts)?;
        out.push(((a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)));
    }
    Ok(out)
}

fn residual(v: &[C; 3]) -> f64 {
    v[0].norm().max(v[1].norm())
}

/// Newton search for `f = f' = 0` in `(Re k, Im k, p1, p2)`.
pub fn find_double_zero(
    family: &dyn Family,
    l: u32,
    seed: &ParamPoint,
    opts: &DegeneracyOptions,
) -> Result<DegeneracyResult> {
    if seed.p.len() != 2 {
        return Err(Error::Config(format!("double-zero search needs 2 free parameters, got {}", seed.p.len())));
    }
    let mut p = seed.p.clone();
    let mut k = seed.k;
    let mut cur = jost3(family, l, &p, k, opts)?;
    let mut cond = f64::NAN;
    let mut iters = 0;
    let fail = |iters: usize, res: f64, why: &str, p: &[f64], k: C| Error::NoConvergence {
        iterations: iters,
        residual: res,
        diagnostic: format!("{why}; best iterate p = {p:?}, k = {k}"),
    };
    while residual(&cur) >= opts.tol {
        if iters >= opts.max_iter {
            return Err(fail(iters, residual(&cur), "iteration limit", &p, k));
        }
        iters += 1;
        let dp = param_derivs(family, l, &p, k, opts)?;
        let cols = [cur[1], C::i() * cur[1], dp[0].0, dp[1].0];
        let cols_d = [cur[2], C::i() * cur[2], dp[0].1, dp[1].1];
        let jac = Matrix4::from_fn(|r, c| match r {
            0 => cols[c].re,
            1 => cols[c].im,
            2 => cols_d[c].re,
            _ => cols_d[c].im,
        });
        let sv = jac.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if smax < 1e-8 * residual(&cur).max(1.0) {
            return Err(fail(iters, residual(&cur), "zero Jacobian", &p, k));
        }
        cond = smax / smin;
        if !cond.is_finite() || cond > 1e14 {
            return Err(fail(iters, residual(&cur), "singular Jacobian", &p, k));
        }
        let rhs = -Vector4::new(cur[0].re, cur[0].im, cur[1].re, cur[1].im);
        let step = jac.lu().solve(&rhs).ok_or_else(|| fail(iters, residual(&cur), "singular Jacobian", &p, k))?;
        // damped update
        let mut t = 1.0;
        loop {
            let kn = k + C::new(step[0], step[1]) * t;
            let pn = vec![p[0] + t * step[2], p[1] + t * step[3]];
            let trial = family.spec_at(&pn).and_then(|_| jost3(family, l, &pn, kn, opts));
            if let Ok(v) = trial {
                if residual(&v) < residual(&cur) || t < 1e-3 {
                    k = kn;
                    p = pn;
                    cur = v;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-3 {
                return Err(fail(iters, residual(&cur), "line search failed", &p, k));
            }
        }
    }
    if cur[2].norm() < opts.d2_min {
        return Err(Error::SecondDerivativeVanishes(cur[2].norm()));
    }
    let spec = family.spec_at(&p)?;
    let jost = opts.solver_for(&spec, l)?.jost_derivatives(k, 3, opts.cauchy_rho, opts.cauchy_points)?;
    Ok(DegeneracyResult { p_star: p, k_m: k, jost, newton_iters: iters, jacobian_cond: cond })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrackStatus {
    Completed,
    /// `|f'|` fell below the threshold at path parameter `p`.
    DoubleZeroEncountered { index: usize, p: Vec<f64>, k: C },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub p: Vec<f64>,
    pub zero: ZeroRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrackPoint>,
    pub status: TrackStatus,
}

impl Trajectory {
    pub fn last_k(&self) -> C {
        self.points.last().map(|t| t.zero.k).unwrap_or(C::new(f64::NAN, f64::NAN))
    }
}

enum Step {
    Converged(C),
    Coalesced(C),
    Failed,
}

fn track_step(solver: &JostSolver, k0: C, tol: f64) -> Result<Step> {
    let mut k = k0;
    for _ in 0..8 {
        let (f, df) = solver.jost_and_slope(k)?;
        if f.norm() < tol {
            return Ok(Step::Converged(k));
        }
        if df.norm() == 0.0 {
            break;
        }
        k -= f / df;
        if !(k.re.is_finite() && k.im.is_finite()) {
            return Ok(Step::Failed);
        }
    }
    if solver.jost_and_slope(k)?.0.norm() < tol {
        return Ok(Step::Converged(k));
    }
    // slow Newton near a double root: check whether f has coalesced zeros here
    let kc = crate::zeros::newton_critical(solver, k0)?;
    let d = solver.jost_derivatives_ode(kc, 2)?;
    if (kc - k0).norm() < 0.1 && d.f().norm() < 1e-8 {
        return Ok(Step::Coalesced(kc));
    }
    Ok(Step::Failed)
}

/// Follows a simple zero from `k0` along `path`, halving steps when Newton
/// needs more than eight iterations.
pub fn track_zero(
    family: &dyn Family,
    l: u32,
    path: &[Vec<f64>],
    k0: C,
    opts: &DegeneracyOptions,
) -> Result<Trajectory> {
    let mut points = Vec::with_capacity(path.len());
    if path.is_empty() {
        return Ok(Trajectory { points, status: TrackStatus::Completed });
    }
    let mut p_prev = path[0].clone();
    let mut k_prev = k0;
    let mut k_prev2: Option<C> = None;
    for (index, target) in path.iter().enumerate() {
        let mut frac_done: f64 = 0.0;
        let mut frac: f64 = 1.0;
        let base = p_prev.clone();
        let mut halvings = 0;
        loop {
            let t = (frac_done + frac).min(1.0);
            let p: Vec<f64> = base.iter().zip(target).map(|(a, b)| a + t * (b - a)).collect();
            let solver = opts.solver_for(&family.spec_at(&p)?, l)?;
            let guess = match k_prev2 {
                Some(k2) if halvings == 0 => k_prev + (k_prev - k2),
                _ => k_prev,
            };
            let step = match track_step(&solver, guess, opts.tol)? {
                Step::Failed if guess != k_prev => track_step(&solver, k_prev, opts.tol)?,
                s => s,
            };
            match step {
                Step::Converged(k) => {
                    let rec = record(&solver, k, 1)?;
                    if rec.res_df < opts.dz_threshold {
                        points.push(TrackPoint { p: p.clone(), zero: rec });
                        return Ok(Trajectory { points, status: TrackStatus::DoubleZeroEncountered { index, p, k } });
                    }
                    k_prev2 = Some(k_prev);
                    k_prev = k;
                    frac_done = t;
                    if t >= 1.0 {
                        points.push(TrackPoint { p: p.clone(), zero: rec });
                        p_prev = p;
                        break;
                    }
                }
                Step::Coalesced(k) => {
                    points.push(TrackPoint { p: p.clone(), zero: record(&solver, k, 2)? });
                    return Ok(Trajectory { points, status: TrackStatus::DoubleZeroEncountered { index, p, k } });
                }
                Step::Failed => {
                    halvings += 1;
                    frac *= 0.5;
                    k_prev2 = None;
                    if halvings > 12 {
                        return Err(Error::LostZero { step: index });
                    }
                }
            }
        }
    }
    Ok(Trajectory { points, status: TrackStatus::Completed })
}

/// `df/dp` along `dir` at fixed `k`.
pub fn param_slope(family: &dyn Family, l: u32, p: &[f64], dir: &[f64], k: C, opts: &DegeneracyOptions) -> Result<C> {
    let h = opts.fd_rel * p.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let pp: Vec<f64> = p.iter().zip(dir).map(|(a, d)| a + h * d).collect();
    let pm: Vec<f64> = p.iter().zip(dir).map(|(a, d)| a - h * d).collect();
    let a = jost3(family, l, &pp, k, opts)?[0];
    let b = jost3(family, l, &pm, k, opts)?[0];
    Ok((a - b) / (2.0 * h))
}

/// The two simple zeros at `p* + eps * dir`, seeded from the local quadratic model.
pub fn split_pair(
    family: &dyn Family,
    l: u32,
    deg: &DegeneracyResult,
    dir: &[f64],
    eps: f64,
    opts: &DegeneracyOptions,
) -> Result<(C, C)> {
    let fp = param_slope(family, l, &deg.p_star, dir, deg.k_m, opts)?;
    let h = (-2.0 * fp * eps / deg.jost.d2()).sqrt();
    let p: Vec<f64> = deg.p_star.iter().zip(dir).map(|(a, d)| a + eps * d).collect();
    let solver = opts.solver_for(&family.spec_at(&p)?, l)?;
    let a = crate::zeros::newton_simple(&solver, deg.k_m + h, opts.tol)?;
    let b = crate::zeros::newton_simple(&solver, deg.k_m - h, opts.tol)?;
    if (a - b).norm() < 0.1 * h.norm() {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: (a - b).norm(),
            diagnostic: "split seeds converged to one zero".into(),
        });
    }
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingFit {
    pub eps: Vec<f64>,
    pub separation: Vec<f64>,
    pub exponent: f64,
}

/// Least-squares slope of `log |k1 - k2|` against `log eps`.
pub fn splitting_fit(
    family: &dyn Family,
    l: u32,
    deg: &DegeneracyResult,
    dir: &[f64],
    eps: &[f64],
    opts: &DegeneracyOptions,
) -> Result<SplittingFit> {
    let mut sep = Vec::with_capacity(eps.len());
    for &e in eps {
        let (a, b) = split_pair(family, l, deg, dir, e, opts)?;
        sep.push((a - b).norm());
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = sep.iter().map(|s| s.ln()).collect();
    Ok(SplittingFit { eps: eps.to_vec(), separation: sep, exponent: slope(&xs, &ys) })
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    pub start: [C; 2],
    pub end: [C; 2],
    pub swapped: bool,
}

/// Tracks both split zeros once around a circle of radius `rho` in the
/// parameter plane centred on `p*`.
pub fn monodromy_loop(
    family: &dyn Family,
    l: u32,
    deg: &DegeneracyResult,
    rho: f64,
    steps: usize,
    opts: &DegeneracyOptions,
) -> Result<Monodromy> {
    let (a, b) = split_pair(family, l, deg, &[1.0, 0.0], rho, opts)?;
    let path: Vec<Vec<f64>> = (0..=steps)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / steps as f64;
            vec![deg.p_star[0] + rho * th.cos(), deg.p_star[1] + rho * th.sin()]
        })
        .collect();
    // no coalescence is expected on the loop
    let loose = DegeneracyOptions { dz_threshold: 0.0, ..opts.clone() };
    let ta = track_zero(family, l, &path, a, &loose)?;
    let tb = track_zero(family, l, &path, b, &loose)?;
    let (ea, eb) = (ta.last_k(), tb.last_k());
    let tol = 1e-6 * (a - b).norm().max(1e-12) + 1e-9;
    let swapped = (ea - b).norm() < tol.max(1e-3 * (a - b).norm()) && (eb - a).norm() < tol.max(1e-3 * (a - b).norm());
    Ok(Monodromy { start: [a, b], end: [ea, eb], swapped })
}

/// The double-delta family used throughout: shells at `a1`, `a2`, strengths free.
pub fn double_delta_family(a1: f64, a2: f64, cutoff: f64, lambdas: [f64; 2]) -> Result<PotentialSpec> {
    PotentialSpec::delta_shells(&[(a1, lambdas[0]), (a2, lambdas[1])], cutoff)?
        .with_free_params(&["shells.0.lambda", "shells.1.lambda"])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_family_does_not_converge() {
        let fam = FnFamily(|_: &[f64]| Ok(PotentialSpec::free(2.0)));
        let seed = ParamPoint { p: vec![1.0, 1.0], k: C::new(2.0, -0.3) };
        match find_double_zero(&fam, 0, &seed, &DegeneracyOptions::default()) {
            Err(Error::NoConvergence { diagnostic, .. }) => assert!(diagnostic.contains("zero Jacobian")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_path_gives_constant_trajectory() {
        let fam = double_delta_family(1.0, 2.2, 2.5, [4.0, 1.0]).unwrap();
        let opts = DegeneracyOptions::default();
        let solver = opts.solver_for(&fam, 0).unwrap();
        let k0 = crate::zeros::newton_simple(&solver, C::new(2.5, -0.5), 1e-12).unwrap();
        let path = vec![vec![4.0, 1.0]; 5];
        let tr = track_zero(&fam, 0, &path, k0, &opts).unwrap();
        assert_eq!(tr.status, TrackStatus::Completed);
        for pt in &tr.points {
            assert!((pt.zero.k - k0).norm() < 1e-10);
        }
    }

    #[test]
    fn slope_of_a_line() {
        assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 1.5, 2.0]) - 0.5).abs() < 1e-15);
    }
}
