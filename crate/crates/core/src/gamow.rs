//! Normalized bound and Gamow states, the Gamow-Jordan chain at a double
//! zero, the regularized normalization identities, and the radial
//! Hamiltonian applied on the grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::degeneracy::DegeneracyResult;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::output::{Cx, SCHEMA};
use crate::potential::PotentialSpec;
use crate::regulated::{regulated_integral, RegMethod, RegOptions, RegulatedIntegral, SplitIntegrand};
use crate::riccati::free_jost_tails;
use crate::solver::JostSolver;
use crate::tail::Tail;
use crate::zeros::{ZeroClass, ZeroRecord};

type C = Complex64;

/// A function known on the grid up to the cutoff and exactly beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFn {
    pub f: GridFunction,
    pub tail: Tail,
}

impl StateFn {
    pub fn scale(&self, s: C) -> StateFn {
        StateFn { f: self.f.scale(s), tail: self.tail.scale(s) }
    }

    pub fn axpy(&self, s: C, other: &StateFn) -> StateFn {
        StateFn { f: self.f.axpy(s, other.f_ref()), tail: self.tail.add(&other.tail.scale(s)) }
    }

    fn f_ref(&self) -> &GridFunction {
        &self.f
    }

    pub fn product(&self, other: &StateFn) -> StateFn {
        StateFn { f: self.f.product(&other.f), tail: self.tail.mul(&other.tail) }
    }

    /// Value at any `r`: interpolated inside the cutoff, exact beyond.
    pub fn value_at(&self, grid: &RadialGrid, cutoff: f64, r: f64) -> C {
        if r >= cutoff {
            self.tail.eval(C::new(r, 0.0))
        } else {
            self.f.interpolate(grid, r)
        }
    }
}

fn wr(a: (C, C), b: (C, C)) -> C {
    a.0 * b.1 - a.1 * b.0
}

/// Exact continuations beyond `R` of a solution and its k-derivative, given
/// their values and slopes at `R`. Terms below `prune` relative size at `R`
/// (the incoming wave at a zero) are dropped.
pub fn continuation_tails(l: u32, k: C, big_r: f64, phi: (C, C), phidot: Option<(C, C)>, prune: f64) -> Vec<Tail> {
    let hp = free_jost_tails(l, k, 1);
    let hm = free_jost_tails(l, k, -1);
    let rr = C::new(big_r, 0.0);
    let at = |t: &Tail| (t.eval(rr), t.deriv(rr));
    let (p0, p1, m0, m1) = (at(&hp[0]), at(&hp[1]), at(&hm[0]), at(&hm[1]));
    let w0 = wr(p0, m0);
    let alpha = wr(phi, m0) / w0;
    let beta = wr(p0, phi) / w0;
    let mut out = vec![hp[0].scale(alpha).add(&hm[0].scale(beta)).pruned(big_r, prune)];
    if let Some(pd) = phidot {
        let dw0 = wr(p1, m0) + wr(p0, m1);
        let dalpha = (wr(pd, m0) + wr(phi, m1) - alpha * dw0) / w0;
        let dbeta = (wr(p0, pd) + wr(p1, phi) - beta * dw0) / w0;
        let t = hp[0]
            .scale(dalpha)
            .add(&hp[1].scale(alpha))
            .add(&hm[0].scale(dbeta))
            .add(&hm[1].scale(beta));
        out.push(t.pruned(big_r, prune));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub reg: RegOptions,
    pub method: RegMethod,
    /// Relative size below which incoming tail terms are dropped at a zero.
    pub prune: f64,
    pub d2_min: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { reg: RegOptions::default(), method: RegMethod::GaussianExtrapolated, prune: 1e-9, d2_min: 1e-4 }
    }
}

/// Regularized `int a b dr` (bilinear, no conjugation).
pub fn pair_integral(
    solver: &JostSolver,
    a: &StateFn,
    b: &StateFn,
    method: RegMethod,
    opts: &RegOptions,
) -> Result<RegulatedIntegral> {
    let prod = a.product(b);
    let split = SplitIntegrand {
        grid: &solver.grid,
        interior: prod.f,
        upto: solver.cutoff_index(),
        tail: prod.tail,
    };
    regulated_integral(&split, method, opts)
}

/// Regularized integral by the Gaussian regulator when it applies, else by the exact tail.
pub fn berggren_integral(solver: &JostSolver, a: &StateFn, b: &StateFn, opts: &RegOptions) -> Result<RegulatedIntegral> {
    match pair_integral(solver, a, b, RegMethod::GaussianExtrapolated, opts) {
        Err(Error::RegulatorInapplicable(_)) => pair_integral(solver, a, b, RegMethod::ExactTail, opts),
        other => other,
    }
}

fn regular_state(solver: &JostSolver, k: C, with_dot: bool, prune: f64) -> Vec<StateFn> {
    let fam = solver.regular_family(k, usize::from(with_dot));
    let j = solver.cutoff_index();
    let big_r = solver.grid.r[j];
    let phi = (fam[0].u()[j], fam[0].du()[j]);
    let dot = with_dot.then(|| (fam[1].u()[j], fam[1].du()[j]));
    let tails = continuation_tails(solver.l, k, big_r, phi, dot, prune);
    fam.into_iter().zip(tails).map(|(s, t)| StateFn { f: s.f, tail: t }).collect()
}

/// `f_l(k)` and its k-derivative, i.e. the Jost function at `-k`.
fn incoming_jost(solver: &JostSolver, k: C) -> Result<(C, C)> {
    let (f, df) = solver.jost_and_slope(-k)?;
    Ok((f, -df))
}

/// Normalized eigenfunction at a simple zero.
#[derive(Debug, Clone)]
pub struct GamowState {
    pub k: C,
    pub l: u32,
    pub class: ZeroClass,
    /// Normalization from the Jost-function derivative.
    pub n2: C,
    /// Regularized `int phi^2` as a cross-check of `n2`.
    pub n2_integral: Option<C>,
    pub discrepancy: Option<f64>,
    pub phi: StateFn,
    /// `u = phi / N`, principal square root.
    pub u: StateFn,
}

impl GamowState {
    pub fn energy(&self) -> C {
        self.k * self.k
    }
}

/// `N^2 = int phi^2` from the derivative of the Jost function.
pub fn derivative_norm(solver: &JostSolver, k: C) -> Result<C> {
    let (_, d1) = solver.jost_and_slope(k)?;
    let (jm, _) = incoming_jost(solver, k)?;
    let p = 2 * (solver.l as i32 + 1);
    Ok(-jm * d1 / (4.0 * C::i() * k.powi(p)))
}

/// Normalized state at a simple zero without the integral cross-check.
pub fn simple_state(solver: &JostSolver, zero: &ZeroRecord, opts: &ChainOptions) -> Result<GamowState> {
    if zero.multiplicity != 1 {
        return Err(Error::MultiplicityMismatch { expected: 1, found: zero.multiplicity });
    }
    let k = zero.k;
    let n2 = derivative_norm(solver, k)?;
    let phi = regular_state(solver, k, false, opts.prune).remove(0);
    let u = phi.scale(1.0 / n2.sqrt());
    Ok(GamowState { k, l: solver.l, class: zero.class, n2, n2_integral: None, discrepancy: None, phi, u })
}

/// Normalized state at a simple zero, with the regularized `int phi^2` and
/// its relative discrepancy from the derivative formula.
pub fn normalize_simple(solver: &JostSolver, zero: &ZeroRecord, opts: &ChainOptions) -> Result<GamowState> {
    let mut st = simple_state(solver, zero, opts)?;
    let integral = berggren_integral(solver, &st.phi, &st.phi, &opts.reg)?;
    st.n2_integral = Some(integral.value);
    st.discrepancy = Some((integral.value - st.n2).norm() / st.n2.norm());
    Ok(st)
}

/// The Gamow-Jordan pair at a double zero.
#[derive(Debug, Clone)]
pub struct JordanChain {
    pub k_m: C,
    pub l: u32,
    pub c_l: C,
    /// Chain normalization `int phihat phi`.
    pub n2: C,
    pub x_m: C,
    pub f2: C,
    pub f3: C,
    /// `f_l(k_m)` and its k-derivative.
    pub jm: C,
    pub djm: C,
    pub phi: StateFn,
    pub phidot: StateFn,
    /// `phidot / (2k) + C phi`.
    pub phihat: StateFn,
    pub u: StateFn,
    pub uhat: StateFn,
}

impl JordanChain {
    pub fn energy(&self) -> C {
        self.k_m * self.k_m
    }

    /// Same chain with another normalization constant `X_m`.
    pub fn with_x(&self, x_m: C) -> JordanChain {
        let n = self.n2.sqrt();
        JordanChain {
            x_m,
            u: self.phi.scale(1.0 / (x_m * n)),
            uhat: self.phihat.scale(x_m / n),
            ..self.clone()
        }
    }
}

pub fn build_jordan_chain(solver: &JostSolver, deg: &DegeneracyResult, x_m: C, opts: &ChainOptions) -> Result<JordanChain> {
    let k = deg.k_m;
    let (f2, f3) = (deg.jost.d2(), deg.jost.d3());
    if f2.norm() < opts.d2_min {
        return Err(Error::SecondDerivativeVanishes(f2.norm()));
    }
    let (jm, djm) = incoming_jost(solver, k)?;
    let l1 = solver.l as f64 + 1.0;
    let c_l = (l1 / k - 0.5 * djm / jm - f3 / (6.0 * f2)) / (2.0 * k);
    let n2 = -jm * f2 / (16.0 * C::i() * k.powi(2 * solver.l as i32 + 3));
    let mut fam = regular_state(solver, k, true, opts.prune);
    let phidot = fam.remove(1);
    let phi = fam.remove(0);
    let phihat = phidot.scale(1.0 / (2.0 * k)).axpy(c_l, &phi);
    let n = n2.sqrt();
    Ok(JordanChain {
        k_m: k,
        l: solver.l,
        c_l,
        n2,
        x_m,
        f2,
        f3,
        jm,
        djm,
        u: phi.scale(1.0 / (x_m * n)),
        uhat: phihat.scale(x_m / n),
        phi,
        phidot,
        phihat,
    })
}

/// Relative residuals of the chain identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Identities {
    /// `int phidot phi` against the Jost-derivative formula.
    pub phidot_phi: f64,
    /// `int phidot^2` against the Jost-derivative formula.
    pub phidot_sq: f64,
    /// `int phidot^2 + 4 k C int phidot phi = 0`.
    pub completed_square: f64,
    /// `int phihat phi` against the chain normalization.
    pub chain_norm: f64,
    /// `|int u^2|`.
    pub u_sq: f64,
    /// `|int uhat^2|`.
    pub uhat_sq: f64,
    /// `|int u uhat - 1|`.
    pub u_uhat: f64,
}

impl Identities {
    pub fn max(&self) -> f64 {
        [self.phidot_phi, self.phidot_sq, self.completed_square, self.chain_norm, self.u_sq, self.uhat_sq, self.u_uhat]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub schema: String,
    pub k_m: Cx,
    #[serde(rename = "C_l")]
    pub c_l: Cx,
    #[serde(rename = "N2")]
    pub n2: Cx,
    #[serde(rename = "X_m")]
    pub x_m: Cx,
    pub phi_sq: Cx,
    pub geometric_multiplicity: u32,
    pub algebraic_multiplicity: u32,
    pub identities: Identities,
}

/// Integrals entering the identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainIntegrals {
    pub phi_sq: C,
    pub phidot_phi: C,
    pub phidot_sq: C,
    pub phihat_phi: C,
    pub u_sq: C,
    pub uhat_sq: C,
    pub u_uhat: C,
}

pub fn chain_integrals(solver: &JostSolver, chain: &JordanChain, opts: &ChainOptions) -> Result<ChainIntegrals> {
    let int = |a: &StateFn, b: &StateFn| pair_integral(solver, a, b, opts.method, &opts.reg).map(|r| r.value);
    Ok(ChainIntegrals {
        phi_sq: int(&chain.phi, &chain.phi)?,
        phidot_phi: int(&chain.phidot, &chain.phi)?,
        phidot_sq: int(&chain.phidot, &chain.phidot)?,
        phihat_phi: int(&chain.phihat, &chain.phi)?,
        u_sq: int(&chain.u, &chain.u)?,
        uhat_sq: int(&chain.uhat, &chain.uhat)?,
        u_uhat: int(&chain.u, &chain.uhat)?,
    })
}

pub fn chain_identities(solver: &JostSolver, chain: &JordanChain, opts: &ChainOptions) -> Result<(Identities, ChainIntegrals)> {
    let ints = chain_integrals(solver, chain, opts)?;
    let k = chain.k_m;
    let l1 = solver.l as f64 + 1.0;
    let kp = k.powi(2 * solver.l as i32 + 2);
    let rhs64 = -chain.jm * chain.f2 / (8.0 * C::i() * kp);
    let rhs65 = -(chain.jm / (8.0 * C::i() * kp)) * (chain.f3 / 3.0 - chain.f2 * (2.0 * l1 / k - chain.djm / chain.jm));
    let rel = |a: C, b: C| (a - b).norm() / b.norm();
    let ids = Identities {
        phidot_phi: rel(ints.phidot_phi, rhs64),
        phidot_sq: rel(ints.phidot_sq, rhs65),
        completed_square: (ints.phidot_sq + 4.0 * k * chain.c_l * ints.phidot_phi).norm() / ints.phidot_sq.norm(),
        chain_norm: rel(ints.phihat_phi, chain.n2),
        u_sq: ints.u_sq.norm(),
        uhat_sq: ints.uhat_sq.norm(),
        u_uhat: (ints.u_uhat - 1.0).norm(),
    };
    Ok((ids, ints))
}

/// Dimension of the outgoing eigenspace at `k`: the regular solution is the
/// only candidate, so it is one when that solution has no incoming part.
pub fn geometric_multiplicity(solver: &JostSolver, k: C) -> u32 {
    let j = solver.cutoff_index();
    let phi = solver.regular_family(k, 0).remove(0);
    let big_r = solver.grid.r[j];
    let hp = free_jost_tails(solver.l, k, 1);
    let hm = free_jost_tails(solver.l, k, -1);
    let rr = C::new(big_r, 0.0);
    let (p0, m0) = ((hp[0].eval(rr), hp[0].deriv(rr)), (hm[0].eval(rr), hm[0].deriv(rr)));
    let w0 = wr(p0, m0);
    let pv = (phi.u()[j], phi.du()[j]);
    let alpha = wr(pv, m0) / w0;
    let beta = wr(p0, pv) / w0;
    u32::from((beta * m0.0).norm() < 1e-8 * (alpha * p0.0).norm())
}

pub fn chain_report(solver: &JostSolver, chain: &JordanChain, opts: &ChainOptions) -> Result<ChainReport> {
    let (ids, ints) = chain_identities(solver, chain, opts)?;
    Ok(ChainReport {
        schema: SCHEMA.to_string(),
        k_m: chain.k_m.into(),
        c_l: chain.c_l.into(),
        n2: chain.n2.into(),
        x_m: chain.x_m.into(),
        phi_sq: ints.phi_sq.into(),
        geometric_multiplicity: geometric_multiplicity(solver, chain.k_m),
        algebraic_multiplicity: 2,
        identities: ids,
    })
}

/// Sixth-order central weights for the first derivative.
const D6: [f64; 7] = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
/// Fourth-order central weights for the first derivative.
const D4: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

/// `-u'' + (v + l(l+1)/r^2) u` at nodes at least three steps inside a uniform
/// segment, obtained by differentiating the stored `u'`; `None` elsewhere.
/// Fails with `TooCoarse` when fourth- and sixth-order estimates of `u''`
/// differ by more than `tol` relative to the largest `|u''|`.
pub fn apply_hamiltonian(grid: &RadialGrid, u: &GridFunction, spec: &PotentialSpec, l: u32, tol: f64) -> Result<Vec<Option<C>>> {
    let mut out = vec![None; grid.len()];
    let mut noise: f64 = 0.0;
    let mut top: f64 = 0.0;
    let cl = (l * (l + 1)) as f64;
    for seg in &grid.segments {
        if !seg.uniform || seg.end < seg.start + 6 {
            continue;
        }
        let h = grid.r[seg.start + 1] - grid.r[seg.start];
        for j in seg.start + 3..=seg.end - 3 {
            let mut d6 = C::new(0.0, 0.0);
            for (i, w) in D6.iter().enumerate() {
                d6 += u.du[j + i - 3] * *w;
            }
            let mut d4 = C::new(0.0, 0.0);
            for (i, w) in D4.iter().enumerate() {
                d4 += u.du[j + i - 2] * *w;
            }
            let (d6, d4) = (d6 / h, d4 / h);
            noise = noise.max((d6 - d4).norm());
            top = top.max(d6.norm());
            let r = grid.r[j];
            out[j] = Some(-d6 + (seg.v + cl / (r * r)) * u.u[j]);
        }
    }
    let _ = spec;
    if noise > tol * top.max(f64::MIN_POSITIVE) {
        return Err(Error::TooCoarse { noise: noise / top, tol });
    }
    Ok(out)
}

/// `sqrt(sum |x|^2 h)` over the nodes where `x` is defined.
pub fn grid_norm(grid: &RadialGrid, x: &[Option<C>]) -> f64 {
    let mut acc = 0.0;
    for j in 0..grid.len().saturating_sub(1) {
        if let Some(v) = x[j] {
            let h = grid.r[j + 1] - grid.r[j];
            acc += v.norm_sqr() * h;
        }
    }
    acc.sqrt()
}

/// `||(H - E) u||`, `||(H - E) uhat - X^2 u||` and `||(H - E) uhat||`, each over `||X^2 u||`.
pub fn jordan_defects(solver: &JostSolver, chain: &JordanChain, tol: f64) -> Result<(f64, f64, f64)> {
    let e = chain.energy();
    let x2 = chain.x_m * chain.x_m;
    let hu = apply_hamiltonian(&solver.grid, &chain.u.f, &solver.spec, solver.l, tol)?;
    let hv = apply_hamiltonian(&solver.grid, &chain.uhat.f, &solver.spec, solver.l, tol)?;
    let mask = |j: usize, x: Option<C>| x.map(|_| x2 * chain.u.f.u[j]);
    let u_only: Vec<Option<C>> = hu.iter().enumerate().map(|(j, x)| mask(j, *x)).collect();
    let d1: Vec<Option<C>> = hu.iter().enumerate().map(|(j, x)| x.map(|v| x2 * (v - e * chain.u.f.u[j]))).collect();
    let d2: Vec<Option<C>> = hv
        .iter()
        .enumerate()
        .map(|(j, x)| x.map(|v| v - e * chain.uhat.f.u[j] - x2 * chain.u.f.u[j]))
        .collect();
    let not_eigen: Vec<Option<C>> = hv.iter().enumerate().map(|(j, x)| x.map(|v| v - e * chain.uhat.f.u[j])).collect();
    let nu = grid_norm(&solver.grid, &u_only);
    Ok((grid_norm(&solver.grid, &d1) / nu, grid_norm(&solver.grid, &d2) / nu, grid_norm(&solver.grid, &not_eigen) / nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zeros::{find_zeros, SearchBox};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn free_wave_is_an_eigenfunction_of_h() {
        let spec = PotentialSpec::free(3.0);
        let s = JostSolver::with_defaults(&spec, 0).unwrap();
        let k = c(1.3, 0.0);
        let phi = s.regular(k);
        let hu = apply_hamiltonian(&s.grid, &phi.f, &spec, 0, 1e-3).unwrap();
        for (j, v) in hu.iter().enumerate() {
            if let Some(v) = v {
                assert!((v - k * k * phi.u()[j]).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn square_well_bound_state_norm() {
        let spec = PotentialSpec::square_well(-4.0, 1.0).unwrap();
        let s = JostSolver::with_defaults(&spec, 0).unwrap();
        let z = find_zeros(&s, &SearchBox::new((-0.5, 0.5), (0.05, 3.0))).unwrap().remove(0);
        let st = normalize_simple(&s, &z, &ChainOptions::default()).unwrap();
        assert!(st.n2.re > 0.0 && st.n2.im.abs() < 1e-8 * st.n2.re);
        assert!(st.discrepancy.unwrap() < 1e-7, "{:?}", st.discrepancy);
    }

    #[test]
    fn one_shell_resonances_follow_berggren() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 4.0)], 1.5).unwrap();
        let s = JostSolver::with_defaults(&spec, 0).unwrap();
        let zs = find_zeros(&s, &SearchBox::new((0.5, 4.5), (-1.2, -0.01))).unwrap();
        for z in &zs {
            let st = normalize_simple(&s, z, &ChainOptions::default()).unwrap();
            assert!(st.discrepancy.unwrap() < 1e-5, "{}: {:?}", z.k, st.discrepancy);
        }
    }

    #[test]
    fn double_zero_is_required_for_multiplicity_two_input() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 4.0)], 1.5).unwrap();
        let s = JostSolver::with_defaults(&spec, 0).unwrap();
        let mut z = find_zeros(&s, &SearchBox::new((0.5, 4.5), (-1.2, -0.01))).unwrap().remove(0);
        z.multiplicity = 2;
        assert!(matches!(
            normalize_simple(&s, &z, &ChainOptions::default()),
            Err(Error::MultiplicityMismatch { .. })
        ));
    }
}
