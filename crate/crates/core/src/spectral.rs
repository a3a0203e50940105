//! Complex-energy expansions over bound states, Gamow states, one Jordan pair
//! and a background integral along a polyline contour in the lower half of
//! the k-plane: completeness, the resolvent, functions of the Hamiltonian
//! and the survival amplitude.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_2_PI;

use crate::degeneracy::DegeneracyResult;
use crate::error::{Error, Result};
use crate::gamow::{build_jordan_chain, continuation_tails, simple_state, ChainOptions, GamowState, JordanChain, StateFn};
use crate::grid::{integrate_range, GridFunction, GridSpec, RadialGrid};
use crate::output::{Cx, SCHEMA};
use crate::potential::PotentialSpec;
use crate::quad::segment_rule;
use crate::riccati::free_jost_tails;
use crate::solver::{free_regular, JostSolver, SolverOptions};
use crate::zeros::{find_zeros, SearchBox, ZeroClass};

type C = Complex64;

/// Polyline `0 -> -i gamma -> k_turn - i gamma -> k_turn -> k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub gamma: f64,
    pub k_turn: f64,
    pub k_max: f64,
    pub vertical_panels: usize,
    pub bottom_panels: usize,
    /// Panel width on the real-axis leg.
    pub real_width: f64,
    /// Upper end of the bound-state search on the imaginary axis.
    pub bound_max: f64,
    /// Smallest admitted distance between a pole and the contour.
    pub clearance: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec {
            gamma: 0.4,
            k_turn: 4.0,
            k_max: 120.0,
            vertical_panels: 6,
            bottom_panels: 30,
            real_width: 0.5,
            bound_max: 10.0,
            clearance: 1e-3,
        }
    }
}

impl ContourSpec {
    pub fn vertices(&self) -> [C; 5] {
        let g = self.gamma;
        [C::new(0.0, 0.0), C::new(0.0, -g), C::new(self.k_turn, -g), C::new(self.k_turn, 0.0), C::new(self.k_max, 0.0)]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.k_turn > 0.0
            && self.k_max > self.k_turn
            && self.vertical_panels > 0
            && self.bottom_panels > 0
            && self.real_width > 0.0
            && self.clearance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid contour {self:?}")))
        }
    }

    /// Quadrature nodes and complex weights, sized so that `e^{-i k^2 t}`
    /// turns by at most three radians per real-leg panel up to `t_max`.
    pub fn nodes(&self, t_max: f64) -> Vec<(C, C)> {
        let v = self.vertices();
        let mut out = segment_rule(v[0], v[1], self.vertical_panels);
        out.extend(segment_rule(v[1], v[2], self.bottom_panels));
        out.extend(segment_rule(v[2], v[3], self.vertical_panels));
        let mut x = self.k_turn;
        while x < self.k_max {
            let mut w = self.real_width;
            if t_max > 0.0 {
                w = w.min(1.5 / (x * t_max));
            }
            let end = (x + w).min(self.k_max);
            out.extend(segment_rule(C::new(x, 0.0), C::new(end, 0.0), 1));
            x = end;
        }
        out
    }

    /// Real leg cut where a test function of smallest width `w` has no
    /// weight left, `K = 12 / w`, capped by `k_max`.
    pub fn for_width(&self, w: f64) -> ContourSpec {
        ContourSpec { k_max: self.k_max.min((12.0 / w).max(self.k_turn + self.real_width)), ..self.clone() }
    }

    /// Number of real-leg panels `nodes(t_max)` would use.
    pub fn real_panels(&self, t_max: f64) -> usize {
        if t_max <= 0.0 {
            return ((self.k_max - self.k_turn) / self.real_width).ceil() as usize;
        }
        // x grows by min(width, 1.5/(x t)) per panel
        let x_switch = (1.5 / (self.real_width * t_max)).clamp(self.k_turn, self.k_max);
        let coarse = (x_switch - self.k_turn) / self.real_width;
        let fine = (self.k_max.powi(2) - x_switch.powi(2)) * t_max / 3.0;
        (coarse + fine).ceil() as usize + 1
    }

    /// Strictly between the real axis and the contour.
    pub fn encloses(&self, z: C) -> bool {
        z.re > 0.0 && z.re < self.k_turn && z.im < 0.0 && z.im > -self.gamma
    }

    pub fn distance(&self, z: C) -> f64 {
        let v = self.vertices();
        v.windows(2).map(|s| seg_distance(z, s[0], s[1])).fold(f64::INFINITY, f64::min)
    }

    pub fn deepened(&self, factor: f64) -> ContourSpec {
        ContourSpec { gamma: self.gamma * factor, ..self.clone() }
    }
}

fn seg_distance(z: C, a: C, b: C) -> f64 {
    let d = b - a;
    let t = (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

/// Sum of Gaussian bumps `amp * exp(-(r - center)^2 / (2 width^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub bumps: Vec<Bump>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amp: Cx,
    pub center: f64,
    pub width: f64,
}

impl TestFunction {
    pub fn gaussian(center: f64, width: f64) -> Self {
        TestFunction { bumps: vec![Bump { amp: Cx { re: 1.0, im: 0.0 }, center, width }] }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: C, other: &TestFunction, b: C) -> TestFunction {
        let sc = |t: &TestFunction, s: C| {
            t.bumps.iter().map(move |x| Bump { amp: (C::from(x.amp) * s).into(), ..*x }).collect::<Vec<_>>()
        };
        let mut bumps = sc(self, a);
        bumps.extend(sc(other, b));
        TestFunction { bumps }
    }

    pub fn eval(&self, r: f64) -> (C, C) {
        let mut v = C::new(0.0, 0.0);
        let mut d = C::new(0.0, 0.0);
        for b in &self.bumps {
            let x = (r - b.center) / b.width;
            let g = C::from(b.amp) * (-0.5 * x * x).exp();
            v += g;
            d += -g * x / b.width;
        }
        (v, d)
    }

    pub fn on_grid(&self, grid: &RadialGrid) -> GridFunction {
        GridFunction::from_fn(grid, |r| self.eval(r))
    }

    pub fn min_width(&self) -> f64 {
        self.bumps.iter().map(|b| b.width).fold(f64::INFINITY, f64::min)
    }

    /// Requires the function to vanish (to 1e-14 of its peak) at `0` and `r_last`.
    pub fn check_support(&self, r_last: f64) -> Result<()> {
        let peak = self.bumps.iter().map(|b| C::from(b.amp).norm()).sum::<f64>();
        let edge = self.eval(r_last).0.norm().max(self.eval(0.0).0.norm());
        if self.bumps.is_empty() || edge > 1e-14 * peak {
            return Err(Error::Config(format!("test function is not negligible at the ends of [0, {r_last}]")));
        }
        Ok(())
    }
}

/// Discrete basis plus contour, together with the solver its states live on.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub solver: JostSolver,
    pub grid_spec: GridSpec,
    pub contour: ContourSpec,
    pub bound: Vec<GamowState>,
    pub resonances: Vec<GamowState>,
    pub chain: Option<JordanChain>,
}

fn clash(z: C) -> Error {
    Error::ContourPoleClash(z)
}

/// Collects every zero between the real axis and the contour. A double zero
/// must be matched by `ep`, which then supplies the Jordan pair.
pub fn build_basis(
    spec: &PotentialSpec,
    l: u32,
    grid_spec: &GridSpec,
    contour: &ContourSpec,
    ep: Option<&DegeneracyResult>,
    x_m: C,
    opts: &ChainOptions,
) -> Result<BasisSet> {
    contour.validate()?;
    let solver = JostSolver::new(spec, l, grid_spec, SolverOptions::default())?;
    let cl = contour.clearance;
    let bound_box = SearchBox::new((-0.25, 0.25), (2.0 * cl, contour.bound_max));
    let mut bound = Vec::new();
    for z in find_zeros(&solver, &bound_box)? {
        if z.class != ZeroClass::Bound {
            continue;
        }
        // f_l(k') vanishes at k' = -i kappa, on the first leg when kappa < gamma
        if z.k.im <= contour.gamma + cl {
            return Err(clash(-z.k));
        }
        bound.push(simple_state(&solver, &z, opts)?);
    }
    let rect = SearchBox::new((-2.0 * cl, contour.k_turn + 2.0 * cl), (-contour.gamma - 2.0 * cl, -1e-6));
    let mut resonances = Vec::new();
    let mut ep_seen = false;
    for z in find_zeros(&solver, &rect)? {
        if contour.distance(z.k) < cl {
            return Err(clash(z.k));
        }
        if !contour.encloses(z.k) {
            continue;
        }
        if let Some(d) = ep {
            if (z.k - d.k_m).norm() < 1e-4 {
                ep_seen = true;
                continue;
            }
        }
        if z.multiplicity != 1 {
            return Err(Error::MultiplicityMismatch { expected: 1, found: z.multiplicity });
        }
        resonances.push(simple_state(&solver, &z, opts)?);
    }
    let chain = match ep {
        Some(d) if contour.encloses(d.k_m) => {
            if !ep_seen {
                return Err(Error::MultiplicityMismatch { expected: 2, found: 0 });
            }
            Some(build_jordan_chain(&solver, d, x_m, opts)?)
        }
        _ => None,
    };
    Ok(BasisSet { solver, grid_spec: grid_spec.clone(), contour: contour.clone(), bound, resonances, chain })
}

impl BasisSet {
    pub fn cutoff(&self) -> f64 {
        self.solver.grid.r[self.solver.cutoff_index()]
    }

    /// Same basis with the chain renormalized by `x_m`.
    pub fn with_x(&self, x_m: C) -> BasisSet {
        BasisSet { chain: self.chain.as_ref().map(|c| c.with_x(x_m)), ..self.clone() }
    }

    /// Same states with another contour; fails if the captured poles change.
    pub fn with_contour(&self, contour: &ContourSpec) -> Result<BasisSet> {
        let ep_k = self.chain.as_ref().map(|c| c.k_m);
        for k in self.resonances.iter().map(|s| s.k).chain(ep_k) {
            if !contour.encloses(k) || contour.distance(k) < contour.clearance {
                return Err(clash(k));
            }
        }
        Ok(BasisSet { contour: contour.clone(), ..self.clone() })
    }

    pub fn simple_states(&self) -> impl Iterator<Item = &GamowState> {
        self.bound.iter().chain(self.resonances.iter())
    }

    /// Bilinear pairing `int a chi dr` over `[0, R]`.
    pub fn pair(&self, a: &GridFunction, chi: &GridFunction) -> C {
        integrate_range(&self.solver.grid, &a.product(chi), 0, self.solver.cutoff_index())
    }
}

/// Solution data at one contour node.
struct Node {
    k: C,
    /// `(2/pi) k^{2l+2} dk / (f_l(-k) f_l(k))`.
    weight: C,
    /// Free-problem weight `(2/pi) k^{2l+2} dk`.
    free_weight: C,
    states: Vec<[C; 2]>,
}

fn node(solver: &JostSolver, k: C, w: C) -> Node {
    let cut = solver.cutoff_index();
    let states = solver.regular_at(k, cut);
    let (p, dp) = (states[cut][0], states[cut][1]);
    let l = solver.l;
    let rr = C::new(solver.grid.r[cut], 0.0);
    let hp = &free_jost_tails(l, k, 1)[0];
    let hm = &free_jost_tails(l, k, -1)[0];
    let sg = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    let j = sg * k.powi(l as i32) * (hp.eval(rr) * dp - hp.deriv(rr) * p);
    let jm = sg * (-k).powi(l as i32) * (hm.eval(rr) * dp - hm.deriv(rr) * p);
    let free_weight = FRAC_2_PI * k.powi(2 * l as i32 + 2) * w;
    Node { k, weight: free_weight / (j * jm), free_weight, states }
}

/// Visits every node in parallel chunks and combines the partial results in
/// node order, so the outcome does not depend on the thread count.
fn sweep<A, I, F>(solver: &JostSolver, nodes: &[(C, C)], init: I, fold: F) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &Node) + Sync,
{
    nodes
        .par_chunks(16)
        .map(|chunk| {
            let mut acc = init();
            for &(k, w) in chunk {
                fold(&mut acc, &node(solver, k, w));
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub label: String,
    pub k: Cx,
    pub value: Cx,
}

#[derive(Debug, Clone)]
pub struct Expansion {
    pub coefficients: Vec<Coefficient>,
    /// Reconstructed values on the grid up to the cutoff.
    pub reconstruction: Vec<C>,
    pub target: Vec<C>,
    /// Largest pointwise reconstruction error.
    pub residual: f64,
}

/// Discrete coefficients `<v|chi>`, `<u_n|chi>` and, for the Jordan pair,
/// `<uhat|chi>` multiplying `u` and `<u|chi>` multiplying `uhat`.
pub fn discrete_coefficients(basis: &BasisSet, chi: &GridFunction) -> Vec<(String, C, C, StateFn)> {
    let mut out = Vec::new();
    for (tag, list) in [("bound", &basis.bound), ("resonance", &basis.resonances)] {
        for s in list.iter() {
            out.push((tag.to_string(), s.k, basis.pair(&s.u.f, chi), s.u.clone()));
        }
    }
    if let Some(c) = &basis.chain {
        out.push(("chain_u".to_string(), c.k_m, basis.pair(&c.uhat.f, chi), c.u.clone()));
        out.push(("chain_uhat".to_string(), c.k_m, basis.pair(&c.u.f, chi), c.uhat.clone()));
    }
    out
}

/// Reconstructs `chi` from the basis. With `drop_uhat` the generalized
/// eigenfunction is left out.
pub fn expand_function(basis: &BasisSet, chi: &TestFunction, drop_uhat: bool) -> Result<Expansion> {
    let grid = &basis.solver.grid;
    let cut = basis.solver.cutoff_index();
    chi.check_support(basis.cutoff())?;
    let chi_g = chi.on_grid(grid);
    let n = cut + 1;
    let mut recon = vec![C::new(0.0, 0.0); n];
    let mut coefficients = Vec::new();
    for (label, k, c, st) in discrete_coefficients(basis, &chi_g) {
        coefficients.push(Coefficient { label: label.clone(), k: k.into(), value: c.into() });
        if drop_uhat && label == "chain_uhat" {
            continue;
        }
        for (j, x) in recon.iter_mut().enumerate() {
            *x += c * st.f.u[j];
        }
    }
    let nodes = basis.contour.for_width(chi.min_width()).nodes(0.0);
    let parts = sweep(&basis.solver, &nodes, || vec![C::new(0.0, 0.0); n], |acc, nd| {
        let phi = GridFunction::new(nd.states[..n].iter().map(|s| s[0]).collect(), nd.states[..n].iter().map(|s| s[1]).collect());
        let proj = integrate_range(grid, &phi.product(&chi_g), 0, cut) * nd.weight;
        for (a, p) in acc.iter_mut().zip(&phi.u) {
            *a += proj * p;
        }
    });
    for p in parts {
        for (a, b) in recon.iter_mut().zip(p) {
            *a += b;
        }
    }
    let target: Vec<C> = chi_g.u[..n].to_vec();
    let residual = recon.iter().zip(&target).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(Expansion { coefficients, reconstruction: recon, target, residual })
}

/// Green's function `(E - H)^{-1}` evaluated directly from the regular and
/// outgoing solutions, on a grid that has `r` and `r'` as nodes.
#[derive(Debug, Clone)]
pub struct GreensEvaluator {
    pub solver: JostSolver,
}

impl GreensEvaluator {
    pub fn new(spec: &PotentialSpec, l: u32, grid_spec: &GridSpec, radii: &[f64]) -> Result<Self> {
        let mut gs = grid_spec.clone();
        let cutoff = spec.cutoff;
        gs.extra.extend(radii.iter().copied().filter(|&r| r > 0.0 && r < cutoff));
        Ok(GreensEvaluator { solver: JostSolver::new(spec, l, &gs, SolverOptions::default())? })
    }

    fn index(&self, r: f64) -> usize {
        self.solver.grid.nodes_at(r).first().copied().unwrap_or_else(|| self.solver.grid.locate(r))
    }

    /// `(-1)^{l+1} k^l phi(k, r<) f(-k, r>) / f_l(-k)`.
    pub fn eval(&self, k: C, r: f64, rp: f64) -> Result<C> {
        if k == C::new(0.0, 0.0) {
            return Err(Error::KIsZero);
        }
        let s = &self.solver;
        let (lo, hi) = if r <= rp { (r, rp) } else { (rp, r) };
        let cut = s.cutoff_index();
        let big_r = s.grid.r[cut];
        let reg = s.regular_at(k, cut);
        let l = s.l;
        let hp = &free_jost_tails(l, k, 1)[0];
        let rr = C::new(big_r, 0.0);
        let sg = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
        let (p, dp) = (reg[cut][0], reg[cut][1]);
        let wr = hp.eval(rr) * dp - hp.deriv(rr) * p;
        let jost = sg * k.powi(l as i32) * wr;
        let scale = (hp.eval(rr) * dp).norm() + (hp.deriv(rr) * p).norm();
        if wr.norm() <= 1e-13 * scale {
            return Err(Error::AtPole(k));
        }
        let phi_lo = if lo >= big_r {
            continuation_tails(l, k, big_r, (p, dp), None, 0.0)[0].eval(C::new(lo, 0.0))
        } else {
            reg[self.index(lo)][0]
        };
        let out_hi = if hi >= big_r {
            hp.eval(C::new(hi, 0.0))
        } else {
            s.outgoing(k)?.u()[self.index(hi)]
        };
        Ok(-sg * k.powi(l as i32) * phi_lo * out_hi / jost)
    }

    /// `<chi|G|chi>` with the bilinear pairing.
    pub fn matrix_element(&self, k: C, chi: &TestFunction) -> Result<C> {
        let s = &self.solver;
        let cut = s.cutoff_index();
        let grid = &s.grid;
        let reg = s.regular(k);
        let out = s.outgoing(k)?;
        let jost = s.jost_unchecked(k)?;
        let chi_g = chi.on_grid(grid);
        let a = reg.f.product(&chi_g);
        // running integral int_0^r chi phi, by the same end-corrected rule as integrate_range
        let mut run = vec![C::new(0.0, 0.0); cut + 1];
        for j in 0..cut {
            let h = grid.r[j + 1] - grid.r[j];
            run[j + 1] = run[j] + 0.5 * h * (a.u[j] + a.u[j + 1]) + h * h / 12.0 * (a.du[j] - a.du[j + 1]);
        }
        let run_f = GridFunction::new(run, a.u[..=cut].to_vec());
        let b = out.f.product(&chi_g);
        let b = GridFunction::new(b.u[..=cut].to_vec(), b.du[..=cut].to_vec());
        let total = integrate_range(grid, &run_f.product(&b), 0, cut);
        let sg = if s.l.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(-sg * k.powi(s.l as i32) * 2.0 * total / jost)
    }
}

/// Direct Green's function on a default grid.
pub fn greens_direct(spec: &PotentialSpec, l: u32, k: C, r: f64, rp: f64) -> Result<C> {
    GreensEvaluator::new(spec, l, &GridSpec::default(), &[r, rp])?.eval(k, r, rp)
}

/// Least-squares slope of `log|G|` against `log|z - z0|` along a ray, with
/// `z` either `k` or `E`.
pub fn pole_order_fit(ev: &GreensEvaluator, z0: C, in_energy: bool, r: f64, rp: f64, deltas: &[f64]) -> Result<f64> {
    let dir = C::from_polar(1.0, 0.3);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &d in deltas {
        let z = z0 + dir * d;
        let k = if in_energy { z.sqrt() } else { z };
        xs.push(d.ln());
        ys.push(ev.eval(k, r, rp)?.norm().ln());
    }
    Ok(-crate::degeneracy::slope(&xs, &ys))
}

/// Coefficients of `(E - e0)^{-2}` and `(E - e0)^{-1}` of `g(E)` from the
/// trapezoid rule on the circle `|E - e0| = rho`.
pub fn laurent_coefficients(g: impl Fn(C) -> Result<C>, e0: C, rho: f64, points: usize) -> Result<(C, C)> {
    let mut c2 = C::new(0.0, 0.0);
    let mut c1 = C::new(0.0, 0.0);
    for j in 0..points {
        let d = C::from_polar(rho, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / points as f64);
        let v = g(e0 + d)?;
        c2 += v * d * d;
        c1 += v * d;
    }
    Ok((c2 / points as f64, c1 / points as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenQuery {
    pub e: Cx,
    pub r: f64,
    pub rp: f64,
}

/// Wave number on the sheet reached from the physical one through the
/// fourth quadrant.
pub fn wave_number(e: C) -> C {
    e.sqrt()
}

fn check_energy(basis: &BasisSet, e: C) -> Result<C> {
    let k = wave_number(e);
    let poles = basis.simple_states().map(|s| s.k).chain(basis.chain.as_ref().map(|c| c.k_m));
    for kn in poles {
        let en = kn * kn;
        if (e - en).norm() <= 1e-12 * (1.0 + en.norm()) {
            return Err(Error::AtEigenvalue(e));
        }
    }
    let c = &basis.contour;
    if c.distance(k) < c.clearance || (k.im < 0.0 && !c.encloses(k)) {
        return Err(clash(k));
    }
    Ok(k)
}

/// Pole part of the expansion at one `(E, r, r')`.
pub fn resolvent_poles(basis: &BasisSet, e: C, r: f64, rp: f64) -> C {
    let grid = &basis.solver.grid;
    let big_r = basis.cutoff();
    let at = |s: &StateFn, x: f64| s.value_at(grid, big_r, x);
    let mut acc = C::new(0.0, 0.0);
    for s in &basis.bound {
        // written as E + |E_s| for the negative bound energy
        acc += at(&s.u, r) * at(&s.u, rp) / (e + s.energy().re.abs());
    }
    for s in &basis.resonances {
        acc += at(&s.u, r) * at(&s.u, rp) / (e - s.energy());
    }
    if let Some(c) = &basis.chain {
        let d = e - c.energy();
        let (u, v, up, vp) = (at(&c.u, r), at(&c.uhat, r), at(&c.u, rp), at(&c.uhat, rp));
        acc += c.x_m * c.x_m * u * up / (d * d) + (u * vp + v * up) / d;
    }
    acc
}

/// Expansion of `(E - H)^{-1}(r, r')`: poles plus the free Green's function
/// plus the contour integral of the difference from the free continuum.
pub fn resolvent_expansion(basis: &BasisSet, queries: &[GreenQuery]) -> Result<Vec<C>> {
    let ks: Vec<C> = queries.iter().map(|q| check_energy(basis, q.e.into())).collect::<Result<_>>()?;
    let radii: Vec<f64> = queries.iter().flat_map(|q| [q.r, q.rp]).collect();
    let spec = &basis.solver.spec;
    let l = basis.solver.l;
    let ev = GreensEvaluator::new(spec, l, &basis.grid_spec, &radii)?;
    let s = &ev.solver;
    let cut = s.cutoff_index();
    let big_r = s.grid.r[cut];
    let idx: Vec<(usize, usize)> = queries.iter().map(|q| (ev.index(q.r), ev.index(q.rp))).collect();
    let value = |nd: &Node, x: f64, j: usize| -> C {
        if x >= big_r {
            let st = nd.states[cut];
            continuation_tails(l, nd.k, big_r, (st[0], st[1]), None, 0.0)[0].eval(C::new(x, 0.0))
        } else {
            nd.states[j][0]
        }
    };
    let nodes = basis.contour.nodes(0.0);
    let parts = sweep(s, &nodes, || vec![C::new(0.0, 0.0); queries.len()], |acc, nd| {
        let kk = nd.k * nd.k;
        for (i, q) in queries.iter().enumerate() {
            let (j1, j2) = idx[i];
            let full = value(nd, q.r, j1) * value(nd, q.rp, j2) * nd.weight;
            let free = free_regular(l, nd.k, q.r).0 * free_regular(l, nd.k, q.rp).0 * nd.free_weight;
            acc[i] += (full - free) / (ks[i] * ks[i] - kk);
        }
    });
    let mut out: Vec<C> = queries
        .iter()
        .zip(&ks)
        .map(|(q, &k)| resolvent_poles(basis, q.e.into(), q.r, q.rp) + free_greens(l, k, q.r, q.rp))
        .collect();
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(out)
}

/// `(-1)^{l+1} k^l phi_0(k, r<) f_0(-k, r>)`.
pub fn free_greens(l: u32, k: C, r: f64, rp: f64) -> C {
    let (lo, hi) = if r <= rp { (r, rp) } else { (rp, r) };
    let sg = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
    let hp = &free_jost_tails(l, k, 1)[0];
    -sg * k.powi(l as i32) * free_regular(l, k, lo).0 * hp.eval(C::new(hi, 0.0))
}

/// Scalar function of the energy with its derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpFunction {
    Identity,
    Power(i32),
    /// `exp(s E)`; `s = -i t` gives the propagator.
    Exp(Cx),
    /// `1 / (z - E)`.
    Resolvent(Cx),
    Product(Box<OpFunction>, Box<OpFunction>),
}

impl OpFunction {
    pub fn propagator(t: f64) -> Self {
        OpFunction::Exp(C::new(0.0, -t).into())
    }

    pub fn value(&self, e: C) -> C {
        match self {
            OpFunction::Identity => e,
            OpFunction::Power(n) => e.powi(*n),
            OpFunction::Exp(s) => (C::from(*s) * e).exp(),
            OpFunction::Resolvent(z) => 1.0 / (C::from(*z) - e),
            OpFunction::Product(f, g) => f.value(e) * g.value(e),
        }
    }

    pub fn deriv(&self, e: C) -> C {
        match self {
            OpFunction::Identity => C::new(1.0, 0.0),
            OpFunction::Power(0) => C::new(0.0, 0.0),
            OpFunction::Power(n) => *n as f64 * e.powi(n - 1),
            OpFunction::Exp(s) => C::from(*s) * (C::from(*s) * e).exp(),
            OpFunction::Resolvent(z) => {
                let d = C::from(*z) - e;
                1.0 / (d * d)
            }
            OpFunction::Product(f, g) => f.deriv(e) * g.value(e) + f.value(e) * g.deriv(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    pub eigenvalue: Cx,
    pub offdiag: Cx,
}

impl JordanBlock {
    /// Product of two upper-triangular Toeplitz blocks.
    pub fn mul(&self, other: &JordanBlock) -> JordanBlock {
        let (a, b) = (C::from(self.eigenvalue), C::from(self.offdiag));
        let (c, d) = (C::from(other.eigenvalue), C::from(other.offdiag));
        JordanBlock { eigenvalue: (a * c).into(), offdiag: (a * d + b * c).into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEntry {
    pub label: String,
    pub energy: Cx,
    pub value: Cx,
}

/// `f(H)` in the basis: diagonal on simple states, one Jordan block on the
/// pair `(u, uhat)`, and `f(k'^2)` on the contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix {
    pub schema: String,
    pub diagonal: Vec<DiagonalEntry>,
    pub jordan_block: Option<JordanBlock>,
    pub background: BackgroundDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundDescriptor {
    pub kernel: String,
    pub contour: ContourSpec,
}

pub fn represent_operator(f: &OpFunction, basis: &BasisSet) -> OperatorMatrix {
    let mut diagonal = Vec::new();
    for (tag, list) in [("bound", &basis.bound), ("resonance", &basis.resonances)] {
        for s in list.iter() {
            diagonal.push(DiagonalEntry { label: tag.to_string(), energy: s.energy().into(), value: f.value(s.energy()).into() });
        }
    }
    let jordan_block = basis.chain.as_ref().map(|c| {
        let e = c.energy();
        JordanBlock { eigenvalue: f.value(e).into(), offdiag: (c.x_m * c.x_m * f.deriv(e)).into() }
    });
    OperatorMatrix {
        schema: SCHEMA.to_string(),
        diagonal,
        jordan_block,
        background: BackgroundDescriptor { kernel: "f(k'^2) on the contour".to_string(), contour: basis.contour.clone() },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: f64,
    pub amplitude: Cx,
    /// Jordan-pair part `e^{-iEt}(2 a ahat - i t X^2 a^2)`.
    pub chain: Cx,
    /// Size of the last real-leg panel's contribution.
    pub truncation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOptions {
    /// Largest accepted truncation estimate, relative to `int chi^2`.
    pub tol: f64,
    pub max_panels: usize,
}

impl Default for SurvivalOptions {
    fn default() -> Self {
        SurvivalOptions { tol: 1e-8, max_panels: 20_000 }
    }
}

/// `A(t) = <chi*| e^{-iHt} |chi>` from the expansion.
pub fn evolve_survival(basis: &BasisSet, chi: &TestFunction, times: &[f64], opts: &SurvivalOptions) -> Result<Vec<SurvivalPoint>> {
    let grid = &basis.solver.grid;
    let cut = basis.solver.cutoff_index();
    chi.check_support(basis.cutoff())?;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::Config("negative time".to_string()));
    }
    let contour = basis.contour.for_width(chi.min_width());
    if contour.real_panels(t_max) > opts.max_panels {
        return Err(Error::BackgroundNotConverged { estimate: f64::INFINITY });
    }
    let chi_g = chi.on_grid(grid);
    let norm = basis.pair(&chi_g, &chi_g).norm();
    let nodes = contour.nodes(t_max);
    let last_panel = nodes.len() - 16;
    // (k, weight * <phi|chi>^2) per node, in node order
    let parts = sweep(&basis.solver, &nodes, Vec::new, |acc: &mut Vec<(C, C)>, nd| {
        let n = cut + 1;
        let phi = GridFunction::new(nd.states[..n].iter().map(|s| s[0]).collect(), nd.states[..n].iter().map(|s| s[1]).collect());
        let p = integrate_range(grid, &phi.product(&chi_g), 0, cut);
        acc.push((nd.k, nd.weight * p * p));
    });
    let samples: Vec<(C, C)> = parts.into_iter().flatten().collect();
    let mut discrete = Vec::new();
    for s in basis.simple_states() {
        let a = basis.pair(&s.u.f, &chi_g);
        discrete.push((s.energy(), a * a));
    }
    let chain = basis.chain.as_ref().map(|c| {
        let a = basis.pair(&c.u.f, &chi_g);
        let ah = basis.pair(&c.uhat.f, &chi_g);
        (c.energy(), a, ah, c.x_m * c.x_m)
    });
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let it = C::new(0.0, -t);
        let mut amp = C::new(0.0, 0.0);
        for (e, w) in &discrete {
            amp += w * (it * e).exp();
        }
        let ch = chain.map_or(C::new(0.0, 0.0), |(e, a, ah, x2)| (it * e).exp() * (2.0 * a * ah + it * x2 * a * a));
        amp += ch;
        let mut tail = C::new(0.0, 0.0);
        for (i, (k, w)) in samples.iter().enumerate() {
            let v = w * (it * k * k).exp();
            amp += v;
            if i >= last_panel {
                tail += v;
            }
        }
        let truncation = tail.norm() / norm;
        if truncation > opts.tol {
            return Err(Error::BackgroundNotConverged { estimate: truncation });
        }
        out.push(SurvivalPoint { t, amplitude: amp.into(), chain: ch.into(), truncation });
    }
    Ok(out)
}

/// Fits `e^{iEt} * chain(t) = a + b t` by least squares; returns `(a, b)`.
pub fn fit_linear_chain(points: &[SurvivalPoint], e_m: C) -> (C, C) {
    let n = points.len() as f64;
    let ys: Vec<C> = points.iter().map(|p| C::from(p.chain) * (C::new(0.0, p.t) * e_m).exp()).collect();
    let tm = points.iter().map(|p| p.t).sum::<f64>() / n;
    let ym = ys.iter().sum::<C>() / n;
    let sxx: f64 = points.iter().map(|p| (p.t - tm).powi(2)).sum();
    let sxy: C = points.iter().zip(&ys).map(|(p, y)| (y - ym) * (p.t - tm)).sum();
    let b = sxy / sxx;
    (ym - b * tm, b)
}

pub const SURVIVAL_HEADER: [&str; 4] = ["t", "re_A", "im_A", "abs_A"];

pub fn write_survival<W: std::io::Write>(mut w: W, points: &[(f64, C)]) -> Result<()> {
    crate::output::write_csv_preamble(&mut w)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SURVIVAL_HEADER)?;
    use crate::output::fmt17;
    for (t, a) in points {
        wr.write_record([fmt17(*t), fmt17(a.re), fmt17(a.im), fmt17(a.norm())])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_survival<R: std::io::Read>(r: R) -> Result<Vec<(f64, C)>> {
    let body = crate::output::read_csv_preamble(r)?;
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    if rd.headers()?.iter().collect::<Vec<_>>() != SURVIVAL_HEADER {
        return Err(Error::Schema("unexpected survival header".to_string()));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let num = |i: usize| row[i].parse::<f64>().map_err(|e| Error::Config(e.to_string()));
        out.push((num(0)?, C::new(num(1)?, num(2)?)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn free_greens_function_closed_form() {
        let spec = PotentialSpec::free(2.0);
        let k = c(1.0, 0.0);
        let g = greens_direct(&spec, 0, k, 0.3, 1.1).unwrap();
        let exact = -(C::i() * k * 1.1).exp() * (k * 0.3).sin() / k;
        assert!((g - exact).norm() < 1e-10, "{g} {exact}");
        let h = greens_direct(&spec, 0, k, 1.1, 0.3).unwrap();
        assert!((g - h).norm() < 1e-10);
    }

    #[test]
    fn contour_geometry() {
        let c0 = ContourSpec::default();
        assert!(c0.encloses(c(2.9, -0.2)));
        assert!(!c0.encloses(c(2.9, -0.5)));
        assert!((c0.distance(c(2.0, -0.3)) - 0.1).abs() < 1e-12);
        let w: C = c0.nodes(0.0).iter().map(|n| n.1).sum();
        assert!((w - c0.k_max).norm() < 1e-10);
        let nodes = c0.nodes(3.0);
        assert!(nodes.len() > c0.nodes(0.0).len());
        assert!(c0.real_panels(3.0) + 2 >= (nodes.len() - 16 * (2 * c0.vertical_panels + c0.bottom_panels)) / 16);
    }

    #[test]
    fn operator_blocks_follow_product_rule() {
        let e = c(8.47, -1.14);
        let f = OpFunction::Power(3);
        let g = OpFunction::propagator(0.7);
        let fg = OpFunction::Product(Box::new(f.clone()), Box::new(g.clone()));
        let blk = |h: &OpFunction| JordanBlock { eigenvalue: h.value(e).into(), offdiag: h.deriv(e).into() };
        let prod = blk(&f).mul(&blk(&g));
        let direct = blk(&fg);
        assert!((C::from(prod.offdiag) - C::from(direct.offdiag)).norm() < 1e-12 * C::from(direct.offdiag).norm());
    }
}
