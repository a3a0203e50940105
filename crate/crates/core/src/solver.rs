//! Radial integration of the regular and outgoing solutions and of their
//! k-derivative systems, the Jost function from the Wronskian, and its
//! k-derivatives.
//!
//! All systems are integrated together as one augmented linear system. For
//! derivative order `j` the block `u_j = d^j u / dk^j` obeys
//! `u_j'' = (w - k^2) u_j - 2 j k u_{j-1} - j (j-1) u_{j-2}` with
//! `w = v + l(l+1)/r^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, RadialGrid};
use crate::potential::PotentialSpec;
use crate::riccati::free_jost_tails;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Integrator controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Largest `|k| * step` per Runge-Kutta substep.
    pub max_kh: f64,
    /// Relative Wronskian spread tolerated by [`JostSolver::jost`].
    pub drift_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_kh: 0.02, drift_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolutionKind {
    Regular,
    RegularKDeriv1,
    RegularKDeriv2,
    Outgoing,
    OutgoingKDeriv1,
    OutgoingKDeriv2,
}

/// One solution sampled on a grid, values and r-derivatives at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub kind: SolutionKind,
    pub k: C,
    pub l: u32,
    pub f: GridFunction,
}

impl RadialSolution {
    pub fn u(&self) -> &[C] {
        &self.f.u
    }

    pub fn du(&self) -> &[C] {
        &self.f.du
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivMethod {
    Cauchy,
    OdeSystem,
}

/// Jost function `f_l(-k)` and its k-derivatives at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JostData {
    pub k: C,
    /// `d^n f_l(-k') / dk'^n` at `k'= k`, starting with `n = 0`.
    pub derivs: Vec<C>,
    /// Estimated absolute error of each entry.
    pub errors: Vec<f64>,
    pub method: DerivMethod,
}

impl JostData {
    pub fn f(&self) -> C {
        self.derivs[0]
    }

    pub fn d(&self, n: usize) -> C {
        self.derivs.get(n).copied().unwrap_or(C::new(f64::NAN, f64::NAN))
    }

    pub fn d1(&self) -> C {
        self.d(1)
    }

    pub fn d2(&self) -> C {
        self.d(2)
    }

    pub fn d3(&self) -> C {
        self.d(3)
    }
}

/// Jost value with the spread of the Wronskian over the sampling nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostValue {
    pub value: C,
    pub spread: f64,
}

fn double_factorial_odd(l: u32) -> f64 {
    (1..=l).map(|j| (2 * j + 1) as f64).product()
}

fn sign_l(l: u32) -> f64 {
    if l.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `y' = A(r) y` for the augmented system of `N / 2` derivative orders.
#[derive(Clone, Copy)]
struct Ode {
    k: C,
    cl: f64,
}

impl Ode {
    #[inline]
    fn rhs<const N: usize>(&self, r: f64, v: f64, y: &[C; N]) -> [C; N] {
        let w = if self.cl == 0.0 { v } else { v + self.cl / (r * r) };
        let a = C::new(w, 0.0) - self.k * self.k;
        let mut out = [ZERO; N];
        for j in 0..N / 2 {
            out[2 * j] = y[2 * j + 1];
            let mut acc = a * y[2 * j];
            if j >= 1 {
                acc -= self.k * (2.0 * j as f64) * y[2 * j - 2];
            }
            if j >= 2 {
                acc -= y[2 * j - 4] * (j * (j - 1)) as f64;
            }
            out[2 * j + 1] = acc;
        }
        out
    }

    #[inline]
    fn rk4<const N: usize>(&self, r: f64, h: f64, v: f64, y: &[C; N]) -> [C; N] {
        let add = |y: &[C; N], k: &[C; N], s: f64| -> [C; N] {
            let mut o = *y;
            for i in 0..N {
                o[i] += k[i] * s;
            }
            o
        };
        let k1 = self.rhs(r, v, y);
        let k2 = self.rhs(r + 0.5 * h, v, &add(y, &k1, 0.5 * h));
        let k3 = self.rhs(r + 0.5 * h, v, &add(y, &k2, 0.5 * h));
        let k4 = self.rhs(r + h, v, &add(y, &k3, h));
        let mut o = *y;
        for i in 0..N {
            o[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
        o
    }

    /// Runge-Kutta step matrix for a constant-coefficient segment.
    fn step_matrix<const N: usize>(&self, h: f64, v: f64) -> [[C; N]; N] {
        let mut m = [[ZERO; N]; N];
        for c in 0..N {
            let mut e = [ZERO; N];
            e[c] = C::new(1.0, 0.0);
            let col = self.rk4(1.0, h, v, &e);
            for r in 0..N {
                m[r][c] = col[r];
            }
        }
        m
    }
}

fn mat_mul<const N: usize>(a: &[[C; N]; N], b: &[[C; N]; N]) -> [[C; N]; N] {
    let mut o = [[ZERO; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik == ZERO {
                continue;
            }
            for j in 0..N {
                o[i][j] += aik * b[k][j];
            }
        }
    }
    o
}

fn mat_pow<const N: usize>(m: &[[C; N]; N], mut p: usize) -> [[C; N]; N] {
    let mut result = [[ZERO; N]; N];
    for (i, row) in result.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    let mut base = *m;
    while p > 0 {
        if p & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        base = mat_mul(&base, &base);
        p >>= 1;
    }
    result
}

#[inline]
fn mat_vec<const N: usize>(m: &[[C; N]; N], y: &[C; N]) -> [C; N] {
    let mut o = [ZERO; N];
    for i in 0..N {
        let mut acc = ZERO;
        for j in 0..N {
            acc += m[i][j] * y[j];
        }
        o[i] = acc;
    }
    o
}

/// Solver bound to one potential, angular momentum and grid.
#[derive(Debug, Clone)]
pub struct JostSolver {
    pub spec: PotentialSpec,
    pub l: u32,
    pub grid: RadialGrid,
    pub opts: SolverOptions,
    /// Node index holding `r = R` at the end of the segment left of the cutoff.
    cut_idx: usize,
    /// Nodes where the Wronskian is sampled.
    w_nodes: [usize; 3],
}

impl JostSolver {
    pub fn new(spec: &PotentialSpec, l: u32, gs: &GridSpec, opts: SolverOptions) -> Result<Self> {
        spec.validate()?;
        let grid = RadialGrid::for_spec(spec, l, gs)?;
        Self::with_grid(spec, l, grid, opts)
    }

    pub fn with_defaults(spec: &PotentialSpec, l: u32) -> Result<Self> {
        Self::new(spec, l, &GridSpec::default(), SolverOptions::default())
    }

    pub fn with_grid(spec: &PotentialSpec, l: u32, grid: RadialGrid, opts: SolverOptions) -> Result<Self> {
        grid.check_shells(spec)?;
        let cut = spec.cutoff;
        let hits = grid.nodes_at(cut);
        let cut_idx = *hits.first().ok_or(Error::GridMissingShellNode(cut))?;
        let pick = |x: f64| {
            let j = grid.locate(x);
            j.min(cut_idx)
        };
        let w_nodes = [pick(cut / 3.0), pick(2.0 * cut / 3.0), cut_idx];
        Ok(JostSolver { spec: spec.clone(), l, grid, opts, cut_idx, w_nodes })
    }

    pub fn cutoff_index(&self) -> usize {
        self.cut_idx
    }

    fn ode(&self, k: C) -> Ode {
        Ode { k, cl: (self.l * (self.l + 1)) as f64 }
    }

    /// Substep count so that the local wavenumber times the step stays below `max_kh`.
    fn substeps(&self, k: C, h: f64, r: f64, v: f64) -> usize {
        let cl = (self.l * (self.l + 1)) as f64;
        let w = if cl == 0.0 { v } else { v + cl / (r * r) };
        let kl = (C::new(w, 0.0) - k * k).norm().sqrt().max(k.norm());
        ((kl * h.abs()) / self.opts.max_kh).ceil().max(1.0) as usize
    }

    fn jump<const N: usize>(&self, r: f64, y: &mut [C; N], sign: f64) {
        if let Some(lam) = self.spec.shell_strength_at(r) {
            for j in 0..N / 2 {
                y[2 * j + 1] += y[2 * j] * (lam * sign);
            }
        }
    }

    /// Integrates from node `from` to node `to` (either direction), writing
    /// every visited node into `out`.
    fn march<const N: usize>(&self, k: C, y0: [C; N], from: usize, to: usize, out: &mut [[C; N]]) {
        let ode = self.ode(k);
        let g = &self.grid;
        out[from] = y0;
        let mut y = y0;
        if from == to {
            return;
        }
        let forward = to > from;
        let mut j = from;
        while j != to {
            let next = if forward { j + 1 } else { j - 1 };
            let (r0, r1) = (g.r[j], g.r[next]);
            if r1 == r0 {
                // junction between segments
                self.jump(r0, &mut y, if forward { 1.0 } else { -1.0 });
                out[next] = y;
                j = next;
                continue;
            }
            let seg = g.segments[g.segment_of(if forward { j } else { next })];
            let const_coeff = seg.uniform && self.l == 0;
            if const_coeff {
                // whole run inside this segment with a single step matrix
                let stop = if forward { seg.end.min(to) } else { seg.start.max(to) };
                let h = r1 - r0;
                let m = self.substeps(k, h, r0.min(r1), seg.v);
                let step = ode.step_matrix::<N>(h / m as f64, seg.v);
                let mat = if m == 1 { step } else { mat_pow(&step, m) };
                while j != stop {
                    let nx = if forward { j + 1 } else { j - 1 };
                    y = mat_vec(&mat, &y);
                    out[nx] = y;
                    j = nx;
                }
                continue;
            }
            let h = r1 - r0;
            let m = self.substeps(k, h, r0.min(r1), seg.v);
            let hs = h / m as f64;
            let mut r = r0;
            for _ in 0..m {
                y = ode.rk4(r, hs, seg.v, &y);
                r += hs;
            }
            out[next] = y;
            j = next;
        }
    }

    fn regular_start<const N: usize>(&self, k: C) -> [C; N] {
        let mut y = [ZERO; N];
        let r0 = self.grid.r[0];
        if self.l == 0 && r0 == 0.0 {
            y[1] = C::new(1.0, 0.0);
            return y;
        }
        let l = self.l;
        let s = (l + 1) as i32;
        let norm = double_factorial_odd(l);
        let v0 = self.grid.segments[0].v;
        let den = 2.0 * (2 * l + 3) as f64;
        let c = (C::new(v0, 0.0) - k * k) / den;
        let cd = -2.0 * k / den;
        let cdd = C::new(-2.0 / den, 0.0);
        let r = r0;
        let rs = r.powi(s);
        let drs = s as f64 * r.powi(s - 1);
        let r2 = r.powi(s + 2);
        let dr2 = (s + 2) as f64 * r.powi(s + 1);
        let coeffs = [c, cd, cdd];
        for j in 0..N / 2 {
            let cj = coeffs[j];
            if j == 0 {
                y[0] = (rs + cj * r2) / norm;
                y[1] = (drs + cj * dr2) / norm;
            } else {
                y[2 * j] = cj * r2 / norm;
                y[2 * j + 1] = cj * dr2 / norm;
            }
        }
        y
    }

    fn outgoing_tail_state<const N: usize>(&self, k: C, r: f64, sign: i32) -> [C; N] {
        let tails = free_jost_tails(self.l, k, sign);
        let rc = C::new(r, 0.0);
        let mut y = [ZERO; N];
        for j in 0..N / 2 {
            y[2 * j] = tails[j].eval(rc);
            y[2 * j + 1] = tails[j].deriv(rc);
        }
        y
    }

    fn regular_states<const N: usize>(&self, k: C, upto: usize) -> Vec<[C; N]> {
        let mut out = vec![[ZERO; N]; self.grid.len()];
        let y0 = self.regular_start::<N>(k);
        self.march(k, y0, 0, upto, &mut out);
        out
    }

    /// Outgoing (`sign = 1`) or incoming (`sign = -1`) states, exact beyond the cutoff.
    fn jost_states<const N: usize>(&self, k: C, downto: usize, sign: i32) -> Vec<[C; N]> {
        let mut out = vec![[ZERO; N]; self.grid.len()];
        for j in self.cut_idx..self.grid.len() {
            out[j] = self.outgoing_tail_state::<N>(k, self.grid.r[j], sign);
        }
        let y0 = out[self.cut_idx];
        self.march(k * sign as f64, y0, self.cut_idx, downto, &mut out);
        out
    }

    fn unpack<const N: usize>(&self, states: &[[C; N]], k: C, kinds: &[SolutionKind]) -> Vec<RadialSolution> {
        (0..N / 2)
            .map(|j| RadialSolution {
                kind: kinds[j],
                k,
                l: self.l,
                f: GridFunction::new(
                    states.iter().map(|y| y[2 * j]).collect(),
                    states.iter().map(|y| y[2 * j + 1]).collect(),
                ),
            })
            .collect()
    }

    /// Regular solution and its first `order` k-derivatives on the whole grid.
    pub fn regular_family(&self, k: C, order: usize) -> Vec<RadialSolution> {
        let kinds = [SolutionKind::Regular, SolutionKind::RegularKDeriv1, SolutionKind::RegularKDeriv2];
        let last = self.grid.len() - 1;
        match order {
            0 => self.unpack(&self.regular_states::<2>(k, last), k, &kinds),
            1 => self.unpack(&self.regular_states::<4>(k, last), k, &kinds),
            _ => self.unpack(&self.regular_states::<6>(k, last), k, &kinds),
        }
    }

    /// Outgoing solution `f_l(-k, r)` and its first `order` k-derivatives.
    pub fn outgoing_family(&self, k: C, order: usize) -> Result<Vec<RadialSolution>> {
        if k == ZERO {
            return Err(Error::KIsZero);
        }
        let kinds = [SolutionKind::Outgoing, SolutionKind::OutgoingKDeriv1, SolutionKind::OutgoingKDeriv2];
        Ok(match order {
            0 => self.unpack(&self.jost_states::<2>(k, 0, 1), k, &kinds),
            1 => self.unpack(&self.jost_states::<4>(k, 0, 1), k, &kinds),
            _ => self.unpack(&self.jost_states::<6>(k, 0, 1), k, &kinds),
        })
    }

    pub fn regular(&self, k: C) -> RadialSolution {
        self.regular_family(k, 0).remove(0)
    }

    pub fn outgoing(&self, k: C) -> Result<RadialSolution> {
        Ok(self.outgoing_family(k, 0)?.remove(0))
    }

    /// Evaluates `(-1)^l k^l W[f, phi]` and the relative spread over the
    /// sampling nodes, using only the part of the grid that is needed.
    pub fn jost_value(&self, k: C) -> Result<JostValue> {
        if k == ZERO {
            return Err(Error::KIsZero);
        }
        let reg = self.regular_states::<2>(k, self.cut_idx);
        let out = self.jost_states::<2>(k, self.w_nodes[0], 1);
        let mut ws = [ZERO; 3];
        let mut scale = 0.0;
        for (i, &j) in self.w_nodes.iter().enumerate() {
            let (f, df) = (out[j][0], out[j][1]);
            let (p, dp) = (reg[j][0], reg[j][1]);
            ws[i] = f * dp - df * p;
            scale += (f * dp).norm() + (df * p).norm();
        }
        let mean = (ws[0] + ws[1] + ws[2]) / 3.0;
        let spread = ws.iter().map(|w| (w - mean).norm()).fold(0.0, f64::max) / (scale / 3.0).max(f64::MIN_POSITIVE);
        let pref = sign_l(self.l) * k.powi(self.l as i32);
        Ok(JostValue { value: pref * mean, spread })
    }

    /// `f_l(-k)`; fails with `WronskianDrift` when the sampled Wronskians disagree.
    pub fn jost(&self, k: C) -> Result<C> {
        let jv = self.jost_value(k)?;
        if jv.spread > self.opts.drift_tol {
            return Err(Error::WronskianDrift { value: jv.value, spread: jv.spread });
        }
        Ok(jv.value)
    }

    /// Jost function without the drift check, for quadrature sweeps.
    pub fn jost_unchecked(&self, k: C) -> Result<C> {
        Ok(self.jost_value(k)?.value)
    }

    /// Derivatives up to `order` by trapezoidal Cauchy integrals on `|z - k| = rho`.
    pub fn jost_derivatives(&self, k: C, order: usize, rho: f64, points: usize) -> Result<JostData> {
        if k.norm() <= 2.0 * rho {
            return Err(Error::CircleTouchesOrigin { k, radius: rho });
        }
        let n = points.max(32);
        let n = n + n % 2;
        let samples: Vec<C> = (0..n)
            .map(|j| {
                let z = k + C::from_polar(rho, 2.0 * PI * j as f64 / n as f64);
                self.jost_unchecked(z)
            })
            .collect::<Result<_>>()?;
        let coef = |m: usize, stride: usize| -> C {
            let cnt = n / stride;
            let mut acc = ZERO;
            for (i, s) in samples.iter().step_by(stride).enumerate() {
                let th = 2.0 * PI * (i * m) as f64 / cnt as f64;
                acc += s * C::from_polar(1.0, -th);
            }
            acc / cnt as f64
        };
        let centre = self.jost_unchecked(k)?;
        let mut derivs = vec![centre];
        let mut errors = vec![(coef(0, 1) - centre).norm()];
        let mut fact = 1.0;
        for m in 1..=order {
            fact *= m as f64;
            let scale = fact / rho.powi(m as i32);
            let full = coef(m, 1) * scale;
            let half = coef(m, 2) * scale;
            derivs.push(full);
            errors.push((full - half).norm());
        }
        Ok(JostData { k, derivs, errors, method: DerivMethod::Cauchy })
    }

    /// Derivatives up to order two from the k-derivative ODE systems.
    pub fn jost_derivatives_ode(&self, k: C, order: usize) -> Result<JostData> {
        if k == ZERO {
            return Err(Error::KIsZero);
        }
        let order = order.min(2);
        let (reg, out): (Vec<[C; 6]>, Vec<[C; 6]>) = (
            self.regular_states::<6>(k, self.cut_idx),
            self.jost_states::<6>(k, self.w_nodes[0], 1),
        );
        let l = self.l as i32;
        let sgn = sign_l(self.l);
        let g0 = sgn * k.powi(l);
        let g1 = if l >= 1 { sgn * (l as f64) * k.powi(l - 1) } else { ZERO };
        let g2 = if l >= 2 { sgn * ((l * (l - 1)) as f64) * k.powi(l - 2) } else { ZERO };
        let mut acc = [ZERO; 3];
        let mut spread = [0.0f64; 3];
        let mut vals = Vec::new();
        for &j in &self.w_nodes {
            let (f, df, f1, df1, f2, df2) = (out[j][0], out[j][1], out[j][2], out[j][3], out[j][4], out[j][5]);
            let (p, dp, p1, dp1, p2, dp2) = (reg[j][0], reg[j][1], reg[j][2], reg[j][3], reg[j][4], reg[j][5]);
            let w0 = f * dp - df * p;
            let w1 = f1 * dp + f * dp1 - df1 * p - df * p1;
            let w2 = f2 * dp + 2.0 * f1 * dp1 + f * dp2 - df2 * p - 2.0 * df1 * p1 - df * p2;
            let j0 = g0 * w0;
            let j1 = g1 * w0 + g0 * w1;
            let j2 = g2 * w0 + 2.0 * g1 * w1 + g0 * w2;
            vals.push([j0, j1, j2]);
            for i in 0..3 {
                acc[i] += [j0, j1, j2][i] / 3.0;
            }
        }
        for v in &vals {
            for i in 0..3 {
                spread[i] = spread[i].max((v[i] - acc[i]).norm());
            }
        }
        Ok(JostData {
            k,
            derivs: acc[..=order].to_vec(),
            errors: spread[..=order].to_vec(),
            method: DerivMethod::OdeSystem,
        })
    }

    /// `(f_l(-k), d f_l(-k)/dk)` from the first-order ODE system.
    pub fn jost_and_slope(&self, k: C) -> Result<(C, C)> {
        if k == ZERO {
            return Err(Error::KIsZero);
        }
        let reg = self.regular_states::<4>(k, self.cut_idx);
        let out = self.jost_states::<4>(k, self.cut_idx, 1);
        let j = self.cut_idx;
        let (f, df, f1, df1) = (out[j][0], out[j][1], out[j][2], out[j][3]);
        let (p, dp, p1, dp1) = (reg[j][0], reg[j][1], reg[j][2], reg[j][3]);
        let w0 = f * dp - df * p;
        let w1 = f1 * dp + f * dp1 - df1 * p - df * p1;
        let l = self.l as i32;
        let sgn = sign_l(self.l);
        let g0 = sgn * k.powi(l);
        let g1 = if l >= 1 { sgn * (l as f64) * k.powi(l - 1) } else { ZERO };
        Ok((g0 * w0, g1 * w0 + g0 * w1))
    }

    /// Regular solution `phi_l(k, r)` evaluated only at the requested node indices.
    pub fn regular_at(&self, k: C, upto: usize) -> Vec<[C; 2]> {
        self.regular_states::<2>(k, upto)
    }
}

/// Regular solution on `grid`.
pub fn solve_regular(spec: &PotentialSpec, l: u32, k: C, grid: &RadialGrid) -> Result<RadialSolution> {
    let s = JostSolver::with_grid(spec, l, grid.clone(), SolverOptions::default())?;
    Ok(s.regular(k))
}

/// Outgoing solution `f_l(-k, r)` on `grid`.
pub fn solve_outgoing(spec: &PotentialSpec, l: u32, k: C, grid: &RadialGrid) -> Result<RadialSolution> {
    let s = JostSolver::with_grid(spec, l, grid.clone(), SolverOptions::default())?;
    s.outgoing(k)
}

/// First and second k-derivatives of the regular solution on `grid`.
pub fn solve_k_derivative_systems(
    spec: &PotentialSpec,
    l: u32,
    k: C,
    grid: &RadialGrid,
) -> Result<(RadialSolution, RadialSolution)> {
    let s = JostSolver::with_grid(spec, l, grid.clone(), SolverOptions::default())?;
    let mut fam = s.regular_family(k, 2);
    let second = fam.remove(2);
    let first = fam.remove(1);
    Ok((first, second))
}

/// `f_l(-k)` with the default grid.
pub fn jost_function(spec: &PotentialSpec, l: u32, k: C) -> Result<C> {
    JostSolver::with_defaults(spec, l)?.jost(k)
}

/// Cauchy-circle derivatives with the default grid and 64 nodes.
pub fn jost_derivatives(spec: &PotentialSpec, l: u32, k: C, order: usize, rho: f64) -> Result<JostData> {
    JostSolver::with_defaults(spec, l)?.jost_derivatives(k, order, rho, 64)
}

/// Free regular solution `j_l(kr) / k^(l+1)` and its r-derivative.
pub fn free_regular(l: u32, k: C, r: f64) -> (C, C) {
    let (j, dj) = crate::riccati::riccati_j(l, k * r);
    let kl = k.powi(l as i32 + 1);
    (j / kl, dj * k / kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::closed_form_jost;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn solver(spec: &PotentialSpec, l: u32) -> JostSolver {
        JostSolver::with_defaults(spec, l).unwrap()
    }

    #[test]
    fn free_regular_l0_is_sine() {
        let s = solver(&PotentialSpec::free(3.0), 0);
        let phi = s.regular(c(1.0, 0.0));
        for (j, &r) in s.grid.r.iter().enumerate() {
            assert!((phi.u()[j] - r.sin()).norm() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn free_regular_l1_is_riccati_bessel() {
        let s = solver(&PotentialSpec::free(3.0), 1);
        let k = c(1.3, -0.2);
        let phi = s.regular(k);
        let j = s.grid.nodes_at(2.0);
        let j = if j.is_empty() { s.grid.locate(2.0) } else { j[0] };
        let r = s.grid.r[j];
        let x = k * r;
        let exact = (x.sin() / x - x.cos()) / (k * k);
        assert!((phi.u()[j] - exact).norm() < 1e-8 * exact.norm());
    }

    #[test]
    fn regular_series_start_normalisation() {
        for l in 1..4 {
            let s = solver(&PotentialSpec::square_well(-2.0, 1.0).unwrap(), l);
            let phi = s.regular(c(0.8, -0.1));
            for j in 0..4 {
                let r = s.grid.r[j];
                let lead = r.powi(l as i32 + 1) / double_factorial_odd(l);
                assert!((phi.u()[j] / lead - 1.0).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn free_outgoing_is_plane_wave() {
        let s = solver(&PotentialSpec::free(2.0), 0);
        let k = c(0.9, -0.4);
        let f = s.outgoing(k).unwrap();
        for (j, &r) in s.grid.r.iter().enumerate() {
            let e = (C::i() * k * r).exp();
            assert!((f.u()[j] - e).norm() < 1e-10 * e.norm(), "r={r}");
        }
    }

    #[test]
    fn free_jost_is_one_for_all_l() {
        for l in 0..3 {
            let s = solver(&PotentialSpec::free(2.0), l);
            let f = s.jost(c(0.3, -0.8)).unwrap();
            assert!((f - 1.0).norm() < 1e-7, "l={l}: {f}");
        }
    }

    #[test]
    fn one_shell_regular_matches_two_wave_form() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 2.0)], 2.0).unwrap();
        let s = solver(&spec, 0);
        let k = c(1.0, 0.0);
        let phi = s.regular(k);
        // for r > a: phi = sin(kr)/k + (lambda/k) sin(ka) sin(k(r-a))/k
        for (j, &r) in s.grid.r.iter().enumerate() {
            if r <= 1.0 {
                continue;
            }
            let exact = (k * r).sin() / k + 2.0 * (k * 1.0).sin() * (k * (r - 1.0)).sin() / (k * k);
            assert!((phi.u()[j] - exact).norm() < 1e-9);
        }
    }

    #[test]
    fn one_shell_outgoing_matches_two_wave_form() {
        let (lam, a) = (4.0, 1.0);
        let spec = PotentialSpec::delta_shells(&[(a, lam)], 2.0).unwrap();
        let s = solver(&spec, 0);
        let k = c(2.5, -0.4);
        let f = s.outgoing(k).unwrap();
        let ik = C::i() * k;
        // inside: f = e^{ikr} - (lambda / k) e^{ika} sin(k(r - a))
        for (j, &r) in s.grid.r.iter().enumerate() {
            let exact = if r < a {
                (ik * r).exp() - lam / k * (ik * a).exp() * (k * (r - a)).sin()
            } else {
                (ik * r).exp()
            };
            assert!((f.u()[j] - exact).norm() < 1e-7 * exact.norm(), "r={r}");
        }
    }

    #[test]
    fn jost_matches_closed_form() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 12.87), (2.2, -2.5)], 2.5).unwrap();
        let s = solver(&spec, 0);
        for k in [c(0.2, -0.01), c(2.9, -0.2), c(5.0, -1.0)] {
            let a = s.jost(k).unwrap();
            let b = closed_form_jost(&spec, k).unwrap();
            assert!((a - b).norm() < 1e-8 * b.norm(), "{k}: {a} vs {b}");
        }
    }

    #[test]
    fn free_derivatives_vanish() {
        let s = solver(&PotentialSpec::free(1.5), 0);
        let d = s.jost_derivatives(c(1.2, -0.3), 3, 0.1, 64).unwrap();
        for n in 1..=3 {
            assert!(d.d(n).norm() < 1e-10, "n={n}: {}", d.d(n));
        }
        let o = s.jost_derivatives_ode(c(1.2, -0.3), 2).unwrap();
        assert!(o.d1().norm() < 1e-10 && o.d2().norm() < 1e-10);
    }

    #[test]
    fn cauchy_first_derivative_matches_finite_difference() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 4.0)], 1.5).unwrap();
        let s = solver(&spec, 0);
        let k = c(2.0, -0.3);
        let d = s.jost_derivatives(k, 3, 0.1, 64).unwrap();
        let h = 1e-4;
        let fd = (closed_form_jost(&spec, k + h).unwrap() - closed_form_jost(&spec, k - h).unwrap()) / (2.0 * h);
        assert!((d.d1() - fd).norm() < 1e-6);
        let o = s.jost_derivatives_ode(k, 2).unwrap();
        assert!((o.d1() - d.d1()).norm() < 1e-7);
        assert!((o.d2() - d.d2()).norm() < 1e-7);
    }

    #[test]
    fn circle_must_avoid_origin() {
        let s = solver(&PotentialSpec::free(1.0), 0);
        assert!(matches!(
            s.jost_derivatives(c(0.05, 0.0), 2, 0.1, 64),
            Err(Error::CircleTouchesOrigin { .. })
        ));
    }

    #[test]
    fn free_k_derivative_l0() {
        let spec = PotentialSpec::free(3.0);
        let grid = RadialGrid::for_spec(&spec, 0, &GridSpec::default()).unwrap();
        let (d1, _) = solve_k_derivative_systems(&spec, 0, c(1.0, 0.0), &grid).unwrap();
        for (j, &r) in grid.r.iter().enumerate() {
            let exact = r * r.cos() - r.sin();
            assert!((d1.u()[j] - exact).norm() < 1e-8);
        }
    }

    #[test]
    fn missing_shell_node_is_reported() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 1.0)], 2.0).unwrap();
        let grid = RadialGrid::for_spec(&PotentialSpec::free(2.0), 0, &GridSpec { h: 0.3, ..Default::default() }).unwrap();
        assert!(matches!(
            JostSolver::with_grid(&spec, 0, grid, SolverOptions::default()),
            Err(Error::GridMissingShellNode(_))
        ));
    }
}
