//! Direct time propagation of a radial wave packet: second-order finite
//! differences, Crank-Nicolson steps, exterior complex scaling beyond `r0`
//! as the absorbing layer, and one Richardson step in `(h, dt)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::spectral::TestFunction;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnOptions {
    pub h: f64,
    pub dt: f64,
    /// Start of the complex-scaled region; at or beyond the cutoff.
    pub r0: f64,
    /// Length of the scaled region.
    pub length: f64,
    pub theta: f64,
    pub richardson: bool,
}

impl Default for CnOptions {
    fn default() -> Self {
        CnOptions { h: 0.002, dt: 0.001, r0: 3.0, length: 15.0, theta: 0.8, richardson: true }
    }
}

/// Tridiagonal matrix rows `(lower, diag, upper)`.
struct Tridiag {
    lo: Vec<C>,
    di: Vec<C>,
    up: Vec<C>,
}

impl Tridiag {
    fn apply(&self, x: &[C], out: &mut [C]) {
        let n = x.len();
        for j in 0..n {
            let mut v = self.di[j] * x[j];
            if j > 0 {
                v += self.lo[j] * x[j - 1];
            }
            if j + 1 < n {
                v += self.up[j] * x[j + 1];
            }
            out[j] = v;
        }
    }
}

/// Thomas factorization of a tridiagonal matrix.
struct Thomas {
    lo: Vec<C>,
    up_mod: Vec<C>,
    den: Vec<C>,
}

impl Thomas {
    fn new(m: &Tridiag) -> Thomas {
        let n = m.di.len();
        let mut up_mod = vec![C::new(0.0, 0.0); n];
        let mut den = vec![C::new(0.0, 0.0); n];
        den[0] = m.di[0];
        up_mod[0] = m.up[0] / den[0];
        for j in 1..n {
            den[j] = m.di[j] - m.lo[j] * up_mod[j - 1];
            up_mod[j] = m.up[j] / den[j];
        }
        Thomas { lo: m.lo.clone(), up_mod, den }
    }

    fn solve(&self, b: &mut [C]) {
        let n = b.len();
        b[0] /= self.den[0];
        for j in 1..n {
            b[j] = (b[j] - self.lo[j] * b[j - 1]) / self.den[j];
        }
        for j in (0..n - 1).rev() {
            let next = b[j + 1];
            b[j] -= self.up_mod[j] * next;
        }
    }
}

/// Hamiltonian on interior nodes `r_j = j h`, `j = 1..n`, Dirichlet at both ends.
fn hamiltonian(spec: &PotentialSpec, l: u32, h: f64, opts: &CnOptions) -> Result<(Tridiag, Vec<f64>)> {
    let n_real = (opts.r0 / h).round() as usize;
    if ((n_real as f64) * h - opts.r0).abs() > 1e-9 * opts.r0 || opts.r0 < spec.cutoff {
        return Err(Error::Config("scaling radius must be a grid point beyond the cutoff".to_string()));
    }
    let n = ((opts.r0 + opts.length) / h).round() as usize - 1;
    let rot = C::from_polar(1.0, opts.theta);
    let z = |j: usize| -> C {
        let r = j as f64 * h;
        if j <= n_real {
            C::new(r, 0.0)
        } else {
            opts.r0 + (r - opts.r0) * rot
        }
    };
    if let Some(sh) = spec.shells.iter().find(|sh| ((sh.a / h).round() - sh.a / h).abs() > 1e-9) {
        return Err(Error::GridMissingShellNode(sh.a));
    }
    let cl = (l * (l + 1)) as f64;
    let mut lo = vec![C::new(0.0, 0.0); n];
    let mut di = vec![C::new(0.0, 0.0); n];
    let mut up = vec![C::new(0.0, 0.0); n];
    let mut radii = Vec::with_capacity(n);
    for (i, j) in (1..=n).enumerate() {
        let (hl, hr) = (z(j) - z(j - 1), z(j + 1) - z(j));
        let s = hl + hr;
        lo[i] = -2.0 / (hl * s);
        up[i] = -2.0 / (hr * s);
        let r = j as f64 * h;
        let mut v = if j <= n_real { step_potential(spec, r) } else { C::new(0.0, 0.0) };
        for sh in &spec.shells {
            if ((sh.a / h) - j as f64).abs() < 1e-9 {
                v += sh.lambda / h;
            }
        }
        di[i] = 2.0 / (hl * hr) + v + cl / (z(j) * z(j));
        radii.push(r);
    }
    Ok((Tridiag { lo, di, up }, radii))
}

/// Step potential at `r`, averaged across a jump that falls on the node.
fn step_potential(spec: &PotentialSpec, r: f64) -> C {
    let eps = 1e-9;
    C::new(0.5 * (spec.background(r - eps) + spec.background(r + eps)), 0.0)
}

/// `A(t) = int chi psi(t) dr` on one `(h, dt)` pair; `times` must be multiples of `dt`.
fn run(spec: &PotentialSpec, l: u32, chi: &TestFunction, times: &[f64], h: f64, dt: f64, opts: &CnOptions) -> Result<Vec<C>> {
    let (hm, radii) = hamiltonian(spec, l, h, opts)?;
    let n = radii.len();
    let half = C::new(0.0, 0.5 * dt);
    let lhs = Tridiag {
        lo: hm.lo.iter().map(|x| half * x).collect(),
        di: hm.di.iter().map(|x| 1.0 + half * x).collect(),
        up: hm.up.iter().map(|x| half * x).collect(),
    };
    let rhs = Tridiag {
        lo: hm.lo.iter().map(|x| -half * x).collect(),
        di: hm.di.iter().map(|x| 1.0 - half * x).collect(),
        up: hm.up.iter().map(|x| -half * x).collect(),
    };
    let solver = Thomas::new(&lhs);
    let chi_v: Vec<C> = radii.iter().map(|&r| chi.eval(r).0).collect();
    let overlap = |psi: &[C]| -> C { psi.iter().zip(&chi_v).map(|(p, c)| p * c).sum::<C>() * h };
    let mut psi = chi_v.clone();
    let mut tmp = vec![C::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(times.len());
    let mut step = 0usize;
    for &t in times {
        let target = (t / dt).round() as usize;
        if ((target as f64) * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::Config(format!("time {t} is not a multiple of dt = {dt}")));
        }
        if target < step {
            return Err(Error::Config("times must be increasing".to_string()));
        }
        while step < target {
            rhs.apply(&psi, &mut tmp);
            solver.solve(&mut tmp);
            std::mem::swap(&mut psi, &mut tmp);
            step += 1;
        }
        out.push(overlap(&psi));
    }
    Ok(out)
}

/// Survival amplitude by direct propagation, Richardson-combined over
/// `(h, dt)` and `(h/2, dt/2)` when requested.
pub fn propagate_survival(spec: &PotentialSpec, l: u32, chi: &TestFunction, times: &[f64], opts: &CnOptions) -> Result<Vec<C>> {
    let coarse = run(spec, l, chi, times, opts.h, opts.dt, opts)?;
    if !opts.richardson {
        return Ok(coarse);
    }
    let fine = run(spec, l, chi, times, 0.5 * opts.h, 0.5 * opts.dt, opts)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_of_free_packet_at_start() {
        let spec = PotentialSpec::free(1.0);
        let chi = TestFunction::gaussian(1.5, 0.1);
        let a = propagate_survival(&spec, 0, &chi, &[0.0], &CnOptions::default()).unwrap();
        let exact = 0.1 * std::f64::consts::PI.sqrt();
        assert!((a[0] - exact).norm() < 1e-9);
    }

    #[test]
    fn free_packet_spreads_like_the_exact_propagator() {
        // l = 0 free propagation; the image from the wall at r = 0 is negligible
        let spec = PotentialSpec::free(1.0);
        let (c, s) = (1.5, 0.1);
        let chi = TestFunction::gaussian(c, s);
        let t = 0.02;
        let a = propagate_survival(&spec, 0, &chi, &[t], &CnOptions::default()).unwrap()[0];
        // <chi| e^{i t d^2/dr^2} |chi> on the whole line
        let w = C::new(2.0 * s * s, 2.0 * t);
        let exact = std::f64::consts::PI.sqrt() * s * s * (2.0 / w).sqrt() * C::new(1.0, 0.0);
        assert!((a - exact).norm() < 1e-5 * exact.norm(), "{a} {exact}");
    }
}
