//! Regularized integrals `int_0^inf g dr` of functions that grow like
//! `e^{iqr}` with `Im q < 0` beyond the cutoff, by a Gaussian regulator
//! `e^{-nu r^2}` extrapolated to `nu -> 0`, or by the Abel limit of the tail
//! in closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::grid::{integrate_range, GridFunction, RadialGrid};
use crate::quad::segment_rule;
use crate::tail::{Tail, TailTerm};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegMethod {
    GaussianExtrapolated,
    ExactTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegOptions {
    pub nu: Vec<f64>,
    /// Largest accepted gap between the extrapolants from `n` and `n - 1` points,
    /// relative to `max(|value|, int |g|)`.
    pub rel_tol: f64,
}

impl Default for RegOptions {
    fn default() -> Self {
        RegOptions { nu: vec![1e-2, 7.5e-3, 5e-3, 2.5e-3, 1e-3], rel_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatedIntegral {
    pub value: C,
    pub method: RegMethod,
    /// Regulator values used (empty for the exact tail).
    pub nu: Vec<f64>,
    pub samples: Vec<C>,
    /// Gap between the extrapolants from all points and from all but the largest `nu`.
    pub discrepancy: f64,
}

/// Integrand split into a sampled interior `[0, R]` and an exact tail for `r >= R`.
#[derive(Debug, Clone)]
pub struct SplitIntegrand<'a> {
    pub grid: &'a RadialGrid,
    pub interior: GridFunction,
    /// Index of the node at `r = R`.
    pub upto: usize,
    pub tail: Tail,
}

impl SplitIntegrand<'_> {
    fn radius(&self) -> f64 {
        self.grid.r[self.upto]
    }

    fn interior_abs(&self) -> f64 {
        let g = &self.interior;
        let mut acc = 0.0;
        for j in 0..self.upto {
            let h = self.grid.r[j + 1] - self.grid.r[j];
            acc += 0.5 * h * (g.u[j].norm() + g.u[j + 1].norm());
        }
        acc
    }
}

/// Ray `R + t e^{i theta}`, `t >= 0`, on which `term` times `e^{-nu r^2}` decays.
fn ray_integral(term: &TailTerm, big_r: f64, theta: f64, nu: f64) -> C {
    let dir = C::from_polar(1.0, theta);
    let q = term.q;
    // decay rates along the ray
    let mu = (q * dir).im.max(0.0);
    let a = nu * (2.0 * theta).cos();
    let t_max = if a > 0.0 {
        let disc = mu * mu + 4.0 * a * 45.0;
        (-mu + disc.sqrt()) / (2.0 * a)
    } else {
        45.0 / mu
    };
    let scale = q.norm().max(mu).max(1.0 / big_r);
    let panels = ((t_max * scale / 1.5).ceil() as usize).clamp(4, 4000);
    let start = C::new(big_r, 0.0);
    segment_rule(C::new(0.0, 0.0), C::new(t_max, 0.0), panels)
        .into_iter()
        .map(|(t, w)| {
            let r = start + dir * t.re;
            term.eval(r) * (-nu * r * r).exp() * dir * w
        })
        .sum()
}

/// `int_R^inf r^p e^{iqr} dr` in the Abel sense.
fn exact_term(term: &TailTerm, big_r: f64) -> Result<C> {
    let q = term.q;
    if q.norm() == 0.0 {
        return Err(Error::TailDivergence);
    }
    if term.power < 0 {
        let arg = q.arg();
        if arg < -std::f64::consts::FRAC_PI_2 {
            return Err(Error::RegulatorInapplicable(q));
        }
        return Ok(ray_integral(term, big_r, std::f64::consts::FRAC_PI_2 - arg, 0.0));
    }
    // I_p = -R^p e^{iqR}/(iq) - (p/(iq)) I_{p-1}
    let iq = C::i() * q;
    let e = (iq * big_r).exp();
    let mut acc = -e / iq;
    for p in 1..=term.power {
        acc = -big_r.powi(p) * e / iq - (p as f64 / iq) * acc;
    }
    Ok(term.coeff * acc)
}

/// Sum of exact tail integrals.
pub fn exact_tail(tail: &Tail, big_r: f64) -> Result<C> {
    let mut acc = C::new(0.0, 0.0);
    for t in &tail.terms {
        if t.coeff.norm() == 0.0 {
            continue;
        }
        acc += exact_term(t, big_r)?;
    }
    Ok(acc)
}

/// `int_R^inf e^{-nu r^2} tail(r) dr` for `nu > 0`.
pub fn gaussian_tail(tail: &Tail, big_r: f64, nu: f64) -> Result<C> {
    let mut acc = C::new(0.0, 0.0);
    for t in &tail.terms {
        if t.coeff.norm() == 0.0 {
            continue;
        }
        if t.q.norm() == 0.0 {
            return Err(Error::TailDivergence);
        }
        let lower = (-t.q.arg()).max(-FRAC_PI_4);
        if lower >= FRAC_PI_4 {
            return Err(Error::RegulatorInapplicable(t.q));
        }
        let theta = 0.5 * (lower + FRAC_PI_4);
        acc += ray_integral(t, big_r, theta, nu);
    }
    Ok(acc)
}

/// Value at `x = 0` of the polynomial through `(xs, ys)`.
pub fn neville_at_zero(xs: &[f64], ys: &[C]) -> C {
    let n = xs.len();
    let mut p = ys.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            let (xi, xj) = (xs[i], xs[i + m]);
            p[i] = (p[i] * xj - p[i + 1] * xi) / (xj - xi);
        }
    }
    p[0]
}

pub fn regulated_integral(f: &SplitIntegrand<'_>, method: RegMethod, opts: &RegOptions) -> Result<RegulatedIntegral> {
    let big_r = f.radius();
    match method {
        RegMethod::ExactTail => {
            let inner = integrate_range(f.grid, &f.interior, 0, f.upto);
            Ok(RegulatedIntegral {
                value: inner + exact_tail(&f.tail, big_r)?,
                method,
                nu: Vec::new(),
                samples: Vec::new(),
                discrepancy: 0.0,
            })
        }
        RegMethod::GaussianExtrapolated => {
            let mut samples = Vec::with_capacity(opts.nu.len());
            for &nu in &opts.nu {
                let g = &f.interior;
                let weighted = GridFunction::new(
                    (0..=f.upto).map(|j| g.u[j] * (-nu * f.grid.r[j].powi(2)).exp()).collect(),
                    (0..=f.upto)
                        .map(|j| {
                            let r = f.grid.r[j];
                            (g.du[j] - 2.0 * nu * r * g.u[j]) * (-nu * r * r).exp()
                        })
                        .collect(),
                );
                let inner = integrate_range(f.grid, &weighted, 0, f.upto);
                samples.push(inner + gaussian_tail(&f.tail, big_r, nu)?);
            }
            let value = neville_at_zero(&opts.nu, &samples);
            let coarse = neville_at_zero(&opts.nu[1..], &samples[1..]);
            let discrepancy = (value - coarse).norm();
            let scale = value.norm().max(f.interior_abs());
            if discrepancy > opts.rel_tol * scale {
                return Err(Error::ExtrapolationUnstable { residual: discrepancy / scale });
            }
            Ok(RegulatedIntegral { value, method, nu: opts.nu.clone(), samples, discrepancy })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::potential::PotentialSpec;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn grid(r: f64) -> RadialGrid {
        RadialGrid::for_spec(&PotentialSpec::free(r), 0, &GridSpec::default()).unwrap()
    }

    #[test]
    fn plain_gaussian_both_methods() {
        let g = grid(9.0);
        let f = GridFunction::from_fn(&g, |r| {
            let e = (-r * r).exp();
            (c(e, 0.0), c(-2.0 * r * e, 0.0))
        });
        let split = SplitIntegrand { grid: &g, interior: f, upto: g.len() - 1, tail: Tail::zero() };
        let exact = std::f64::consts::PI.sqrt() / 2.0;
        for m in [RegMethod::ExactTail, RegMethod::GaussianExtrapolated] {
            let v = regulated_integral(&split, m, &RegOptions::default()).unwrap();
            assert!((v.value - exact).norm() < 1e-10, "{m:?}: {}", v.value);
        }
    }

    #[test]
    fn growing_exponential_has_abel_limit() {
        let k = c(1.0, -0.3);
        let q = 2.0 * k;
        let g = grid(2.0);
        let f = GridFunction::from_fn(&g, |r| {
            let e = (C::i() * q * r).exp();
            (e, C::i() * q * e)
        });
        let split = SplitIntegrand { grid: &g, interior: f, upto: g.len() - 1, tail: Tail::single(c(1.0, 0.0), 0, q) };
        let exact = -1.0 / (2.0 * C::i() * k);
        let a = regulated_integral(&split, RegMethod::ExactTail, &RegOptions::default()).unwrap();
        let b = regulated_integral(&split, RegMethod::GaussianExtrapolated, &RegOptions::default()).unwrap();
        assert!((a.value - exact).norm() < 1e-10);
        assert!((b.value - exact).norm() < 1e-8, "{}", b.value);
    }

    #[test]
    fn negative_powers_by_rotated_ray() {
        // int_R^inf e^{iqr}/r dr = E1(-iqR)
        let q = c(2.0, -0.2);
        let t = Tail::single(c(1.0, 0.0), -1, q);
        let exact = exact_tail(&t, 1.5).unwrap();
        let gauss: Vec<C> = [1e-2, 7.5e-3, 5e-3, 2.5e-3, 1e-3].iter().map(|&nu| gaussian_tail(&t, 1.5, nu).unwrap()).collect();
        let lim = neville_at_zero(&[1e-2, 7.5e-3, 5e-3, 2.5e-3, 1e-3], &gauss);
        assert!((exact - lim).norm() < 1e-9);
    }

    #[test]
    fn abel_recursion_for_positive_powers() {
        // int_R^inf r e^{iqr} dr with Im q > 0 converges classically
        let q = c(1.0, 0.5);
        let t = Tail::single(c(1.0, 0.0), 1, q);
        let big_r: f64 = 1.0;
        let iq = C::i() * q;
        let exact = (iq * big_r).exp() * (-big_r / iq + 1.0 / (iq * iq));
        assert!((exact_tail(&t, big_r).unwrap() - exact).norm() < 1e-14);
    }

    #[test]
    fn errors() {
        let t = Tail::single(c(1.0, 0.0), 0, c(0.0, 0.0));
        assert!(matches!(exact_tail(&t, 1.0), Err(Error::TailDivergence)));
        // broad: |Im q| > Re q
        let t = Tail::single(c(1.0, 0.0), 0, c(1.0, -2.0));
        assert!(matches!(gaussian_tail(&t, 1.0, 1e-3), Err(Error::RegulatorInapplicable(_))));
    }
}
