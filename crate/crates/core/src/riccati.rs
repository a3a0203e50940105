//! Riccati-Bessel and Riccati-Hankel functions for complex argument.
//!
//! `hankel(l, x, s)` is `e^{isx} sum_m a_m (is/2x)^m` with
//! `a_m = (l+m)! / (m! (l-m)!)`, so that `i^l hankel(l, kr, +1)` is the outgoing
//! solution `f_l(-k, r)` of the free equation and `i^l hankel(l, kr, -1)` the
//! incoming one `f_l(k, r)`.

use num_complex::Complex64;

use crate::tail::{Tail, TailTerm};

/// Coefficients `(l+m)! / (m! (l-m)!)` for `m = 0..=l`.
pub fn hankel_coeffs(l: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(l as usize + 1);
    let mut a = 1.0;
    out.push(a);
    for m in 1..=l {
        // a_m / a_{m-1} = (l+m)(l-m+1) / m
        a *= ((l + m) as f64) * ((l - m + 1) as f64) / m as f64;
        out.push(a);
    }
    out
}

fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Value and x-derivative of the Riccati-Hankel function of direction `s = ±1`.
pub fn hankel(l: u32, x: Complex64, s: i32) -> (Complex64, Complex64) {
    let is = Complex64::new(0.0, s as f64);
    let e = (is * x).exp();
    let mut val = Complex64::new(0.0, 0.0);
    let mut der = Complex64::new(0.0, 0.0);
    for (m, a) in hankel_coeffs(l).into_iter().enumerate() {
        let c = a * (is / 2.0).powi(m as i32);
        let xm = x.powi(-(m as i32));
        val += c * xm;
        der += c * (is * xm - m as f64 * xm / x);
    }
    (e * val, e * der)
}

/// Free outgoing (`s = 1`) or incoming (`s = -1`) Jost solution and its first
/// two k-derivatives, each as an exact exponential polynomial in `r`.
pub fn free_jost_tails(l: u32, k: Complex64, s: i32) -> [Tail; 3] {
    // terms c0 k^n r^p e^{i s k r}, differentiated symbolically in k
    let is = Complex64::new(0.0, s as f64);
    let base: Vec<(Complex64, i32, i32)> = hankel_coeffs(l)
        .into_iter()
        .enumerate()
        .map(|(m, a)| (i_pow(l as i64) * a * (is / 2.0).powi(m as i32), -(m as i32), -(m as i32)))
        .collect();
    let dk = |terms: &[(Complex64, i32, i32)]| -> Vec<(Complex64, i32, i32)> {
        let mut out = Vec::new();
        for &(c, n, p) in terms {
            if n != 0 {
                out.push((c * n as f64, n - 1, p));
            }
            out.push((c * is, n, p + 1));
        }
        out
    };
    let d1 = dk(&base);
    let d2 = dk(&d1);
    let q = k * s as f64;
    let to_tail = |terms: &[(Complex64, i32, i32)]| {
        let mut t = Tail::zero();
        for &(c, n, p) in terms {
            t = t.add(&Tail {
                terms: vec![TailTerm { coeff: c * k.powi(n), power: p, q }],
            });
        }
        t
    };
    [to_tail(&base), to_tail(&d1), to_tail(&d2)]
}

/// Riccati-Bessel `x j_l(x)` and its derivative.
pub fn riccati_j(l: u32, x: Complex64) -> (Complex64, Complex64) {
    if l == 0 {
        return (x.sin(), x.cos());
    }
    if x.norm() < 1.0 + l as f64 {
        return riccati_j_series(l, x);
    }
    let (hp, dhp) = hankel(l, x, 1);
    let (hm, dhm) = hankel(l, x, -1);
    let cp = i_pow(-(l as i64) - 1);
    let cm = i_pow(l as i64 + 1);
    (0.5 * (cp * hp + cm * hm), 0.5 * (cp * dhp + cm * dhm))
}

fn riccati_j_series(l: u32, x: Complex64) -> (Complex64, Complex64) {
    let mut dfact = 1.0;
    for j in 1..=l {
        dfact *= (2 * j + 1) as f64;
    }
    let z = -x * x / 2.0;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut dsum = Complex64::new((l + 1) as f64, 0.0);
    for n in 1..60 {
        term *= z / (n as f64 * (2 * l + 2 * n + 1) as f64);
        sum += term;
        dsum += term * (l as f64 + 1.0 + 2.0 * n as f64);
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    let lead = x.powi(l as i32 + 1) / dfact;
    (lead * sum, lead * dsum / x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn coefficients() {
        assert_eq!(hankel_coeffs(0), vec![1.0]);
        assert_eq!(hankel_coeffs(1), vec![1.0, 2.0]);
        assert_eq!(hankel_coeffs(2), vec![1.0, 6.0, 12.0]);
    }

    #[test]
    fn riccati_j1_closed_form() {
        for x in [c(0.3, 0.1), c(2.0, 0.0), c(5.0, -1.0)] {
            let exact = x.sin() / x - x.cos();
            let dexact = x.cos() / x - x.sin() / (x * x) + x.sin();
            let (v, d) = riccati_j(1, x);
            assert!((v - exact).norm() < 1e-13 * exact.norm().max(1e-3), "{x}");
            assert!((d - dexact).norm() < 1e-12, "{x}");
        }
    }

    #[test]
    fn series_and_hankel_agree_at_switch() {
        for l in 1..4 {
            let x = c(1.0 + l as f64, 0.2);
            let a = riccati_j_series(l, x);
            let (hp, dhp) = hankel(l, x, 1);
            let (hm, dhm) = hankel(l, x, -1);
            let cp = i_pow(-(l as i64) - 1);
            let cm = i_pow(l as i64 + 1);
            let b = (0.5 * (cp * hp + cm * hm), 0.5 * (cp * dhp + cm * dhm));
            assert!((a.0 - b.0).norm() < 1e-12, "l={l}");
            assert!((a.1 - b.1).norm() < 1e-12, "l={l}");
        }
    }

    #[test]
    fn hankel_solves_free_equation() {
        let l = 2;
        let k = c(1.3, -0.4);
        let r = 1.7;
        let f = |r: f64| hankel(l, k * r, 1).0;
        let h = 1e-4;
        let second = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h);
        let rhs = (6.0 / (r * r) - k * k) * f(r);
        assert!((second - rhs).norm() < 1e-5);
    }

    #[test]
    fn tails_match_hankel_and_its_k_derivatives() {
        let l = 2;
        let k = c(1.1, -0.3);
        let r = c(2.3, 0.0);
        let [t0, t1, t2] = free_jost_tails(l, k, 1);
        let f = |k: Complex64| i_pow(l as i64) * hankel(l, k * r, 1).0;
        assert!((t0.eval(r) - f(k)).norm() < 1e-13);
        let h = 1e-4;
        let d1 = (f(k + h) - f(k - h)) / (2.0 * h);
        let d2 = (f(k + h) - 2.0 * f(k) + f(k - h)) / (h * h);
        assert!((t1.eval(r) - d1).norm() < 1e-7);
        assert!((t2.eval(r) - d2).norm() < 1e-5);
        let [m0, _, _] = free_jost_tails(l, k, -1);
        assert!((m0.eval(r) - f(-k)).norm() < 1e-13);
    }
}
