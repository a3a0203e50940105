//! Exponential polynomials `sum c r^p e^{iqr}`, the exact form of every
//! solution product beyond the cutoff radius.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One term `coeff * r^power * e^{i q r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTerm {
    pub coeff: Complex64,
    pub power: i32,
    pub q: Complex64,
}

impl TailTerm {
    pub fn eval(&self, r: Complex64) -> Complex64 {
        self.coeff * r.powi(self.power) * (Complex64::i() * self.q * r).exp()
    }

    pub fn deriv(&self, r: Complex64) -> Complex64 {
        let p = self.power as f64;
        self.coeff
            * (p * r.powi(self.power - 1) + Complex64::i() * self.q * r.powi(self.power))
            * (Complex64::i() * self.q * r).exp()
    }
}

/// Finite sum of [`TailTerm`]s, valid for `r >= start`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub terms: Vec<TailTerm>,
}

const SAME_Q: f64 = 1e-12;

impl Tail {
    pub fn zero() -> Self {
        Tail { terms: Vec::new() }
    }

    pub fn single(coeff: Complex64, power: i32, q: Complex64) -> Self {
        Tail { terms: vec![TailTerm { coeff, power, q }] }
    }

    pub fn eval(&self, r: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(r)).sum()
    }

    pub fn deriv(&self, r: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.deriv(r)).sum()
    }

    pub fn scale(&self, s: Complex64) -> Tail {
        Tail {
            terms: self
                .terms
                .iter()
                .map(|t| TailTerm { coeff: t.coeff * s, ..*t })
                .collect(),
        }
    }

    pub fn add(&self, other: &Tail) -> Tail {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(*t);
        }
        out
    }

    pub fn mul(&self, other: &Tail) -> Tail {
        let mut out = Tail::zero();
        for a in &self.terms {
            for b in &other.terms {
                out.push(TailTerm {
                    coeff: a.coeff * b.coeff,
                    power: a.power + b.power,
                    q: a.q + b.q,
                });
            }
        }
        out
    }

    fn push(&mut self, t: TailTerm) {
        let scale = t.q.norm().max(1.0);
        if let Some(s) = self
            .terms
            .iter_mut()
            .find(|s| s.power == t.power && (s.q - t.q).norm() <= SAME_Q * scale)
        {
            s.coeff += t.coeff;
        } else {
            self.terms.push(t);
        }
    }

    /// Drops terms whose size at `r` is below `rel` times the largest term there.
    pub fn pruned(&self, r: f64, rel: f64) -> Tail {
        let rc = Complex64::new(r, 0.0);
        let sizes: Vec<f64> = self.terms.iter().map(|t| t.eval(rc).norm()).collect();
        let top = sizes.iter().cloned().fold(0.0, f64::max);
        Tail {
            terms: self
                .terms
                .iter()
                .zip(&sizes)
                .filter(|(_, &s)| s > rel * top)
                .map(|(t, _)| *t)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_merges_equal_exponents() {
        let k = Complex64::new(1.0, -0.2);
        let a = Tail::single(Complex64::new(2.0, 0.0), 0, k).add(&Tail::single(Complex64::new(1.0, 0.0), -1, k));
        let sq = a.mul(&a);
        assert_eq!(sq.terms.len(), 3);
        let r = Complex64::new(1.3, 0.0);
        assert!((sq.eval(r) - a.eval(r) * a.eval(r)).norm() < 1e-13);
    }

    #[test]
    fn derivative_matches_difference() {
        let t = Tail::single(Complex64::new(0.5, 1.0), 2, Complex64::new(1.5, -0.3));
        let r = Complex64::new(2.0, 0.0);
        let h = 1e-6;
        let fd = (t.eval(r + h) - t.eval(r - h)) / (2.0 * h);
        assert!((fd - t.deriv(r)).norm() < 1e-7);
    }
}
