//! Composite Gauss-Legendre rules on straight segments of the complex plane.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

/// Nodes and weights of the 16-point rule on `[-1, 1]`.
pub fn gl16() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(16).unwrap());
        let mut v: Vec<(f64, f64)> = rule.iter().map(|&(x, w)| (x, w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    })
}

/// Nodes `z_j` and complex weights `w_j` (including `dz`) of `panels` equal
/// panels from `a` to `b`.
pub fn segment_rule(a: Complex64, b: Complex64, panels: usize) -> Vec<(Complex64, Complex64)> {
    let rule = gl16();
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        for &(x, w) in rule {
            out.push((mid + h * (0.5 * x), h * (0.5 * w)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_exponential_on_a_slanted_segment() {
        let (a, b) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, -2.0));
        let s: Complex64 = segment_rule(a, b, 4).iter().map(|(z, w)| z.exp() * w).sum();
        assert!((s - (b.exp() - a.exp())).norm() < 1e-14);
    }
}
