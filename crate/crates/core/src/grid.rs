//! Radial grids made of segments whose ends sit on every breakpoint of the
//! potential. Junction radii appear twice, once as the last node of the left
//! segment and once as the first node of the right one, so one-sided
//! derivatives at delta shells are both kept.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Grid controls.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    /// Largest uniform step.
    pub h: f64,
    /// Series-start radius for `l > 0`, as a fraction of the cutoff.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Outer end of the grid; the cutoff is used when smaller.
    #[serde(default)]
    pub r_max: f64,
    /// Additional radii that must be nodes.
    #[serde(default)]
    pub extra: Vec<f64>,
}

fn default_eps() -> f64 {
    1e-6
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { h: 0.002, eps: default_eps(), r_max: 0.0, extra: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Index of the first node.
    pub start: usize,
    /// Index of the last node (inclusive).
    pub end: usize,
    /// Constant step height `v` on the open segment.
    pub v: f64,
    /// Nodes are equally spaced.
    pub uniform: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub r: Vec<f64>,
    pub segments: Vec<Segment>,
    pub cutoff: f64,
    pub h: f64,
}

impl RadialGrid {
    pub fn for_spec(spec: &PotentialSpec, l: u32, gs: &GridSpec) -> Result<Self> {
        if !(gs.h > 0.0 && gs.h.is_finite()) {
            return Err(Error::Config(format!("grid step must be positive, got {}", gs.h)));
        }
        let r_last = gs.r_max.max(spec.cutoff);
        let mut pts = spec.breakpoints();
        pts.extend(gs.extra.iter().cloned().filter(|&x| x > 0.0 && x <= r_last));
        pts.push(r_last);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * r_last);

        let mut grid = RadialGrid { r: Vec::new(), segments: Vec::new(), cutoff: spec.cutoff, h: gs.h };
        let mut lo = 0.0;
        if l > 0 {
            let eps = gs.eps * spec.cutoff;
            let first = pts[0];
            let ratio = 1.08;
            let mut nodes = vec![eps];
            let mut x = eps;
            while x * (ratio - 1.0) < gs.h && x * ratio < first {
                x *= ratio;
                nodes.push(x);
            }
            grid.push_segment(nodes, spec.background_on(eps, first), false);
            lo = x;
        }
        for &hi in &pts {
            if hi - lo <= 1e-14 * r_last {
                continue;
            }
            let n = ((hi - lo) / gs.h).ceil().max(1.0) as usize;
            let step = (hi - lo) / n as f64;
            let mut nodes: Vec<f64> = (0..n).map(|j| lo + j as f64 * step).collect();
            nodes.push(hi);
            grid.push_segment(nodes, spec.background_on(lo, hi), true);
            lo = hi;
        }
        Ok(grid)
    }

    fn push_segment(&mut self, nodes: Vec<f64>, v: f64, uniform: bool) {
        let start = self.r.len();
        self.r.extend(nodes);
        let end = self.r.len() - 1;
        self.segments.push(Segment { start, end, v, uniform });
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_last(&self) -> f64 {
        *self.r.last().unwrap_or(&0.0)
    }

    /// Index of the last node at or below `x`, counting duplicate junction
    /// nodes as belonging to the segment on their right.
    pub fn locate(&self, x: f64) -> usize {
        let mut idx = 0;
        for (j, &r) in self.r.iter().enumerate() {
            if r <= x {
                idx = j;
            } else {
                break;
            }
        }
        idx
    }

    /// Indices of all nodes at radius `x` (two at a junction, one inside a segment).
    pub fn nodes_at(&self, x: f64) -> Vec<usize> {
        let tol = 1e-12 * self.r_last().max(1.0);
        self.r
            .iter()
            .enumerate()
            .filter(|(_, &r)| (r - x).abs() <= tol)
            .map(|(j, _)| j)
            .collect()
    }

    /// Segment containing node `j` (the right one at a junction).
    pub fn segment_of(&self, j: usize) -> usize {
        self.segments
            .iter()
            .rposition(|s| s.start <= j && j <= s.end)
            .unwrap_or(0)
    }

    /// Index of the node that ends at or just before `x`, used for ranges.
    pub fn last_index_within(&self, x: f64) -> usize {
        let tol = 1e-12 * self.r_last().max(1.0);
        let mut idx = 0;
        for (j, &r) in self.r.iter().enumerate() {
            if r <= x + tol {
                idx = j;
            }
        }
        idx
    }

    pub fn check_shells(&self, spec: &PotentialSpec) -> Result<()> {
        for s in &spec.shells {
            let hits = self.nodes_at(s.a);
            if hits.len() < 2 {
                return Err(Error::GridMissingShellNode(s.a));
            }
        }
        Ok(())
    }
}

/// Samples of a function and its derivative on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub u: Vec<Complex64>,
    pub du: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(u: Vec<Complex64>, du: Vec<Complex64>) -> Self {
        GridFunction { u, du }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> (Complex64, Complex64)) -> Self {
        let (u, du) = grid.r.iter().map(|&r| f(r)).unzip();
        GridFunction { u, du }
    }

    pub fn product(&self, other: &GridFunction) -> GridFunction {
        let u = self.u.iter().zip(&other.u).map(|(a, b)| a * b).collect();
        let du = (0..self.u.len())
            .map(|j| self.du[j] * other.u[j] + self.u[j] * other.du[j])
            .collect();
        GridFunction { u, du }
    }

    pub fn scale(&self, s: Complex64) -> GridFunction {
        GridFunction {
            u: self.u.iter().map(|x| x * s).collect(),
            du: self.du.iter().map(|x| x * s).collect(),
        }
    }

    pub fn axpy(&self, s: Complex64, other: &GridFunction) -> GridFunction {
        GridFunction {
            u: self.u.iter().zip(&other.u).map(|(a, b)| a + s * b).collect(),
            du: self.du.iter().zip(&other.du).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// Value at `x` by cubic Hermite interpolation inside the owning interval.
    pub fn interpolate(&self, grid: &RadialGrid, x: f64) -> Complex64 {
        let j = grid.locate(x).min(grid.len() - 2);
        let (r0, r1) = (grid.r[j], grid.r[j + 1]);
        let h = r1 - r0;
        if h <= 0.0 {
            return self.u[j + 1];
        }
        let t = (x - r0) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        self.u[j] * h00 + self.du[j] * (h10 * h) + self.u[j + 1] * h01 + self.du[j + 1] * (h11 * h)
    }
}

/// `int g dr` over `[r_from, r_to]` (grid nodes) with the end-corrected
/// trapezoid rule, exact for cubics on every interval.
pub fn integrate_range(grid: &RadialGrid, g: &GridFunction, from: usize, to: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in from..to {
        let h = grid.r[j + 1] - grid.r[j];
        if h <= 0.0 {
            continue;
        }
        acc += (g.u[j] + g.u[j + 1]) * (0.5 * h) + (g.du[j] - g.du[j + 1]) * (h * h / 12.0);
    }
    acc
}

pub fn integrate(grid: &RadialGrid, g: &GridFunction) -> Complex64 {
    integrate_range(grid, g, 0, grid.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shells_become_duplicated_nodes() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 2.0), (2.2, -1.0)], 3.0).unwrap();
        let g = RadialGrid::for_spec(&spec, 0, &GridSpec::default()).unwrap();
        assert_eq!(g.nodes_at(1.0).len(), 2);
        assert_eq!(g.nodes_at(2.2).len(), 2);
        assert_eq!(g.r[0], 0.0);
        assert_eq!(g.r_last(), 3.0);
        g.check_shells(&spec).unwrap();
        for w in g.r.windows(2) {
            assert!(w[1] >= w[0]);
            assert!(w[1] - w[0] <= 0.002 + 1e-12);
        }
    }

    #[test]
    fn higher_l_starts_at_series_node() {
        let spec = PotentialSpec::square_well(-1.0, 1.0).unwrap();
        let g = RadialGrid::for_spec(&spec, 2, &GridSpec::default()).unwrap();
        assert!((g.r[0] - 1e-6).abs() < 1e-18);
        assert!(!g.segments[0].uniform);
        assert_eq!(g.segments[0].v, -1.0);
    }

    #[test]
    fn quadrature_is_exact_for_cubics() {
        let spec = PotentialSpec::free(2.0);
        let g = RadialGrid::for_spec(&spec, 0, &GridSpec { h: 0.3, ..Default::default() }).unwrap();
        let f = GridFunction::from_fn(&g, |r| {
            (Complex64::new(r * r * r - r, 0.0), Complex64::new(3.0 * r * r - 1.0, 0.0))
        });
        let exact = 16.0 / 4.0 - 2.0;
        assert!((integrate(&g, &f) - exact).norm() < 1e-13);
    }

    #[test]
    fn hermite_interpolation() {
        let spec = PotentialSpec::free(2.0);
        let g = RadialGrid::for_spec(&spec, 0, &GridSpec { h: 0.01, ..Default::default() }).unwrap();
        let f = GridFunction::from_fn(&g, |r| (Complex64::new(r.sin(), 0.0), Complex64::new(r.cos(), 0.0)));
        let x = 1.23456;
        assert!((f.interpolate(&g, x) - x.sin()).norm() < 1e-10);
    }
}
