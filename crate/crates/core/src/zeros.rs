//! Zeros of the Jost function: argument-principle counting on rectangles,
//! recursive bisection, Newton polishing, classification and the S-matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::output::fmt17;
use crate::solver::JostSolver;

type C = Complex64;

/// Rectangle `[lo.re, hi.re] x [lo.im, hi.im]` in the k-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: C,
    pub hi: C,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default = "default_points")]
    pub points_per_edge: usize,
}

fn default_depth() -> usize {
    14
}

fn default_points() -> usize {
    64
}

impl SearchBox {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Self {
        SearchBox {
            lo: C::new(re.0, im.0),
            hi: C::new(re.1, im.1),
            max_depth: default_depth(),
            points_per_edge: default_points(),
        }
    }

    /// Square box of half-width `half` around `k`.
    pub fn around(k: C, half: f64) -> Self {
        SearchBox::new((k.re - half, k.re + half), (k.im - half, k.im + half))
    }

    pub fn contains(&self, k: C, margin: f64) -> bool {
        k.re >= self.lo.re - margin && k.re <= self.hi.re + margin && k.im >= self.lo.im - margin && k.im <= self.hi.im + margin
    }

    fn width(&self) -> f64 {
        self.hi.re - self.lo.re
    }

    fn height(&self) -> f64 {
        self.hi.im - self.lo.im
    }

    fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    fn corners(&self) -> [C; 4] {
        [self.lo, C::new(self.hi.re, self.lo.im), self.hi, C::new(self.lo.re, self.hi.im)]
    }

    /// Splits the longer side at fraction `t`.
    fn split(&self, t: f64) -> (SearchBox, SearchBox) {
        let mut a = *self;
        let mut b = *self;
        if self.width() >= self.height() {
            let x = self.lo.re + t * self.width();
            a.hi.re = x;
            b.lo.re = x;
        } else {
            let y = self.lo.im + t * self.height();
            a.hi.im = y;
            b.lo.im = y;
        }
        (a, b)
    }

    /// Moves every edge outward by `d`.
    fn grown(&self, d: f64) -> SearchBox {
        SearchBox { lo: self.lo - C::new(d, d), hi: self.hi + C::new(d, d), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroClass {
    Bound,
    Resonance,
    Antibound,
    Mirror,
}

impl fmt::Display for ZeroClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ZeroClass::Bound => "bound",
            ZeroClass::Resonance => "resonance",
            ZeroClass::Antibound => "antibound",
            ZeroClass::Mirror => "mirror",
        };
        f.write_str(s)
    }
}

impl FromStr for ZeroClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bound" => Ok(ZeroClass::Bound),
            "resonance" => Ok(ZeroClass::Resonance),
            "antibound" => Ok(ZeroClass::Antibound),
            "mirror" => Ok(ZeroClass::Mirror),
            _ => Err(Error::Config(format!("unknown zero class {s:?}"))),
        }
    }
}

/// A located zero of `f_l(-k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub k: C,
    pub multiplicity: u32,
    pub class: ZeroClass,
    pub res_f: f64,
    pub res_df: f64,
    pub res_d2f: Option<f64>,
    pub energy: C,
    /// Fourth-quadrant zero with `|Im k| >= Re k`.
    pub broad: bool,
}

/// Tolerances for counting and polishing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroOptions {
    pub newton_tol: f64,
    pub tol_simple: f64,
    pub double_tol: f64,
    pub d2_min: f64,
    /// Smallest `|f|` accepted on a box edge before the edge is moved.
    pub edge_guard: f64,
    pub nudge: f64,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        ZeroOptions {
            newton_tol: 1e-10,
            tol_simple: 1e-6,
            double_tol: 1e-9,
            d2_min: 1e-4,
            edge_guard: 1e-8,
            nudge: 1e-3,
        }
    }
}

pub fn classify(k: C) -> ZeroClass {
    let on_axis = k.re.abs() <= 1e-9 * k.norm().max(1.0);
    if k.im > 0.0 {
        ZeroClass::Bound
    } else if on_axis {
        ZeroClass::Antibound
    } else if k.re > 0.0 {
        ZeroClass::Resonance
    } else {
        ZeroClass::Mirror
    }
}

/// Contour moments `(1/2 pi i) oint k^m f'/f dk` for `m = 0, 1, 2`.
struct Moments {
    m: [C; 3],
    min_abs_f: f64,
}

fn moments(solver: &JostSolver, bx: &SearchBox, n: usize) -> Result<Moments> {
    let cs = bx.corners();
    let mut m = [C::new(0.0, 0.0); 3];
    let mut min_abs_f = f64::INFINITY;
    for e in 0..4 {
        let (a, b) = (cs[e], cs[(e + 1) % 4]);
        let dz = (b - a) / n as f64;
        for j in 0..=n {
            let z = a + dz * j as f64;
            let (f, df) = solver.jost_and_slope(z)?;
            min_abs_f = min_abs_f.min(f.norm());
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            let g = df / f * dz * w;
            m[0] += g;
            m[1] += g * z;
            m[2] += g * z * z;
        }
    }
    let s = C::new(0.0, 2.0 * PI);
    Ok(Moments { m: [m[0] / s, m[1] / s, m[2] / s], min_abs_f })
}

/// Winding count and moments, with the edge-guard nudge and doubling retries.
fn count_with_moments(solver: &JostSolver, bx: &SearchBox, opts: &ZeroOptions) -> Result<(u32, Moments, SearchBox)> {
    let mut bx = *bx;
    for _ in 0..4 {
        let mut n = bx.points_per_edge.max(8);
        let mut nudged = false;
        for _ in 0..4 {
            let mo = moments(solver, &bx, n)?;
            if mo.min_abs_f < opts.edge_guard {
                bx = bx.grown(opts.nudge * bx.diameter().max(1.0));
                nudged = true;
                break;
            }
            let w = mo.m[0].re;
            if (w - w.round()).abs() <= 0.05 && mo.m[0].im.abs() <= 0.05 && w.round() >= 0.0 {
                return Ok((w.round() as u32, mo, bx));
            }
            n *= 2;
        }
        if !nudged {
            let mo = moments(solver, &bx, n)?;
            return Err(Error::WindingNotInteger { value: mo.m[0].re });
        }
    }
    Err(Error::WindingNotInteger { value: f64::NAN })
}

/// Number of zeros of `f_l(-k)` inside the box, counted with multiplicity.
pub fn count_zeros_in_box(solver: &JostSolver, bx: &SearchBox) -> Result<u32> {
    let opts = ZeroOptions::default();
    Ok(count_with_moments(solver, bx, &opts)?.0)
}

/// Newton iteration `k <- k - f/f'` until `|f| < tol`.
pub fn newton_simple(solver: &JostSolver, k0: C, tol: f64) -> Result<C> {
    let mut k = k0;
    let mut best = (f64::INFINITY, k0);
    for _ in 0..60 {
        let (f, df) = solver.jost_and_slope(k)?;
        if f.norm() < best.0 {
            best = (f.norm(), k);
        }
        if f.norm() < 1e-3 * tol || df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        k -= step;
        if step.norm() <= 1e-15 * k.norm().max(1.0) {
            let f = solver.jost_and_slope(k)?.0;
            if f.norm() < best.0 {
                best = (f.norm(), k);
            }
            break;
        }
    }
    if best.0 > tol {
        return Err(Error::NewtonStalled { k: best.1, residual: best.0 });
    }
    Ok(best.1)
}

/// Critical point of `f` (zero of `f'`) by Newton on `f'` with the ODE route.
pub fn newton_critical(solver: &JostSolver, k0: C) -> Result<C> {
    let mut k = k0;
    for _ in 0..60 {
        let d = solver.jost_derivatives_ode(k, 2)?;
        if d.d2().norm() == 0.0 {
            break;
        }
        let step = d.d1() / d.d2();
        k -= step;
        if step.norm() <= 1e-15 * k.norm().max(1.0) {
            break;
        }
    }
    Ok(k)
}

/// Record for a polished zero, with residuals from the ODE route.
pub fn record(solver: &JostSolver, k: C, multiplicity: u32) -> Result<ZeroRecord> {
    let d = solver.jost_derivatives_ode(k, 2)?;
    let mut k = k;
    let class = classify(k);
    if matches!(class, ZeroClass::Bound | ZeroClass::Antibound) {
        k.re = 0.0;
    }
    Ok(ZeroRecord {
        k,
        multiplicity,
        class,
        res_f: d.f().norm(),
        res_df: d.d1().norm(),
        res_d2f: (multiplicity == 2).then(|| d.d2().norm()),
        energy: k * k,
        broad: class == ZeroClass::Resonance && k.re <= -k.im,
    })
}

/// Accepts `k` as a double zero only off the positive imaginary axis and
/// with `|f|, |f'| <= double_tol` and `|f''| >= d2_min`.
pub fn certify_double(solver: &JostSolver, k: C, opts: &ZeroOptions) -> Result<ZeroRecord> {
    if classify(k) == ZeroClass::Bound {
        return Err(Error::BoundDegeneracyImpossible(k));
    }
    let d = solver.jost_derivatives_ode(k, 2)?;
    if d.f().norm() > opts.double_tol || d.d1().norm() > opts.double_tol {
        return Err(Error::MultiplicityMismatch { expected: 2, found: 1 });
    }
    if d.d2().norm() < opts.d2_min {
        return Err(Error::SecondDerivativeVanishes(d.d2().norm()));
    }
    record(solver, k, 2)
}

/// Resolves a box holding exactly two zeros whose moment roots are close.
fn resolve_pair(solver: &JostSolver, seed: C, opts: &ZeroOptions) -> Result<Vec<ZeroRecord>> {
    let kc = newton_critical(solver, seed)?;
    let d = solver.jost_derivatives_ode(kc, 2)?;
    if d.f().norm() <= opts.double_tol && d.d1().norm() <= opts.double_tol {
        if d.d2().norm() < opts.d2_min {
            return Err(Error::SecondDerivativeVanishes(d.d2().norm()));
        }
        if classify(kc) == ZeroClass::Bound {
            return Err(Error::BoundDegeneracyImpossible(kc));
        }
        return Ok(vec![record(solver, kc, 2)?]);
    }
    let h = (-2.0 * d.f() / d.d2()).sqrt();
    let a = newton_simple(solver, kc + h, opts.newton_tol)?;
    let b = newton_simple(solver, kc - h, opts.newton_tol)?;
    Ok(vec![record(solver, a, 1)?, record(solver, b, 1)?])
}

fn simple_record(solver: &JostSolver, k: C, opts: &ZeroOptions) -> Result<ZeroRecord> {
    let rec = record(solver, k, 1)?;
    if rec.res_df <= opts.tol_simple {
        if rec.class == ZeroClass::Bound {
            return Err(Error::BoundDegeneracyImpossible(rec.k));
        }
        return Ok(ZeroRecord { multiplicity: 2, res_d2f: Some(solver.jost_derivatives_ode(k, 2)?.d2().norm()), ..rec });
    }
    Ok(rec)
}

fn search(
    solver: &JostSolver,
    bx: SearchBox,
    count: u32,
    mo: &Moments,
    depth: usize,
    opts: &ZeroOptions,
    out: &mut Vec<ZeroRecord>,
) -> Result<()> {
    match count {
        0 => return Ok(()),
        1 => {
            let seed = mo.m[1];
            let seed = if bx.contains(seed, 0.0) { seed } else { (bx.lo + bx.hi) / 2.0 };
            let k = newton_simple(solver, seed, opts.newton_tol)?;
            out.push(simple_record(solver, k, opts)?);
            return Ok(());
        }
        2 => {
            // roots of z^2 - s1 z + (s1^2 - s2)/2
            let s1 = mo.m[1];
            let p = (s1 * s1 - mo.m[2]) / 2.0;
            let disc = (s1 * s1 - 4.0 * p).sqrt();
            let sep = disc.norm();
            if sep < 1e-2 * bx.diameter() || depth >= bx.max_depth {
                let mut recs = resolve_pair(solver, s1 / 2.0, opts)?;
                out.append(&mut recs);
                return Ok(());
            }
        }
        _ => {}
    }
    if depth >= bx.max_depth {
        return Err(Error::DepthExhausted { lo: bx.lo, hi: bx.hi });
    }
    for t in [0.5137, 0.4711, 0.5523] {
        let (a, b) = bx.split(t);
        let ca = count_with_moments(solver, &a, opts);
        let cb = count_with_moments(solver, &b, opts);
        if let (Ok((na, ma, a)), Ok((nb, mb, b))) = (ca, cb) {
            if na + nb == count {
                search(solver, a, na, &ma, depth + 1, opts, out)?;
                search(solver, b, nb, &mb, depth + 1, opts, out)?;
                return Ok(());
            }
        }
    }
    Err(Error::DepthExhausted { lo: bx.lo, hi: bx.hi })
}

/// All zeros in `region`, polished and classified, sorted by `Re E`.
pub fn find_zeros(solver: &JostSolver, region: &SearchBox) -> Result<Vec<ZeroRecord>> {
    find_zeros_with(solver, region, &ZeroOptions::default())
}

pub fn find_zeros_with(solver: &JostSolver, region: &SearchBox, opts: &ZeroOptions) -> Result<Vec<ZeroRecord>> {
    let (count, mo, bx) = count_with_moments(solver, region, opts)?;
    let mut out = Vec::new();
    search(solver, bx, count, &mo, 0, opts, &mut out)?;
    let mut uniq: Vec<ZeroRecord> = Vec::new();
    for r in out {
        if !uniq.iter().any(|u| (u.k - r.k).norm() < 1e-8 * r.k.norm().max(1.0)) {
            uniq.push(r);
        }
    }
    uniq.sort_by(|a, b| a.energy.re.total_cmp(&b.energy.re).then(a.energy.im.total_cmp(&b.energy.im)));
    Ok(uniq)
}

/// `S_l(k) = f_l(k) / f_l(-k)`.
pub fn s_matrix(solver: &JostSolver, k: C) -> Result<C> {
    let den = solver.jost_unchecked(k)?;
    let num = solver.jost_unchecked(-k)?;
    if den.norm() <= 1e-13 * num.norm().max(1.0) {
        return Err(Error::AtPole(k));
    }
    Ok(num / den)
}

pub const CENSUS_HEADER: [&str; 8] = ["re_k", "im_k", "multiplicity", "class", "res_f", "res_df", "re_E", "im_E"];

/// Writes a zero census in the CSV layout `re_k,im_k,multiplicity,class,res_f,res_df,re_E,im_E`.
pub fn write_census<W: Write>(mut w: W, zeros: &[ZeroRecord]) -> Result<()> {
    crate::output::write_csv_preamble(&mut w)?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CENSUS_HEADER)?;
    for z in zeros {
        wr.write_record([
            fmt17(z.k.re),
            fmt17(z.k.im),
            z.multiplicity.to_string(),
            z.class.to_string(),
            fmt17(z.res_f),
            fmt17(z.res_df),
            fmt17(z.energy.re),
            fmt17(z.energy.im),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Census row as read back from CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CensusRow {
    pub re_k: f64,
    pub im_k: f64,
    pub multiplicity: u32,
    pub class: String,
    pub res_f: f64,
    pub res_df: f64,
    #[serde(rename = "re_E")]
    pub re_e: f64,
    #[serde(rename = "im_E")]
    pub im_e: f64,
}

pub fn read_census<R: std::io::Read>(r: R) -> Result<Vec<CensusRow>> {
    let body = crate::output::read_csv_preamble(r)?;
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CENSUS_HEADER {
        return Err(Error::Schema(format!("unexpected census header {:?}", headers)));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{closed_form_jost, PotentialSpec};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn solver(spec: &PotentialSpec, l: u32) -> JostSolver {
        JostSolver::with_defaults(spec, l).unwrap()
    }

    #[test]
    fn free_potential_has_no_zeros() {
        let s = solver(&PotentialSpec::free(1.0), 0);
        let bx = SearchBox::new((0.5, 4.5), (-1.2, -0.01));
        assert_eq!(count_zeros_in_box(&s, &bx).unwrap(), 0);
        assert!(find_zeros(&s, &bx).unwrap().is_empty());
    }

    #[test]
    fn one_shell_resonances_match_closed_form() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 4.0)], 1.5).unwrap();
        let s = solver(&spec, 0);
        let bx = SearchBox::new((0.5, 4.5), (-1.2, -0.01));
        let zs = find_zeros(&s, &bx).unwrap();
        assert_eq!(zs.len() as u32, count_zeros_in_box(&s, &bx).unwrap());
        assert!(!zs.is_empty());
        for z in &zs {
            assert_eq!(z.class, ZeroClass::Resonance);
            assert_eq!(z.multiplicity, 1);
            assert!(closed_form_jost(&spec, z.k).unwrap().norm() < 1e-8);
        }
        // mirror partners in the third quadrant
        let mirror = SearchBox::new((-4.5, -0.5), (-1.2, -0.01));
        let ms = find_zeros(&s, &mirror).unwrap();
        assert_eq!(ms.len(), zs.len());
        for z in &zs {
            let m = -z.k.conj();
            assert!(ms.iter().any(|x| (x.k - m).norm() < 1e-8 && x.class == ZeroClass::Mirror));
        }
    }

    #[test]
    fn square_well_bound_state() {
        let spec = PotentialSpec::square_well(-4.0, 1.0).unwrap();
        let s = solver(&spec, 0);
        let zs = find_zeros(&s, &SearchBox::new((-0.5, 0.5), (0.05, 3.0))).unwrap();
        assert_eq!(zs.len(), 1);
        let z = &zs[0];
        assert_eq!(z.class, ZeroClass::Bound);
        // k cot(k) = -kappa inside, k^2 + kappa^2 = 4
        let kappa = z.k.im;
        let q = (4.0 - kappa * kappa).sqrt();
        assert!((q / q.tan() + kappa).abs() < 1e-8);
    }

    #[test]
    fn s_matrix_unitary_on_real_axis() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 4.0)], 1.5).unwrap();
        let s = solver(&spec, 0);
        for j in 1..20 {
            let k = c(0.25 * j as f64, 0.0);
            assert!((s_matrix(&s, k).unwrap().norm() - 1.0).abs() < 1e-10);
        }
        let free = solver(&PotentialSpec::free(1.0), 0);
        assert!((s_matrix(&free, c(1.0, -0.5)).unwrap() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn s_matrix_at_a_zero_is_a_pole() {
        let spec = PotentialSpec::delta_shells(&[(1.0, 4.0)], 1.5).unwrap();
        let s = solver(&spec, 0);
        let zs = find_zeros(&s, &SearchBox::new((0.5, 4.5), (-1.2, -0.01))).unwrap();
        assert!(matches!(s_matrix(&s, zs[0].k), Err(Error::AtPole(_))));
    }

    #[test]
    fn census_round_trip() {
        let rec = ZeroRecord {
            k: c(1.5, -0.25),
            multiplicity: 1,
            class: ZeroClass::Resonance,
            res_f: 1e-12,
            res_df: 0.5,
            res_d2f: None,
            energy: c(1.5, -0.25) * c(1.5, -0.25),
            broad: false,
        };
        let mut buf = Vec::new();
        write_census(&mut buf, &[rec.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# schema=resonance/1\nre_k,im_k,multiplicity,class,res_f,res_df,re_E,im_E\n"));
        let rows = read_census(&buf[..]).unwrap();
        assert_eq!(rows[0].re_k, 1.5);
        assert_eq!(rows[0].class, "resonance");
    }
}
