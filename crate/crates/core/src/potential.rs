//! Finite-range radial potentials built from delta shells and constant steps.
//!
//! Units are fixed by hbar^2 / 2 mu = 1, so the radial equation reads
//! `u'' = (v(r) + l(l+1)/r^2 - k^2) u` and a shell of strength `lambda` at `a`
//! makes `u'` jump by `lambda * u(a)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub a: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub lo: f64,
    pub hi: f64,
    pub v: f64,
}

/// Reference to one tunable number inside a [`PotentialSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSlot {
    ShellStrength(usize),
    ShellRadius(usize),
    StepHeight(usize),
}

impl FromStr for ParamSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('.').collect();
        let bad = || Error::InvalidSpec(format!("unknown parameter slot '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let idx: usize = parts[1].parse().map_err(|_| bad())?;
        match (parts[0], parts[2]) {
            ("shells", "lambda") => Ok(ParamSlot::ShellStrength(idx)),
            ("shells", "a") => Ok(ParamSlot::ShellRadius(idx)),
            ("steps", "v") => Ok(ParamSlot::StepHeight(idx)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ParamSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSlot::ShellStrength(i) => write!(f, "shells.{i}.lambda"),
            ParamSlot::ShellRadius(i) => write!(f, "shells.{i}.a"),
            ParamSlot::StepHeight(i) => write!(f, "steps.{i}.v"),
        }
    }
}

/// A compactly supported radial potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(default)]
    pub shells: Vec<Shell>,
    #[serde(default)]
    pub steps: Vec<Step>,
    pub cutoff: f64,
    #[serde(default)]
    pub free_params: Vec<String>,
}

impl PotentialSpec {
    /// The zero potential with the given cutoff radius.
    pub fn free(cutoff: f64) -> Self {
        PotentialSpec {
            shells: Vec::new(),
            steps: Vec::new(),
            cutoff,
            free_params: Vec::new(),
        }
    }

    pub fn delta_shells(shells: &[(f64, f64)], cutoff: f64) -> Result<Self> {
        let spec = PotentialSpec {
            shells: shells.iter().map(|&(a, lambda)| Shell { a, lambda }).collect(),
            steps: Vec::new(),
            cutoff,
            free_params: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Constant `v` on `[0, width]`, zero outside.
    pub fn square_well(v: f64, width: f64) -> Result<Self> {
        let spec = PotentialSpec {
            shells: Vec::new(),
            steps: vec![Step { lo: 0.0, hi: width, v }],
            cutoff: width,
            free_params: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_free_params(mut self, slots: &[&str]) -> Result<Self> {
        self.free_params = slots.iter().map(|s| s.to_string()).collect();
        self.validate()?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PotentialSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return bad(format!("cutoff must be positive, got {}", self.cutoff));
        }
        let mut prev = 0.0;
        for (i, s) in self.shells.iter().enumerate() {
            if !s.a.is_finite() || !s.lambda.is_finite() {
                return bad(format!("shell {i} has a non-finite entry"));
            }
            if s.a <= prev || s.a >= self.cutoff {
                return bad(format!("shell radii must satisfy 0 < a_1 < ... < cutoff (shell {i})"));
            }
            prev = s.a;
        }
        let mut sorted: Vec<&Step> = self.steps.iter().collect();
        sorted.sort_by(|x, y| x.lo.total_cmp(&y.lo));
        let mut end = 0.0;
        for s in sorted {
            if !(s.lo.is_finite() && s.hi.is_finite() && s.v.is_finite()) {
                return bad("step has a non-finite entry".into());
            }
            if s.lo < end || s.hi <= s.lo || s.hi > self.cutoff {
                return bad(format!("step [{}, {}] overlaps or leaves [0, cutoff]", s.lo, s.hi));
            }
            end = s.hi;
        }
        for slot in &self.free_params {
            let slot: ParamSlot = slot.parse()?;
            self.check_slot(slot)?;
        }
        Ok(())
    }

    fn check_slot(&self, slot: ParamSlot) -> Result<()> {
        let ok = match slot {
            ParamSlot::ShellStrength(i) | ParamSlot::ShellRadius(i) => i < self.shells.len(),
            ParamSlot::StepHeight(i) => i < self.steps.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("parameter slot {slot} out of range")))
        }
    }

    pub fn slots(&self) -> Result<Vec<ParamSlot>> {
        self.free_params.iter().map(|s| s.parse()).collect()
    }

    pub fn get(&self, slot: ParamSlot) -> f64 {
        match slot {
            ParamSlot::ShellStrength(i) => self.shells[i].lambda,
            ParamSlot::ShellRadius(i) => self.shells[i].a,
            ParamSlot::StepHeight(i) => self.steps[i].v,
        }
    }

    pub fn set(&mut self, slot: ParamSlot, value: f64) {
        match slot {
            ParamSlot::ShellStrength(i) => self.shells[i].lambda = value,
            ParamSlot::ShellRadius(i) => self.shells[i].a = value,
            ParamSlot::StepHeight(i) => self.steps[i].v = value,
        }
    }

    /// Current values of the free parameters, in declaration order.
    pub fn params(&self) -> Result<Vec<f64>> {
        Ok(self.slots()?.into_iter().map(|s| self.get(s)).collect())
    }

    /// Copy of the spec with the free parameters replaced by `values`.
    pub fn with_params(&self, values: &[f64]) -> Result<Self> {
        let slots = self.slots()?;
        if slots.len() != values.len() {
            return Err(Error::InvalidSpec(format!(
                "expected {} parameter values, got {}",
                slots.len(),
                values.len()
            )));
        }
        let mut out = self.clone();
        for (slot, &v) in slots.into_iter().zip(values) {
            out.set(slot, v);
        }
        out.validate()?;
        Ok(out)
    }

    /// Maps lengths by `1/s` and strengths accordingly, so that the Jost
    /// function of the result at `s k` equals the original one at `k`.
    pub fn scaled(&self, s: f64) -> Self {
        PotentialSpec {
            shells: self
                .shells
                .iter()
                .map(|sh| Shell { a: sh.a / s, lambda: sh.lambda * s })
                .collect(),
            steps: self
                .steps
                .iter()
                .map(|st| Step { lo: st.lo / s, hi: st.hi / s, v: st.v * s * s })
                .collect(),
            cutoff: self.cutoff / s,
            free_params: self.free_params.clone(),
        }
    }

    pub fn is_free(&self) -> bool {
        self.shells.iter().all(|s| s.lambda == 0.0) && self.steps.iter().all(|s| s.v == 0.0)
    }

    /// All radii where the potential changes form, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.shells.iter().map(|s| s.a).collect();
        for s in &self.steps {
            pts.push(s.lo);
            pts.push(s.hi);
        }
        pts.push(self.cutoff);
        pts.retain(|&r| r > 0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Step height at `r`; the first step whose closed interval contains `r` wins.
    pub fn background(&self, r: f64) -> f64 {
        self.steps
            .iter()
            .find(|s| s.lo <= r && r <= s.hi)
            .map_or(0.0, |s| s.v)
    }

    /// Step height on the open interval `(lo, hi)`, taken at its midpoint.
    pub fn background_on(&self, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        self.steps
            .iter()
            .find(|s| s.lo < mid && mid < s.hi)
            .map_or(0.0, |s| s.v)
    }

    pub fn shell_strength_at(&self, r: f64) -> Option<f64> {
        self.shells.iter().find(|s| s.a == r).map(|s| s.lambda)
    }
}

/// Background step value at `r` and the shells sitting exactly at `r`.
pub fn evaluate_potential(spec: &PotentialSpec, r: f64) -> (f64, Vec<(f64, f64)>) {
    let deltas = spec
        .shells
        .iter()
        .filter(|s| s.a == r)
        .map(|s| (s.a, s.lambda))
        .collect();
    (spec.background(r), deltas)
}

/// Exact l = 0 Jost function `f_0(-k)` of a pure delta-shell potential.
///
/// The outgoing solution `e^{ikr}` is carried inward as a pair of plane-wave
/// amplitudes; each shell keeps `f` continuous and removes `lambda f(a)` from
/// the derivative.
pub fn closed_form_jost(spec: &PotentialSpec, k: Complex64) -> Result<Complex64> {
    if !spec.steps.is_empty() {
        return Err(Error::NotDeltaShellFamily);
    }
    if k == Complex64::new(0.0, 0.0) {
        return Err(Error::KIsZero);
    }
    // f = a e^{ikr} + b e^{-ikr} between shells; beta = b e^{-2ika} at the
    // current shell keeps both amplitudes bounded far up the imaginary axis
    let ik = Complex64::i() * k;
    let (mut a, mut beta) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let mut prev: Option<f64> = None;
    for shell in spec.shells.iter().rev() {
        if let Some(p) = prev {
            beta *= (2.0 * ik * (p - shell.a)).exp();
        }
        let g = shell.lambda / (2.0 * ik);
        let s = g * (a + beta);
        a -= s;
        beta += s;
        prev = Some(shell.a);
    }
    let first = prev.unwrap_or(0.0);
    Ok(a + beta * (2.0 * ik * first).exp())
}
