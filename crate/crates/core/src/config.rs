//! Run configuration: the potential document plus grid, contour, regulator,
//! seed, tolerance and output settings.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::output::{check_schema, Cx};
use crate::potential::{PotentialSpec, Shell, Step};
use crate::spectral::{ContourSpec, TestFunction};

/// Rectangle `re[0] < Re k < re[1]`, `im[0] < Im k < im[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpSeed {
    pub p: Vec<f64>,
    pub k: Cx,
}

/// One Green's-function evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreensPoint {
    pub k: Cx,
    pub r: f64,
    pub rp: f64,
}

/// Configuration file contents. Every field is optional; present fields win
/// over command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    /// Path of a separate potential document, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shells: Vec<Shell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub free_params: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_sequence: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ep_seed: Option<EpSeed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_m: Option<Cx>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greens_points: Option<Vec<GreensPoint>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// EP result written by `ep`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if let Some(s) = &cfg.schema {
            check_schema(s)?;
        }
        Ok(cfg)
    }

    /// Reads the file and makes its relative paths absolute.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.potential, &mut cfg.fixture, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `self` replace those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        let mut tolerances = base.tolerances;
        tolerances.extend(self.tolerances);
        let inline = self.cutoff.is_some();
        RunConfig {
            schema: self.schema.or(base.schema),
            potential: if inline { None } else { self.potential.or(base.potential) },
            shells: if inline { self.shells } else { base.shells },
            steps: if inline { self.steps } else { base.steps },
            cutoff: self.cutoff.or(base.cutoff),
            free_params: if inline { self.free_params } else { base.free_params },
            l: self.l.or(base.l),
            grid: self.grid.or(base.grid),
            contour: self.contour.or(base.contour),
            nu_sequence: self.nu_sequence.or(base.nu_sequence),
            seed: self.seed.or(base.seed),
            region: self.region.or(base.region),
            field_points: self.field_points.or(base.field_points),
            ep_seed: self.ep_seed.or(base.ep_seed),
            x_m: self.x_m.or(base.x_m),
            test_function: self.test_function.or(base.test_function),
            times: self.times.or(base.times),
            greens_points: self.greens_points.or(base.greens_points),
            tolerances,
            output_dir: self.output_dir.or(base.output_dir),
            fixture: self.fixture.or(base.fixture),
        }
    }

    /// The potential, inline or from the referenced file.
    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        if let Some(cutoff) = self.cutoff {
            let spec = PotentialSpec {
                shells: self.shells.clone(),
                steps: self.steps.clone(),
                cutoff,
                free_params: self.free_params.clone(),
            };
            spec.validate()?;
            return Ok(spec);
        }
        match &self.potential {
            Some(p) => PotentialSpec::from_json(&std::fs::read_to_string(p)?),
            None => Err(Error::Config("no potential given".to_string())),
        }
    }

    pub fn l(&self) -> u32 {
        self.l.unwrap_or(0)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid.clone().unwrap_or_default()
    }

    pub fn contour(&self) -> ContourSpec {
        self.contour.clone().unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn fixture(&self) -> Result<PathBuf> {
        self.fixture.clone().ok_or_else(|| Error::Config("no fixture given".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_potential_and_overrides() {
        let cfg = RunConfig::from_json(r#"{"shells":[{"a":1.0,"lambda":4.0}],"cutoff":1.5,"l":1,"seed":3}"#).unwrap();
        let flags = RunConfig { l: Some(0), seed: Some(9), field_points: Some(5), ..Default::default() };
        let merged = cfg.over(flags);
        assert_eq!(merged.l(), 1);
        assert_eq!(merged.seed(), 3);
        assert_eq!(merged.field_points, Some(5));
        assert_eq!(merged.potential_spec().unwrap().shells.len(), 1);
    }

    #[test]
    fn unknown_fields_and_versions_are_rejected() {
        assert!(RunConfig::from_json(r#"{"cutoff":1.0,"bogus":1}"#).is_err());
        assert!(matches!(RunConfig::from_json(r#"{"schema":"resonance/99"}"#), Err(Error::Schema(_))));
        assert!(RunConfig::from_json("{").is_err());
    }
}
