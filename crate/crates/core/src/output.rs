//! Serialization helpers shared by the JSON and CSV writers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex number written as `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

impl From<Cx> for Complex64 {
    fn from(z: Cx) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Float with 17 significant digits, exact on round trip.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Current version tag of every JSON and CSV artifact.
pub const SCHEMA: &str = "resonance/1";

/// Rejects documents written by an unknown schema version.
pub fn check_schema(found: &str) -> crate::Result<()> {
    if found == SCHEMA {
        Ok(())
    } else {
        Err(crate::Error::Schema(found.to_string()))
    }
}

/// First line of every CSV artifact.
pub fn csv_preamble() -> String {
    format!("# schema={SCHEMA}")
}

pub fn write_csv_preamble<W: std::io::Write>(w: &mut W) -> crate::Result<()> {
    writeln!(w, "{}", csv_preamble())?;
    Ok(())
}

/// Reads the whole CSV text, checks its schema line and returns the rest.
pub fn read_csv_preamble<R: std::io::Read>(mut r: R) -> crate::Result<String> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    match first.trim().strip_prefix("# schema=") {
        Some(v) => {
            check_schema(v)?;
            Ok(rest.to_string())
        }
        None => Err(crate::Error::Schema("missing schema line".to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn unknown_schema_is_rejected() {
        assert!(check_schema(SCHEMA).is_ok());
        assert!(check_schema("resonance/0").is_err());
    }
}
