use std::path::Path;
use std::str::FromStr;

use lacunary::cz::{CzConfig, ExceptionalOptions, LogBase};
use lacunary::gen::{FunctionParams, SetParams};
use lacunary::spherical::{AverageOptions, Boundary, CapSpec, TestFunction};
use lacunary::{Rational, RootRegion};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every knob of a run. Together with the input files it fixes every output byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dim: usize,
    pub root_scale: i32,
    pub base_scale: i32,
    /// Instances drawn when a command has no input file.
    pub count: usize,
    pub set: SetParams,
    pub function: FunctionParams,
    pub alpha: f64,
    /// Exact rationals such as `"1"` or `"3/2"`.
    pub whitney_a: String,
    pub whitney_b: String,
    pub whitney_refine: u32,
    pub degree_cap: usize,
    pub max_chain: usize,
    pub log_base: LogBase,
    /// Defaults to the base scale.
    pub approx_scale: Option<i32>,
    pub allow_clip: bool,
    pub k_extend: i32,
    pub kmin: i32,
    pub kmax: i32,
    pub quad_points: Option<usize>,
    pub boundary: Boundary,
    pub cutoff: Option<CapSpec>,
    pub alpha_sweep: Vec<f64>,
    /// `None` runs the indicator, Gaussian and annulus suite.
    pub test_function: Option<TestFunction>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cz = CzConfig::default();
        RunConfig {
            seed: 0,
            dim: 2,
            root_scale: 0,
            base_scale: -6,
            count: 1,
            set: SetParams::default(),
            function: FunctionParams::default(),
            alpha: 1.0,
            whitney_a: cz.whitney_a.to_string(),
            whitney_b: cz.whitney_b.to_string(),
            whitney_refine: cz.whitney_refine,
            degree_cap: cz.degree_cap,
            max_chain: cz.max_chain,
            log_base: cz.log_base,
            approx_scale: None,
            allow_clip: true,
            k_extend: 0,
            kmin: -4,
            kmax: -2,
            quad_points: None,
            boundary: Boundary::Zero,
            cutoff: None,
            alpha_sweep: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0],
            test_function: None,
        }
    }
}

fn rational(name: &str, s: &str) -> Result<Rational, CliError> {
    Rational::from_str(s.trim()).map_err(|_| CliError::config(format!("{name} must be a rational such as 3/2, got {s:?}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn region(&self) -> Result<RootRegion, CliError> {
        Ok(RootRegion::new(self.dim, self.root_scale, self.base_scale)?)
    }

    pub fn cz(&self) -> Result<CzConfig, CliError> {
        Ok(CzConfig {
            whitney_a: rational("whitney_a", &self.whitney_a)?,
            whitney_b: rational("whitney_b", &self.whitney_b)?,
            whitney_refine: self.whitney_refine,
            degree_cap: self.degree_cap,
            max_chain: self.max_chain,
            log_base: self.log_base,
            ..CzConfig::default()
        })
    }

    pub fn exceptional(&self, region: &RootRegion) -> ExceptionalOptions {
        ExceptionalOptions {
            approx_scale: self.approx_scale.unwrap_or(region.base_scale),
            allow_clip: self.allow_clip,
            k_extend: self.k_extend,
        }
    }

    pub fn average(&self) -> AverageOptions {
        AverageOptions {
            quad_points: self.quad_points,
            cutoff: self.cutoff.clone(),
            boundary: self.boundary,
        }
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        if self.alpha > 0.0 && self.alpha.is_finite() {
            Ok(self.alpha)
        } else {
            Err(CliError::config(format!("alpha must be positive, got {}", self.alpha)))
        }
    }
}

pub fn parse_log_base(s: &str) -> Result<LogBase, String> {
    LogBase::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_boundary(s: &str) -> Result<Boundary, String> {
    match s {
        "zero" => Ok(Boundary::Zero),
        "reject" => Ok(Boundary::Reject),
        other => Err(format!("boundary must be zero or reject, got {other:?}")),
    }
}

/// One positive threshold.
pub fn parse_alpha(t: &str) -> Result<f64, String> {
    let v: f64 = t.trim().parse().map_err(|_| format!("bad alpha {t:?}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("alpha {v} must be positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_json() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(back.cz().is_ok());
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 9, "whitney_a": "3/2"}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.cz().unwrap().whitney_a, Rational::new(3.into(), 2.into()));
        assert_eq!(c.base_scale, RunConfig::default().base_scale);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 9}"#).is_err());
    }

    #[test]
    fn thresholds_must_be_positive() {
        assert_eq!(parse_alpha(" 0.5"), Ok(0.5));
        assert!(parse_alpha("0").is_err());
        assert!(parse_alpha("inf").is_err());
        assert!(parse_alpha("x").is_err());
        let bad = RunConfig {
            alpha: -1.0,
            ..RunConfig::default()
        };
        assert!(bad.alpha().is_err());
    }
}
