//! JSON run configuration.
//!
//! One document per run with the top-level keys `spec_version`, `spring`,
//! `econ`, `fit` and `integrate`. Unknown keys are rejected. Command-line
//! flags override values read from the file, which override the defaults.

use logperiodic::econ::EconSpec;
use logperiodic::fitter::Envelope;
use logperiodic::oscillator::SpringParams;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spring: Option<SpringParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub econ: Option<EconSpec>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub integrate: IntegrateSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    #[default]
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassSchedule {
    /// `m = m0·t/t0`, `k = k0·t0/t`.
    #[default]
    LinearGrowth,
    /// `m = m0`, `k = k0`.
    Constant,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateSection {
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<Spacing>,
    pub tol: Option<f64>,
    /// `[x, v]` or `[P, S]` at `t_start`.
    pub initial: Option<[f64; 2]>,
    pub mass_schedule: Option<MassSchedule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub envelope: Option<Envelope>,
    pub fit_shift: Option<bool>,
    pub t_ref: Option<f64>,
    pub column: Option<String>,
    pub grid_points: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
        if cfg.spec_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported spec_version {} (expected {SCHEMA_VERSION})",
                cfg.spec_version
            ));
        }
        Ok(cfg)
    }
}
