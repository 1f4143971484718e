//! Run configuration read from TOML. Every section is optional and unknown
//! keys are rejected; command-line flags take precedence over file values.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub equilibria: EquilibriaSection,
    #[serde(default)]
    pub phase_diagram: GridSection,
    #[serde(default)]
    pub energy: GridSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub poincare: PoincareSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub hysteresis: HysteresisSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<String>,
    pub tau0: Option<f64>,
    pub beta: Option<f64>,
    pub dim: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaSection {
    pub rho: Option<f64>,
    pub kappa_max: Option<f64>,
}

/// A grid of order-parameter values c.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareSection {
    pub kappa: Option<Vec<f64>>,
    pub kappa_max: Option<f64>,
    pub points: Option<usize>,
    pub mesh: Option<usize>,
    pub mesh_check: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub rho: Option<f64>,
    pub grid: Option<usize>,
    pub dt: Option<f64>,
    pub tend: Option<f64>,
    pub init: Option<String>,
    pub cadence: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HysteresisSection {
    pub period: Option<f64>,
    pub eps: Option<f64>,
    pub rho_mean: Option<f64>,
    pub rho_amp: Option<f64>,
    pub grid: Option<usize>,
    pub dt: Option<f64>,
    pub cycles: Option<u32>,
    pub sample_every: Option<usize>,
    pub threshold: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| UsageError(e.to_string()).into())
    }
}
