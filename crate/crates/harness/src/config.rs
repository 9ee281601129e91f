//! TOML file schemas of the `riswpt` subcommands.

use std::path::{Path, PathBuf};

use riswpt_core::channel::ScenarioConfig;
use riswpt_core::oracle::{GridSpec, QmmOptions};
use riswpt_core::SolverConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::sweep::{RisMode, SweepKind, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", .path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", .path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_owned(), source })
}

fn optimized() -> RisMode {
    RisMode::Optimized
}

/// A single solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveFile {
    #[serde(default = "optimized")]
    pub ris_mode: RisMode,
    /// Every user must receive `gamma` times the estimated max-min power.
    /// Zero skips the estimate.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub qmm: QmmOptions,
}

impl SolveFile {
    /// One-point, one-seed sweep running the same solve.
    pub fn to_sweep(&self) -> SweepSpec {
        let (kind, value) = if self.gamma > 0.0 {
            (SweepKind::Gamma, self.gamma)
        } else {
            (SweepKind::Antennas, self.scenario.antennas as f64)
        };
        SweepSpec {
            kind,
            values: vec![value],
            ris_mode: self.ris_mode,
            num_seeds: 1,
            scenario: self.scenario.clone(),
            solver: self.solver.clone(),
            qmm: self.qmm.clone(),
        }
    }
}

/// Exhaustive phase-grid search on a small scenario, compared with the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
}
