//! Config lookup and the simulation config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use secr_core::simulate::SexReveal;
use secr_core::study::{DesignConfig, ScenarioSet};

use crate::commands::CliError;

/// Colon-separated directories searched for relative config paths that do
/// not exist in the working directory.
pub const CONFIG_PATH_VAR: &str = "SECR_CONFIG_PATH";

pub fn resolve(path: &Path) -> Result<PathBuf, CliError> {
    if path.is_absolute() || path.exists() {
        return Ok(path.to_path_buf());
    }
    if let Some(dirs) = std::env::var_os(CONFIG_PATH_VAR) {
        for dir in std::env::split_paths(&dirs) {
            let candidate = dir.join(path);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
    }
    Err(CliError::Data(format!(
        "config `{}` not found in the working directory or {CONFIG_PATH_VAR}",
        path.display()
    )))
}

pub fn read(path: &Path) -> Result<(PathBuf, String), CliError> {
    let path = resolve(path)?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok((path, text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario_set: ScenarioSet,
    pub scenario: u32,
    /// Overrides the scenario's augmentation bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub sex_reveal: SexReveal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub design: DesignConfig,
}

impl SimulateConfig {
    pub fn preset(set: ScenarioSet, scenario: u32) -> Self {
        SimulateConfig {
            scenario_set: set,
            scenario,
            m: None,
            sex_reveal: SexReveal::AllCaptured,
            seed: None,
            design: match set {
                ScenarioSet::Scaled => DesignConfig::scaled(),
                ScenarioSet::Standard => DesignConfig::standard(),
            },
        }
    }
}
