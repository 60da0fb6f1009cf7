//! JSON run configuration, one section per module.

use std::path::{Path, PathBuf};

use diffdesc::descriptors::{DescriptorKind, DescriptorParams};
use diffdesc::homotopy::{DiffusionSchedule, LandscapeSpec};
use diffdesc::matching::Score;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub descriptor: DescriptorParams,
    pub matching: MatchingConfig,
    pub homotopy: HomotopyConfig,
    pub io: IoConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomotopyConfig {
    pub schedule: DiffusionSchedule,
    pub landscape: LandscapeSpec,
    /// Toy instance JSON; the shipped instance when absent.
    pub problem: Option<PathBuf>,
    /// Start point for the first stage instead of its global grid minimum.
    pub start: Option<[f64; 2]>,
    pub tol: f64,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        Self {
            schedule: DiffusionSchedule::default(),
            landscape: LandscapeSpec::default(),
            problem: None,
            start: None,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Also write CSV versions of descriptors.
    pub write_csv: bool,
}

impl Config {
    /// Reads `path`, or returns defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate_descriptor(&self, kind: DescriptorKind) -> Result<(), CliError> {
        self.descriptor
            .validate_for(kind)
            .map_err(|e| CliError::Usage(format!("invalid config (descriptor section): {e}")))
    }

    pub fn validate_homotopy(&self) -> Result<(), CliError> {
        self.homotopy
            .landscape
            .validate()
            .map_err(|e| CliError::Usage(format!("invalid config: homotopy.landscape: {e}")))?;
        if !(self.homotopy.tol > 0.0) {
            return Err(CliError::Usage(format!(
                "invalid config: homotopy.tol must be positive, got {}",
                self.homotopy.tol
            )));
        }
        Ok(())
    }

    /// Writes the resolved configuration as `resolved_config.json` in `dir`.
    pub fn echo(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("config serialises");
        crate::write_file(&dir.join("resolved_config.json"), text.as_bytes())
    }
}
