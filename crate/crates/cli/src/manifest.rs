//! Run manifest: everything needed to repeat a run and check its outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::WrittenFile;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.toml";

pub const ERROR_BARS: &str = "standard error of the mean: sample standard deviation over sqrt(n_avg)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

/// Extremes over every trajectory of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
}

impl Default for Health {
    fn default() -> Self {
        Self {
            max_trace_drift: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl Health {
    pub fn absorb(&mut self, max_trace_drift: f64, min_eigenvalue: f64) {
        self.max_trace_drift = self.max_trace_drift.max(max_trace_drift);
        self.min_eigenvalue = self.min_eigenvalue.min(min_eigenvalue);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

impl From<&WrittenFile> for OutputEntry {
    fn from(f: &WrittenFile) -> Self {
        Self {
            path: f.name.clone(),
            sha256: f.sha256.clone(),
            rows: f.rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Informational; results do not depend on it.
    pub workers: usize,
    pub error_bars: String,
    pub health: Health,
    pub phases: Vec<Phase>,
    pub outputs: Vec<OutputEntry>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("invalid manifest: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest {
            software: "qbattery".into(),
            version: "0.1.0".into(),
            command: "run".into(),
            seed: 17,
            workers: 8,
            error_bars: ERROR_BARS.into(),
            health: Health {
                max_trace_drift: 1e-9,
                min_eigenvalue: -3e-11,
            },
            phases: vec![Phase {
                name: "decay_curve".into(),
                seconds: 1.5,
            }],
            outputs: vec![OutputEntry {
                path: "a.csv".into(),
                sha256: "00".into(),
                rows: 3,
            }],
            config: RunConfig::default(),
        };
        let back: RunManifest = toml::from_str(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }
}
