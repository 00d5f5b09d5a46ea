//! JSON written next to a synthetic scan: everything needed to regenerate
//! it and to normalize the counts when fitting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::CorrectionsChoice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSidecar {
    pub eta_eff: f64,
    pub corrections: CorrectionsChoice,
    #[serde(rename = "delta_cavity_MHz")]
    pub delta_cavity_mhz: Vec<f64>,
    #[serde(rename = "probe_from_MHz")]
    pub probe_from_mhz: f64,
    #[serde(rename = "probe_to_MHz")]
    pub probe_to_mhz: f64,
    #[serde(rename = "probe_step_MHz")]
    pub probe_step_mhz: f64,
    pub power_fw: f64,
    /// Probe photons per second.
    pub photon_flux: f64,
    pub dwell_us: f64,
    pub efficiency_d1: f64,
    pub efficiency_d2: f64,
    pub seed: u64,
    /// Expected D1 counts for unit transmission.
    pub norm_d1: f64,
    /// Expected D2 counts for unit emission probability.
    pub norm_d2: f64,
    pub config: RunConfig,
}

impl ScanSidecar {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: ScanSidecar = serde_json::from_str(text)?;
        s.config.validate()?;
        for (name, v) in [("norm_d1", s.norm_d1), ("norm_d2", s.norm_d2), ("eta_eff", s.eta_eff)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("sidecar {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read sidecar {}: {e}", path.display())))?;
        ScanSidecar::parse(&text)
    }
}

/// `scan.csv` → `scan.json`.
pub fn sidecar_path(scan: &Path) -> PathBuf {
    scan.with_extension("json")
}
