//! Run configuration: one JSON document, MHz / μm / μs at this boundary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vit_core::model::Corrections;
use vit_core::physics::{cooperativity_geometric, CavityGeometry, PhysicalConfig};
use vit_core::spatial::{CouplingDistribution, Jitter, SideChannel};
use vit_core::units::{angular_to_mhz, m_to_um, mhz_to_angular, um_to_m};

use crate::error::CliError;

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "VIT_LAB_CONFIG";

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    #[serde(rename = "gamma_MHz")]
    pub gamma_mhz: f64,
    pub wavelength_um: f64,
    pub f_eg: f64,
    pub f_ef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    #[serde(rename = "kappa_MHz")]
    pub kappa_mhz: f64,
    pub finesse: f64,
    pub waist_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub od: f64,
    pub length_um: f64,
    /// Antinode effective cooperativity used when a command needs one.
    pub eta_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideChannelSection {
    pub weight: f64,
    #[serde(rename = "zeeman_shift_MHz")]
    pub zeeman_shift_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSection {
    #[serde(rename = "fwhm_MHz")]
    pub fwhm_mhz: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionsSection {
    pub standing_wave_nodes: Option<usize>,
    pub side_channel: Option<SideChannelSection>,
    pub jitter: Option<JitterSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub cavity: CavitySection,
    pub ensemble: EnsembleSection,
    pub corrections: CorrectionsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse(DEFAULT_CONFIG).expect("shipped default config is valid")
    }
}

impl RunConfig {
    /// Parse and validate a JSON document.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `path` if given, else the file named by `VIT_LAB_CONFIG`, else the
    /// shipped defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let chosen: Option<PathBuf> = match path {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        };
        match chosen {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                RunConfig::parse(&text).map_err(|e| match e {
                    CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
            None => RunConfig::parse(DEFAULT_CONFIG),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.physical().validate()?;
        self.geometry().validate()?;
        if !(self.ensemble.eta_eff.is_finite() && self.ensemble.eta_eff >= 0.0) {
            return Err(CliError::Config(format!("ensemble.eta_eff must be >= 0, got {}", self.ensemble.eta_eff)));
        }
        self.corrections()?;
        Ok(())
    }

    pub fn physical(&self) -> PhysicalConfig {
        PhysicalConfig {
            gamma: mhz_to_angular(self.atom.gamma_mhz),
            kappa: mhz_to_angular(self.cavity.kappa_mhz),
            lambda: um_to_m(self.atom.wavelength_um),
            od: self.ensemble.od,
            ensemble_length: um_to_m(self.ensemble.length_um),
            f_probe: self.atom.f_ef,
            f_cavity: self.atom.f_eg,
        }
    }

    /// Inverse of [`RunConfig::physical`] for the fields it covers.
    pub fn with_physical(&self, p: &PhysicalConfig) -> RunConfig {
        let mut out = self.clone();
        out.atom.gamma_mhz = angular_to_mhz(p.gamma);
        out.cavity.kappa_mhz = angular_to_mhz(p.kappa);
        out.atom.wavelength_um = m_to_um(p.lambda);
        out.ensemble.od = p.od;
        out.ensemble.length_um = m_to_um(p.ensemble_length);
        out.atom.f_ef = p.f_probe;
        out.atom.f_eg = p.f_cavity;
        out
    }

    pub fn geometry(&self) -> CavityGeometry {
        CavityGeometry {
            finesse: self.cavity.finesse,
            waist: um_to_m(self.cavity.waist_um),
            lambda: um_to_m(self.atom.wavelength_um),
        }
    }

    /// Antinode single-atom cooperativity from finesse and waist.
    pub fn eta_geometric(&self) -> Result<f64, CliError> {
        Ok(cooperativity_geometric(&self.geometry())?)
    }

    pub fn corrections(&self) -> Result<Corrections, CliError> {
        let c = &self.corrections;
        let coupling = match c.standing_wave_nodes {
            Some(n) => Some(CouplingDistribution::standing_wave(1.0, n)?),
            None => None,
        };
        let side_channel = c
            .side_channel
            .as_ref()
            .map(|s| SideChannel { weight: s.weight, zeeman_shift: mhz_to_angular(s.zeeman_shift_mhz) });
        if let Some(s) = &side_channel {
            s.validate()?;
        }
        let jitter = c.jitter.as_ref().map(|j| Jitter { fwhm: mhz_to_angular(j.fwhm_mhz), nodes: j.nodes });
        if let Some(j) = &jitter {
            j.quadrature()?;
        }
        Ok(Corrections { coupling, side_channel, jitter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_match_core_defaults() {
        let cfg = RunConfig::default();
        let p = cfg.physical();
        let d = PhysicalConfig::default();
        for (a, b) in
            [(p.gamma, d.gamma), (p.kappa, d.kappa), (p.lambda, d.lambda), (p.ensemble_length, d.ensemble_length)]
        {
            assert!((a - b).abs() <= 1e-12 * b);
        }
        assert_eq!((p.od, p.f_probe, p.f_cavity), (d.od, d.f_probe, d.f_cavity));
        assert!((cfg.eta_geometric().unwrap() - 7.2).abs() < 0.1);
    }

    #[test]
    fn unit_round_trip() {
        let cfg = RunConfig::default();
        let back = cfg.with_physical(&cfg.physical());
        assert!((back.atom.gamma_mhz - 5.2).abs() < 1e-12);
        assert!((back.cavity.kappa_mhz - 0.173).abs() < 1e-12);
        assert!((back.atom.wavelength_um - 0.852).abs() < 1e-12);
        assert!((back.ensemble.length_um - 20.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DEFAULT_CONFIG.replace("\"od\": 0.4", "\"od\": 0.4, \"odd\": 1");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let text = DEFAULT_CONFIG.replace("\"kappa_MHz\": 0.173", "\"kappa_MHz\": -1");
        assert!(RunConfig::parse(&text).is_err());
        let text = DEFAULT_CONFIG.replace("\"nodes\": 21", "\"nodes\": 0");
        assert!(RunConfig::parse(&text).is_err());
        assert!(RunConfig::parse("{}").is_err());
        assert!(RunConfig::parse("not json").is_err());
    }
}
