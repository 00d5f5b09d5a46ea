//! `vit-lab`: spectra, pulse delays, synthetic scans, fits and the figure
//! recipes from the command line. Frequencies are MHz, lengths μm, times μs
//! and delays ns at this boundary; everything inside is SI with angular
//! frequencies.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use vit_core::model::Corrections;
use vit_core::recipes::{fitted_regime, full_corrections, FITTED_COUPLING_NODES};

pub mod commands;
pub mod config;
pub mod error;
pub mod sidecar;

pub use config::RunConfig;
pub use error::CliError;
pub use sidecar::ScanSidecar;

#[derive(Debug, Parser)]
#[command(name = "vit-lab", version, about = "Vacuum-induced transparency simulation and fitting")]
pub struct Cli {
    /// JSON run configuration; falls back to $VIT_LAB_CONFIG, then the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model transmission and cavity emission versus probe detuning.
    Spectrum(SpectrumArgs),
    /// Propagate a Gaussian pulse and report its delay.
    Pulse(PulseArgs),
    /// Shot-noise-limited synthetic scan plus a JSON sidecar.
    Synth(SynthArgs),
    /// Fit a scan or a table of cooperativities.
    Fit(FitArgs),
    /// Run a figure recipe end to end into a directory.
    Reproduce(ReproduceArgs),
}

/// Which model corrections to switch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionsChoice {
    /// Whatever the config's corrections section says.
    #[default]
    Config,
    /// Point model, every atom at an antinode.
    None,
    /// cos² coupling average only.
    StandingWave,
    /// Standing wave plus cavity jitter.
    Fitted,
    /// Fitted plus the Zeeman-shifted side transition.
    Full,
}

impl CorrectionsChoice {
    pub fn resolve(self, cfg: &RunConfig) -> Result<Corrections, CliError> {
        Ok(match self {
            CorrectionsChoice::Config => cfg.corrections()?,
            CorrectionsChoice::None => Corrections::ideal(),
            CorrectionsChoice::StandingWave => {
                Corrections::standing_wave(cfg.corrections.standing_wave_nodes.unwrap_or(FITTED_COUPLING_NODES))?
            }
            CorrectionsChoice::Fitted => fitted_regime()?,
            CorrectionsChoice::Full => full_corrections()?,
        })
    }
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Cavity detuning δ (MHz).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta_cavity: f64,
    /// First probe detuning (MHz).
    #[arg(long, default_value_t = -15.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Antinode cooperativity; defaults to ensemble.eta_eff.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub corrections: CorrectionsChoice,
    /// CSV output; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WidthChoice {
    /// Intensity FWHM.
    Fwhm,
    /// Full width at 1/e² of the intensity.
    E2,
}

#[derive(Debug, Args)]
pub struct PulseArgs {
    /// Pulse duration T_P (μs).
    #[arg(long)]
    pub duration_us: f64,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Optical depth; defaults to ensemble.od.
    #[arg(long)]
    pub od: Option<f64>,
    #[arg(long, value_enum, default_value_t = WidthChoice::Fwhm)]
    pub width: WidthChoice,
    #[arg(long, value_enum, default_value_t)]
    pub corrections: CorrectionsChoice,
    /// Write the transmitted field as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON output; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Cavity detunings (MHz), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    pub delta_cavity: Vec<f64>,
    #[arg(long, default_value_t = -15.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 0.25)]
    pub step: f64,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub corrections: CorrectionsChoice,
    /// Probe power (fW).
    #[arg(long, default_value_t = 220.0)]
    pub power_fw: f64,
    /// Integration time per point (μs).
    #[arg(long, default_value_t = 20_000.0)]
    pub dwell_us: f64,
    #[arg(long, default_value_t = 0.3)]
    pub efficiency_d1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub efficiency_d2: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Scan CSV; the sidecar goes to the same path with a .json extension.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModel {
    /// Lorentzian absorption line on one D1 block.
    Lorentzian,
    /// Full model on every block of a scan.
    Vit,
    /// Weighted line through an n_c, eta_eff, eta_eff_err table.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveChoice {
    Deviance,
    Chi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceChoice {
    Measured,
    Expected,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Scan CSV (lorentzian, vit) or points CSV (linear).
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub model: FitModel,
    /// Scan sidecar; defaults to the input path with a .json extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Free parameters of the vit model, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "eta_eff,od,scale_d2")]
    pub free: Vec<String>,
    #[arg(long, value_enum, default_value_t = ObjectiveChoice::Deviance)]
    pub objective: ObjectiveChoice,
    /// Fit the draws or the noiseless means of the scan.
    #[arg(long, value_enum, default_value_t = SourceChoice::Measured)]
    pub source: SourceChoice,
    /// Leave the D2 channel out of the vit fit.
    #[arg(long)]
    pub d1_only: bool,
    /// Cavity detuning of the block to use for the lorentzian fit (MHz);
    /// the first block when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub delta_cavity: Option<f64>,
    /// Linear fit keeps points with n_c above this.
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub threshold: f64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Noise seed of the fig4 recipe.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Spectrum(a) => commands::spectrum(&cfg, &a),
        Command::Pulse(a) => commands::pulse(&cfg, &a),
        Command::Synth(a) => commands::synth(&cfg, &a),
        Command::Fit(a) => commands::fit(&a),
        Command::Reproduce(a) => commands::reproduce(&cfg, &a),
    }
}
