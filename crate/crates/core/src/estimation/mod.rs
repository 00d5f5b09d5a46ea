//! Parameter estimation: Lorentzian linewidths, joint VIT spectrum fits,
//! weighted straight lines and transparency with error propagation.

pub mod linear;
pub mod lm;
pub mod lorentzian;
pub mod transparency;
pub mod vit;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VitError};
use crate::synth::ScanBlock;

pub use linear::{fit_linear_weighted, ratio_with_error, LinearFit};
pub use lm::{LmOptions, LmOutcome, LmParameter};
pub use lorentzian::fit_lorentzian;
pub use transparency::{extract_transparency, transparency_from_fit, transparency_with_error};
pub use vit::{fit_vit_spectra, Objective, VitDataset, VitFitSpec, VitParam, VitParams};

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub error: f64,
}

impl Measured {
    pub fn new(value: f64, error: f64) -> Self {
        Measured { value, error }
    }

    pub fn exact(value: f64) -> Self {
        Measured { value, error: 0.0 }
    }

    /// True if `truth` lies within `k` standard errors.
    pub fn covers(&self, truth: f64, k: f64) -> bool {
        (self.value - truth).abs() <= k * self.error
    }
}

/// Normalized detector signal versus probe detuning (rad/s), with 1σ
/// errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub delta_probe: Vec<f64>,
    pub value: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Expected counts per unit signal, when the values came from counts.
    #[serde(default)]
    pub counts_norm: Option<f64>,
}

impl Spectrum {
    pub fn new(delta_probe: Vec<f64>, value: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if delta_probe.len() != value.len() || value.len() != sigma.len() {
            return Err(VitError::domain("spectrum columns differ in length"));
        }
        if delta_probe.iter().chain(&value).any(|v| !v.is_finite()) {
            return Err(VitError::domain("spectrum contains non-finite values"));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(VitError::domain("spectrum uncertainties must be > 0"));
        }
        Ok(Spectrum { delta_probe, value, sigma, counts_norm: None })
    }

    /// counts/norm with Poisson errors √max(counts, 1)/norm.
    pub fn from_counts(delta_probe: Vec<f64>, counts: &[f64], norm: f64) -> Result<Self> {
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(VitError::domain(format!("count normalization must be > 0, got {norm}")));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(VitError::domain("counts must be finite and >= 0"));
        }
        let value = counts.iter().map(|c| c / norm).collect();
        let sigma = counts.iter().map(|c| c.max(1.0).sqrt() / norm).collect();
        Ok(Spectrum { counts_norm: Some(norm), ..Spectrum::new(delta_probe, value, sigma)? })
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Index of the sample closest to `delta`.
    pub fn nearest(&self, delta: f64) -> Option<usize> {
        (0..self.len())
            .min_by(|&a, &b| (self.delta_probe[a] - delta).abs().total_cmp(&(self.delta_probe[b] - delta).abs()))
    }
}

/// Which numbers of a scan to use as data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountSource {
    /// The Poisson draws.
    Measured,
    /// The noiseless means, still weighted with Poisson errors.
    Expected,
}

/// Turn scan blocks into fit datasets, normalizing D1 by `norm_d1` and D2
/// by `norm_d2` (pass `None` to leave D2 out).
pub fn datasets_from_scan(
    blocks: &[ScanBlock],
    norm_d1: f64,
    norm_d2: Option<f64>,
    source: CountSource,
) -> Result<Vec<VitDataset>> {
    blocks
        .iter()
        .map(|b| {
            let delta: Vec<f64> = b.records.iter().map(|r| r.delta_probe).collect();
            let pick = |counts: u64, expected: f64| match source {
                CountSource::Measured => counts as f64,
                CountSource::Expected => expected,
            };
            let d1: Vec<f64> = b.records.iter().map(|r| pick(r.counts_d1, r.expected_d1)).collect();
            let d2 = match norm_d2 {
                Some(norm) => {
                    let c: Vec<f64> = b.records.iter().map(|r| pick(r.counts_d2, r.expected_d2)).collect();
                    Some(Spectrum::from_counts(delta.clone(), &c, norm)?)
                }
                None => None,
            };
            Ok(VitDataset { delta_cavity: b.delta_cavity, d1: Spectrum::from_counts(delta, &d1, norm_d1)?, d2 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    /// Covariance of `params`, in the same order.
    pub covariance: Vec<Vec<f64>>,
    /// Sum of squared residuals: weighted χ², or the Poisson deviance.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub points: usize,
}

impl FitResult {
    pub(crate) fn from_outcome(specs: &[LmParameter], out: &LmOutcome) -> Result<Self> {
        if !out.converged {
            return Err(VitError::NonConvergence(format!(
                "no convergence after {} iterations (cost {})",
                out.iterations, out.cost
            )));
        }
        let n = specs.len();
        let params = specs
            .iter()
            .enumerate()
            .map(|(j, s)| FitParam {
                name: s.name.clone(),
                value: out.params[j],
                error: out.covariance[(j, j)].max(0.0).sqrt(),
            })
            .collect();
        let covariance = (0..n).map(|i| (0..n).map(|j| out.covariance[(i, j)]).collect()).collect();
        Ok(FitResult {
            params,
            covariance,
            residual_norm: out.cost,
            converged: out.converged,
            iterations: out.iterations,
            points: out.residual_count,
        })
    }

    pub fn get(&self, name: &str) -> Option<Measured> {
        self.params.iter().find(|p| p.name == name).map(|p| Measured::new(p.value, p.error))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Reduced χ², residual_norm / (points − parameters).
    pub fn reduced_chi2(&self) -> f64 {
        let dof = self.points.saturating_sub(self.params.len()).max(1);
        self.residual_norm / dof as f64
    }
}
