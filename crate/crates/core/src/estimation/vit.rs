//! Joint fit of transmission (D1) and cavity-emission (D2) spectra taken at
//! several cavity detunings.
//!
//! The model for a dataset at nominal cavity detuning δ is
//!
//! ```text
//! D1(Δ) = T(η, OD; Δ + Δ_off, δ + δ_off)
//! D2(Δ) = s₂ · P_c(η, OD; Δ + Δ_off, δ + δ_off)
//! ```
//!
//! with the corrections carried by the [`VitModel`]. Offsets enter the fit
//! in MHz so that difference steps are well scaled.

use serde::{Deserialize, Serialize};

use super::lm::{minimize, LmOptions, LmParameter};
use super::{FitResult, Spectrum};
use crate::error::{Result, VitError};
use crate::model::VitModel;
use crate::physics::Detunings;
use crate::units::{angular_to_mhz, mhz_to_angular};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VitParam {
    EtaEff,
    Od,
    ScaleD2,
    DeltaOffset,
    ProbeOffset,
}

impl VitParam {
    pub const ALL: [VitParam; 5] =
        [VitParam::EtaEff, VitParam::Od, VitParam::ScaleD2, VitParam::DeltaOffset, VitParam::ProbeOffset];

    /// Name used in fit results; offsets are reported in MHz.
    pub fn name(self) -> &'static str {
        match self {
            VitParam::EtaEff => "eta_eff",
            VitParam::Od => "od",
            VitParam::ScaleD2 => "scale_d2",
            VitParam::DeltaOffset => "delta_offset_MHz",
            VitParam::ProbeOffset => "probe_offset_MHz",
        }
    }

    pub fn from_name(name: &str) -> Option<VitParam> {
        let bare = name.trim_end_matches("_MHz");
        VitParam::ALL.into_iter().find(|p| p.name() == name || p.name().trim_end_matches("_MHz") == bare)
    }

    pub(crate) fn nonnegative(self) -> bool {
        matches!(self, VitParam::EtaEff | VitParam::Od | VitParam::ScaleD2)
    }
}

/// Full parameter set. Offsets are stored in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitParams {
    pub eta_eff: f64,
    pub od: f64,
    pub scale_d2: f64,
    pub delta_offset: f64,
    pub probe_offset: f64,
}

impl VitParams {
    /// Value in fit units.
    pub fn get(&self, p: VitParam) -> f64 {
        match p {
            VitParam::EtaEff => self.eta_eff,
            VitParam::Od => self.od,
            VitParam::ScaleD2 => self.scale_d2,
            VitParam::DeltaOffset => angular_to_mhz(self.delta_offset),
            VitParam::ProbeOffset => angular_to_mhz(self.probe_offset),
        }
    }

    pub fn set(&mut self, p: VitParam, value: f64) {
        match p {
            VitParam::EtaEff => self.eta_eff = value,
            VitParam::Od => self.od = value,
            VitParam::ScaleD2 => self.scale_d2 = value,
            VitParam::DeltaOffset => self.delta_offset = mhz_to_angular(value),
            VitParam::ProbeOffset => self.probe_offset = mhz_to_angular(value),
        }
    }
}

/// What the fit minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Poisson deviance for spectra built from counts, χ² with the stored
    /// errors otherwise.
    #[default]
    PoissonDeviance,
    /// χ² with σ = √max(counts, 1) throughout.
    DataVariance,
}

/// Signed square root of the Poisson deviance of `n` counts against mean
/// `m`; reduces to (m − n)/√n for large counts.
pub fn deviance_residual(m: f64, n: f64) -> f64 {
    let m = m.max(1e-300);
    let d = if n > 0.0 { m - n + n * (n / m).ln() } else { m };
    (m - n).signum() * (2.0 * d.max(0.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitDataset {
    /// Nominal cavity detuning (rad/s).
    pub delta_cavity: f64,
    pub d1: Spectrum,
    pub d2: Option<Spectrum>,
}

#[derive(Debug, Clone)]
pub struct VitFitSpec {
    pub model: VitModel,
    /// Starting values for free parameters and fixed values for the rest.
    pub start: VitParams,
    pub free: Vec<VitParam>,
    /// Replace the starting values of free η, OD and s₂ by data-driven
    /// guesses before iterating.
    pub auto_init: bool,
    pub objective: Objective,
    pub options: LmOptions,
}

impl VitFitSpec {
    /// OD starts from the model's configuration, η from 1, s₂ from 1.
    pub fn new(model: VitModel, free: &[VitParam]) -> Self {
        let start =
            VitParams { eta_eff: 1.0, od: model.config().od, scale_d2: 1.0, delta_offset: 0.0, probe_offset: 0.0 };
        VitFitSpec {
            model,
            start,
            free: free.to_vec(),
            auto_init: true,
            objective: Objective::default(),
            options: LmOptions::default(),
        }
    }

    /// Parameters with the fitted values of `fit` filled in.
    pub fn params_from(&self, fit: &FitResult) -> VitParams {
        let mut p = self.start;
        for fp in &fit.params {
            if let Some(which) = VitParam::from_name(&fp.name) {
                p.set(which, fp.value);
            }
        }
        p
    }
}

/// Model prediction (D1, D2) at one probe detuning of a dataset.
pub fn predict(model: &VitModel, p: &VitParams, delta_cavity: f64, delta_probe: f64) -> Result<(f64, f64)> {
    let det = Detunings::new(delta_probe + p.probe_offset, delta_cavity + p.delta_offset);
    let (t, e) = model.spectrum_point(p.eta_eff, &det)?;
    Ok((t, p.scale_d2 * e))
}

fn residual(s: &Spectrum, i: usize, model_value: f64, objective: Objective) -> f64 {
    match (objective, s.counts_norm) {
        (Objective::PoissonDeviance, Some(norm)) => deviance_residual(model_value * norm, s.value[i] * norm),
        _ => (model_value - s.value[i]) / s.sigma[i],
    }
}

fn residuals(model: &VitModel, datasets: &[VitDataset], p: &VitParams, objective: Objective) -> Result<Vec<f64>> {
    let m = model.with_od(p.od)?;
    let mut r = Vec::new();
    for ds in datasets {
        let mut r2 = Vec::new();
        for i in 0..ds.d1.len() {
            let (t, e) = predict(&m, p, ds.delta_cavity, ds.d1.delta_probe[i])?;
            r.push(residual(&ds.d1, i, t, objective));
            if let Some(d2) = &ds.d2 {
                r2.push(residual(d2, i, e, objective));
            }
        }
        r.extend(r2);
    }
    Ok(r)
}

fn cost(spec: &VitFitSpec, datasets: &[VitDataset], p: &VitParams) -> Result<f64> {
    Ok(residuals(&spec.model, datasets, p, spec.objective)?.iter().map(|x| x * x).sum())
}

/// Weighted least-squares s₂ with everything else fixed.
fn best_scale(model: &VitModel, datasets: &[VitDataset], p: &VitParams) -> Result<f64> {
    let m = model.with_od(p.od)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ds in datasets {
        if let Some(d2) = &ds.d2 {
            for i in 0..d2.len() {
                let (_, e) = predict(&m, &VitParams { scale_d2: 1.0, ..*p }, ds.delta_cavity, d2.delta_probe[i])?;
                let w = 1.0 / (d2.sigma[i] * d2.sigma[i]);
                num += w * e * d2.value[i];
                den += w * e * e;
            }
        }
    }
    Ok(if den > 0.0 { (num / den).max(0.0) } else { p.scale_d2 })
}

/// Deterministic starting point: OD from the strongest absorption in D1, η
/// by inverting the transmission at Δ = δ and then scanning a logarithmic
/// grid, s₂ by linear least squares.
fn initial_guess(spec: &VitFitSpec, datasets: &[VitDataset]) -> Result<VitParams> {
    let mut p = spec.start;
    let free = |q: VitParam| spec.free.contains(&q);
    let gamma = spec.model.config().gamma;
    if free(VitParam::Od) {
        let max_abs = datasets.iter().flat_map(|d| d.d1.value.iter()).map(|t| -t.max(1e-6).ln()).fold(0.0, f64::max);
        p.od = max_abs.max(1e-3);
    }
    if free(VitParam::EtaEff) {
        let mut candidates: Vec<f64> = (0..=80).map(|k| 10f64.powf(-2.0 + 0.05 * k as f64)).collect();
        for ds in datasets {
            let a = 2.0 * ds.delta_cavity / gamma;
            if a.abs() > 10.0 {
                continue;
            }
            if let Some(i) = ds.d1.nearest(ds.delta_cavity) {
                let absorbance = -ds.d1.value[i].max(1e-6).ln();
                let disc = p.od * p.od - 4.0 * absorbance * absorbance * a * a;
                if absorbance > 0.0 && disc >= 0.0 {
                    let u = (p.od + disc.sqrt()) / (2.0 * absorbance);
                    if u > 1.0 && u.is_finite() {
                        candidates.push(u - 1.0);
                    }
                }
            }
        }
        let mut best = (f64::INFINITY, p.eta_eff);
        for eta in candidates {
            let mut trial = VitParams { eta_eff: eta, ..p };
            if free(VitParam::ScaleD2) {
                trial.scale_d2 = best_scale(&spec.model, datasets, &trial)?;
            }
            let c = cost(spec, datasets, &trial)?;
            if c < best.0 {
                best = (c, eta);
            }
        }
        p.eta_eff = best.1;
    }
    if free(VitParam::ScaleD2) {
        p.scale_d2 = best_scale(&spec.model, datasets, &p)?;
    }
    Ok(p)
}

pub fn fit_vit_spectra(datasets: &[VitDataset], spec: &VitFitSpec) -> Result<FitResult> {
    if datasets.is_empty() {
        return Err(VitError::domain("at least one dataset is required"));
    }
    if spec.free.is_empty() {
        return Err(VitError::domain("no free parameters"));
    }
    for (i, q) in spec.free.iter().enumerate() {
        if spec.free[..i].contains(q) {
            return Err(VitError::domain(format!("parameter {} listed twice", q.name())));
        }
    }
    for ds in datasets {
        if let Some(d2) = &ds.d2 {
            if d2.delta_probe != ds.d1.delta_probe {
                return Err(VitError::domain("D1 and D2 spectra must share the probe grid"));
            }
        }
    }
    if spec.free.contains(&VitParam::ScaleD2) && datasets.iter().all(|d| d.d2.is_none()) {
        return Err(VitError::RankDeficient { parameter: VitParam::ScaleD2.name().into() });
    }
    let start = if spec.auto_init { initial_guess(spec, datasets)? } else { spec.start };
    let lm_specs: Vec<LmParameter> = spec
        .free
        .iter()
        .map(|&q| {
            let s = LmParameter::new(q.name(), start.get(q));
            if q.nonnegative() {
                s.nonnegative()
            } else {
                s
            }
        })
        .collect();
    let f = |x: &[f64]| -> Result<Vec<f64>> {
        let mut p = start;
        for (q, v) in spec.free.iter().zip(x) {
            p.set(*q, *v);
        }
        residuals(&spec.model, datasets, &p, spec.objective)
    };
    let out = minimize(f, &lm_specs, &spec.options)?;
    FitResult::from_outcome(&lm_specs, &out)
}
