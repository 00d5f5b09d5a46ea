//! Analytic weak-probe model of vacuum-induced transparency.
//!
//! A Λ atom (|f⟩ ↔ |e⟩ ↔ |g⟩) is probed on |f⟩ → |e⟩ while a cavity mode is
//! tuned near |g⟩ → |e⟩. In the single-excitation limit the ensemble responds
//! linearly with susceptibility
//!
//! ```text
//!        OD    Δ̃ − (η − Δ̃ δ̃) δ̃ − i (η + 1 + δ̃²)
//! χ = − ──── · ─────────────────────────────────
//!        k L    (η + 1 − Δ̃ δ̃)² + (Δ̃ + δ̃)²
//! ```
//!
//! with Δ̃ = 2Δ/Γ and δ̃ = 2(Δ − δ)/κ, and the probe amplitude is multiplied by
//! `t = exp(i k L χ / 2)`. Γ and κ are FWHM linewidths in rad/s.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Result, VitError};
use crate::units::mhz_to_angular;

/// Atomic, cavity and ensemble constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// Atomic FWHM linewidth Γ (rad/s).
    pub gamma: f64,
    /// Cavity FWHM linewidth κ (rad/s).
    pub kappa: f64,
    /// Probe wavelength (m).
    pub lambda: f64,
    /// Resonant optical depth of the ensemble.
    pub od: f64,
    /// Ensemble thickness along the probe (m).
    pub ensemble_length: f64,
    /// Oscillator strength of the probe arm |f⟩ ↔ |e⟩.
    pub f_probe: f64,
    /// Oscillator strength of the cavity arm |g⟩ ↔ |e⟩.
    pub f_cavity: f64,
}

impl Default for PhysicalConfig {
    /// Cs D2 line in a 173 kHz cavity, OD 0.4 over 20 μm.
    fn default() -> Self {
        PhysicalConfig {
            gamma: mhz_to_angular(5.2),
            kappa: mhz_to_angular(0.173),
            lambda: 852e-9,
            od: 0.4,
            ensemble_length: 20e-6,
            f_probe: 0.42,
            f_cavity: 0.47,
        }
    }
}

impl PhysicalConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("gamma", self.gamma)?;
        ensure_positive("kappa", self.kappa)?;
        ensure_positive("lambda", self.lambda)?;
        ensure_nonnegative("od", self.od)?;
        ensure_positive("ensemble_length", self.ensemble_length)?;
        for (name, f) in [("f_probe", self.f_probe), ("f_cavity", self.f_cavity)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(VitError::domain(format!("{name} must lie in (0, 1], got {f}")));
            }
        }
        Ok(())
    }

    /// Probe wavenumber k = 2π/λ.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    pub fn with_od(self, od: f64) -> Self {
        PhysicalConfig { od, ..self }
    }

    /// Normalized probe-atom detuning Δ̃ = 2Δ/Γ.
    pub fn probe_detuning_norm(&self, det: &Detunings) -> f64 {
        2.0 * det.delta_probe / self.gamma
    }

    /// Normalized two-photon detuning δ̃ = 2(Δ − δ)/κ.
    pub fn two_photon_detuning_norm(&self, det: &Detunings) -> f64 {
        2.0 * (det.delta_probe - det.delta_cavity) / self.kappa
    }
}

/// Cavity parameters that fix the single-atom cooperativity at an antinode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub finesse: f64,
    /// Mode waist (m).
    pub waist: f64,
    /// Wavelength (m).
    pub lambda: f64,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        CavityGeometry { finesse: 6.3e4, waist: 35e-6, lambda: 852e-9 }
    }
}

impl CavityGeometry {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("finesse", self.finesse)?;
        ensure_positive("waist", self.waist)?;
        ensure_positive("lambda", self.lambda)
    }
}

/// Probe-atom detuning Δ = ω_p − ω_ef and cavity-atom detuning δ, both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Detunings {
    pub delta_probe: f64,
    pub delta_cavity: f64,
}

impl Detunings {
    pub fn new(delta_probe: f64, delta_cavity: f64) -> Self {
        Detunings { delta_probe, delta_cavity }
    }

    /// Double resonance, Δ = δ = 0.
    pub fn resonant() -> Self {
        Detunings::default()
    }

    fn validate(&self) -> Result<()> {
        ensure_finite("delta_probe", self.delta_probe)?;
        ensure_finite("delta_cavity", self.delta_cavity)
    }
}

/// Complex linear susceptibility (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibility(pub Complex64);

impl Susceptibility {
    pub fn value(&self) -> Complex64 {
        self.0
    }

    /// Refractive index n = √(1 + Re χ), without the small-χ expansion.
    pub fn refractive_index(&self) -> f64 {
        (1.0 + self.0.re).sqrt()
    }
}

fn ensure_cooperativity(eta: f64) -> Result<()> {
    if eta.is_finite() && eta >= 0.0 {
        Ok(())
    } else {
        Err(VitError::domain(format!("cooperativity must be >= 0, got {eta}")))
    }
}

/// Susceptibility of the ensemble for a weak probe.
pub fn susceptibility(cfg: &PhysicalConfig, eta: f64, det: &Detunings) -> Result<Susceptibility> {
    cfg.validate()?;
    ensure_cooperativity(eta)?;
    det.validate()?;
    let a = cfg.probe_detuning_norm(det);
    let d = cfg.two_photon_detuning_norm(det);
    Ok(Susceptibility(susceptibility_kernel(a, d, eta) * (cfg.od / (cfg.wavenumber() * cfg.ensemble_length))))
}

/// The dimensionless factor multiplying OD/(kL). Callers validate inputs.
pub(crate) fn susceptibility_kernel(a: f64, d: f64, eta: f64) -> Complex64 {
    let numerator = Complex64::new(a - (eta - a * d) * d, -(eta + 1.0 + d * d));
    let denominator = (eta + 1.0 - a * d).powi(2) + (a + d).powi(2);
    -numerator / denominator
}

/// Amplitude transfer function t = exp(i k L χ / 2).
pub fn transfer_amplitude(chi: Susceptibility, cfg: &PhysicalConfig) -> Result<Complex64> {
    cfg.validate()?;
    let kl = cfg.wavenumber() * cfg.ensemble_length;
    Ok((Complex64::i() * kl * chi.0 / 2.0).exp())
}

/// Intensity transmission |t|² of the ideal single-coupling model.
pub fn transmission(cfg: &PhysicalConfig, eta: f64, det: &Detunings) -> Result<f64> {
    let chi = susceptibility(cfg, eta, det)?;
    Ok(transfer_amplitude(chi, cfg)?.norm_sqr())
}

/// Single-atom cooperativity at an antinode for unit oscillator strength,
/// 24F/(πk²w²).
pub fn cooperativity_geometric(geom: &CavityGeometry) -> Result<f64> {
    geom.validate()?;
    let k = 2.0 * PI / geom.lambda;
    Ok(24.0 * geom.finesse / (PI * k * k * geom.waist * geom.waist))
}

/// Cooperativity 4g²/(κΓ) from the half vacuum Rabi frequency `g`.
pub fn cooperativity_from_coupling(g: f64, kappa: f64, gamma: f64) -> Result<f64> {
    ensure_positive("g", g)?;
    ensure_positive("kappa", kappa)?;
    ensure_positive("gamma", gamma)?;
    Ok(4.0 * g * g / (kappa * gamma))
}

/// Inverse of [`cooperativity_from_coupling`]: g = √(ηκΓ/4).
pub fn coupling_from_cooperativity(eta: f64, kappa: f64, gamma: f64) -> Result<f64> {
    ensure_cooperativity(eta)?;
    ensure_positive("kappa", kappa)?;
    ensure_positive("gamma", gamma)?;
    Ok((eta * kappa * gamma / 4.0).sqrt())
}

/// Transmission on double resonance, exp(−OD/(η+1)).
pub fn resonant_transmission(od: f64, eta: f64) -> Result<f64> {
    ensure_nonnegative("od", od)?;
    ensure_cooperativity(eta)?;
    Ok((-od / (eta + 1.0)).exp())
}

/// Narrowband group delay on double resonance, (OD/κ)·η/(η+1)².
///
/// This keeps only the cavity (two-photon) dispersion; the broad atomic
/// line adds −OD/(Γ(η+1)²), see [`group_delay_resonant`].
pub fn group_delay_analytic(od: f64, kappa: f64, eta: f64) -> Result<f64> {
    ensure_nonnegative("od", od)?;
    ensure_positive("kappa", kappa)?;
    ensure_cooperativity(eta)?;
    Ok(od / kappa * eta / ((eta + 1.0) * (eta + 1.0)))
}

/// Exact phase slope of the transfer function at Δ = δ = 0 with δ held fixed,
/// OD·(η/κ − 1/Γ)/(η+1)².
pub fn group_delay_resonant(cfg: &PhysicalConfig, eta: f64) -> Result<f64> {
    cfg.validate()?;
    ensure_cooperativity(eta)?;
    Ok(cfg.od * (eta / cfg.kappa - 1.0 / cfg.gamma) / ((eta + 1.0) * (eta + 1.0)))
}

/// Transfer-function phase arg t = kL·Re χ / 2 at probe detuning Δ, cavity
/// detuning δ. No branch cut: this is the unwrapped phase.
fn transfer_phase(cfg: &PhysicalConfig, eta: f64, delta_probe: f64, delta_cavity: f64) -> f64 {
    let det = Detunings::new(delta_probe, delta_cavity);
    let a = cfg.probe_detuning_norm(&det);
    let d = cfg.two_photon_detuning_norm(&det);
    cfg.od * susceptibility_kernel(a, d, eta).re / 2.0
}

/// Default probe step for [`group_delay_numeric`], κ/100.
pub fn default_delay_step(cfg: &PhysicalConfig) -> f64 {
    cfg.kappa / 100.0
}

/// Group delay dφ/dω_p at double resonance by finite differences of the
/// transfer phase, with the cavity detuning held at zero.
pub fn group_delay_numeric(cfg: &PhysicalConfig, eta: f64) -> Result<f64> {
    group_delay_numeric_with_step(cfg, eta, default_delay_step(cfg))
}

/// Relative disagreement tolerated between the extrapolated derivative and
/// the finer of its two inputs.
const RICHARDSON_TOLERANCE: f64 = 5e-3;

/// Five-point central difference at steps `h` and `h/2`, combined by one
/// Richardson step. Fails when the extrapolation moves the estimate by more
/// than 0.5 %.
pub fn group_delay_numeric_with_step(cfg: &PhysicalConfig, eta: f64, step: f64) -> Result<f64> {
    cfg.validate()?;
    ensure_cooperativity(eta)?;
    ensure_positive("step", step)?;
    let phase = |x: f64| transfer_phase(cfg, eta, x, 0.0);
    let five_point = |h: f64| (-phase(2.0 * h) + 8.0 * phase(h) - 8.0 * phase(-h) + phase(-2.0 * h)) / (12.0 * h);
    let coarse = five_point(step);
    let fine = five_point(step / 2.0);
    let extrapolated = (16.0 * fine - coarse) / 15.0;
    // Scale for the zero test: the magnitude of either dispersive contribution.
    let scale = cfg.od * (1.0 / cfg.kappa + 1.0 / cfg.gamma);
    if (extrapolated - fine).abs() > RICHARDSON_TOLERANCE * extrapolated.abs().max(1e-12 * scale) {
        return Err(VitError::NonConvergence(format!(
            "Richardson estimate {extrapolated:e} s disagrees with h/2 estimate {fine:e} s; reduce the step"
        )));
    }
    Ok(extrapolated)
}

/// Group velocity `path_length / delay`.
pub fn group_velocity(delay: f64, path_length: f64) -> Result<f64> {
    ensure_positive("delay", delay)?;
    ensure_nonnegative("path_length", path_length)?;
    Ok(path_length / delay)
}

/// Transparency Θ = (T′ − T)/(1 − T) of transmission `t_with` relative to
/// the bare transmission `t_without`.
pub fn transparency(t_with: f64, t_without: f64) -> Result<f64> {
    ensure_finite("t_with", t_with)?;
    ensure_finite("t_without", t_without)?;
    if t_without >= 1.0 {
        return Err(VitError::domain(format!("transparency needs a bare transmission below 1, got {t_without}")));
    }
    Ok((t_with - t_without) / (1.0 - t_without))
}

/// Width (1+η)κ of the transparency window.
pub fn transparency_window_width(eta: f64, kappa: f64) -> f64 {
    (1.0 + eta) * kappa
}

/// Delays experienced by the photon-number components n = 0..=n_max, with
/// cooperativity η(n) = η_vacuum·(n+1).
pub fn fock_delay_ladder(cfg: &PhysicalConfig, eta_vacuum: f64, n_max: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure_cooperativity(eta_vacuum)?;
    (0..=n_max).map(|n| group_delay_analytic(cfg.od, cfg.kappa, eta_vacuum * (n as f64 + 1.0))).collect()
}
