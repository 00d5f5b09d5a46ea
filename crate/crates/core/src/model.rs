//! The spectrum model used by the generator and the fits: the analytic
//! response plus whichever corrections are switched on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, Result, VitError};
use crate::physics::{Detunings, PhysicalConfig};
use crate::spatial::{composite_kernel, CouplingDistribution, Jitter, SideChannel};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corrections {
    /// Coupling profile; `None` means every atom sits at an antinode.
    pub coupling: Option<CouplingDistribution>,
    pub side_channel: Option<SideChannel>,
    pub jitter: Option<Jitter>,
}

impl Corrections {
    pub fn ideal() -> Self {
        Corrections::default()
    }

    pub fn standing_wave(nodes: usize) -> Result<Self> {
        Ok(Corrections { coupling: Some(CouplingDistribution::standing_wave(1.0, nodes)?), ..Default::default() })
    }
}

/// Analytic response with corrections. The cooperativity argument of every
/// method is the antinode value η_eff.
#[derive(Debug, Clone)]
pub struct VitModel {
    cfg: PhysicalConfig,
    corrections: Corrections,
    // (fraction of η, weight) and (cavity offset, weight), precomputed
    coupling: Vec<(f64, f64)>,
    jitter: Vec<(f64, f64)>,
}

impl VitModel {
    pub fn new(cfg: PhysicalConfig, corrections: Corrections) -> Result<Self> {
        cfg.validate()?;
        if let Some(side) = &corrections.side_channel {
            side.validate()?;
        }
        let coupling = match &corrections.coupling {
            Some(d) => {
                let unit = d.with_eta_max(1.0);
                unit.iter().collect()
            }
            None => vec![(1.0, 1.0)],
        };
        let jitter = match &corrections.jitter {
            Some(j) => j.quadrature()?,
            None => vec![(0.0, 1.0)],
        };
        Ok(VitModel { cfg, corrections, coupling, jitter })
    }

    pub fn ideal(cfg: PhysicalConfig) -> Result<Self> {
        VitModel::new(cfg, Corrections::ideal())
    }

    pub fn config(&self) -> &PhysicalConfig {
        &self.cfg
    }

    pub fn corrections(&self) -> &Corrections {
        &self.corrections
    }

    /// Copy with a different optical depth.
    pub fn with_od(&self, od: f64) -> Result<Self> {
        ensure_nonnegative("od", od)?;
        Ok(VitModel { cfg: self.cfg.with_od(od), ..self.clone() })
    }

    fn side(&self) -> (f64, f64) {
        match &self.corrections.side_channel {
            Some(s) => (s.weight, s.zeeman_shift),
            None => (0.0, 0.0),
        }
    }

    /// kLχ at a single coupling value; the caller has validated everything.
    fn kl_chi(&self, eta: f64, delta_probe: f64, delta_cavity: f64) -> Complex64 {
        let (weight, shift) = self.side();
        let a = 2.0 * delta_probe / self.cfg.gamma;
        let d = 2.0 * (delta_probe - delta_cavity) / self.cfg.kappa;
        let d_side = 2.0 * (delta_probe - delta_cavity - shift) / self.cfg.kappa;
        self.cfg.od * composite_kernel(a, d, d_side, eta, weight * eta)
    }

    /// Branching into the cavity from the steady-state amplitudes, summed over
    /// both cavity-coupled states: Σηⱼ/(1+δ̃ⱼ²) / (1 + Σηⱼ/(1+δ̃ⱼ²)).
    fn branching(&self, eta: f64, delta_probe: f64, delta_cavity: f64) -> f64 {
        let (weight, shift) = self.side();
        let d = 2.0 * (delta_probe - delta_cavity) / self.cfg.kappa;
        let d_side = 2.0 * (delta_probe - delta_cavity - shift) / self.cfg.kappa;
        let cavity = eta / (1.0 + d * d) + weight * eta / (1.0 + d_side * d_side);
        cavity / (1.0 + cavity)
    }

    fn check(&self, eta: f64, det: &Detunings) -> Result<()> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(VitError::domain(format!("cooperativity must be >= 0, got {eta}")));
        }
        if !(det.delta_probe.is_finite() && det.delta_cavity.is_finite()) {
            return Err(VitError::domain("detunings must be finite"));
        }
        Ok(())
    }

    /// Average of `f(eta_i, δ + offset)` over coupling and jitter.
    fn average(&self, eta: f64, det: &Detunings, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let mut total = 0.0;
        for &(offset, wj) in &self.jitter {
            let mut inner = 0.0;
            for &(frac, wc) in &self.coupling {
                inner += wc * f(eta * frac, det.delta_probe, det.delta_cavity + offset);
            }
            total += wj * inner;
        }
        total
    }

    /// Probe intensity transmission.
    pub fn transmission(&self, eta: f64, det: &Detunings) -> Result<f64> {
        self.check(eta, det)?;
        Ok(self.average(eta, det, |e, dp, dc| (-self.kl_chi(e, dp, dc).im).exp()))
    }

    /// Probability of emission into the cavity, A·(1 − |t|²)·β, averaged like
    /// the transmission.
    pub fn emission(&self, eta: f64, det: &Detunings, scale: f64) -> Result<f64> {
        self.check(eta, det)?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(VitError::domain(format!("emission scale must be >= 0, got {scale}")));
        }
        Ok(scale
            * self.average(eta, det, |e, dp, dc| {
                let absorbed = 1.0 - (-self.kl_chi(e, dp, dc).im).exp();
                absorbed * self.branching(e, dp, dc)
            }))
    }

    /// Transmission and emission probability (scale 1) in one averaging pass.
    pub fn spectrum_point(&self, eta: f64, det: &Detunings) -> Result<(f64, f64)> {
        self.check(eta, det)?;
        let (mut t_total, mut e_total) = (0.0, 0.0);
        for &(offset, wj) in &self.jitter {
            for &(frac, wc) in &self.coupling {
                let (e, dc) = (eta * frac, det.delta_cavity + offset);
                let t = (-self.kl_chi(e, det.delta_probe, dc).im).exp();
                t_total += wj * wc * t;
                e_total += wj * wc * (1.0 - t) * self.branching(e, det.delta_probe, dc);
            }
        }
        Ok((t_total, e_total))
    }

    /// Amplitude transfer t(Δ) = exp(ikLχ/2) for one coupling value and one
    /// cavity detuning; used to propagate pulses.
    pub fn transfer(&self, eta: f64, delta_probe: f64, delta_cavity: f64) -> Complex64 {
        (Complex64::i() * self.kl_chi(eta, delta_probe, delta_cavity) / 2.0).exp()
    }

    /// Members of the incoherent ensemble the model averages over:
    /// (weight, cooperativity, cavity detuning).
    pub fn ensemble(&self, eta: f64, delta_cavity: f64) -> Vec<(f64, f64, f64)> {
        let mut members = Vec::with_capacity(self.jitter.len() * self.coupling.len());
        for &(offset, wj) in &self.jitter {
            for &(frac, wc) in &self.coupling {
                members.push((wj * wc, eta * frac, delta_cavity + offset));
            }
        }
        members
    }
}
