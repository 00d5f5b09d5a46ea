//! Steady-state single-excitation amplitudes of the probe-driven Λ atom
//! coupled to the cavity, solved directly as a linear system.
//!
//! This is a second route to the susceptibility that never touches the
//! closed form in [`crate::physics`]. With the ground amplitude c_f fixed to 1
//! the two remaining amplitudes obey
//!
//! ```text
//! 0 = −(Γ/2 + iΔ) c_e + i g c_g + i Ω_p/2
//! 0 = −(κ/2 + i(Δ−δ)) c_g + i g c_e
//! ```
//!
//! These equations use the opposite time-phase convention from the
//! transfer function t = exp(ikLχ/2), so the susceptibility is proportional
//! to the complex conjugate of c_e. The real constant −(OD/kL)·Γ/Ω_p is fixed
//! by the uncoupled (g = 0) Lorentzian.

use num_complex::Complex64;

use crate::error::{ensure_finite, ensure_nonnegative, Result, VitError};
use crate::physics::{coupling_from_cooperativity, transfer_amplitude, Detunings, PhysicalConfig, Susceptibility};

/// Excited-state amplitude and the one-cavity-photon amplitude |g;0;1⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeState {
    pub c_e: Complex64,
    pub c_g: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    /// Probe Rabi frequency (rad/s).
    pub omega_p: f64,
    /// Half vacuum Rabi frequency (rad/s).
    pub g: f64,
}

/// Probe Rabi frequency used when only ratios of amplitudes matter.
const NOMINAL_PROBE_FRACTION: f64 = 1e-3;

impl DriveSpec {
    /// Drive with the coupling `g` that realizes cooperativity `eta`, and a
    /// weak probe Ω_p = 10⁻³ Γ.
    pub fn from_cooperativity(cfg: &PhysicalConfig, eta: f64) -> Result<Self> {
        let g = coupling_from_cooperativity(eta, cfg.kappa, cfg.gamma)?;
        Ok(DriveSpec { omega_p: NOMINAL_PROBE_FRACTION * cfg.gamma, g })
    }

    fn validate(&self, cfg: &PhysicalConfig) -> Result<()> {
        ensure_nonnegative("omega_p", self.omega_p)?;
        ensure_nonnegative("g", self.g)?;
        if self.omega_p > 0.1 * cfg.gamma {
            return Err(VitError::domain(format!(
                "probe Rabi frequency {} rad/s is outside the weak-probe limit (Γ = {} rad/s)",
                self.omega_p, cfg.gamma
            )));
        }
        Ok(())
    }
}

/// Solve the two steady-state equations by Cramer's rule.
pub fn steady_state_amplitudes(cfg: &PhysicalConfig, drive: &DriveSpec, det: &Detunings) -> Result<AmplitudeState> {
    cfg.validate()?;
    drive.validate(cfg)?;
    ensure_finite("delta_probe", det.delta_probe)?;
    ensure_finite("delta_cavity", det.delta_cavity)?;

    let i = Complex64::i();
    let a11 = -Complex64::new(cfg.gamma / 2.0, det.delta_probe);
    let a12 = i * drive.g;
    let a21 = i * drive.g;
    let a22 = -Complex64::new(cfg.kappa / 2.0, det.delta_probe - det.delta_cavity);
    let b1 = -i * drive.omega_p / 2.0;
    let b2 = Complex64::new(0.0, 0.0);

    let determinant = a11 * a22 - a12 * a21;
    let scale = (a11.norm() * a22.norm()).max((a12 * a21).norm());
    if determinant.norm() <= 1e-14 * scale {
        return Err(VitError::Singular(format!(
            "amplitude equations are singular at Δ = {}, δ = {}",
            det.delta_probe, det.delta_cavity
        )));
    }
    Ok(AmplitudeState { c_e: (b1 * a22 - a12 * b2) / determinant, c_g: (a11 * b2 - b1 * a21) / determinant })
}

/// Susceptibility −(OD/kL)·conj(Γ c_e / Ω_p) from the amplitude solution.
pub fn susceptibility_from_oracle(cfg: &PhysicalConfig, drive: &DriveSpec, det: &Detunings) -> Result<Susceptibility> {
    if !(drive.omega_p > 0.0) {
        return Err(VitError::domain("susceptibility needs a nonzero probe drive"));
    }
    let state = steady_state_amplitudes(cfg, drive, det)?;
    let response = (state.c_e * cfg.gamma / drive.omega_p).conj();
    let prefactor = cfg.od / (cfg.wavenumber() * cfg.ensemble_length);
    Ok(Susceptibility(-prefactor * response))
}

/// Fraction of scattered excitation leaving through the cavity,
/// κ|c_g|² / (κ|c_g|² + Γ|c_e|²).
pub fn branching_ratio(state: &AmplitudeState, cfg: &PhysicalConfig) -> Result<f64> {
    let cavity = cfg.kappa * state.c_g.norm_sqr();
    let free_space = cfg.gamma * state.c_e.norm_sqr();
    let total = cavity + free_space;
    if !(total > 0.0) {
        return Err(VitError::Degenerate("branching ratio undefined for a state with no excitation".into()));
    }
    Ok(cavity / total)
}

/// Probability of a probe photon being re-emitted into the cavity,
/// A·(1 − |t|²)·β, with `scale` A absorbing detection efficiency.
pub fn cavity_emission_probability(cfg: &PhysicalConfig, eta: f64, det: &Detunings, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(VitError::domain(format!("emission scale must be > 0, got {scale}")));
    }
    let chi = crate::physics::susceptibility(cfg, eta, det)?;
    let absorbed = 1.0 - transfer_amplitude(chi, cfg)?.norm_sqr();
    if eta == 0.0 {
        return Ok(0.0);
    }
    let drive = DriveSpec::from_cooperativity(cfg, eta)?;
    let beta = branching_ratio(&steady_state_amplitudes(cfg, &drive, det)?, cfg)?;
    Ok(scale * absorbed * beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::susceptibility;

    fn cfg() -> PhysicalConfig {
        PhysicalConfig::default()
    }

    #[test]
    fn uncoupled_amplitudes() {
        let c = cfg();
        let drive = DriveSpec { omega_p: 1e-3 * c.gamma, g: 0.0 };
        for dp in [-2e7, 0.0, 3e6] {
            let s = steady_state_amplitudes(&c, &drive, &Detunings::new(dp, 1e6)).unwrap();
            assert_eq!(s.c_g, Complex64::new(0.0, 0.0));
            let expect = Complex64::i() * drive.omega_p / Complex64::new(c.gamma, 2.0 * dp);
            assert!((s.c_e - expect).norm() < 1e-15 * expect.norm());
        }
    }

    #[test]
    fn cavity_amplitude_on_double_resonance() {
        let c = cfg();
        let drive = DriveSpec::from_cooperativity(&c, 3.4).unwrap();
        let s = steady_state_amplitudes(&c, &drive, &Detunings::resonant()).unwrap();
        let expect = Complex64::i() * 2.0 * drive.g * s.c_e / c.kappa;
        assert!((s.c_g - expect).norm() < 1e-14 * expect.norm());
    }

    #[test]
    fn zero_probe_gives_zero_amplitudes() {
        let c = cfg();
        let drive = DriveSpec { omega_p: 0.0, g: 1e6 };
        let s = steady_state_amplitudes(&c, &drive, &Detunings::new(1e6, -1e6)).unwrap();
        assert_eq!(s.c_e.norm(), 0.0);
        assert_eq!(s.c_g.norm(), 0.0);
        assert!(branching_ratio(&s, &c).is_err());
    }

    #[test]
    fn amplitudes_are_linear_in_probe() {
        let c = cfg();
        let d1 = DriveSpec::from_cooperativity(&c, 1.0).unwrap();
        let d2 = DriveSpec { omega_p: 2.0 * d1.omega_p, ..d1 };
        let det = Detunings::new(2e5, -4e5);
        let s1 = steady_state_amplitudes(&c, &d1, &det).unwrap();
        let s2 = steady_state_amplitudes(&c, &d2, &det).unwrap();
        assert!((s2.c_e - 2.0 * s1.c_e).norm() < 1e-15 * s2.c_e.norm());
        assert!((s2.c_g - 2.0 * s1.c_g).norm() < 1e-15 * s2.c_g.norm());
    }

    #[test]
    fn rejects_strong_probe() {
        let c = cfg();
        let drive = DriveSpec { omega_p: c.gamma, g: 1e6 };
        assert!(steady_state_amplitudes(&c, &drive, &Detunings::resonant()).is_err());
    }

    #[test]
    fn oracle_matches_closed_form() {
        let c = cfg();
        for eta in [0.0, 0.1, 1.0, 3.4, 7.2] {
            let drive = DriveSpec::from_cooperativity(&c, eta).unwrap();
            for i in -20..=20 {
                for j in -20..=20 {
                    let det = Detunings::new(i as f64 * 0.3 * c.gamma, j as f64 * 0.7 * c.kappa);
                    let a = susceptibility_from_oracle(&c, &drive, &det).unwrap().0;
                    let b = susceptibility(&c, eta, &det).unwrap().0;
                    assert!((a - b).norm() <= 1e-10 * b.norm(), "eta={eta} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn unit_cooperativity_halves_resonant_absorption() {
        let c = cfg();
        let coupled =
            susceptibility_from_oracle(&c, &DriveSpec::from_cooperativity(&c, 1.0).unwrap(), &Detunings::resonant())
                .unwrap();
        let bare =
            susceptibility_from_oracle(&c, &DriveSpec::from_cooperativity(&c, 0.0).unwrap(), &Detunings::resonant())
                .unwrap();
        assert!((coupled.0.im - bare.0.im / 2.0).abs() < 1e-14 * bare.0.im);
    }

    #[test]
    fn branching_on_double_resonance() {
        let c = cfg();
        for eta in [0.1, 1.0, 7.2, 1e6] {
            let drive = DriveSpec::from_cooperativity(&c, eta).unwrap();
            let s = steady_state_amplitudes(&c, &drive, &Detunings::resonant()).unwrap();
            let beta = branching_ratio(&s, &c).unwrap();
            assert!((beta - eta / (eta + 1.0)).abs() < 1e-12);
        }
        let drive = DriveSpec::from_cooperativity(&c, 0.0).unwrap();
        let s = steady_state_amplitudes(&c, &drive, &Detunings::resonant()).unwrap();
        assert_eq!(branching_ratio(&s, &c).unwrap(), 0.0);
    }

    #[test]
    fn emission_vanishes_without_medium_or_cavity() {
        let c = cfg();
        let empty = PhysicalConfig { od: 0.0, ..c };
        let uncoupled_grid = (-30..=30).map(|i| Detunings::new(i as f64 * 2e5, 5e5));
        for det in uncoupled_grid {
            assert_eq!(cavity_emission_probability(&empty, 3.4, &det, 1.0).unwrap(), 0.0);
            assert_eq!(cavity_emission_probability(&c, 0.0, &det, 1.0).unwrap(), 0.0);
        }
        assert!(cavity_emission_probability(&c, 1.0, &Detunings::resonant(), 0.0).is_err());
    }

    #[test]
    fn emission_peaks_near_two_photon_resonance() {
        let c = cfg();
        let delta = crate::units::mhz_to_angular(0.5);
        let (best, _) = (-400..=400)
            .map(|i| i as f64 * crate::units::mhz_to_angular(0.01))
            .map(|dp| (dp, cavity_emission_probability(&c, 3.4, &Detunings::new(dp, delta), 1.0).unwrap()))
            .fold((0.0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((best - delta).abs() < c.kappa, "peak at {best}, δ = {delta}");
    }
}
