//! Corrections that take the single-coupling model to the experiment:
//! standing-wave averaging of the coupling, photon-number-dependent
//! cooperativity, the weaker Zeeman-shifted side channel, and jitter of the
//! cavity frequency.

use std::f64::consts::FRAC_PI_2;

use gauss_quad::{GaussHermite, GaussLegendre};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, Result, VitError};
use crate::physics::{susceptibility, transfer_amplitude, Detunings, PhysicalConfig, Susceptibility};
use crate::units::{gaussian_fwhm_per_sigma, mhz_to_angular};

/// Discrete distribution of atom-cavity coupling across the ensemble.
///
/// Stored as fractions of the antinode cooperativity so the same shape can be
/// rescaled when the antinode value is a fit parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDistribution {
    pub eta_max: f64,
    fractions: Vec<f64>,
    weights: Vec<f64>,
}

impl CouplingDistribution {
    /// All atoms see the same cooperativity.
    pub fn point(eta: f64) -> Result<Self> {
        ensure_nonnegative("eta", eta)?;
        Ok(CouplingDistribution { eta_max: eta, fractions: vec![1.0], weights: vec![1.0] })
    }

    /// η(z) = η_max·cos²(kz) for atoms uniform in z, sampled with `nodes`-point
    /// Gauss–Legendre quadrature over a quarter period.
    pub fn standing_wave(eta_max: f64, nodes: usize) -> Result<Self> {
        ensure_nonnegative("eta_max", eta_max)?;
        let rule = GaussLegendre::new(nodes)
            .map_err(|_| VitError::domain(format!("need at least 2 quadrature nodes, got {nodes}")))?;
        let (fractions, weights) = rule
            .iter()
            .map(|&(x, w)| {
                let phase = (x + 1.0) * FRAC_PI_2 / 2.0;
                (phase.cos().powi(2), w / 2.0)
            })
            .unzip();
        Ok(CouplingDistribution { eta_max, fractions, weights })
    }

    /// Arbitrary tabulated profile; `fractions` in [0, 1] of `eta_max`,
    /// `weights` nonnegative and renormalized to unit sum.
    pub fn from_profile(eta_max: f64, fractions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        ensure_nonnegative("eta_max", eta_max)?;
        if fractions.is_empty() || fractions.len() != weights.len() {
            return Err(VitError::domain("profile needs equal, nonzero numbers of fractions and weights"));
        }
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(VitError::domain("coupling fractions must lie in [0, 1]"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(VitError::domain("profile weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(VitError::domain("profile weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(CouplingDistribution { eta_max, fractions, weights })
    }

    /// Same shape, different antinode cooperativity.
    pub fn with_eta_max(&self, eta_max: f64) -> Self {
        CouplingDistribution { eta_max, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// (cooperativity, weight) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.fractions.iter().zip(&self.weights).map(|(f, w)| (self.eta_max * f, *w))
    }
}

/// Cavity-photon-number dependence of the cooperativity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearControl {
    pub eta_eff_0: f64,
    pub n_c: f64,
}

impl NonlinearControl {
    pub fn eta_eff(&self) -> Result<f64> {
        effective_cooperativity(self.eta_eff_0, self.n_c)
    }
}

/// η_eff = η_eff_0·(⟨n_c⟩ + 1); the control Rabi frequency grows as √(n_c+1).
pub fn effective_cooperativity(eta_eff_0: f64, n_c: f64) -> Result<f64> {
    ensure_nonnegative("eta_eff_0", eta_eff_0)?;
    ensure_nonnegative("n_c", n_c)?;
    Ok(eta_eff_0 * (n_c + 1.0))
}

/// Intensity transmission averaged over the coupling distribution.
pub fn averaged_transmission(cfg: &PhysicalConfig, dist: &CouplingDistribution, det: &Detunings) -> Result<f64> {
    let mut total = 0.0;
    for (eta, w) in dist.iter() {
        let chi = susceptibility(cfg, eta, det)?;
        total += w * transfer_amplitude(chi, cfg)?.norm_sqr();
    }
    Ok(total)
}

/// Second cavity-coupled ground state sharing the excited state, with
/// relative coupling `weight` and two-photon resonance moved by
/// `zeeman_shift` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideChannel {
    pub weight: f64,
    pub zeeman_shift: f64,
}

impl Default for SideChannel {
    fn default() -> Self {
        SideChannel { weight: 0.25, zeeman_shift: mhz_to_angular(0.6) }
    }
}

impl SideChannel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(VitError::domain(format!("side-channel weight must lie in [0, 1], got {}", self.weight)));
        }
        ensure_finite("zeeman_shift", self.zeeman_shift)
    }
}

/// Dimensionless response of the atom with two cavity-coupled lower states.
/// `d_main` and `d_side` are the normalized two-photon detunings.
pub(crate) fn composite_kernel(a: f64, d_main: f64, d_side: f64, eta: f64, eta_side: f64) -> Complex64 {
    let i = Complex64::i();
    let denom = a + i - eta / (d_main + i) - eta_side / (d_side + i);
    -1.0 / denom
}

/// Susceptibility with the side channel included.
///
/// Both channels share |f⟩ → |e⟩, so the probe optical depth is unchanged and
/// the side channel enters as a second interference path of cooperativity
/// `weight·η` whose two-photon resonance sits at Δ = δ + shift. The integrated
/// absorption is therefore the same as for the main channel alone.
pub fn composite_susceptibility(
    cfg: &PhysicalConfig,
    eta: f64,
    det: &Detunings,
    side: &SideChannel,
) -> Result<Susceptibility> {
    side.validate()?;
    if side.weight == 0.0 {
        return susceptibility(cfg, eta, det);
    }
    // validates cfg, eta and detunings
    susceptibility(cfg, eta, det)?;
    let a = cfg.probe_detuning_norm(det);
    let d_main = cfg.two_photon_detuning_norm(det);
    let d_side = 2.0 * (det.delta_probe - det.delta_cavity - side.zeeman_shift) / cfg.kappa;
    let kernel = composite_kernel(a, d_main, d_side, eta, side.weight * eta);
    Ok(Susceptibility(kernel * (cfg.od / (cfg.wavenumber() * cfg.ensemble_length))))
}

/// Gaussian distribution of the cavity resonance, specified by its FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// FWHM of the cavity-frequency distribution (rad/s).
    pub fwhm: f64,
    /// Gauss–Hermite order.
    pub nodes: usize,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter { fwhm: mhz_to_angular(0.2), nodes: 21 }
    }
}

impl Jitter {
    pub fn sigma(&self) -> f64 {
        self.fwhm / gaussian_fwhm_per_sigma()
    }

    /// Offsets of the cavity detuning and their probabilities.
    pub fn quadrature(&self) -> Result<Vec<(f64, f64)>> {
        ensure_nonnegative("jitter fwhm", self.fwhm)?;
        if self.fwhm == 0.0 {
            return Ok(vec![(0.0, 1.0)]);
        }
        let rule = GaussHermite::new(self.nodes)
            .map_err(|_| VitError::domain(format!("need at least 2 jitter nodes, got {}", self.nodes)))?;
        let scale = std::f64::consts::SQRT_2 * self.sigma();
        let norm = std::f64::consts::PI.sqrt();
        Ok(rule.iter().map(|&(x, w)| (scale * x, w / norm)).collect())
    }
}

/// Absolute agreement required between the `n`- and `2n`-node jitter averages.
pub const JITTER_QUADRATURE_TOLERANCE: f64 = 1e-6;

/// Average a spectrum over Gaussian jitter of the cavity detuning.
///
/// `spectrum_fn` maps detunings to a real observable. Every probe detuning
/// is averaged with the configured rule and again with twice as many nodes;
/// disagreement beyond [`JITTER_QUADRATURE_TOLERANCE`] is reported.
pub fn jitter_broadened_spectrum<F>(
    spectrum_fn: F,
    probe_grid: &[f64],
    delta_cavity: f64,
    jitter: &Jitter,
) -> Result<Vec<f64>>
where
    F: Fn(&Detunings) -> Result<f64>,
{
    if jitter.fwhm == 0.0 {
        return probe_grid.iter().map(|&dp| spectrum_fn(&Detunings::new(dp, delta_cavity))).collect();
    }
    let coarse = jitter.quadrature()?;
    let fine = Jitter { nodes: 2 * jitter.nodes, ..*jitter }.quadrature()?;
    let average = |rule: &[(f64, f64)], dp: f64| -> Result<f64> {
        rule.iter().map(|&(offset, w)| Ok(w * spectrum_fn(&Detunings::new(dp, delta_cavity + offset))?)).sum()
    };
    probe_grid
        .iter()
        .map(|&dp| {
            let a = average(&coarse, dp)?;
            let b = average(&fine, dp)?;
            if (a - b).abs() > JITTER_QUADRATURE_TOLERANCE {
                return Err(VitError::NonConvergence(format!(
                    "jitter quadrature changed by {:e} at Δ = {dp} rad/s; raise the node count",
                    (a - b).abs()
                )));
            }
            Ok(b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::transmission;

    fn cfg() -> PhysicalConfig {
        PhysicalConfig::default()
    }

    #[test]
    fn effective_cooperativity_values() {
        assert_eq!(effective_cooperativity(3.4, 0.0).unwrap(), 3.4);
        assert!((effective_cooperativity(3.4, 10.0).unwrap() - 37.4).abs() < 1e-12);
        assert!(effective_cooperativity(-1.0, 0.0).is_err());
        assert!(effective_cooperativity(1.0, -0.5).is_err());
        let steps: Vec<f64> = (0..10)
            .map(|n| {
                effective_cooperativity(3.4, n as f64 + 1.0).unwrap() - effective_cooperativity(3.4, n as f64).unwrap()
            })
            .collect();
        assert!(steps.iter().all(|s| (s - 3.4).abs() < 1e-12));
    }

    #[test]
    fn standing_wave_weights_are_normalized() {
        let d = CouplingDistribution::standing_wave(7.2, 64).unwrap();
        assert_eq!(d.len(), 64);
        let total: f64 = d.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(d.iter().all(|(eta, w)| (0.0..=7.2).contains(&eta) && w > 0.0));
        // ⟨cos²⟩ = 1/2 over a quarter period
        let mean: f64 = d.iter().map(|(eta, w)| eta * w).sum();
        assert!((mean - 3.6).abs() < 1e-12);
    }

    #[test]
    fn point_mass_reduces_to_ideal_model() {
        let c = cfg();
        for eta in [0.0, 1.0, 3.4] {
            let d = CouplingDistribution::point(eta).unwrap();
            for i in -20..=20 {
                let det = Detunings::new(i as f64 * 1e6, 2e6);
                let a = averaged_transmission(&c, &d, &det).unwrap();
                let b = transmission(&c, eta, &det).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_coupling_is_distribution_independent() {
        let c = cfg();
        let det = Detunings::new(1e6, 0.0);
        let d = CouplingDistribution::standing_wave(0.0, 16).unwrap();
        let a = averaged_transmission(&c, &d, &det).unwrap();
        assert!((a - transmission(&c, 0.0, &det).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn averaged_resonant_transmission_is_bracketed() {
        let c = cfg();
        let det = Detunings::resonant();
        for eta_max in [0.5, 3.4, 20.0] {
            let d = CouplingDistribution::standing_wave(eta_max, 64).unwrap();
            let avg = averaged_transmission(&c, &d, &det).unwrap();
            let lo = transmission(&c, 0.0, &det).unwrap();
            let hi = transmission(&c, eta_max, &det).unwrap();
            assert!(lo < avg && avg < hi, "{lo} {avg} {hi}");
        }
    }

    #[test]
    fn quadrature_is_converged_at_64_nodes() {
        let c = cfg();
        for eta_max in [1.0, 3.4, 37.4] {
            for dp in [0.0, 2e5, 3e6] {
                let det = Detunings::new(dp, 0.0);
                let a = averaged_transmission(&c, &CouplingDistribution::standing_wave(eta_max, 64).unwrap(), &det)
                    .unwrap();
                let b = averaged_transmission(&c, &CouplingDistribution::standing_wave(eta_max, 128).unwrap(), &det)
                    .unwrap();
                assert!((a - b).abs() < 1e-6, "{a} {b}");
            }
        }
    }

    #[test]
    fn profile_validation() {
        assert!(CouplingDistribution::from_profile(1.0, vec![0.5, 1.2], vec![1.0, 1.0]).is_err());
        assert!(CouplingDistribution::from_profile(1.0, vec![0.5], vec![-1.0]).is_err());
        assert!(CouplingDistribution::from_profile(1.0, vec![], vec![]).is_err());
        let d = CouplingDistribution::from_profile(2.0, vec![0.5, 1.0], vec![1.0, 3.0]).unwrap();
        let pairs: Vec<_> = d.iter().collect();
        assert_eq!(pairs, vec![(1.0, 0.25), (2.0, 0.75)]);
    }

    #[test]
    fn side_channel_with_zero_weight_is_main_channel() {
        let c = cfg();
        let side = SideChannel { weight: 0.0, ..Default::default() };
        for i in -10..=10 {
            let det = Detunings::new(i as f64 * 3e5, 1e6);
            let a = composite_susceptibility(&c, 3.4, &det, &side).unwrap().0;
            let b = susceptibility(&c, 3.4, &det).unwrap().0;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn composite_kernel_reduces_to_closed_form() {
        // With no side coupling the composite kernel is the main susceptibility.
        let c = cfg();
        for i in -10..=10 {
            let det = Detunings::new(i as f64 * 4e5, -7e5);
            let a = c.probe_detuning_norm(&det);
            let d = c.two_photon_detuning_norm(&det);
            let k = composite_kernel(a, d, d + 3.0, 3.4, 0.0);
            let chi = susceptibility(&c, 3.4, &det).unwrap().0 / (c.od / (c.wavenumber() * c.ensemble_length));
            assert!((k - chi).norm() < 1e-12 * chi.norm());
        }
    }

    #[test]
    fn unshifted_side_channel_deepens_the_window() {
        let c = cfg();
        let side = SideChannel { weight: 0.25, zeeman_shift: 0.0 };
        let kl = c.wavenumber() * c.ensemble_length;
        let composite = composite_susceptibility(&c, 3.4, &Detunings::resonant(), &side).unwrap();
        let single = susceptibility(&c, 3.4, &Detunings::resonant()).unwrap();
        let t_comp = (-kl * composite.0.im).exp();
        let t_single = (-kl * single.0.im).exp();
        assert!(t_comp > t_single);
        // equivalent to a single channel of cooperativity 1.25 η
        let merged = susceptibility(&c, 3.4 * 1.25, &Detunings::resonant()).unwrap();
        assert!((composite.0 - merged.0).norm() < 1e-12 * merged.0.norm());
    }

    #[test]
    fn shifted_side_channel_opens_a_second_window() {
        let c = cfg();
        let side = SideChannel::default();
        let kl = c.wavenumber() * c.ensemble_length;
        let t_at = |dp: f64, s: &SideChannel| {
            (-kl * composite_susceptibility(&c, 3.4, &Detunings::new(dp, 0.0), s).unwrap().0.im).exp()
        };
        let none = SideChannel { weight: 0.0, ..side };
        let shift = side.zeeman_shift;
        // a local transmission maximum appears near Δ = shift
        let near: Vec<f64> = (-30..=30).map(|i| t_at(shift + i as f64 * 1e4 * std::f64::consts::TAU, &side)).collect();
        let (imax, _) = near.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        assert!((imax as i64 - 30).abs() < 12, "{imax}");
        assert!(t_at(shift, &side) > t_at(shift, &none) + 1e-3);
    }

    #[test]
    fn side_channel_conserves_integrated_absorption() {
        let c = cfg();
        let side = SideChannel::default();
        // Δ̃ = tan u maps the whole real line onto (−π/2, π/2).
        let n = 400_000;
        let integrate = |s: &SideChannel| {
            let h = std::f64::consts::PI / n as f64;
            (1..n)
                .map(|j| {
                    let u = -FRAC_PI_2 + j as f64 * h;
                    let dp = u.tan() * c.gamma / 2.0;
                    let jac = 1.0 / u.cos().powi(2);
                    let w = if j % 2 == 1 { 4.0 } else { 2.0 };
                    w * composite_susceptibility(&c, 3.4, &Detunings::new(dp, 0.0), s).unwrap().0.im * jac
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let with = integrate(&side);
        let without = integrate(&SideChannel { weight: 0.0, ..side });
        assert!((with - without).abs() < 1e-6 * without.abs(), "{with} {without}");
    }

    #[test]
    fn zero_jitter_is_identity() {
        let c = cfg();
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 1e5).collect();
        let f = |d: &Detunings| transmission(&c, 3.4, d);
        let out = jitter_broadened_spectrum(f, &grid, 0.0, &Jitter { fwhm: 0.0, nodes: 21 }).unwrap();
        for (dp, t) in grid.iter().zip(out) {
            assert_eq!(t, transmission(&c, 3.4, &Detunings::new(*dp, 0.0)).unwrap());
        }
    }

    #[test]
    fn jitter_makes_the_window_shallower_and_wider() {
        let c = cfg();
        let step = mhz_to_angular(0.005);
        let grid: Vec<f64> = (-400..=400).map(|i| i as f64 * step).collect();
        let f = |d: &Detunings| transmission(&c, 3.4, d);
        let sharp = jitter_broadened_spectrum(f, &grid, 0.0, &Jitter { fwhm: 0.0, nodes: 21 }).unwrap();
        let broad = jitter_broadened_spectrum(f, &grid, 0.0, &Jitter::default()).unwrap();
        let peak = |s: &[f64]| s.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak(&broad) < peak(&sharp));
        // width of the transparency feature at half its height above the wings
        let width = |s: &[f64]| {
            let base = s[0].min(s[s.len() - 1]);
            let half = base + (peak(s) - base) / 2.0;
            s.iter().filter(|&&v| v > half).count()
        };
        assert!(width(&broad) > width(&sharp));
    }

    #[test]
    fn jitter_preserves_integrated_absorption() {
        let c = cfg();
        let step = mhz_to_angular(0.01);
        let grid: Vec<f64> = (-6000..=6000).map(|i| i as f64 * step).collect();
        let f = |d: &Detunings| transmission(&c, 3.4, d).map(|t| 1.0 - t);
        let sharp: f64 =
            jitter_broadened_spectrum(f, &grid, 0.0, &Jitter { fwhm: 0.0, nodes: 21 }).unwrap().iter().sum();
        let broad: f64 = jitter_broadened_spectrum(f, &grid, 0.0, &Jitter::default()).unwrap().iter().sum();
        assert!((sharp - broad).abs() < 1e-3 * sharp, "{sharp} {broad}");
    }

    #[test]
    fn jitter_reports_underresolved_quadrature() {
        let c = cfg();
        // A very broad jitter sampled by two nodes cannot resolve the window.
        let j = Jitter { fwhm: mhz_to_angular(5.0), nodes: 2 };
        let f = |d: &Detunings| transmission(&c, 3.4, d);
        let err = jitter_broadened_spectrum(f, &[0.0], 0.0, &j).unwrap_err();
        assert!(matches!(err, VitError::NonConvergence(_)));
    }
}
