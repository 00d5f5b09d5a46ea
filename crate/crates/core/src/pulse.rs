//! Time-domain probe pulses pushed through a frequency-domain transfer
//! function.
//!
//! Pulses are complex envelopes on a uniform grid. The carrier detuning is
//! kept out of the samples and added back when the transfer function is
//! evaluated, so the grid only has to resolve the envelope. Fields follow the
//! e^{−iωt} convention: multiplying by e^{iωτ} delays the pulse by τ.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Result, VitError};

/// How `PulseSpec::duration` is measured on the intensity profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthConvention {
    #[default]
    IntensityFwhm,
    /// Full width at 1/e² of the peak intensity.
    IntensityOneOverESquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Pulse duration T_P (s).
    pub duration: f64,
    /// Carrier detuning from the atomic line (rad/s).
    pub carrier_detuning: f64,
    #[serde(default)]
    pub width: WidthConvention,
}

impl PulseSpec {
    pub fn gaussian(duration: f64) -> Self {
        PulseSpec { duration, carrier_detuning: 0.0, width: WidthConvention::IntensityFwhm }
    }

    /// Intensity FWHM regardless of how `duration` was specified.
    pub fn intensity_fwhm(&self) -> f64 {
        match self.width {
            WidthConvention::IntensityFwhm => self.duration,
            // exp(−8t²/W²) = 1/2 at t = W√(ln2/8)
            WidthConvention::IntensityOneOverESquared => self.duration * (LN_2 / 2.0).sqrt(),
        }
    }

    /// Field envelope at time `t` relative to the pulse centre, peak 1.
    pub fn envelope(&self, t: f64) -> f64 {
        let fwhm = self.intensity_fwhm();
        (-2.0 * LN_2 * t * t / (fwhm * fwhm)).exp()
    }

    /// FWHM of the intensity spectrum in Hz, 4 ln2 / (2π T_FWHM).
    pub fn spectral_fwhm_hz(&self) -> f64 {
        4.0 * LN_2 / (2.0 * PI * self.intensity_fwhm())
    }
}

/// Uniform time grid with a power-of-two number of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub samples: usize,
    /// Sample interval (s).
    pub dt: f64,
}

pub const DEFAULT_SAMPLES: usize = 1 << 14;
pub const DEFAULT_SPAN_FACTOR: f64 = 16.0;

impl GridConfig {
    /// 2¹⁴ samples spanning 16 pulse durations.
    pub fn for_pulse(spec: &PulseSpec) -> Self {
        GridConfig {
            samples: DEFAULT_SAMPLES,
            dt: DEFAULT_SPAN_FACTOR * spec.intensity_fwhm() / DEFAULT_SAMPLES as f64,
        }
    }

    /// Smallest power-of-two grid with step `dt` covering at least `span`.
    pub fn from_span(span: f64, dt: f64) -> Result<Self> {
        ensure_positive("span", span)?;
        ensure_positive("dt", dt)?;
        let needed = (span / dt).ceil() as usize;
        Ok(GridConfig { samples: needed.max(2).next_power_of_two(), dt })
    }

    pub fn span(&self) -> f64 {
        self.samples as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPulse {
    /// Time of the first sample (s).
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Complex64>,
    /// Carrier detuning (rad/s) the envelope rides on.
    pub carrier_detuning: f64,
}

impl SampledPulse {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn scaled(&self, factor: Complex64) -> SampledPulse {
        SampledPulse { samples: self.samples.iter().map(|s| s * factor).collect(), ..self.clone() }
    }

    fn same_grid(&self, other: &SampledPulse) -> bool {
        self.len() == other.len() && self.dt == other.dt && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
    }
}

/// Gaussian pulse centred on a grid symmetric about t = 0.
pub fn make_gaussian_pulse(spec: &PulseSpec, grid: &GridConfig) -> Result<SampledPulse> {
    ensure_positive("pulse duration", spec.duration)?;
    ensure_finite("carrier detuning", spec.carrier_detuning)?;
    ensure_positive("dt", grid.dt)?;
    if grid.samples < 2 || !grid.samples.is_power_of_two() {
        return Err(VitError::Grid(format!("sample count must be a power of two, got {}", grid.samples)));
    }
    let fwhm = spec.intensity_fwhm();
    if grid.span() < 8.0 * fwhm {
        return Err(VitError::Grid(format!(
            "grid spans {:e} s, shorter than 8 pulse widths ({:e} s)",
            grid.span(),
            8.0 * fwhm
        )));
    }
    let nyquist = 1.0 / (2.0 * grid.dt);
    if nyquist < 10.0 * spec.spectral_fwhm_hz() {
        return Err(VitError::Grid(format!(
            "grid too coarse: Nyquist {nyquist:e} Hz is under 10x the pulse bandwidth {:e} Hz",
            spec.spectral_fwhm_hz()
        )));
    }
    let t0 = -((grid.samples - 1) as f64) * grid.dt / 2.0;
    let samples = (0..grid.samples).map(|i| Complex64::new(spec.envelope(t0 + i as f64 * grid.dt), 0.0)).collect();
    Ok(SampledPulse { t0, dt: grid.dt, samples, carrier_detuning: spec.carrier_detuning })
}

/// Output spectral amplitude tolerated at the band edge, relative to the
/// input spectral peak.
pub const BAND_EDGE_TOLERANCE: f64 = 1e-6;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }
}

/// Physical detuning offset of FFT bin `k` for an `n`-point grid. With the
/// e^{−iωt} convention the forward transform's bin k carries ω = −2πf_k.
fn bin_detuning(k: usize, n: usize, dt: f64) -> f64 {
    let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    -2.0 * PI * signed / (n as f64 * dt)
}

fn propagate_with(plans: &Plans, pulse: &SampledPulse, medium: &dyn Fn(f64) -> Complex64) -> Result<SampledPulse> {
    let n = pulse.len();
    let mut buf = pulse.samples.clone();
    plans.forward.process(&mut buf);
    let input_peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (k, c) in buf.iter_mut().enumerate() {
        let t = medium(pulse.carrier_detuning + bin_detuning(k, n, pulse.dt));
        if !(t.re.is_finite() && t.im.is_finite()) {
            return Err(VitError::domain(format!("transfer function is not finite at bin {k}")));
        }
        *c *= t;
    }
    if input_peak > 0.0 {
        for k in [n / 2 - 1, n / 2, n / 2 + 1] {
            let edge = buf[k].norm() / input_peak;
            if edge > BAND_EDGE_TOLERANCE {
                return Err(VitError::BandCoverage(format!(
                    "output spectrum reaches {edge:e} of its peak at the band edge; refine dt"
                )));
            }
        }
    }
    plans.inverse.process(&mut buf);
    let norm = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    Ok(SampledPulse { samples: buf, ..pulse.clone() })
}

fn check_pulse(pulse: &SampledPulse) -> Result<()> {
    if pulse.len() < 2 || !pulse.len().is_power_of_two() {
        return Err(VitError::Grid(format!("sample count must be a power of two, got {}", pulse.len())));
    }
    ensure_positive("dt", pulse.dt)
}

/// Multiply the pulse spectrum by `medium(ω)`, where ω is the detuning of
/// each spectral component from the atomic line.
pub fn propagate<F>(pulse: &SampledPulse, medium: F) -> Result<SampledPulse>
where
    F: Fn(f64) -> Complex64,
{
    check_pulse(pulse)?;
    propagate_with(&Plans::new(pulse.len()), pulse, &medium)
}

/// Intensity-weighted average of the outputs of several media, for an
/// ensemble of independent paths. The returned envelope is √(Σ wⱼ|Eⱼ|²) and
/// carries no phase.
pub fn propagate_incoherent<F>(pulse: &SampledPulse, members: &[(f64, F)]) -> Result<SampledPulse>
where
    F: Fn(f64) -> Complex64,
{
    check_pulse(pulse)?;
    if members.is_empty() {
        return Err(VitError::domain("incoherent propagation needs at least one member"));
    }
    let plans = Plans::new(pulse.len());
    let mut intensity = vec![0.0; pulse.len()];
    for (weight, medium) in members {
        if !(weight.is_finite() && *weight >= 0.0) {
            return Err(VitError::domain(format!("ensemble weight must be >= 0, got {weight}")));
        }
        let out = propagate_with(&plans, pulse, medium)?;
        for (acc, s) in intensity.iter_mut().zip(&out.samples) {
            *acc += weight * s.norm_sqr();
        }
    }
    Ok(SampledPulse {
        samples: intensity.into_iter().map(|i| Complex64::new(i.sqrt(), 0.0)).collect(),
        ..pulse.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// Shift of the intensity centroid (s).
    pub centroid: f64,
    /// Shift of the interpolated intensity maximum (s).
    pub peak: f64,
}

fn centroid(p: &SampledPulse) -> Result<f64> {
    let (mut m0, mut m1) = (0.0, 0.0);
    for (i, s) in p.samples.iter().enumerate() {
        let w = s.norm_sqr();
        m0 += w;
        m1 += w * p.time(i);
    }
    if !(m0 > 0.0) {
        return Err(VitError::Degenerate("pulse has zero energy".into()));
    }
    Ok(m1 / m0)
}

/// Parabolic vertex through the maximum sample and its neighbours, fitted to
/// ln|E|² (exact for Gaussian peaks) and falling back to |E|².
fn peak_time(p: &SampledPulse) -> Result<f64> {
    let intensity: Vec<f64> = p.samples.iter().map(|s| s.norm_sqr()).collect();
    let (imax, &vmax) = intensity.iter().enumerate().fold((0, &f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    if !(vmax > 0.0) {
        return Err(VitError::Degenerate("pulse has zero energy".into()));
    }
    if imax == 0 || imax + 1 == intensity.len() {
        return Ok(p.time(imax));
    }
    let (l, c, r) = (intensity[imax - 1], intensity[imax], intensity[imax + 1]);
    let (l, c, r) = if l > 0.0 && r > 0.0 { (l.ln(), c.ln(), r.ln()) } else { (l, c, r) };
    let curvature = l - 2.0 * c + r;
    let offset = if curvature < 0.0 { 0.5 * (l - r) / curvature } else { 0.0 };
    Ok(p.time(imax) + offset * p.dt)
}

/// Delay of `output` relative to `input` by two estimators.
pub fn extract_delay(input: &SampledPulse, output: &SampledPulse) -> Result<DelayEstimate> {
    if !input.same_grid(output) {
        return Err(VitError::Grid("input and output pulses are on different grids".into()));
    }
    Ok(DelayEstimate { centroid: centroid(output)? - centroid(input)?, peak: peak_time(output)? - peak_time(input)? })
}

/// Energy ratio Σ|out|²/Σ|in|².
pub fn attenuation(input: &SampledPulse, output: &SampledPulse) -> Result<f64> {
    if !input.same_grid(output) {
        return Err(VitError::Grid("input and output pulses are on different grids".into()));
    }
    let e_in = input.energy();
    if !(e_in > 0.0) {
        return Err(VitError::Degenerate("input pulse has zero energy".into()));
    }
    Ok(output.energy() / e_in)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub delay_centroid: f64,
    pub delay_peak: f64,
    pub energy_transmission: f64,
    pub output: SampledPulse,
}

impl PropagationResult {
    pub fn from_pulses(input: &SampledPulse, output: SampledPulse) -> Result<Self> {
        let delay = extract_delay(input, &output)?;
        let energy_transmission = attenuation(input, &output)?;
        Ok(PropagationResult { delay_centroid: delay.centroid, delay_peak: delay.peak, energy_transmission, output })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_pulse() -> (PulseSpec, SampledPulse) {
        let spec = PulseSpec::gaussian(1.73e-6);
        let grid = GridConfig::for_pulse(&spec);
        (spec, make_gaussian_pulse(&spec, &grid).unwrap())
    }

    fn measured_fwhm(p: &SampledPulse) -> f64 {
        let intensity: Vec<f64> = p.samples.iter().map(|s| s.norm_sqr()).collect();
        let half = intensity.iter().cloned().fold(0.0, f64::max) / 2.0;
        let mut crossings = vec![];
        for i in 1..intensity.len() {
            let (a, b) = (intensity[i - 1] - half, intensity[i] - half);
            if a.signum() != b.signum() {
                crossings.push(p.time(i - 1) + p.dt * a / (a - b));
            }
        }
        crossings[crossings.len() - 1] - crossings[0]
    }

    #[test]
    fn gaussian_pulse_shape() {
        let spec = PulseSpec::gaussian(1.73e-6);
        let grid = GridConfig::from_span(16e-6, 10e-9).unwrap();
        assert_eq!(grid.samples, 2048);
        let p = make_gaussian_pulse(&spec, &grid).unwrap();
        assert!((measured_fwhm(&p) - 1.73e-6).abs() < grid.dt);
        assert_eq!(spec.envelope(0.0), 1.0);
        let peak = p.samples.iter().map(|s| s.re).fold(0.0, f64::max);
        assert!(peak <= 1.0 && peak > 1.0 - 1e-4);
        let n = p.len();
        for i in 0..n {
            assert!((p.samples[i] - p.samples[n - 1 - i]).norm() < 1e-12);
        }
    }

    #[test]
    fn one_over_e_squared_width() {
        let spec = PulseSpec { width: WidthConvention::IntensityOneOverESquared, ..PulseSpec::gaussian(2e-6) };
        let t = spec.duration / 2.0;
        assert!((spec.envelope(t).powi(2) - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn grid_checks() {
        let spec = PulseSpec::gaussian(1.73e-6);
        let short = GridConfig { samples: 1024, dt: 10e-9 };
        assert!(matches!(make_gaussian_pulse(&spec, &short), Err(VitError::Grid(_))));
        let coarse = GridConfig { samples: 64, dt: 1e-6 };
        assert!(matches!(make_gaussian_pulse(&spec, &coarse), Err(VitError::Grid(_))));
        let odd = GridConfig { samples: 3000, dt: 10e-9 };
        assert!(matches!(make_gaussian_pulse(&spec, &odd), Err(VitError::Grid(_))));
    }

    #[test]
    fn identity_medium() {
        let (_, p) = reference_pulse();
        let out = propagate(&p, |_| Complex64::new(1.0, 0.0)).unwrap();
        for (a, b) in p.samples.iter().zip(&out.samples) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((attenuation(&p, &out).unwrap() - 1.0).abs() < 1e-12);
        let d = extract_delay(&p, &p).unwrap();
        assert_eq!((d.centroid, d.peak), (0.0, 0.0));
    }

    #[test]
    fn pure_delay_line() {
        let (_, p) = reference_pulse();
        let tau = 100e-9;
        let out = propagate(&p, |w| Complex64::new(0.0, w * tau).exp()).unwrap();
        let d = extract_delay(&p, &out).unwrap();
        assert!((d.centroid - tau).abs() < p.dt / 100.0, "{}", d.centroid);
        assert!((d.peak - tau).abs() < p.dt / 100.0, "{}", d.peak);
    }

    #[test]
    fn flat_absorber() {
        let (_, p) = reference_pulse();
        let amp = (-0.2f64).exp();
        let out = propagate(&p, |_| Complex64::new(amp, 0.0)).unwrap();
        assert!((attenuation(&p, &out).unwrap() - (-0.4f64).exp()).abs() < 1e-12);
        assert!((attenuation(&p, &out).unwrap() - 0.670).abs() < 5e-4);
    }

    #[test]
    fn chirped_medium_reports_both_estimators() {
        let (spec, p) = reference_pulse();
        // quadratic spectral phase plus a linear asymmetric gain slope
        let scale = 2.0 * PI * spec.spectral_fwhm_hz();
        let out = propagate(&p, |w| {
            let x = w / scale;
            Complex64::new(-0.3 * x, 3.0 * x * x + 0.5 * x.powi(3)).exp().scale((-0.01 * x * x).exp())
        })
        .unwrap();
        let d = extract_delay(&p, &out).unwrap();
        assert!(d.centroid.is_finite() && d.peak.is_finite());
        assert!((d.centroid - d.peak).abs() > p.dt, "{d:?}");
    }

    #[test]
    fn zero_energy_is_rejected() {
        let (_, p) = reference_pulse();
        let zero = p.scaled(Complex64::new(0.0, 0.0));
        assert!(matches!(extract_delay(&p, &zero), Err(VitError::Degenerate(_))));
        assert!(matches!(attenuation(&zero, &p), Err(VitError::Degenerate(_))));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let (_, p) = reference_pulse();
        let other = SampledPulse { dt: p.dt * 2.0, ..p.clone() };
        assert!(extract_delay(&p, &other).is_err());
    }

    #[test]
    fn band_edge_content_is_flagged() {
        // a single-sample spike has a flat spectrum reaching the band edge
        let mut samples = vec![Complex64::new(0.0, 0.0); 256];
        samples[128] = Complex64::new(1.0, 0.0);
        let p = SampledPulse { t0: 0.0, dt: 1e-9, samples, carrier_detuning: 0.0 };
        let err = propagate(&p, |_| Complex64::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, VitError::BandCoverage(_)));
    }

    #[test]
    fn linearity_is_exact_for_power_of_two_scaling() {
        let (_, p) = reference_pulse();
        let medium = |w: f64| Complex64::new(-1e-14 * w * w, 1e-7 * w).exp();
        let out = propagate(&p, medium).unwrap();
        let out2 = propagate(&p.scaled(Complex64::new(2.0, 0.0)), medium).unwrap();
        for (a, b) in out.samples.iter().zip(&out2.samples) {
            assert_eq!(a * 2.0, *b);
        }
    }

    #[test]
    fn incoherent_average_of_identical_members_is_coherent_result() {
        let (_, p) = reference_pulse();
        let medium = |w: f64| Complex64::new(0.0, w * 50e-9).exp().scale(0.9);
        let coherent = propagate(&p, medium).unwrap();
        let inc = propagate_incoherent(&p, &[(0.25, medium), (0.75, medium)]).unwrap();
        for (a, b) in coherent.samples.iter().zip(&inc.samples) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }
}
