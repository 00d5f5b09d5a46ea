//! Lorentzian line fit to an absorption spectrum.
//!
//! The fit runs on the absorbance −ln T rather than on T: for an optically
//! thin or thick two-level medium the absorbance is an exact Lorentzian,
//! while T itself is a Lorentzian only to first order in the optical depth.

use super::lm::{minimize, LmOptions, LmParameter};
use super::{FitResult, Spectrum};
use crate::error::{Result, VitError};
use crate::units::angular_to_mhz;

pub const MIN_POINTS: usize = 8;

fn lorentzian(x: f64, center: f64, fwhm: f64, depth: f64, baseline: f64) -> f64 {
    let hw = fwhm / 2.0;
    baseline + depth * hw * hw / ((x - center).powi(2) + hw * hw)
}

/// Fit center, FWHM (both MHz), peak absorbance and baseline absorbance to
/// a transmission spectrum.
pub fn fit_lorentzian(spectrum: &Spectrum) -> Result<FitResult> {
    fit_lorentzian_with(spectrum, &LmOptions::default())
}

pub fn fit_lorentzian_with(spectrum: &Spectrum, opts: &LmOptions) -> Result<FitResult> {
    if spectrum.len() < MIN_POINTS {
        return Err(VitError::domain(format!("a line fit needs at least {MIN_POINTS} points, got {}", spectrum.len())));
    }
    if spectrum.value.iter().any(|t| !(*t > 0.0)) {
        return Err(VitError::domain("absorbance is undefined where the transmission is not positive"));
    }
    let x: Vec<f64> = spectrum.delta_probe.iter().map(|d| angular_to_mhz(*d)).collect();
    let a: Vec<f64> = spectrum.value.iter().map(|t| -t.ln()).collect();
    let s: Vec<f64> = spectrum.sigma.iter().zip(&spectrum.value).map(|(s, t)| s / t).collect();

    // Deterministic start: baseline from the outermost points, peak at the
    // largest absorbance, width from the half-maximum crossings.
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let edge = [order[0], order[1], order[x.len() - 2], order[x.len() - 1]];
    let baseline0 = edge.iter().map(|&i| a[i]).sum::<f64>() / 4.0;
    let (imax, amax) = a.iter().enumerate().fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let depth0 = amax - baseline0;
    let mut typical_sigma = s.clone();
    typical_sigma.sort_by(f64::total_cmp);
    let median_sigma = typical_sigma[typical_sigma.len() / 2];
    if !(depth0 > 5.0 * median_sigma) {
        return Err(VitError::Degenerate(format!(
            "no absorption line above the noise (peak {depth0:e}, noise {median_sigma:e}); center is unidentifiable"
        )));
    }
    let above: Vec<f64> = order.iter().filter(|&&i| a[i] - baseline0 > depth0 / 2.0).map(|&i| x[i]).collect();
    let span = x[order[x.len() - 1]] - x[order[0]];
    let step = span / (x.len() - 1) as f64;
    let fwhm0 = (above[above.len() - 1] - above[0]).max(step);

    let specs = [
        LmParameter { typical: fwhm0, ..LmParameter::new("center_MHz", x[imax]) },
        LmParameter { typical: fwhm0, ..LmParameter::new("fwhm_MHz", fwhm0).nonnegative() },
        LmParameter::new("depth", depth0),
        LmParameter::new("baseline", baseline0),
    ];
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        Ok((0..x.len()).map(|i| (lorentzian(x[i], p[0], p[1], p[2], p[3]) - a[i]) / s[i]).collect())
    };
    let out = minimize(residuals, &specs, opts)?;
    FitResult::from_outcome(&specs, &out)
}
