//! Transparency Θ = (T′ − T)/(1 − T): T′ is the transmission at two-photon
//! resonance with the cavity, T = e^{−OD} the transmission without it.

use super::vit::{VitFitSpec, VitParam};
use super::{FitResult, Measured, Spectrum};
use crate::error::{Result, VitError};
use crate::physics::Detunings;

/// Θ with linear error propagation from independent T′ and T.
pub fn transparency_with_error(t_with: Measured, t_without: Measured) -> Result<Measured> {
    let (tp, t) = (t_with.value, t_without.value);
    if !(tp.is_finite() && t.is_finite()) {
        return Err(VitError::domain("transmissions must be finite"));
    }
    if !(t < 1.0) {
        return Err(VitError::Degenerate(format!("transparency undefined without absorption (T = {t})")));
    }
    let theta = (tp - t) / (1.0 - t);
    let d_tp = 1.0 / (1.0 - t);
    let d_t = (tp - 1.0) / ((1.0 - t) * (1.0 - t));
    let err = ((d_tp * t_with.error).powi(2) + (d_t * t_without.error).powi(2)).sqrt();
    Ok(Measured::new(theta, err))
}

/// Θ from the measured point closest to Δ = δ, with T = e^{−OD}.
pub fn extract_transparency(d1: &Spectrum, delta_cavity: f64, od: Measured) -> Result<Measured> {
    if !(od.value >= 0.0 && od.error >= 0.0) {
        return Err(VitError::domain("optical depth and its error must be >= 0"));
    }
    let i = d1.nearest(delta_cavity).ok_or_else(|| VitError::domain("empty spectrum"))?;
    let t = (-od.value).exp();
    transparency_with_error(Measured::new(d1.value[i], d1.sigma[i]), Measured::new(t, t * od.error))
}

/// Θ at δ from fitted parameters, propagating the fit covariance.
pub fn transparency_from_fit(fit: &FitResult, spec: &VitFitSpec, delta_cavity: f64) -> Result<Measured> {
    let theta_at = |values: &[f64]| -> Result<f64> {
        let mut p = spec.params_from(fit);
        for (fp, v) in fit.params.iter().zip(values) {
            if let Some(q) = VitParam::from_name(&fp.name) {
                p.set(q, *v);
            }
        }
        let model = spec.model.with_od(p.od)?;
        let delta = delta_cavity + p.delta_offset;
        let tp = model.transmission(p.eta_eff, &Detunings::new(delta, delta))?;
        Ok(transparency_with_error(Measured::exact(tp), Measured::exact((-p.od).exp()))?.value)
    };
    let x: Vec<f64> = fit.params.iter().map(|p| p.value).collect();
    let theta = theta_at(&x)?;
    let mut grad = vec![0.0; x.len()];
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1.0);
        let (mut up, mut down) = (x.clone(), x.clone());
        up[j] += h;
        down[j] -= h;
        if down[j] < 0.0 && VitParam::from_name(&fit.params[j].name).is_some_and(VitParam::nonnegative) {
            // one-sided at a lower bound
            grad[j] = (theta_at(&up)? - theta) / h;
        } else {
            grad[j] = (theta_at(&up)? - theta_at(&down)?) / (2.0 * h);
        }
    }
    let mut var = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            var += grad[i] * fit.covariance[i][j] * grad[j];
        }
    }
    Ok(Measured::new(theta, var.max(0.0).sqrt()))
}
