//! Conversions between the angular units used internally and the ordinary
//! units used in files and on the command line.
//!
//! Every frequency, detuning and linewidth inside the library is an angular
//! frequency in rad/s. Files and flags carry MHz, μm, μs and ns. Convert once,
//! at the boundary, with the helpers below.

use std::f64::consts::PI;

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Ordinary frequency in MHz to angular frequency in rad/s.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e6
}

/// Angular frequency in rad/s to ordinary frequency in MHz.
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

pub fn um_to_m(um: f64) -> f64 {
    um * 1e-6
}

pub fn m_to_um(m: f64) -> f64 {
    m * 1e6
}

pub fn us_to_s(us: f64) -> f64 {
    us * 1e-6
}

pub fn s_to_us(s: f64) -> f64 {
    s * 1e6
}

pub fn s_to_ns(s: f64) -> f64 {
    s * 1e9
}

/// FWHM of a Gaussian in units of its standard deviation, 2√(2 ln 2).
pub fn gaussian_fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Photon flux (photons/s) carried by a beam of optical power `power` (W)
/// at vacuum wavelength `wavelength` (m).
pub fn photon_flux(power: f64, wavelength: f64) -> f64 {
    power * wavelength / (PLANCK * SPEED_OF_LIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mhz_round_trip() {
        for f in [0.0, 0.173, 5.2, -2.2, 1e3] {
            let back = angular_to_mhz(mhz_to_angular(f));
            assert!((back - f).abs() <= 1e-15 * f.abs().max(1.0));
        }
        assert!((mhz_to_angular(1.0) - 2.0 * PI * 1e6).abs() < 1e-6);
    }

    #[test]
    fn length_and_time_round_trip() {
        assert!((m_to_um(um_to_m(35.0)) - 35.0).abs() < 1e-12);
        assert!((s_to_us(us_to_s(1.73)) - 1.73).abs() < 1e-12);
        assert!((s_to_ns(25e-9) - 25.0).abs() < 1e-9);
    }

    #[test]
    fn fwhm_factor() {
        assert!((gaussian_fwhm_per_sigma() - 2.354_82).abs() < 1e-5);
    }

    #[test]
    fn probe_flux_at_220_femtowatt() {
        // 220 fW at 852 nm is just under a million photons per second.
        let flux = photon_flux(220e-15, 852e-9);
        assert!((flux - 9.436e5).abs() < 1e3, "{flux}");
    }
}
