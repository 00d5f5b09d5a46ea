//! Synthetic photon counts for spectrum scans: transmission on D1, cavity
//! emission on D2, Poisson shot noise only.
//!
//! Noise streams are ChaCha8 seeded with `seed_from_u64(rng_seed)`, with
//! the stream number set to the global index of the grid point (cavity
//! detunings outer, probe detunings inner). Each point draws D1 first, then
//! D2, from `rand_distr::Poisson`. Points are therefore independent of the
//! order in which they are generated.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, Result, VitError};
use crate::model::VitModel;
use crate::physics::{resonant_transmission, Detunings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    /// Cavity detunings δ (rad/s).
    pub delta_cavity_list: Vec<f64>,
    /// Probe detunings Δ (rad/s).
    pub probe_grid: Vec<f64>,
    /// Mean probe photons per second.
    pub photon_flux: f64,
    /// Integration time per point (s).
    pub dwell: f64,
    pub efficiency_d1: f64,
    pub efficiency_d2: f64,
    pub rng_seed: u64,
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("dwell", self.dwell)?;
        ensure_nonnegative("photon flux", self.photon_flux)?;
        for (name, eff) in [("efficiency_d1", self.efficiency_d1), ("efficiency_d2", self.efficiency_d2)] {
            if !(0.0..=1.0).contains(&eff) {
                return Err(VitError::domain(format!("{name} must lie in [0, 1], got {eff}")));
            }
        }
        if self.delta_cavity_list.is_empty() || self.probe_grid.is_empty() {
            return Err(VitError::domain("scan plan needs at least one cavity and one probe detuning"));
        }
        if self.delta_cavity_list.iter().chain(&self.probe_grid).any(|d| !d.is_finite()) {
            return Err(VitError::domain("scan detunings must be finite"));
        }
        Ok(())
    }

    /// Photons sent per point, flux·dwell.
    pub fn photons_per_point(&self) -> f64 {
        self.photon_flux * self.dwell
    }

    /// Expected D1 counts for unit transmission.
    pub fn norm_d1(&self) -> f64 {
        self.photons_per_point() * self.efficiency_d1
    }

    /// Expected D2 counts for unit emission probability.
    pub fn norm_d2(&self) -> f64 {
        self.photons_per_point() * self.efficiency_d2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub delta_probe: f64,
    pub delta_cavity: f64,
    pub counts_d1: u64,
    pub counts_d2: u64,
    pub expected_d1: f64,
    pub expected_d2: f64,
}

/// All records sharing one cavity detuning, in probe-grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanBlock {
    pub delta_cavity: f64,
    pub records: Vec<CountRecord>,
}

/// Poisson draw; a zero mean gives zero counts.
pub fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    ensure_nonnegative("Poisson mean", mean)?;
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| VitError::domain(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Noise generator for grid point `index` of a scan seeded with `seed`.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Expected and noisy counts over the plan. The D2 channel uses emission
/// scale 1; `efficiency_d2` carries the overall detection factor.
pub fn generate_scan(model: &VitModel, eta: f64, plan: &ScanPlan) -> Result<Vec<ScanBlock>> {
    plan.validate()?;
    let mut blocks = Vec::with_capacity(plan.delta_cavity_list.len());
    let mut index = 0u64;
    for &delta_cavity in &plan.delta_cavity_list {
        let mut records = Vec::with_capacity(plan.probe_grid.len());
        for &delta_probe in &plan.probe_grid {
            let det = Detunings::new(delta_probe, delta_cavity);
            let expected_d1 = plan.norm_d1() * model.transmission(eta, &det)?;
            let expected_d2 = plan.norm_d2() * model.emission(eta, &det, 1.0)?;
            let mut rng = point_rng(plan.rng_seed, index);
            let counts_d1 = poisson_draw(expected_d1, &mut rng)?;
            let counts_d2 = poisson_draw(expected_d2, &mut rng)?;
            records.push(CountRecord { delta_probe, delta_cavity, counts_d1, counts_d2, expected_d1, expected_d2 });
            index += 1;
        }
        blocks.push(ScanBlock { delta_cavity, records });
    }
    Ok(blocks)
}

/// Photons absorbed on double resonance, flux·duration·(1 − e^{−OD/(η+1)}).
pub fn absorbed_photon_budget(od: f64, eta: f64, flux: f64, duration: f64) -> Result<f64> {
    ensure_nonnegative("photon flux", flux)?;
    ensure_nonnegative("duration", duration)?;
    Ok(flux * duration * (1.0 - resonant_transmission(od, eta)?))
}

/// Photons absorbed over a scan, Σ flux·dwell·(1 − T(Δ, δ)).
pub fn absorbed_photon_budget_scan(model: &VitModel, eta: f64, plan: &ScanPlan) -> Result<f64> {
    plan.validate()?;
    let mut total = 0.0;
    for &delta_cavity in &plan.delta_cavity_list {
        for &delta_probe in &plan.probe_grid {
            let t = model.transmission(eta, &Detunings::new(delta_probe, delta_cavity))?;
            total += plan.photons_per_point() * (1.0 - t);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::PhysicalConfig;
    use crate::units::{mhz_to_angular, photon_flux};

    fn plan() -> ScanPlan {
        ScanPlan {
            delta_cavity_list: vec![mhz_to_angular(0.5), mhz_to_angular(-2.2)],
            probe_grid: (-40..=40).map(|i| mhz_to_angular(0.25 * i as f64)).collect(),
            photon_flux: 1e6,
            dwell: 2e-3,
            efficiency_d1: 0.4,
            efficiency_d2: 0.1,
            rng_seed: 7,
        }
    }

    fn model() -> VitModel {
        VitModel::ideal(PhysicalConfig::default()).unwrap()
    }

    #[test]
    fn zero_flux_gives_zero_counts() {
        let p = ScanPlan { photon_flux: 0.0, ..plan() };
        for block in generate_scan(&model(), 3.4, &p).unwrap() {
            for r in block.records {
                assert_eq!((r.counts_d1, r.counts_d2), (0, 0));
                assert_eq!((r.expected_d1, r.expected_d2), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn empty_medium_counts_sit_in_poisson_band() {
        let cfg = PhysicalConfig { od: 0.0, ..Default::default() };
        let p = ScanPlan { photon_flux: 1e9, dwell: 1e-3, efficiency_d1: 1.0, ..plan() };
        let records: Vec<CountRecord> = generate_scan(&VitModel::ideal(cfg).unwrap(), 3.4, &p)
            .unwrap()
            .into_iter()
            .flat_map(|b| b.records)
            .collect();
        let n = records.len() as f64;
        let mut inside = 0.0;
        for r in &records {
            assert_eq!(r.expected_d1, 1e6);
            assert_eq!(r.counts_d2, 0);
            if (r.counts_d1 as f64 - 1e6).abs() < 3e3 {
                inside += 1.0;
            }
        }
        // 99.73% of points inside 3 sigma, with room for binomial scatter
        assert!(inside / n > 0.98, "{inside} of {n}");
        let mean = records.iter().map(|r| r.counts_d1 as f64).sum::<f64>() / n;
        assert!((mean - 1e6).abs() < 3e3 / n.sqrt(), "{mean}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = generate_scan(&model(), 3.4, &plan()).unwrap();
        let b = generate_scan(&model(), 3.4, &plan()).unwrap();
        assert_eq!(a, b);
        let c = generate_scan(&model(), 3.4, &ScanPlan { rng_seed: 8, ..plan() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn point_streams_do_not_depend_on_scan_shape() {
        let full = generate_scan(&model(), 3.4, &plan()).unwrap();
        let first_only = ScanPlan { delta_cavity_list: vec![plan().delta_cavity_list[0]], ..plan() };
        let part = generate_scan(&model(), 3.4, &first_only).unwrap();
        assert_eq!(full[0], part[0]);
    }

    #[test]
    fn poisson_moments() {
        let mean = 37.5;
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|i| poisson_draw(mean, &mut point_rng(11, i)).unwrap() as f64).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - mean).abs() < 3.0 * (mean / n as f64).sqrt(), "mean {m}");
        let ratio = var / m;
        assert!((0.97..=1.03).contains(&ratio), "var/mean {ratio}");
    }

    #[test]
    fn transmission_at_two_photon_resonance_grows_with_eta() {
        let delta = mhz_to_angular(0.5);
        let p = ScanPlan { delta_cavity_list: vec![delta], probe_grid: vec![delta], ..plan() };
        let mut last = 0.0;
        for eta in [0.0, 0.5, 1.0, 3.4, 7.2, 20.0] {
            let e = generate_scan(&model(), eta, &p).unwrap()[0].records[0].expected_d1;
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn invalid_plans_are_rejected() {
        assert!(generate_scan(&model(), 1.0, &ScanPlan { dwell: 0.0, ..plan() }).is_err());
        assert!(generate_scan(&model(), 1.0, &ScanPlan { photon_flux: -1.0, ..plan() }).is_err());
        assert!(generate_scan(&model(), 1.0, &ScanPlan { efficiency_d2: 1.5, ..plan() }).is_err());
        assert!(generate_scan(&model(), 1.0, &ScanPlan { probe_grid: vec![], ..plan() }).is_err());
    }

    #[test]
    fn photon_budget() {
        assert_eq!(absorbed_photon_budget(0.0, 3.0, 1e6, 1e-3).unwrap(), 0.0);
        let one = absorbed_photon_budget(0.4, 1.0, 1e6, 1e-6).unwrap();
        let two = absorbed_photon_budget(0.4, 1.0, 1e6, 2e-6).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-15);
        // 220 fW of 852 nm light for 2.6 us against the bare atomic line
        let flux = photon_flux(220e-15, 852e-9);
        let budget = absorbed_photon_budget(0.4, 0.0, flux, 2.6e-6).unwrap();
        assert!(budget < 1.0 && (budget - 0.8).abs() < 0.05, "{budget}");
    }

    #[test]
    fn scan_budget_matches_resonant_budget_for_single_point() {
        let cfg = PhysicalConfig::default();
        let p = ScanPlan { delta_cavity_list: vec![0.0], probe_grid: vec![0.0], ..plan() };
        let scan = absorbed_photon_budget_scan(&VitModel::ideal(cfg).unwrap(), 3.4, &p).unwrap();
        let direct = absorbed_photon_budget(cfg.od, 3.4, p.photon_flux, p.dwell).unwrap();
        assert!((scan - direct).abs() < 1e-9 * direct);
    }
}
