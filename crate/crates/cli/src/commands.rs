//! One function per subcommand.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use vit_core::estimation::linear::fit_linear_above;
use vit_core::estimation::{
    datasets_from_scan, fit_lorentzian, fit_vit_spectra, CountSource, FitResult, Measured, Objective, VitFitSpec,
    VitParam,
};
use vit_core::io::{
    read_points_csv, read_scan_csv, write_points_csv, write_pulse_csv, write_scan_csv, write_spectrum_csv,
};
use vit_core::model::VitModel;
use vit_core::pulse::{PulseSpec, WidthConvention};
use vit_core::recipes::{
    fig2_spectra, fig4_pipeline, fitted_regime, linear_grid, run_pulse, spectrum_rows, DelayReport, Fig4Recipe,
    FIG3_DURATIONS, FIG3_OD, FITTED_ETA_EFF_0,
};
use vit_core::synth::{generate_scan, ScanPlan};
use vit_core::units::{angular_to_mhz, mhz_to_angular, photon_flux, s_to_ns, s_to_us, us_to_s};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::sidecar::{sidecar_path, ScanSidecar};
use crate::{
    CorrectionsChoice, Figure, FitArgs, FitModel, ObjectiveChoice, PulseArgs, ReproduceArgs, SourceChoice,
    SpectrumArgs, SynthArgs, WidthChoice,
};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Run `f` against the file at `path`, or stdout.
fn with_output<F>(path: Option<&Path>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    with_output(Some(path), |w| write_json(w, value))
}

fn probe_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    Ok(linear_grid(mhz_to_angular(from), mhz_to_angular(to), mhz_to_angular(step))?)
}

fn model_for(cfg: &RunConfig, choice: CorrectionsChoice) -> Result<VitModel, CliError> {
    Ok(VitModel::new(cfg.physical(), choice.resolve(cfg)?)?)
}

pub fn spectrum(cfg: &RunConfig, a: &SpectrumArgs) -> Result<(), CliError> {
    let model = model_for(cfg, a.corrections)?;
    let grid = probe_grid(a.from, a.to, a.step)?;
    let rows = spectrum_rows(&model, a.eta.unwrap_or(cfg.ensemble.eta_eff), mhz_to_angular(a.delta_cavity), &grid)?;
    with_output(a.out.as_deref(), |w| Ok(write_spectrum_csv(w, &rows)?))
}

/// Pulse delays and the reference values, in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseReport {
    pub duration_us: f64,
    pub od: f64,
    pub eta_eff: f64,
    pub delay_centroid_ns: f64,
    pub delay_peak_ns: f64,
    pub energy_transmission: f64,
    pub tau_max_analytic_ns: f64,
    pub tau_resonant_exact_ns: f64,
}

impl From<&DelayReport> for PulseReport {
    fn from(r: &DelayReport) -> Self {
        PulseReport {
            duration_us: s_to_us(r.pulse_duration),
            od: r.od,
            eta_eff: r.eta,
            delay_centroid_ns: s_to_ns(r.delay_centroid),
            delay_peak_ns: s_to_ns(r.delay_peak),
            energy_transmission: r.energy_transmission,
            tau_max_analytic_ns: s_to_ns(r.tau_max_analytic),
            tau_resonant_exact_ns: s_to_ns(r.tau_resonant_exact),
        }
    }
}

pub fn pulse(cfg: &RunConfig, a: &PulseArgs) -> Result<(), CliError> {
    let model = model_for(cfg, a.corrections)?;
    let width = match a.width {
        WidthChoice::Fwhm => WidthConvention::IntensityFwhm,
        WidthChoice::E2 => WidthConvention::IntensityOneOverESquared,
    };
    let spec = PulseSpec { duration: us_to_s(a.duration_us), carrier_detuning: 0.0, width };
    let run = run_pulse(&model, a.eta.unwrap_or(cfg.ensemble.eta_eff), a.od.unwrap_or(cfg.ensemble.od), &spec)?;
    if let Some(path) = &a.trace {
        with_output(Some(path), |w| Ok(write_pulse_csv(w, &run.output)?))?;
    }
    with_output(a.out.as_deref(), |w| write_json(w, &PulseReport::from(&run.report)))
}

pub fn synth(cfg: &RunConfig, a: &SynthArgs) -> Result<(), CliError> {
    let physical = cfg.physical();
    let model = model_for(cfg, a.corrections)?;
    let eta = a.eta.unwrap_or(cfg.ensemble.eta_eff);
    if !(a.power_fw.is_finite() && a.power_fw >= 0.0) {
        return Err(CliError::Config(format!("power must be >= 0 fW, got {}", a.power_fw)));
    }
    let plan = ScanPlan {
        delta_cavity_list: a.delta_cavity.iter().map(|&d| mhz_to_angular(d)).collect(),
        probe_grid: probe_grid(a.from, a.to, a.step)?,
        photon_flux: photon_flux(a.power_fw * 1e-15, physical.lambda),
        dwell: us_to_s(a.dwell_us),
        efficiency_d1: a.efficiency_d1,
        efficiency_d2: a.efficiency_d2,
        rng_seed: a.seed,
    };
    let blocks = generate_scan(&model, eta, &plan)?;
    let sidecar = ScanSidecar {
        eta_eff: eta,
        corrections: a.corrections,
        delta_cavity_mhz: a.delta_cavity.clone(),
        probe_from_mhz: a.from,
        probe_to_mhz: a.to,
        probe_step_mhz: a.step,
        power_fw: a.power_fw,
        photon_flux: plan.photon_flux,
        dwell_us: a.dwell_us,
        efficiency_d1: a.efficiency_d1,
        efficiency_d2: a.efficiency_d2,
        seed: a.seed,
        norm_d1: plan.norm_d1(),
        norm_d2: plan.norm_d2(),
        config: cfg.clone(),
    };
    with_output(Some(&a.out), |w| Ok(write_scan_csv(w, &blocks)?))?;
    write_json_file(&sidecar_path(&a.out), &sidecar)
}

/// What `fit` prints. Offsets and widths are in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub params: BTreeMap<String, Measured>,
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub points: usize,
    /// intercept/slope, linear model only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<Measured>,
}

impl FitReport {
    fn from_fit(model: &str, fit: &FitResult) -> Self {
        FitReport {
            model: model.to_string(),
            params: fit.params.iter().map(|p| (p.name.clone(), Measured::new(p.value, p.error))).collect(),
            residual_norm: fit.residual_norm,
            reduced_chi2: fit.reduced_chi2(),
            converged: fit.converged,
            iterations: fit.iterations,
            points: fit.points,
            ratio: None,
        }
    }
}

fn read_file(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let report = match a.model {
        FitModel::Linear => fit_linear_table(a)?,
        FitModel::Lorentzian | FitModel::Vit => fit_scan(a)?,
    };
    with_output(a.out.as_deref(), |w| write_json(w, &report))
}

fn fit_linear_table(a: &FitArgs) -> Result<FitReport, CliError> {
    let rows = read_points_csv(read_file(&a.input)?)?;
    let x: Vec<f64> = rows.iter().map(|r| r.n_c).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.eta_eff).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.eta_eff_err).collect();
    let line = fit_linear_above(&x, &y, &s, a.threshold)?;
    let dof = line.points.saturating_sub(2).max(1);
    Ok(FitReport {
        model: "linear".into(),
        params: BTreeMap::from([
            ("slope".to_string(), Measured::new(line.slope, line.slope_err)),
            ("intercept".to_string(), Measured::new(line.intercept, line.intercept_err)),
        ]),
        residual_norm: line.chi2,
        reduced_chi2: line.chi2 / dof as f64,
        converged: true,
        iterations: 0,
        points: line.points,
        ratio: Some(line.ratio()?),
    })
}

fn fit_scan(a: &FitArgs) -> Result<FitReport, CliError> {
    let blocks = read_scan_csv(read_file(&a.input)?)?;
    if blocks.is_empty() {
        return Err(CliError::Config(format!("{} holds no scan rows", a.input.display())));
    }
    let side = ScanSidecar::read(&a.sidecar.clone().unwrap_or_else(|| sidecar_path(&a.input)))?;
    let source = match a.source {
        SourceChoice::Measured => CountSource::Measured,
        SourceChoice::Expected => CountSource::Expected,
    };
    if a.model == FitModel::Lorentzian {
        let block = match a.delta_cavity {
            None => &blocks[0],
            Some(d) => {
                let target = mhz_to_angular(d);
                blocks
                    .iter()
                    .find(|b| (b.delta_cavity - target).abs() <= 1e-9 * target.abs().max(1.0))
                    .ok_or_else(|| CliError::Config(format!("no block at delta_cavity {d} MHz")))?
            }
        };
        let data = &datasets_from_scan(std::slice::from_ref(block), side.norm_d1, None, source)?[0];
        let fit = fit_lorentzian(&data.d1)?;
        return Ok(FitReport::from_fit("lorentzian", &fit));
    }
    let free = a
        .free
        .iter()
        .map(|n| VitParam::from_name(n.trim()).ok_or_else(|| CliError::Config(format!("unknown fit parameter `{n}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let norm_d2 = if a.d1_only { None } else { Some(side.norm_d2) };
    let data = datasets_from_scan(&blocks, side.norm_d1, norm_d2, source)?;
    let mut spec = VitFitSpec::new(model_for(&side.config, side.corrections)?, &free);
    spec.objective = match a.objective {
        ObjectiveChoice::Deviance => Objective::PoissonDeviance,
        ObjectiveChoice::Chi2 => Objective::DataVariance,
    };
    Ok(FitReport::from_fit("vit", &fit_vit_spectra(&data, &spec)?))
}

pub fn reproduce(cfg: &RunConfig, a: &ReproduceArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", a.out_dir.display())))?;
    match a.figure {
        Figure::Fig2 => reproduce_fig2(cfg, &a.out_dir),
        Figure::Fig3 => reproduce_fig3(cfg, &a.out_dir),
        Figure::Fig4 => reproduce_fig4(cfg, &a.out_dir, a.seed),
    }
}

fn reproduce_fig2(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let eta = cfg.ensemble.eta_eff;
    let panels = fig2_spectra(&model_for(cfg, CorrectionsChoice::Config)?, eta)?;
    let mut entries = Vec::new();
    for p in &panels {
        let file = format!("fig2_{}.csv", p.label);
        with_output(Some(&dir.join(&file)), |w| Ok(write_spectrum_csv(w, &p.rows)?))?;
        entries.push(json!({ "label": p.label, "file": file, "delta_cavity_MHz": angular_to_mhz(p.delta_cavity) }));
    }
    let manifest = json!({
        "figure": "fig2",
        "eta_eff": eta,
        "corrections": CorrectionsChoice::Config,
        "panels": entries,
        "config": cfg,
    });
    write_json_file(&dir.join("manifest.json"), &manifest)
}

fn reproduce_fig3(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let model = VitModel::new(cfg.physical(), fitted_regime()?)?;
    let mut runs = Vec::new();
    for (i, &t) in FIG3_DURATIONS.iter().enumerate() {
        let run = run_pulse(&model, FITTED_ETA_EFF_0, FIG3_OD, &PulseSpec::gaussian(t))?;
        let (fin, fout) = (format!("fig3_{i}_input.csv"), format!("fig3_{i}_output.csv"));
        with_output(Some(&dir.join(&fin)), |w| Ok(write_pulse_csv(w, &run.input)?))?;
        with_output(Some(&dir.join(&fout)), |w| Ok(write_pulse_csv(w, &run.output)?))?;
        runs.push(json!({ "delay": PulseReport::from(&run.report), "input": fin, "output": fout }));
    }
    let manifest = json!({
        "figure": "fig3",
        "od": FIG3_OD,
        "eta_eff": FITTED_ETA_EFF_0,
        "corrections": CorrectionsChoice::Fitted,
        "runs": runs,
        "reported": { "measured_delay_ns": 25.0, "measured_delay_err_ns": 2.0, "calculated_delay_ns": 35.0 },
        "config": cfg,
    });
    write_json_file(&dir.join("manifest.json"), &manifest)
}

fn reproduce_fig4(cfg: &RunConfig, dir: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut recipe = Fig4Recipe::default();
    if let Some(s) = seed {
        recipe.seed = s;
    }
    let result = fig4_pipeline(&cfg.physical(), &recipe)?;
    with_output(Some(&dir.join("fig4_points.csv")), |w| Ok(write_points_csv(w, &result.points)?))?;
    let line = &result.line;
    let fit = json!({
        "slope": Measured::new(line.slope, line.slope_err),
        "intercept": Measured::new(line.intercept, line.intercept_err),
        "covariance": line.covariance,
        "chi2": line.chi2,
        "points": line.points,
        "threshold": recipe.threshold,
        "ratio": result.ratio,
        "reported_ratio": result.reported_ratio,
    });
    write_json_file(&dir.join("fig4_linear_fit.json"), &fit)?;
    let manifest = json!({
        "figure": "fig4",
        "files": ["fig4_points.csv", "fig4_linear_fit.json"],
        "recipe": recipe,
        "config": cfg,
    });
    write_json_file(&dir.join("manifest.json"), &manifest)
}
