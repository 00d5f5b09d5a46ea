//! CSV tables exchanged with external tools. Detunings are in MHz and times
//! in μs in every file; conversion to rad/s and seconds happens here.
//!
//! All files are comma-separated, UTF-8, with a mandatory header row.
//! Parsers never panic on malformed input; they report the offending line.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VitError};
use crate::pulse::SampledPulse;
use crate::synth::{CountRecord, ScanBlock};
use crate::units::{angular_to_mhz, mhz_to_angular, s_to_us, us_to_s};

fn csv_error(e: csv::Error) -> VitError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => VitError::Io(e.to_string()),
        _ => VitError::Parse { line, message: e.to_string() },
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows with their 1-based file line numbers, header checked exactly.
fn read_rows<R: Read, T: DeserializeOwned>(input: R, header: &[&str]) -> Result<Vec<(usize, T)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found = r.headers().map_err(csv_error)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(VitError::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: T = rec.map_err(csv_error)?;
        rows.push((rows.len() + 2, row));
    }
    if rows.is_empty() {
        return Err(VitError::Parse { line: 2, message: "no data rows".into() });
    }
    Ok(rows)
}

fn finite(line: usize, name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(VitError::Parse { line, message: format!("{name} is not a finite number") })
    }
}

fn nonnegative(line: usize, name: &str, v: f64) -> Result<f64> {
    if finite(line, name, v)? >= 0.0 {
        Ok(v)
    } else {
        Err(VitError::Parse { line, message: format!("{name} must be >= 0, got {v}") })
    }
}

// --- pulse traces ---------------------------------------------------------

pub const PULSE_HEADER: [&str; 3] = ["time_us", "re", "im"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRow {
    pub time_us: f64,
    pub re: f64,
    pub im: f64,
}

pub fn write_pulse_csv<W: Write>(out: W, pulse: &SampledPulse) -> Result<()> {
    write_rows(
        out,
        pulse.samples.iter().enumerate().map(|(i, s)| PulseRow { time_us: s_to_us(pulse.time(i)), re: s.re, im: s.im }),
    )
}

/// Read a trace back onto a uniform grid. Sample times must increase with a
/// constant step (relative tolerance 1e-6).
pub fn read_pulse_csv<R: Read>(input: R) -> Result<SampledPulse> {
    let rows: Vec<(usize, PulseRow)> = read_rows(input, &PULSE_HEADER)?;
    for (line, r) in &rows {
        finite(*line, "time_us", r.time_us)?;
        finite(*line, "re", r.re)?;
        finite(*line, "im", r.im)?;
    }
    if rows.len() < 2 {
        return Err(VitError::Parse { line: 2, message: "a pulse trace needs at least two samples".into() });
    }
    let t0 = rows[0].1.time_us;
    let dt = (rows[rows.len() - 1].1.time_us - t0) / (rows.len() - 1) as f64;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(VitError::Parse { line: 3, message: "sample times must increase".into() });
    }
    for (i, (line, r)) in rows.iter().enumerate() {
        let expected = t0 + i as f64 * dt;
        if (r.time_us - expected).abs() > 1e-6 * dt {
            return Err(VitError::Parse {
                line: *line,
                message: format!("time {} breaks the uniform step {dt} us", r.time_us),
            });
        }
    }
    Ok(SampledPulse {
        t0: us_to_s(t0),
        dt: us_to_s(dt),
        samples: rows.iter().map(|(_, r)| num_complex::Complex64::new(r.re, r.im)).collect(),
        carrier_detuning: 0.0,
    })
}

// --- count scans ----------------------------------------------------------

pub const SCAN_HEADER: [&str; 6] =
    ["delta_probe_MHz", "delta_cavity_MHz", "counts_d1", "counts_d2", "expected_d1", "expected_d2"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "delta_probe_MHz")]
    pub delta_probe_mhz: f64,
    #[serde(rename = "delta_cavity_MHz")]
    pub delta_cavity_mhz: f64,
    pub counts_d1: u64,
    pub counts_d2: u64,
    pub expected_d1: f64,
    pub expected_d2: f64,
}

impl From<&CountRecord> for ScanRow {
    fn from(r: &CountRecord) -> Self {
        ScanRow {
            delta_probe_mhz: angular_to_mhz(r.delta_probe),
            delta_cavity_mhz: angular_to_mhz(r.delta_cavity),
            counts_d1: r.counts_d1,
            counts_d2: r.counts_d2,
            expected_d1: r.expected_d1,
            expected_d2: r.expected_d2,
        }
    }
}

pub fn write_scan_csv<W: Write>(out: W, blocks: &[ScanBlock]) -> Result<()> {
    write_rows(out, blocks.iter().flat_map(|b| b.records.iter().map(ScanRow::from)))
}

/// Parse a scan, grouping consecutive rows with equal cavity detuning.
pub fn read_scan_csv<R: Read>(input: R) -> Result<Vec<ScanBlock>> {
    let rows: Vec<(usize, ScanRow)> = read_rows(input, &SCAN_HEADER)?;
    let mut blocks: Vec<ScanBlock> = Vec::new();
    for (line, r) in rows {
        finite(line, "delta_probe_MHz", r.delta_probe_mhz)?;
        finite(line, "delta_cavity_MHz", r.delta_cavity_mhz)?;
        nonnegative(line, "expected_d1", r.expected_d1)?;
        nonnegative(line, "expected_d2", r.expected_d2)?;
        let record = CountRecord {
            delta_probe: mhz_to_angular(r.delta_probe_mhz),
            delta_cavity: mhz_to_angular(r.delta_cavity_mhz),
            counts_d1: r.counts_d1,
            counts_d2: r.counts_d2,
            expected_d1: r.expected_d1,
            expected_d2: r.expected_d2,
        };
        match blocks.last_mut() {
            Some(b) if b.delta_cavity == record.delta_cavity => b.records.push(record),
            _ => blocks.push(ScanBlock { delta_cavity: record.delta_cavity, records: vec![record] }),
        }
    }
    Ok(blocks)
}

// --- model spectra --------------------------------------------------------

pub const SPECTRUM_HEADER: [&str; 3] = ["delta_probe_MHz", "transmission", "cavity_emission"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    #[serde(rename = "delta_probe_MHz")]
    pub delta_probe_mhz: f64,
    pub transmission: f64,
    pub cavity_emission: f64,
}

pub fn write_spectrum_csv<W: Write>(out: W, rows: &[SpectrumRow]) -> Result<()> {
    write_rows(out, rows.iter())
}

pub fn read_spectrum_csv<R: Read>(input: R) -> Result<Vec<SpectrumRow>> {
    let rows: Vec<(usize, SpectrumRow)> = read_rows(input, &SPECTRUM_HEADER)?;
    rows.into_iter()
        .map(|(line, r)| {
            finite(line, "delta_probe_MHz", r.delta_probe_mhz)?;
            nonnegative(line, "transmission", r.transmission)?;
            nonnegative(line, "cavity_emission", r.cavity_emission)?;
            Ok(r)
        })
        .collect()
}

// --- cooperativity vs control photon number -------------------------------

pub const POINTS_HEADER: [&str; 3] = ["n_c", "eta_eff", "eta_eff_err"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub n_c: f64,
    pub eta_eff: f64,
    pub eta_eff_err: f64,
}

pub fn write_points_csv<W: Write>(out: W, rows: &[PointRow]) -> Result<()> {
    write_rows(out, rows.iter())
}

/// Parse (⟨n_c⟩, η_eff, σ) triples; σ must be strictly positive.
pub fn read_points_csv<R: Read>(input: R) -> Result<Vec<PointRow>> {
    let rows: Vec<(usize, PointRow)> = read_rows(input, &POINTS_HEADER)?;
    rows.into_iter()
        .map(|(line, r)| {
            finite(line, "n_c", r.n_c)?;
            finite(line, "eta_eff", r.eta_eff)?;
            if !(r.eta_eff_err > 0.0 && r.eta_eff_err.is_finite()) {
                return Err(VitError::Parse {
                    line,
                    message: format!("eta_eff_err must be > 0, got {}", r.eta_eff_err),
                });
            }
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{make_gaussian_pulse, GridConfig, PulseSpec};

    #[test]
    fn pulse_round_trip() {
        let spec = PulseSpec::gaussian(1.73e-6);
        let p = make_gaussian_pulse(&spec, &GridConfig::from_span(16e-6, 10e-9).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_pulse_csv(&mut buf, &p).unwrap();
        assert!(buf.starts_with(b"time_us,re,im\n"));
        let back = read_pulse_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, p.samples);
        assert!((back.dt - p.dt).abs() < 1e-12 * p.dt);
        assert!((back.t0 - p.t0).abs() < 1e-9 * p.dt);
    }

    #[test]
    fn scan_round_trip_groups_blocks() {
        let rec = |dp: f64, dc: f64, c: u64| CountRecord {
            delta_probe: mhz_to_angular(dp),
            delta_cavity: mhz_to_angular(dc),
            counts_d1: c,
            counts_d2: c / 3,
            expected_d1: c as f64 + 0.25,
            expected_d2: c as f64 / 3.0,
        };
        let blocks = vec![
            ScanBlock { delta_cavity: mhz_to_angular(0.5), records: vec![rec(-1.0, 0.5, 10), rec(0.0, 0.5, 20)] },
            ScanBlock { delta_cavity: mhz_to_angular(-2.2), records: vec![rec(-1.0, -2.2, 30)] },
        ];
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &blocks).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("delta_probe_MHz,delta_cavity_MHz,counts_d1,counts_d2,expected_d1,expected_d2\n"));
        assert!(text.contains("\n0.5,") || text.contains(",0.5,"));
        let back = read_scan_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().flat_map(|b| &b.records).zip(blocks.iter().flat_map(|b| &b.records)) {
            assert_eq!((a.counts_d1, a.counts_d2), (b.counts_d1, b.counts_d2));
            assert!((a.delta_probe - b.delta_probe).abs() <= 1e-12 * b.delta_probe.abs().max(1.0));
        }
    }

    #[test]
    fn points_round_trip() {
        let rows = vec![
            PointRow { n_c: 3.0, eta_eff: 13.6, eta_eff_err: 0.4 },
            PointRow { n_c: 22.0, eta_eff: 78.2, eta_eff_err: 5.0 },
        ];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_points_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn malformed_input_names_the_line() {
        let bad = "n_c,eta_eff,eta_eff_err\n1,2,0.1\n2,x,0.1\n";
        match read_points_csv(bad.as_bytes()) {
            Err(VitError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let zero_sigma = "n_c,eta_eff,eta_eff_err\n1,2,0\n";
        assert!(matches!(read_points_csv(zero_sigma.as_bytes()), Err(VitError::Parse { line: 2, .. })));
        let wrong_header = "a,b,c\n1,2,3\n";
        assert!(matches!(read_points_csv(wrong_header.as_bytes()), Err(VitError::Parse { line: 1, .. })));
        assert!(read_points_csv("n_c,eta_eff,eta_eff_err\n".as_bytes()).is_err());
        assert!(read_scan_csv("".as_bytes()).is_err());
        let negative = "delta_probe_MHz,delta_cavity_MHz,counts_d1,counts_d2,expected_d1,expected_d2\n0,0,-1,0,0,0\n";
        assert!(read_scan_csv(negative.as_bytes()).is_err());
        let nan = "delta_probe_MHz,transmission,cavity_emission\nNaN,1,0\n";
        assert!(read_spectrum_csv(nan.as_bytes()).is_err());
        let uneven = "time_us,re,im\n0,1,0\n1,1,0\n3,1,0\n";
        assert!(matches!(read_pulse_csv(uneven.as_bytes()), Err(VitError::Parse { .. })));
    }
}
