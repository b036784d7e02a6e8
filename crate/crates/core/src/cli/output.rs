//! Spectrum CSV, gnuplot data and peak reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! spectrum read back from CSV is bit-identical to the one that was written.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::estimator::{Scan2d, SpectralScan};
use crate::peaks::{find_peaks_in, PeakReport, PeakSignal};
use crate::{Error, Result};

pub const SPECTRUM_COLUMNS: &str = "E, re_C, im_C, stderr";

/// Metadata carried in the `#` header of every emitted file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Header {
    pub mode: Option<String>,
    pub kernel: Option<String>,
    pub seed: Option<u64>,
    pub units: Option<String>,
    /// The run configuration, line for line.
    pub config: Option<String>,
}

impl Header {
    pub fn write(&self, out: &mut String, title: &str) {
        let _ = writeln!(out, "# gapscan {title}");
        if let Some(v) = &self.mode {
            let _ = writeln!(out, "# mode: {v}");
        }
        if let Some(v) = &self.kernel {
            let _ = writeln!(out, "# kernel: {v}");
        }
        if let Some(v) = self.seed {
            let _ = writeln!(out, "# seed: {v}");
        }
        if let Some(v) = &self.units {
            let _ = writeln!(out, "# units: {v}");
        }
        if let Some(cfg) = &self.config {
            for line in cfg.split('\n') {
                let _ = writeln!(out, "# config: {line}");
            }
        }
    }

    fn read_line(&mut self, line: &str, config: &mut Vec<String>) -> Result<()> {
        let Some(body) = line.strip_prefix('#') else {
            return Ok(());
        };
        if let Some(cfg) = body.strip_prefix(" config:") {
            config.push(cfg.strip_prefix(' ').unwrap_or(cfg).to_string());
            return Ok(());
        }
        let Some((k, v)) = body.trim().split_once(':') else {
            return Ok(());
        };
        let v = v.trim().to_string();
        match k.trim() {
            "mode" => self.mode = Some(v),
            "kernel" => self.kernel = Some(v),
            "units" => self.units = Some(v),
            "seed" => {
                self.seed = Some(v.parse().map_err(|_| Error::invalid(format!("bad seed {v:?} in header")))?)
            }
            _ => {}
        }
        Ok(())
    }

    /// JSON metadata attached to peak reports.
    pub fn to_meta(&self, signal: PeakSignal) -> Value {
        let mut m = Map::new();
        if let Some(v) = &self.mode {
            m.insert("mode".into(), json!(v));
        }
        if let Some(v) = &self.kernel {
            m.insert("kernel".into(), json!(v));
        }
        if let Some(v) = self.seed {
            m.insert("seed".into(), json!(v));
        }
        if let Some(v) = &self.units {
            m.insert("units".into(), json!(v));
        }
        if let Some(v) = &self.config {
            m.insert("config".into(), json!(v));
        }
        m.insert("signal".into(), json!(signal_name(signal)));
        Value::Object(m)
    }
}

pub fn signal_name(signal: PeakSignal) -> &'static str {
    match signal {
        PeakSignal::Real => "real",
        PeakSignal::Magnitude => "magnitude",
    }
}

/// Columns of a spectrum CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectrumTable {
    pub header: Header,
    pub e: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl SpectrumTable {
    pub fn from_scan(scan: &SpectralScan, header: Header) -> Self {
        Self {
            header,
            e: scan.e_values.clone(),
            re: scan.c_values.iter().map(|c| c.re).collect(),
            im: scan.c_values.iter().map(|c| c.im).collect(),
            stderr: scan.stderr.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        self.header.write(&mut out, "spectrum");
        out.push_str("# re_C, im_C: C(E) = (Z/N_t) sum_s k(t_s) exp(i E t_s); stderr: standard error of re_C\n");
        out.push_str(SPECTRUM_COLUMNS);
        out.push('\n');
        for k in 0..self.e.len() {
            let _ = writeln!(out, "{}, {}, {}, {}", self.e[k], self.re[k], self.im[k], self.stderr[k]);
        }
        out
    }

    /// Whitespace-separated columns for gnuplot.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::new();
        self.header.write(&mut out, "plot data");
        out.push_str("# E re_C im_C stderr\n");
        for k in 0..self.e.len() {
            let _ = writeln!(out, "{} {} {} {}", self.e[k], self.re[k], self.im[k], self.stderr[k]);
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut table = SpectrumTable::default();
        let mut seen_columns = false;
        let mut config = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.starts_with('#') {
                table.header.read_line(line, &mut config)?;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !seen_columns {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != ["E", "re_C", "im_C", "stderr"] {
                    return Err(Error::Parse {
                        position: lineno,
                        message: format!("expected column header `{SPECTRUM_COLUMNS}`, found `{line}`"),
                    });
                }
                seen_columns = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    position: lineno,
                    message: format!("bad number: {e}"),
                })?;
            if vals.len() != 4 {
                return Err(Error::Parse {
                    position: lineno,
                    message: format!("expected 4 columns, found {}", vals.len()),
                });
            }
            table.e.push(vals[0]);
            table.re.push(vals[1]);
            table.im.push(vals[2]);
            table.stderr.push(vals[3]);
        }
        if !config.is_empty() {
            table.header.config = Some(config.join("\n"));
        }
        if !seen_columns {
            return Err(Error::Parse {
                position: 0,
                message: format!("missing column header `{SPECTRUM_COLUMNS}`"),
            });
        }
        Ok(table)
    }

    /// Peak report over the chosen signal; the same routine serves runs and CSV files.
    pub fn peaks(&self, threshold: f64, signal: PeakSignal) -> Result<PeakReport> {
        let y: Vec<f64> = match signal {
            PeakSignal::Real => self.re.clone(),
            PeakSignal::Magnitude => self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect(),
        };
        let mut report = find_peaks_in(&self.e, &y, threshold)?;
        report.meta = Some(self.header.to_meta(signal));
        Ok(report)
    }
}

/// `E, E2, re_C, im_C` rows of a 2-D scan.
pub fn scan2d_csv(scan: &Scan2d, header: &Header) -> String {
    let mut out = String::new();
    header.write(&mut out, "2-D spectrum");
    out.push_str("# C(E, E2) = (Z^2/N_t) sum_s <psi(t2_s)|O|psi(t_s)> exp(i E t_s) exp(-i E2 t2_s)\n");
    out.push_str("E, E2, re_C, im_C\n");
    for (r, e) in scan.e_values.iter().enumerate() {
        for (c, e2) in scan.e2_values.iter().enumerate() {
            let v = scan.c_values[(r, c)];
            let _ = writeln!(out, "{e}, {e2}, {}, {}", v.re, v.im);
        }
    }
    out
}

/// gnuplot `splot` blocks, one per `E`, separated by blank lines.
pub fn scan2d_plot_data(scan: &Scan2d, header: &Header) -> String {
    let mut out = String::new();
    header.write(&mut out, "2-D plot data");
    out.push_str("# E E2 re_C im_C\n");
    for (r, e) in scan.e_values.iter().enumerate() {
        for (c, e2) in scan.e2_values.iter().enumerate() {
            let v = scan.c_values[(r, c)];
            let _ = writeln!(out, "{e} {e2} {} {}", v.re, v.im);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SpectrumTable {
        let e: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).collect();
        let re = e.iter().map(|x| (-(x - 0.3f64).powi(2) / 0.02).exp() + 1e-17 / 3.0).collect();
        let im = e.iter().map(|x| 0.1 * x / 7.0).collect();
        SpectrumTable {
            header: Header {
                mode: Some("gap".into()),
                kernel: Some("gap".into()),
                seed: Some(u64::MAX),
                units: Some("model".into()),
                config: Some("\n[scan]\n\n# a comment\nmode = \"gap\"\n".into()),
            },
            e,
            re,
            im,
            stderr: vec![0.0; 41],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = table();
        let back = SpectrumTable::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(
            back.peaks(0.02, PeakSignal::Real).unwrap(),
            t.peaks(0.02, PeakSignal::Real).unwrap()
        );
    }

    #[test]
    fn meta_carries_header() {
        let r = table().peaks(0.02, PeakSignal::Magnitude).unwrap();
        let m = r.meta.unwrap();
        assert_eq!(m["seed"], json!(u64::MAX));
        assert_eq!(m["signal"], json!("magnitude"));
        assert_eq!(r.peaks.len(), 1);
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(SpectrumTable::parse_csv("E, re_C\n1, 2\n").is_err());
        assert!(SpectrumTable::parse_csv("E, re_C, im_C, stderr\n1, 2, x, 0\n").is_err());
        assert!(SpectrumTable::parse_csv("E, re_C, im_C, stderr\n1, 2, 3\n").is_err());
        assert!(SpectrumTable::parse_csv("# only a header\n").is_err());
    }
}
