use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fdd::{fdd_decompose, pick_peaks, FddResult};
use super::mac::mac;
use super::spectral::{cpsd, WelchConfig};
use crate::error::{Error, Result};
use crate::signal::RecordMatrix;

/// Relative frequency gap beyond which two modes are not paired.
pub const PAIRING_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModalOptions {
    pub welch: WelchConfig,
    pub n_modes: usize,
    /// Minimum peak prominence on the first singular value in decibels.
    pub min_prominence_db: f64,
}

impl Default for ModalOptions {
    fn default() -> Self {
        Self {
            welch: WelchConfig::default(),
            n_modes: 4,
            min_prominence_db: 3.0,
        }
    }
}

/// Modes picked from a record, in increasing frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalIdentification {
    pub frequencies: Vec<f64>,
    pub shapes: Vec<Vec<Complex64>>,
    pub lines: Vec<usize>,
    pub fdd: FddResult,
}

/// Frequency domain decomposition followed by peak picking on the first
/// singular value in decibels.
pub fn identify(records: &RecordMatrix, opts: &ModalOptions) -> Result<ModalIdentification> {
    if opts.n_modes == 0 {
        return Err(Error::Config("at least one mode must be requested".into()));
    }
    let fdd = fdd_decompose(&cpsd(records, opts.welch)?)?;
    let db: Vec<f64> = fdd
        .first_curve()
        .iter()
        .map(|&s| 10.0 * s.max(f64::MIN_POSITIVE).log10())
        .collect();
    let lines = pick_peaks(&db, opts.min_prominence_db, opts.n_modes);
    Ok(ModalIdentification {
        frequencies: lines.iter().map(|&k| fdd.frequencies[k]).collect(),
        shapes: lines.iter().map(|&k| fdd.first_vectors[k].clone()).collect(),
        lines,
        fdd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    /// 1-based reference mode number.
    pub mode: usize,
    pub f_ref_hz: f64,
    pub f_rec_hz: Option<f64>,
    /// `100 (f_ref - f_rec) / f_ref`.
    pub error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalReport {
    pub pairs: Vec<ModePair>,
    /// `mac[i][j]` compares reference mode `i` with the recovered mode paired
    /// to reference mode `j`; `None` where that pairing failed.
    pub mac: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<String>,
}

impl ModalReport {
    pub fn diagonal(&self) -> Vec<Option<f64>> {
        (0..self.mac.len()).map(|i| self.mac[i][i]).collect()
    }

    pub fn max_off_diagonal(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (i, row) in self.mac.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    if let Some(v) = v {
                        worst = Some(worst.map_or(*v, |w| w.max(*v)));
                    }
                }
            }
        }
        worst
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut out = String::from("mode,f_ref_hz,f_rec_hz,error_pct\n");
        for p in &self.pairs {
            let _ = writeln!(out, "{},{},{},{}", p.mode, p.f_ref_hz, opt(p.f_rec_hz), opt(p.error_pct));
        }
        out.push('\n');
        out.push_str("mode");
        for j in 1..=self.mac.len() {
            let _ = write!(out, ",{j}");
        }
        out.push('\n');
        for (i, row) in self.mac.iter().enumerate() {
            let _ = write!(out, "{}", i + 1);
            for v in row {
                let _ = write!(out, ",{}", opt(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairs each reference frequency with the nearest unused candidate within
/// the relative tolerance. Closest pairs are committed first.
pub fn pair_frequencies(reference: &[f64], candidates: &[f64]) -> Vec<Option<usize>> {
    let mut options: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &fr) in reference.iter().enumerate() {
        for (j, &fc) in candidates.iter().enumerate() {
            let rel = (fc - fr).abs() / fr.abs();
            if rel <= PAIRING_TOLERANCE {
                options.push((rel, i, j));
            }
        }
    }
    options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pairing = vec![None; reference.len()];
    let mut used = vec![false; candidates.len()];
    for (_, i, j) in options {
        if pairing[i].is_none() && !used[j] {
            pairing[i] = Some(j);
            used[j] = true;
        }
    }
    pairing
}

/// Identifies both records and compares frequencies and shapes.
pub fn compare_modal(reference: &RecordMatrix, recovered: &RecordMatrix, opts: &ModalOptions) -> Result<ModalReport> {
    if reference.n_channels() != recovered.n_channels() {
        return Err(Error::Dimension(format!(
            "reference has {} channels, recovered has {}",
            reference.n_channels(),
            recovered.n_channels()
        )));
    }
    let r = identify(reference, opts)?;
    let c = identify(recovered, opts)?;
    compare_identified(&r, &c)
}

pub fn compare_identified(r: &ModalIdentification, c: &ModalIdentification) -> Result<ModalReport> {
    let mut warnings = Vec::new();
    let pairing = pair_frequencies(&r.frequencies, &c.frequencies);
    let pairs = r
        .frequencies
        .iter()
        .zip(&pairing)
        .enumerate()
        .map(|(i, (&fr, p))| {
            let f_rec = p.map(|j| c.frequencies[j]);
            if f_rec.is_none() {
                warnings.push(format!(
                    "reference mode {} at {fr:.4} Hz has no recovered peak within {}%",
                    i + 1,
                    PAIRING_TOLERANCE * 100.0
                ));
            }
            ModePair {
                mode: i + 1,
                f_ref_hz: fr,
                f_rec_hz: f_rec,
                error_pct: f_rec.map(|f| 100.0 * (fr - f) / fr),
            }
        })
        .collect();
    let mut table = Vec::with_capacity(r.shapes.len());
    for shape in &r.shapes {
        let row = pairing
            .iter()
            .map(|p| p.map(|j| mac(shape, &c.shapes[j])).transpose())
            .collect::<Result<Vec<_>>>()?;
        table.push(row);
    }
    Ok(ModalReport {
        pairs,
        mac: table,
        warnings,
    })
}
