use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::RecordMatrix;

/// Welch estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelchConfig {
    pub segment_len: usize,
    pub overlap_fraction: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: 512,
            overlap_fraction: 0.5,
        }
    }
}

impl WelchConfig {
    pub fn hop(&self) -> usize {
        let overlap = (self.overlap_fraction * self.segment_len as f64).round() as usize;
        (self.segment_len - overlap.min(self.segment_len - 1)).max(1)
    }

    pub fn segments(&self, n_samples: usize) -> usize {
        if n_samples < self.segment_len {
            0
        } else {
            (n_samples - self.segment_len) / self.hop() + 1
        }
    }
}

/// One-sided cross-power spectral density matrices, one per frequency line.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    frequencies: Vec<f64>,
    n_channels: usize,
    /// Row-major `n_channels x n_channels` blocks, one per line.
    lines: Vec<Vec<Complex64>>,
}

impl SpectralMatrix {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn line(&self, k: usize) -> &[Complex64] {
        &self.lines[k]
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.lines[k][i * self.n_channels + j]
    }

    /// Spacing between frequency lines.
    pub fn resolution(&self) -> f64 {
        self.frequencies[0]
    }

    /// Auto-spectrum of one channel.
    pub fn auto_spectrum(&self, channel: usize) -> Vec<f64> {
        (0..self.lines.len()).map(|k| self.get(k, channel, channel).re).collect()
    }
}

/// Periodic Hann taper.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Welch-averaged cross spectra `G_ij(f) = mean_s X_i(f) conj(X_j(f))` of
/// Hann-tapered segments, scaled to a one-sided density. The DC line is
/// omitted so the lines run over `(0, fs/2]`.
pub fn cpsd(records: &RecordMatrix, cfg: WelchConfig) -> Result<SpectralMatrix> {
    let n = cfg.segment_len;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Config(format!("segment length {n} must be a power of two")));
    }
    if !(0.0..1.0).contains(&cfg.overlap_fraction) {
        return Err(Error::Config(format!(
            "overlap fraction must lie in [0, 1), got {}",
            cfg.overlap_fraction
        )));
    }
    let n_segments = cfg.segments(records.n_samples());
    if n_segments < 2 {
        return Err(Error::Config(format!(
            "{} samples give {n_segments} segment(s) of {n}; at least 2 are needed",
            records.n_samples()
        )));
    }
    let ns = records.n_channels();
    let fs = records.sampling_rate();
    let taper = hann(n);
    let taper_power: f64 = taper.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;
    let columns: Vec<Vec<f64>> = (0..ns).map(|j| records.column(j)).collect();

    let mut acc = vec![vec![Complex64::new(0.0, 0.0); ns * ns]; half];
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); n]; ns];
    for s in 0..n_segments {
        let start = s * cfg.hop();
        for (spec, col) in spectra.iter_mut().zip(&columns) {
            for (i, slot) in spec.iter_mut().enumerate() {
                *slot = Complex64::new(col[start + i] * taper[i], 0.0);
            }
            fft.process(spec);
        }
        for (k, block) in acc.iter_mut().enumerate() {
            let line = k + 1;
            for i in 0..ns {
                let xi = spectra[i][line];
                for j in i..ns {
                    block[i * ns + j] += xi * spectra[j][line].conj();
                }
            }
        }
    }

    let lines = acc
        .into_iter()
        .enumerate()
        .map(|(k, mut block)| {
            let one_sided = if k + 1 == half { 1.0 } else { 2.0 };
            let scale = one_sided / (fs * taper_power * n_segments as f64);
            for i in 0..ns {
                block[i * ns + i] = Complex64::new(block[i * ns + i].re * scale, 0.0);
                for j in (i + 1)..ns {
                    let v = block[i * ns + j] * scale;
                    block[i * ns + j] = v;
                    block[j * ns + i] = v.conj();
                }
            }
            block
        })
        .collect();
    let df = fs / n as f64;
    Ok(SpectralMatrix {
        frequencies: (1..=half).map(|k| k as f64 * df).collect(),
        n_channels: ns,
        lines,
    })
}
