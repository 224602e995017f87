//! Multi-channel acceleration records built by modal superposition.
//!
//! Each mode is a damped single-degree-of-freedom oscillator driven by its
//! own seeded white-noise sequence. The state `[q, q']` is advanced with the
//! exact zero-order-hold discretization
//!
//! ```text
//! x[k+1] = exp(A dt) x[k] + A^-1 (exp(A dt) - I) B u[k]
//! A = [[0, 1], [-w^2, -2 z w]],  B = [0, 1]^T
//! ```
//!
//! and the modal acceleration is `q'' = -w^2 q - 2 z w q' + u`. Channel `j`
//! is `sum_m shape_m[j] * q''_m` plus Gaussian measurement noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::signal::RecordMatrix;

/// Natural frequencies (Hz) of the default four-mode structure.
pub const DEFAULT_FREQUENCIES: [f64; 4] = [7.6210, 12.2984, 20.1747, 24.2876];
pub const DEFAULT_SENSORS: usize = 30;
pub const DEFAULT_DAMPING: f64 = 0.02;
pub const DEFAULT_NOISE_FRACTION: f64 = 0.05;
pub const DEFAULT_FS: f64 = 128.0;
pub const DEFAULT_DURATION_S: f64 = 16.0;

/// Slowest-mode time constants simulated and discarded before recording.
const BURN_IN_TIME_CONSTANTS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub frequency_hz: f64,
    pub damping_ratio: f64,
    pub shape: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub n_sensors: usize,
    pub modes: Vec<ModeSpec>,
    /// Noise RMS as a fraction of each clean channel's RMS. Channels with no
    /// modal content use a unit reference, so the fraction is the absolute RMS.
    pub noise_rms_fraction: f64,
    pub seed: u64,
}

impl Default for StructureSpec {
    fn default() -> Self {
        Self::beam(DEFAULT_SENSORS, &DEFAULT_FREQUENCIES, DEFAULT_DAMPING).expect("4 modes fit 30 sensors")
    }
}

impl StructureSpec {
    /// Beam-like structure: one [`default_mode_shapes`] shape per frequency,
    /// all with the same damping ratio, default noise and seed 0.
    ///
    /// ```
    /// use shm_recover::synth::StructureSpec;
    ///
    /// let spec = StructureSpec::beam(8, &[3.0, 9.0], 0.02).unwrap();
    /// assert_eq!(spec.modes.len(), 2);
    /// assert_eq!(spec.modes[1].shape.len(), 8);
    /// ```
    pub fn beam(n_sensors: usize, frequencies: &[f64], damping_ratio: f64) -> Result<Self> {
        let shapes = default_mode_shapes(n_sensors, frequencies.len())?;
        Ok(Self {
            n_sensors,
            modes: frequencies
                .iter()
                .zip(shapes)
                .map(|(&frequency_hz, shape)| ModeSpec {
                    frequency_hz,
                    damping_ratio,
                    shape,
                })
                .collect(),
            noise_rms_fraction: DEFAULT_NOISE_FRACTION,
            seed: 0,
        })
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.n_sensors == 0 {
            return Err(Error::Config("structure needs at least one sensor".into()));
        }
        if !(self.noise_rms_fraction >= 0.0 && self.noise_rms_fraction.is_finite()) {
            return Err(Error::Config(format!(
                "noise fraction must be non-negative, got {}",
                self.noise_rms_fraction
            )));
        }
        let nyquist = fs / 2.0;
        for (m, mode) in self.modes.iter().enumerate() {
            if !(mode.frequency_hz > 0.0 && mode.frequency_hz.is_finite()) {
                return Err(Error::Config(format!("mode {m} frequency must be positive")));
            }
            if mode.frequency_hz >= nyquist {
                return Err(Error::Aliasing {
                    frequency: mode.frequency_hz,
                    nyquist,
                });
            }
            if !(mode.damping_ratio > 0.0 && mode.damping_ratio < 1.0) {
                return Err(Error::Config(format!(
                    "mode {m} damping ratio must lie in (0, 1), got {}",
                    mode.damping_ratio
                )));
            }
            if mode.shape.len() != self.n_sensors {
                return Err(Error::Config(format!(
                    "mode {m} shape has {} entries for {} sensors",
                    mode.shape.len(),
                    self.n_sensors
                )));
            }
            if mode.shape.iter().all(|&v| v == 0.0) || mode.shape.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("mode {m} shape must be finite and nonzero")));
            }
            if self.modes[..m].iter().any(|o| o.frequency_hz == mode.frequency_hz) {
                return Err(Error::Config(format!("mode {m} repeats frequency {}", mode.frequency_hz)));
            }
        }
        Ok(())
    }
}

/// The spec and sampling that produced a record, plus its noise-free part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub spec: StructureSpec,
    pub duration_s: f64,
    pub fs: f64,
    #[serde(skip)]
    pub clean: Option<RecordMatrix>,
}

impl GroundTruth {
    /// Rebuilds the noise-free record from the stored spec.
    pub fn regenerate_clean(&self) -> Result<RecordMatrix> {
        Ok(generate(&self.spec, self.duration_s, self.fs)?.1.clean.expect("generate fills clean"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("ground truth: {e}")))
    }
}

/// Simply-supported beam shapes `sin(m pi (j + 1) / (n + 1))`, `m = 1..=n_modes`.
pub fn default_mode_shapes(n_sensors: usize, n_modes: usize) -> Result<Vec<Vec<f64>>> {
    if n_modes >= n_sensors {
        return Err(Error::Config(format!(
            "{n_modes} modes need more than {n_modes} sensors, got {n_sensors}"
        )));
    }
    Ok((1..=n_modes)
        .map(|m| {
            (0..n_sensors)
                .map(|j| (m as f64 * PI * (j + 1) as f64 / (n_sensors + 1) as f64).sin())
                .collect()
        })
        .collect())
}

/// Exact one-step transition `(Phi, Gamma)` of an underdamped oscillator.
fn discretize(frequency_hz: f64, zeta: f64, dt: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let w = 2.0 * PI * frequency_hz;
    let wd = w * (1.0 - zeta * zeta).sqrt();
    let decay = (-zeta * w * dt).exp();
    let (s, c) = (wd * dt).sin_cos();
    let phi = [
        [decay * (c + zeta * w / wd * s), decay * s / wd],
        [-decay * w * w / wd * s, decay * (c - zeta * w / wd * s)],
    ];
    // A^-1 = [[-2 z / w, -1 / w^2], [1, 0]]; Gamma = A^-1 (Phi - I) B.
    let col = [phi[0][1], phi[1][1] - 1.0];
    let gamma = [-2.0 * zeta / w * col[0] - col[1] / (w * w), col[0]];
    (phi, gamma)
}

/// Modal acceleration histories, one per mode, each `n_samples` long.
pub fn modal_responses(spec: &StructureSpec, n_samples: usize, fs: f64) -> Vec<Vec<f64>> {
    let dt = 1.0 / fs;
    spec.modes
        .iter()
        .enumerate()
        .map(|(m, mode)| {
            let w = 2.0 * PI * mode.frequency_hz;
            let zeta = mode.damping_ratio;
            let (phi, gamma) = discretize(mode.frequency_hz, zeta, dt);
            let burn_in = (BURN_IN_TIME_CONSTANTS / (zeta * w) * fs).ceil() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("excitation.{m}")));
            let mut x = [0.0f64; 2];
            let mut acc = Vec::with_capacity(n_samples);
            for k in 0..burn_in + n_samples {
                let u: f64 = StandardNormal.sample(&mut rng);
                if k >= burn_in {
                    acc.push(-w * w * x[0] - 2.0 * zeta * w * x[1] + u);
                }
                x = [
                    phi[0][0] * x[0] + phi[0][1] * x[1] + gamma[0] * u,
                    phi[1][0] * x[0] + phi[1][1] * x[1] + gamma[1] * u,
                ];
            }
            acc
        })
        .collect()
}

/// Channel `j` at sample `t` is `sum_m shapes[m][j] * responses[m][t]`.
pub fn superpose(shapes: &[&[f64]], responses: &[Vec<f64>], n_sensors: usize, n_samples: usize) -> Vec<f64> {
    let mut data = vec![0.0; n_samples * n_sensors];
    for (shape, resp) in shapes.iter().zip(responses) {
        for (t, &a) in resp.iter().enumerate() {
            let row = &mut data[t * n_sensors..(t + 1) * n_sensors];
            row.iter_mut().zip(shape.iter()).for_each(|(d, s)| *d += s * a);
        }
    }
    data
}

/// Simulates `duration_s` seconds at `fs` Hz. Returns the noisy record and
/// the ground truth holding its clean counterpart.
pub fn generate(spec: &StructureSpec, duration_s: f64, fs: f64) -> Result<(RecordMatrix, GroundTruth)> {
    if !(fs > 0.0 && fs.is_finite() && duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::Config(format!(
            "duration ({duration_s} s) and sampling rate ({fs} Hz) must be positive"
        )));
    }
    let n_samples = (duration_s * fs).round() as usize;
    if n_samples < 64 {
        return Err(Error::InsufficientData {
            available: n_samples,
            required: 64,
        });
    }
    spec.validate(fs)?;
    let ns = spec.n_sensors;
    let responses = modal_responses(spec, n_samples, fs);
    let shapes: Vec<&[f64]> = spec.modes.iter().map(|m| m.shape.as_slice()).collect();
    let clean_data = superpose(&shapes, &responses, ns, n_samples);
    let dt = 1.0 / fs;
    let clean = RecordMatrix::new(clean_data.clone(), n_samples, ns, dt)?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "noise"));
    let noise_sd: Vec<f64> = (0..ns)
        .map(|j| {
            let ms = clean_data.iter().skip(j).step_by(ns).map(|v| v * v).sum::<f64>() / n_samples as f64;
            let reference = if ms > 0.0 { ms.sqrt() } else { 1.0 };
            spec.noise_rms_fraction * reference
        })
        .collect();
    let mut noisy = clean_data;
    for row in noisy.chunks_exact_mut(ns) {
        for (v, sd) in row.iter_mut().zip(&noise_sd) {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += sd * e;
        }
    }
    let record = RecordMatrix::new(noisy, n_samples, ns, dt)?;
    Ok((
        record,
        GroundTruth {
            spec: spec.clone(),
            duration_s,
            fs,
            clean: Some(clean),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_matches_series_expansion() {
        // exp(A dt) by a 30-term Taylor series as an independent check.
        let (f, z, dt) = (7.621, 0.02, 1.0 / 128.0);
        let w = 2.0 * PI * f;
        let a = [[0.0, 1.0], [-w * w, -2.0 * z * w]];
        let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
            let mut r = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                }
            }
            r
        };
        let ad = [[a[0][0] * dt, a[0][1] * dt], [a[1][0] * dt, a[1][1] * dt]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        let mut sum = term;
        // Gamma = sum_k A^k dt^(k+1) / (k+1)! B
        let mut gsum = [0.0; 2];
        for k in 1..30 {
            let gk = [term[0][1] * dt / k as f64, term[1][1] * dt / k as f64];
            gsum = [gsum[0] + gk[0], gsum[1] + gk[1]];
            term = mul(term, ad);
            term = [[term[0][0] / k as f64, term[0][1] / k as f64], [term[1][0] / k as f64, term[1][1] / k as f64]];
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        let (phi, gamma) = discretize(f, z, dt);
        for i in 0..2 {
            for j in 0..2 {
                assert!((phi[i][j] - sum[i][j]).abs() < 1e-12 * (1.0 + sum[i][j].abs()), "{i}{j}");
            }
            assert!((gamma[i] - gsum[i]).abs() < 1e-12, "gamma {i}: {} vs {}", gamma[i], gsum[i]);
        }
    }

    #[test]
    fn default_spec_geometry() {
        let (rec, truth) = generate(&StructureSpec::default(), DEFAULT_DURATION_S, DEFAULT_FS).unwrap();
        assert_eq!((rec.n_samples(), rec.n_channels()), (2048, 30));
        assert_eq!(rec.dt(), 0.0078125);
        assert_eq!(truth.spec.modes.len(), 4);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = StructureSpec::default();
        let (a, _) = generate(&spec, 4.0, 128.0).unwrap();
        let (b, _) = generate(&spec, 4.0, 128.0).unwrap();
        assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let other = StructureSpec { seed: 1, ..spec };
        assert_ne!(generate(&other, 4.0, 128.0).unwrap().0, a);
    }

    #[test]
    fn zero_modes_give_noise_at_requested_rms() {
        let spec = StructureSpec {
            n_sensors: 3,
            modes: vec![],
            noise_rms_fraction: 0.3,
            seed: 5,
        };
        let (rec, _) = generate(&spec, 100.0, 100.0).unwrap();
        for j in 0..3 {
            let col = rec.column(j);
            let rms = (col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64).sqrt();
            assert!((rms - 0.3).abs() < 0.3 * 0.03, "channel {j}: {rms}");
        }
    }

    #[test]
    fn aliasing_and_validation() {
        let mut spec = StructureSpec::default();
        spec.modes[3].frequency_hz = 64.0;
        assert!(matches!(generate(&spec, 16.0, 128.0), Err(Error::Aliasing { .. })));
        let mut spec = StructureSpec::default();
        spec.modes[1].frequency_hz = spec.modes[0].frequency_hz;
        assert!(matches!(generate(&spec, 16.0, 128.0), Err(Error::Config(_))));
        assert!(matches!(
            generate(&StructureSpec::default(), 0.4, 128.0),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn beam_shapes() {
        let shapes = default_mode_shapes(30, 4).unwrap();
        for (m, s) in shapes.iter().enumerate() {
            assert!(s.iter().any(|&v| v != 0.0));
            let sign_changes = s.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
            assert_eq!(sign_changes, m, "mode {}", m + 1);
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                let dot: f64 = shapes[a].iter().zip(&shapes[b]).map(|(x, y)| x * y).sum();
                assert!(dot.abs() < 1e-12);
            }
        }
        assert!(default_mode_shapes(4, 4).is_err());
    }

    #[test]
    fn clean_record_is_modal_superposition() {
        let spec = StructureSpec::default();
        let (_, truth) = generate(&spec, 4.0, 128.0).unwrap();
        let clean = truth.clean.unwrap();
        let n = clean.n_samples();
        let responses = modal_responses(&spec, n, 128.0);
        let zero = vec![0.0; spec.n_sensors];
        let drop = 2;
        let shapes: Vec<&[f64]> = spec
            .modes
            .iter()
            .enumerate()
            .map(|(m, mode)| if m == drop { zero.as_slice() } else { mode.shape.as_slice() })
            .collect();
        let without = superpose(&shapes, &responses, spec.n_sensors, n);
        for t in 0..n {
            for j in 0..spec.n_sensors {
                let isolated = clean.get(t, j) - without[t * spec.n_sensors + j];
                let expected = spec.modes[drop].shape[j] * responses[drop][t];
                assert!((isolated - expected).abs() <= 1e-12 * (1.0 + clean.get(t, j).abs()));
            }
        }
    }

    #[test]
    fn ground_truth_regenerates_clean_record() {
        let (_, truth) = generate(&StructureSpec::default(), 2.0, 128.0).unwrap();
        let parsed = GroundTruth::from_json(&truth.to_json()).unwrap();
        assert_eq!(parsed.regenerate_clean().unwrap(), truth.clean.unwrap());
    }

    #[test]
    fn clean_power_concentrates_near_the_modes() {
        use crate::modal::{cpsd, WelchConfig};
        let spec = StructureSpec::default();
        let (_, truth) = generate(&spec, DEFAULT_DURATION_S, DEFAULT_FS).unwrap();
        let g = cpsd(truth.clean.as_ref().unwrap(), WelchConfig::default()).unwrap();
        let near: Vec<bool> = g
            .frequencies()
            .iter()
            .map(|f| DEFAULT_FREQUENCIES.iter().any(|m| (f - m).abs() <= 1.0))
            .collect();
        for j in 0..spec.n_sensors {
            let auto = g.auto_spectrum(j);
            let total: f64 = auto.iter().sum();
            let close: f64 = auto.iter().zip(&near).filter(|(_, &n)| n).map(|(p, _)| p).sum();
            assert!(close >= 0.6 * total, "sensor {j}: {:.3}", close / total);
        }
    }
}
