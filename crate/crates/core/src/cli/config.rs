use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::ModelKind;
use crate::synth::{DEFAULT_DAMPING, DEFAULT_DURATION_S, DEFAULT_FREQUENCIES, DEFAULT_FS, DEFAULT_NOISE_FRACTION, DEFAULT_SENSORS};

/// Reads a JSON run configuration. Missing keys take their defaults and
/// unknown keys are rejected.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateRun {
    pub out: PathBuf,
    pub seed: u64,
    pub n_sensors: usize,
    pub frequencies: Vec<f64>,
    pub damping_ratio: f64,
    pub noise_rms_fraction: f64,
    pub duration_s: f64,
    pub fs: f64,
}

impl Default for GenerateRun {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            seed: 0,
            n_sensors: DEFAULT_SENSORS,
            frequencies: DEFAULT_FREQUENCIES.to_vec(),
            damping_ratio: DEFAULT_DAMPING,
            noise_rms_fraction: DEFAULT_NOISE_FRACTION,
            duration_s: DEFAULT_DURATION_S,
            fs: DEFAULT_FS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRun {
    pub records: PathBuf,
    pub out: PathBuf,
    pub variant: ModelKind,
    pub mask: Vec<usize>,
    /// Window stride; 2 for `cnn_c` and 6 otherwise when unset.
    pub ws: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub activation: String,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            records: PathBuf::from("out/records.csv"),
            out: PathBuf::from("out"),
            variant: ModelKind::CnnA,
            mask: vec![5],
            ws: None,
            epochs: crate::recovery::DEFAULT_EPOCHS,
            seed: 0,
            validation_fraction: 0.2,
            learning_rate: crate::nn::AdamConfig::default().learning_rate,
            dropout_rate: crate::nn::DEFAULT_DROPOUT_RATE,
            activation: "elu".into(),
        }
    }
}

impl TrainRun {
    pub fn stride(&self) -> usize {
        self.ws.unwrap_or(match self.variant {
            ModelKind::CnnC => 2,
            _ => crate::signal::DEFAULT_STRIDE,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverRun {
    pub records: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    /// Faulted sensors; taken from the checkpoint when unset.
    pub mask: Option<Vec<usize>>,
    /// Window indices to report; an empty list draws `random_windows`
    /// distinct indices from the seed.
    pub windows: Vec<usize>,
    pub random_windows: usize,
    pub seed: u64,
}

impl Default for RecoverRun {
    fn default() -> Self {
        Self {
            records: PathBuf::from("out/records.csv"),
            checkpoint: PathBuf::from("out/checkpoint.json"),
            out: PathBuf::from("out"),
            mask: None,
            windows: Vec::new(),
            random_windows: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModalRun {
    pub reference: PathBuf,
    pub recovered: PathBuf,
    pub out: PathBuf,
    pub n_modes: usize,
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub min_prominence_db: f64,
}

impl Default for ModalRun {
    fn default() -> Self {
        let opts = crate::modal::ModalOptions::default();
        Self {
            reference: PathBuf::from("out/records.csv"),
            recovered: PathBuf::from("out/recovered_records.csv"),
            out: PathBuf::from("out"),
            n_modes: opts.n_modes,
            segment_len: opts.welch.segment_len,
            overlap_fraction: opts.welch.overlap_fraction,
            min_prominence_db: opts.min_prominence_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckRun {
    pub variant: ModelKind,
    pub seed: u64,
    pub eps: f64,
    pub threshold: f64,
    pub samples_per_tensor: usize,
    /// Redraw entries whose stencil crosses a pooling tie or activation kink.
    pub skip_kinks: bool,
    pub n_sensors: usize,
    pub out: Option<PathBuf>,
}

impl Default for GradcheckRun {
    fn default() -> Self {
        Self {
            variant: ModelKind::CnnA,
            seed: 0,
            eps: 1e-5,
            threshold: 1e-4,
            samples_per_tensor: 16,
            skip_kinks: true,
            n_sensors: DEFAULT_SENSORS,
            out: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.json");
        fs::write(&path, r#"{"epochs": 3, "variant": "nn"}"#).unwrap();
        let run: TrainRun = load_config(Some(&path)).unwrap();
        assert_eq!(run.epochs, 3);
        assert_eq!(run.variant, ModelKind::NnBaseline);
        assert_eq!(run.mask, vec![5]);
        assert_eq!(run.stride(), 6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("modal.json");
        fs::write(&path, r#"{"n_modes": 4, "nmodes": 3}"#).unwrap();
        let err = load_config::<ModalRun>(Some(&path)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_config::<GenerateRun>(Some(Path::new("/nonexistent/run.json"))).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn model_c_defaults_to_denser_windows() {
        let run = TrainRun {
            variant: ModelKind::CnnC,
            ..TrainRun::default()
        };
        assert_eq!(run.stride(), 2);
    }
}
