//! Model variants, training with convergence logging, and recovery of
//! masked sensors.

mod model;
mod recover;
mod train;

pub use model::{build_model, layer_specs, ModelKind, ModelOptions};
pub use recover::{
    covering_starts, max_window_error, mean_predictor_rmse, predict_window, recover, recover_record,
};
pub use train::{evaluate, train, train_with, ConvergenceLog, EpochMetrics, TrainConfig, DEFAULT_EPOCHS};

use crate::error::Result;
use crate::seed::derive_seed;
use crate::signal::{
    extract_windows, normalize, split_train_validation, MaskSpec, NormalizedMatrix, RecordMatrix, WindowSet,
    WindowingConfig,
};

/// A normalized record cut into windows and split for training.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub normalized: NormalizedMatrix,
    pub windows: WindowSet,
    pub train: WindowSet,
    pub validation: WindowSet,
}

/// Normalizes, windows with square `Ns x Ns` blocks at `stride`, and splits
/// with the seed derived for the `split` role.
pub fn prepare_dataset(
    records: &RecordMatrix,
    mask: &MaskSpec,
    stride: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    let normalized = normalize(records)?;
    let cfg = WindowingConfig::new(records.n_channels(), stride)?;
    let windows = extract_windows(&normalized, cfg, mask)?;
    let (train, validation) =
        split_train_validation(&windows, 1.0 - validation_fraction, derive_seed(seed, "split"))?;
    Ok(Dataset {
        normalized,
        windows,
        train,
        validation,
    })
}
