//! Ingest, normalization, windowing and masking of multi-channel records.

mod metrics;
mod records;
mod scale;
mod window;

pub use metrics::{mae, rmse};
pub use records::{load_records, RecordMatrix};
pub use scale::{denormalize, normalize, normalize_with, ChannelBounds, NormalizedMatrix, ScaleParams};
pub use window::{
    extract_windows, mask_block, split_train_validation, window_count, MaskSpec, WindowSet,
    WindowingConfig, DEFAULT_STRIDE,
};
