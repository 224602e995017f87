use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NormalizedMatrix;
use crate::error::{Error, Result};

/// Default stride between consecutive windows, in samples.
pub const DEFAULT_STRIDE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowingConfig {
    pub length: usize,
    pub stride: usize,
}

impl WindowingConfig {
    pub fn new(length: usize, stride: usize) -> Result<Self> {
        if length == 0 || stride == 0 {
            return Err(Error::Config(format!(
                "window length and stride must be positive (got {length}, {stride})"
            )));
        }
        Ok(Self { length, stride })
    }

    /// Square windows over `n_sensors` channels with the default stride.
    pub fn square(n_sensors: usize) -> Self {
        Self {
            length: n_sensors,
            stride: DEFAULT_STRIDE,
        }
    }
}

/// Faulted sensors, in the order their samples appear in the target vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MaskSpec {
    faulted: Vec<usize>,
}

impl MaskSpec {
    pub fn new(faulted: Vec<usize>) -> Result<Self> {
        if faulted.is_empty() || faulted.len() > 2 {
            return Err(Error::Config(format!(
                "mask must name one or two sensors, got {}",
                faulted.len()
            )));
        }
        if faulted.len() == 2 && faulted[0] == faulted[1] {
            return Err(Error::Config(format!("duplicate sensor {} in mask", faulted[0])));
        }
        Ok(Self { faulted })
    }

    pub fn faulted(&self) -> &[usize] {
        &self.faulted
    }

    pub fn len(&self) -> usize {
        self.faulted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faulted.is_empty()
    }

    pub fn contains(&self, channel: usize) -> bool {
        self.faulted.contains(&channel)
    }

    pub fn check_channels(&self, n_channels: usize) -> Result<()> {
        match self.faulted.iter().find(|&&j| j >= n_channels) {
            Some(&j) => Err(Error::Index {
                index: j,
                limit: n_channels,
            }),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for MaskSpec {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MaskSpec> for Vec<usize> {
    fn from(m: MaskSpec) -> Self {
        m.faulted
    }
}

/// Overlapping input windows paired with the samples removed from them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    /// Row-major `length x n_channels` blocks with faulted columns zeroed.
    pub inputs: Vec<Vec<f64>>,
    /// Removed columns, concatenated in mask order.
    pub targets: Vec<Vec<f64>>,
    /// Start sample of each window in the source record.
    pub starts: Vec<usize>,
    pub length: usize,
    pub n_channels: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn target_len(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize]) -> WindowSet {
        WindowSet {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
            starts: indices.iter().map(|&i| self.starts[i]).collect(),
            length: self.length,
            n_channels: self.n_channels,
        }
    }
}

/// Number of windows fully contained in `n_samples`.
pub fn window_count(n_samples: usize, cfg: WindowingConfig) -> Result<usize> {
    if n_samples < cfg.length {
        return Err(Error::InsufficientData {
            available: n_samples,
            required: cfg.length,
        });
    }
    Ok((n_samples - cfg.length) / cfg.stride + 1)
}

/// Copies one `length x n_channels` block starting at `start` and zeroes the
/// faulted columns. Returns the masked block and the removed samples.
pub fn mask_block(
    norm: &NormalizedMatrix,
    start: usize,
    length: usize,
    mask: &MaskSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ns = norm.n_channels();
    mask.check_channels(ns)?;
    if start + length > norm.n_samples() {
        return Err(Error::InsufficientData {
            available: norm.n_samples(),
            required: start + length,
        });
    }
    let mut input = norm.data()[start * ns..(start + length) * ns].to_vec();
    let mut target = Vec::with_capacity(length * mask.len());
    for &j in mask.faulted() {
        for t in 0..length {
            target.push(input[t * ns + j]);
        }
    }
    for &j in mask.faulted() {
        for t in 0..length {
            input[t * ns + j] = 0.0;
        }
    }
    Ok((input, target))
}

pub fn extract_windows(
    norm: &NormalizedMatrix,
    cfg: WindowingConfig,
    mask: &MaskSpec,
) -> Result<WindowSet> {
    if cfg.length != norm.n_channels() {
        return Err(Error::Config(format!(
            "square windows need length = channel count ({} != {})",
            cfg.length,
            norm.n_channels()
        )));
    }
    let count = window_count(norm.n_samples(), cfg)?;
    let mut set = WindowSet {
        inputs: Vec::with_capacity(count),
        targets: Vec::with_capacity(count),
        starts: Vec::with_capacity(count),
        length: cfg.length,
        n_channels: norm.n_channels(),
    };
    for w in 0..count {
        let start = w * cfg.stride;
        let (input, target) = mask_block(norm, start, cfg.length, mask)?;
        set.inputs.push(input);
        set.targets.push(target);
        set.starts.push(start);
    }
    Ok(set)
}

/// Seeded shuffle (ChaCha8) followed by a cut at `round(fraction * W)`.
pub fn split_train_validation(
    set: &WindowSet,
    fraction: f64,
    seed: u64,
) -> Result<(WindowSet, WindowSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "training fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = set.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Config(format!(
            "{n} windows cannot be split {n_train}/{} at fraction {fraction}",
            n.saturating_sub(n_train)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((set.subset(&order[..n_train]), set.subset(&order[n_train..])))
}
