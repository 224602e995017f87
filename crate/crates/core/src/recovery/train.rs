use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{rmse_loss, Adam, AdamConfig, Network, Tensor};
use crate::seed::derive_seed;
use crate::signal::WindowSet;

pub const DEFAULT_EPOCHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            validation_fraction: 0.2,
            seed: 0,
            optimizer: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub train_rmse: f64,
    pub train_mae: f64,
    pub val_rmse: f64,
    pub val_mae: f64,
}

/// Per-epoch error curves on the training and validation sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    pub epochs: Vec<EpochMetrics>,
}

impl ConvergenceLog {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    /// `epoch,train_rmse,train_mae,val_rmse,val_mae`, epochs numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_rmse,train_mae,val_rmse,val_mae\n");
        for (i, m) in self.epochs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                m.train_rmse,
                m.train_mae,
                m.val_rmse,
                m.val_mae
            );
        }
        out
    }
}

/// Pooled RMSE and MAE over every target element of `set`, inference mode.
pub fn evaluate(net: &Network, set: &WindowSet) -> Result<(f64, f64)> {
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut n = 0usize;
    for (input, target) in set.inputs.iter().zip(&set.targets) {
        let x = Tensor::new(net.input_shape().to_vec(), input.clone())?;
        let y = net.predict(&x)?;
        if y.len() != target.len() {
            return Err(Error::Dimension(format!(
                "model emits {} values, targets hold {}",
                y.len(),
                target.len()
            )));
        }
        for (p, t) in y.values().iter().zip(target) {
            sq += (p - t) * (p - t);
            abs += (p - t).abs();
        }
        n += target.len();
    }
    if n == 0 {
        return Err(Error::Config("cannot evaluate on an empty window set".into()));
    }
    Ok(((sq / n as f64).sqrt(), abs / n as f64))
}

fn check_sets(model: &Network, train: &WindowSet, val: &WindowSet) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config("training and validation sets must be nonempty".into()));
    }
    for set in [train, val] {
        if set.target_len() != model.output_len() {
            return Err(Error::Dimension(format!(
                "model emits {} values, targets hold {}",
                model.output_len(),
                set.target_len()
            )));
        }
        let window = set.length * set.n_channels;
        if window != model.input_shape().iter().product::<usize>() {
            return Err(Error::Dimension(format!(
                "windows of {}x{} do not fit input {:?}",
                set.length,
                set.n_channels,
                model.input_shape()
            )));
        }
    }
    Ok(())
}

/// Trains with one window per step, reshuffling the training set every
/// epoch. `on_epoch` sees each epoch's metrics as they are logged.
pub fn train_with<F>(
    mut model: Network,
    train_set: &WindowSet,
    val_set: &WindowSet,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<(Network, ConvergenceLog)>
where
    F: FnMut(usize, &EpochMetrics),
{
    cfg.validate()?;
    check_sets(&model, train_set, val_set)?;
    let mut adam = Adam::new(cfg.optimizer)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle"));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "dropout"));
    let shape = model.input_shape().to_vec();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = ConvergenceLog::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for &i in &order {
            let x = Tensor::new(shape.clone(), train_set.inputs[i].clone())?;
            let pred = model.forward(&x, Some(&mut dropout_rng))?;
            let (loss, grad) = rmse_loss(&pred, &Tensor::from_vec(train_set.targets[i].clone()))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            model.backward(&grad)?;
            adam.step(&mut model)?;
        }
        let (train_rmse, train_mae) = evaluate(&model, train_set)?;
        let (val_rmse, val_mae) = evaluate(&model, val_set)?;
        let m = EpochMetrics {
            train_rmse,
            train_mae,
            val_rmse,
            val_mae,
        };
        if ![train_rmse, train_mae, val_rmse, val_mae].iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        on_epoch(epoch, &m);
        log.epochs.push(m);
    }
    Ok((model, log))
}

pub fn train(
    model: Network,
    train_set: &WindowSet,
    val_set: &WindowSet,
    cfg: &TrainConfig,
) -> Result<(Network, ConvergenceLog)> {
    train_with(model, train_set, val_set, cfg, |_, _| {})
}
