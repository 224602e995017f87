use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::{output_size, ConvLayer};
use super::dense::DenseLayer;
use super::dropout::{check_rate, DropoutLayer};
use super::pool::MaxPoolLayer;
use super::{Activation, Tensor};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// One entry of a layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        kernel_size: usize,
        stride: usize,
        filters: usize,
        activation: Activation,
    },
    #[serde(rename = "maxpool")]
    MaxPool { size: usize, stride: usize },
    Dropout { rate: f64 },
    Dense { out_dim: usize, activation: Activation },
    Flatten,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// Output shape for a given input shape, checking size integrality.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv {
                kernel_size,
                stride,
                filters,
                activation,
            } => {
                activation.validate()?;
                let [h, w, _] = spatial(input)?;
                if filters == 0 {
                    return Err(Error::Shape("conv layer needs at least one filter".into()));
                }
                Ok(vec![
                    output_size(h, kernel_size, stride)?,
                    output_size(w, kernel_size, stride)?,
                    filters,
                ])
            }
            LayerSpec::MaxPool { size, stride } => {
                let [h, w, c] = spatial(input)?;
                Ok(vec![output_size(h, size, stride)?, output_size(w, size, stride)?, c])
            }
            LayerSpec::Dropout { rate } => {
                check_rate(rate)?;
                Ok(input.to_vec())
            }
            LayerSpec::Dense { out_dim, activation } => {
                activation.validate()?;
                if input.len() != 1 {
                    return Err(Error::Shape(format!("dense layer needs flat input, got {input:?}")));
                }
                if out_dim == 0 {
                    return Err(Error::Shape("dense layer needs at least one output".into()));
                }
                Ok(vec![out_dim])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

fn spatial(shape: &[usize]) -> Result<[usize; 3]> {
    match *shape {
        [h, w, c] => Ok([h, w, c]),
        _ => Err(Error::Shape(format!("expected H x W x C input, got {shape:?}"))),
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(ConvLayer),
    MaxPool(MaxPoolLayer),
    Dropout(DropoutLayer),
    Dense(DenseLayer),
    Flatten(Option<Vec<usize>>),
}

fn glorot(shape: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape, values).expect("glorot shape")
}

/// An ordered layer stack with materialized weights.
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    layers: Vec<Layer>,
    rng_seed: u64,
}

impl Network {
    /// Materializes `specs` on `input_shape`, drawing initial weights
    /// uniformly in `±sqrt(6 / (fan_in + fan_out))` with zero biases.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], rng_seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, "init"));
        let mut shape = input_shape.to_vec();
        let mut shapes = Vec::with_capacity(specs.len());
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let out = spec.output_shape(&shape).map_err(|e| {
                Error::Shape(format!("layer {i} ({}) on input {shape:?}: {e}", spec.kind()))
            })?;
            let layer = match *spec {
                LayerSpec::Conv {
                    kernel_size: k,
                    stride,
                    filters,
                    activation,
                } => {
                    let cin = shape[2];
                    let kernels = glorot(vec![k, k, cin, filters], k * k * cin, k * k * filters, &mut rng);
                    Layer::Conv(ConvLayer::new(kernels, Tensor::zeros(vec![filters]), stride, activation))
                }
                LayerSpec::MaxPool { size, stride } => Layer::MaxPool(MaxPoolLayer::new(size, stride)),
                LayerSpec::Dropout { rate } => Layer::Dropout(DropoutLayer::new(rate)?),
                LayerSpec::Dense { out_dim, activation } => {
                    let n = shape[0];
                    let w = glorot(vec![n, out_dim], n, out_dim, &mut rng);
                    Layer::Dense(DenseLayer::new(w, Tensor::zeros(vec![out_dim]), activation))
                }
                LayerSpec::Flatten => Layer::Flatten(None),
            };
            layers.push(layer);
            shapes.push(out.clone());
            shape = out;
        }
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            specs: specs.to_vec(),
            shapes,
            layers,
            rng_seed,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Output shape of every layer, in order.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().map_or(0, |s| s.iter().product())
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Trainable tensors in layer order (weights before bias).
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&c.kernels, &c.bias]),
                Layer::Dense(d) => out.extend([&d.weights, &d.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.kernels, &mut c.bias]),
                Layer::Dense(d) => out.extend([&mut d.weights, &mut d.bias]),
                _ => {}
            }
        }
        out
    }

    /// Layer index owning each trainable tensor.
    pub fn param_layers(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, Layer::Conv(_) | Layer::Dense(_)) {
                out.extend([i, i]);
            }
        }
        out
    }

    pub fn clear_grads(&mut self) {
        self.params_mut().into_iter().for_each(Tensor::clear_grad);
    }

    /// Which side of every non-smooth point the last training-mode forward
    /// pass took: pooling winners and, for activations with a kink, the
    /// sign of each pre-activation. Two passes with equal patterns lie on
    /// the same smooth piece of the loss.
    pub(crate) fn branch_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::MaxPool(p) => out.extend_from_slice(p.cached_argmax().unwrap_or(&[])),
                Layer::Conv(c) if c.activation.has_kink() => {
                    out.extend(c.cached_pre_activation().unwrap_or(&[]).iter().map(|&z| usize::from(z >= 0.0)));
                }
                Layer::Dense(d) if d.activation.has_kink() => {
                    out.extend(d.cached_pre_activation().unwrap_or(&[]).iter().map(|&z| usize::from(z >= 0.0)));
                }
                _ => {}
            }
        }
        out
    }

    pub(crate) fn set_dropout_frozen(&mut self, frozen: bool) {
        for layer in &mut self.layers {
            if let Layer::Dropout(d) = layer {
                d.set_frozen(frozen);
            }
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::Dimension(format!(
                "network expects input {:?}, got {:?}",
                self.input_shape,
                input.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass that caches intermediates for [`Network::backward`].
    /// Dropout is active only when `rng` is supplied.
    pub fn forward(&mut self, input: &Tensor, mut rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = match layer {
                Layer::Conv(c) => c.forward(&x)?,
                Layer::MaxPool(p) => p.forward(&x)?,
                Layer::Dropout(d) => d.forward(&x, rng.as_deref_mut())?,
                Layer::Dense(d) => d.forward(&x)?,
                Layer::Flatten(cache) => {
                    *cache = Some(x.shape().to_vec());
                    let n = x.len();
                    x.reshaped(vec![n])?
                }
            };
        }
        Ok(x)
    }

    /// Inference-mode forward pass on an immutable network.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = match layer {
                Layer::Conv(c) => c.predict(&x)?,
                Layer::MaxPool(p) => p.predict(&x)?,
                Layer::Dropout(_) => x,
                Layer::Dense(d) => d.predict(&x)?,
                Layer::Flatten(_) => {
                    let n = x.len();
                    x.reshaped(vec![n])?
                }
            };
        }
        Ok(x)
    }

    /// Backpropagates the loss gradient, adding parameter gradients into each
    /// tensor's gradient buffer. Returns the gradient with respect to the
    /// network input when `need_input` is set.
    pub fn backward_full(&mut self, output_grad: &Tensor, need_input: bool) -> Result<Option<Tensor>> {
        let mut g = output_grad.clone();
        let n = self.layers.len();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let want_input = i > 0 || need_input;
            let next = match layer {
                Layer::Conv(c) => {
                    let grads = c.backward(&g, want_input)?;
                    c.kernels.accumulate_grad_owned(grads.kernels.into_values());
                    c.bias.accumulate_grad_owned(grads.bias.into_values());
                    grads.input
                }
                Layer::Dense(d) => {
                    let grads = d.backward(&g, want_input)?;
                    d.weights.accumulate_grad_owned(grads.weights.into_values());
                    d.bias.accumulate_grad_owned(grads.bias.into_values());
                    grads.input
                }
                Layer::MaxPool(p) => Some(p.backward(&g)?),
                Layer::Dropout(d) => Some(d.backward(&g)?),
                Layer::Flatten(cache) => {
                    let shape = cache
                        .clone()
                        .ok_or_else(|| Error::State("flatten backward called before forward".into()))?;
                    Some(g.reshaped(shape)?)
                }
            };
            match next {
                Some(t) => g = t,
                None => {
                    debug_assert_eq!(i, 0, "only the first layer may skip its input gradient ({n})");
                    return Ok(None);
                }
            }
        }
        Ok(Some(g))
    }

    pub fn backward(&mut self, output_grad: &Tensor) -> Result<()> {
        self.backward_full(output_grad, false).map(|_| ())
    }

    /// Replaces all trainable tensors with flat row-major arrays.
    pub fn load_weights(&mut self, weights: &[Vec<f64>]) -> Result<()> {
        let params = self.params_mut();
        if params.len() != weights.len() {
            return Err(Error::Checkpoint(format!(
                "architecture has {} weight tensors, checkpoint {}",
                params.len(),
                weights.len()
            )));
        }
        for (i, (t, w)) in params.into_iter().zip(weights).enumerate() {
            if t.len() != w.len() {
                return Err(Error::Checkpoint(format!(
                    "weight tensor {i} expects {} values, checkpoint has {}",
                    t.len(),
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("weight tensor {i} is not finite")));
            }
            t.values_mut().copy_from_slice(w);
            t.clear_grad();
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|t| t.values().to_vec()).collect()
    }
}
