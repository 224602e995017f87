use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, Network, DEFAULT_DROPOUT_RATE};

/// The four recovery architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Three conv/pool/dropout stages, one faulted sensor.
    CnnA,
    /// The first two stages of `CnnA`.
    CnnB,
    /// `CnnA` predicting two faulted sensors.
    CnnC,
    /// Fully connected baseline with two hidden layers.
    #[serde(rename = "nn", alias = "nn_baseline")]
    NnBaseline,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::CnnA, ModelKind::CnnB, ModelKind::CnnC, ModelKind::NnBaseline];

    pub fn n_faulted(self) -> usize {
        match self {
            ModelKind::CnnC => 2,
            _ => 1,
        }
    }

    pub fn conv_layers(self) -> usize {
        match self {
            ModelKind::CnnA | ModelKind::CnnC => 3,
            ModelKind::CnnB => 2,
            ModelKind::NnBaseline => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::CnnA => "cnn_a",
            ModelKind::CnnB => "cnn_b",
            ModelKind::CnnC => "cnn_c",
            ModelKind::NnBaseline => "nn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn_a" => Ok(ModelKind::CnnA),
            "cnn_b" => Ok(ModelKind::CnnB),
            "cnn_c" => Ok(ModelKind::CnnC),
            "nn" | "nn_baseline" => Ok(ModelKind::NnBaseline),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected cnn_a, cnn_b, cnn_c or nn)"
            ))),
        }
    }
}

/// Knobs shared by all variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOptions {
    /// Hidden-layer nonlinearity (conv layers, or the baseline's hidden layers).
    pub activation: Activation,
    pub dropout_rate: f64,
    pub hidden_widths: [usize; 2],
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            activation: Activation::elu(),
            dropout_rate: DEFAULT_DROPOUT_RATE,
            hidden_widths: [256, 64],
        }
    }
}

/// (kernel size, filters) of the three convolution stages.
const STAGES: [(usize, usize); 3] = [(17, 32), (8, 64), (4, 128)];
const POOL: usize = 2;
const POOL_STRIDE: usize = 1;

pub fn layer_specs(kind: ModelKind, n_sensors: usize, opts: &ModelOptions) -> Vec<LayerSpec> {
    let out_dim = n_sensors * kind.n_faulted();
    let head = LayerSpec::Dense {
        out_dim,
        activation: Activation::Sigmoid,
    };
    let mut specs = Vec::new();
    if kind == ModelKind::NnBaseline {
        specs.push(LayerSpec::Flatten);
        for &width in &opts.hidden_widths {
            specs.push(LayerSpec::Dense {
                out_dim: width,
                activation: opts.activation,
            });
        }
        specs.push(head);
        return specs;
    }
    for &(kernel_size, filters) in &STAGES[..kind.conv_layers()] {
        specs.push(LayerSpec::Conv {
            kernel_size,
            stride: 1,
            filters,
            activation: opts.activation,
        });
        specs.push(LayerSpec::MaxPool {
            size: POOL,
            stride: POOL_STRIDE,
        });
        specs.push(LayerSpec::Dropout {
            rate: opts.dropout_rate,
        });
    }
    specs.push(LayerSpec::Flatten);
    specs.push(head);
    specs
}

/// Builds a variant for square `n_sensors x n_sensors` windows.
pub fn build_model(kind: ModelKind, n_sensors: usize, opts: &ModelOptions, seed: u64) -> Result<Network> {
    Network::build(&[n_sensors, n_sensors, 1], &layer_specs(kind, n_sensors, opts), seed)
        .map_err(|e| match e {
            Error::Shape(msg) => Error::Shape(format!("{kind} for {n_sensors} sensors: {msg}")),
            other => other,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(net: &Network) -> Vec<Vec<usize>> {
        net.layer_shapes().to_vec()
    }

    #[test]
    fn cnn_a_reproduces_architecture_table() {
        let net = build_model(ModelKind::CnnA, 30, &ModelOptions::default(), 0).unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![14, 14, 32],
            vec![13, 13, 32],
            vec![13, 13, 32],
            vec![6, 6, 64],
            vec![5, 5, 64],
            vec![5, 5, 64],
            vec![2, 2, 128],
            vec![1, 1, 128],
            vec![1, 1, 128],
            vec![128],
            vec![30],
        ];
        assert_eq!(sizes(&net), expected);
    }

    #[test]
    fn variants_output_lengths() {
        let opts = ModelOptions::default();
        assert_eq!(build_model(ModelKind::CnnB, 30, &opts, 0).unwrap().layer_shapes()[6], vec![1600]);
        assert_eq!(build_model(ModelKind::CnnC, 30, &opts, 0).unwrap().output_len(), 60);
        let nn = build_model(ModelKind::NnBaseline, 30, &opts, 0).unwrap();
        assert_eq!(nn.layer_shapes()[0], vec![900]);
        let hidden: Vec<_> = nn
            .specs()
            .iter()
            .filter(|s| matches!(s, LayerSpec::Dense { activation: Activation::Elu { .. }, .. }))
            .collect();
        assert_eq!(hidden.len(), 2);
        assert_eq!(nn.output_len(), 30);
    }

    #[test]
    fn extra_stage_adds_parameters() {
        let opts = ModelOptions::default();
        let a = build_model(ModelKind::CnnA, 30, &opts, 0).unwrap().param_count();
        let b = build_model(ModelKind::CnnB, 30, &opts, 0).unwrap().param_count();
        assert!(a > b, "{a} vs {b}");
    }

    #[test]
    fn too_few_sensors_names_the_layer() {
        let err = build_model(ModelKind::CnnA, 20, &ModelOptions::default(), 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cnn_a") && msg.contains("layer 3 (conv)"), "{msg}");
    }

    #[test]
    fn kind_names() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert_eq!("nn_baseline".parse::<ModelKind>().unwrap(), ModelKind::NnBaseline);
        assert!("cnn_d".parse::<ModelKind>().is_err());
    }
}
