use serde::{Deserialize, Serialize};

use super::{Adam, AdamState, LayerSpec, Network};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// JSON checkpoint: layer specs, flat row-major weights, seed and optimizer
/// moments. `metadata` carries caller-defined context (for example the
/// normalization used during training).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub weights: Vec<Vec<f64>>,
    pub rng_seed: u64,
    pub optimizer: Option<AdamState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn capture(net: &Network, optimizer: Option<&Adam>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            input_shape: net.input_shape().to_vec(),
            layers: net.specs().to_vec(),
            weights: net.weights(),
            rng_seed: net.rng_seed(),
            optimizer: optimizer.map(|a| a.state().clone()),
            metadata: None,
        }
    }

    pub fn restore(&self) -> Result<(Network, Option<Adam>)> {
        let mut net = Network::build(&self.input_shape, &self.layers, self.rng_seed)?;
        net.load_weights(&self.weights)?;
        let adam = self.optimizer.clone().map(Adam::from_state).transpose()?;
        Ok((net, adam))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    /// Parses a checkpoint, rejecting schema versions other than the current one.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::Checkpoint(format!("unsupported schema version {v}"))),
            None => return Err(Error::Checkpoint("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
