use serde::{Deserialize, Serialize};

use super::{Dims, LstmError, LstmParams, Result, RmsPropState, TrainConfig, TENSOR_NAMES};

pub const CHECKPOINT_FORMAT: &str = "hht-forecast-lstm/1";

/// A tensor flattened in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Self-describing JSON container for one trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCheckpoint {
    pub format: String,
    pub dims: Dims,
    pub params: Vec<NamedTensor>,
    pub optimizer: Vec<NamedTensor>,
    pub train_config: TrainConfig,
}

fn flatten(p: &LstmParams) -> Vec<NamedTensor> {
    TENSOR_NAMES
        .iter()
        .zip(LstmParams::shapes(p.dims()))
        .zip(p.tensors())
        .map(|((name, shape), data)| NamedTensor {
            name: name.to_string(),
            shape,
            data: data.to_vec(),
        })
        .collect()
}

fn unflatten(dims: Dims, tensors: &[NamedTensor]) -> Result<LstmParams> {
    if tensors.len() != TENSOR_NAMES.len() {
        return Err(LstmError::Checkpoint(format!(
            "expected {} tensors, found {}",
            TENSOR_NAMES.len(),
            tensors.len()
        )));
    }
    let mut p = LstmParams::zeros(dims);
    let shapes = LstmParams::shapes(dims);
    for (((t, name), shape), dst) in tensors
        .iter()
        .zip(TENSOR_NAMES)
        .zip(shapes)
        .zip(p.tensors_mut())
    {
        if t.name != name || t.shape != shape || t.data.len() != dst.len() {
            return Err(LstmError::Checkpoint(format!(
                "tensor `{}` {:?} does not match `{name}` {shape:?}",
                t.name, t.shape
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(LstmError::NonFinite(format!("checkpoint tensor `{name}`")));
        }
        dst.copy_from_slice(&t.data);
    }
    Ok(p)
}

impl LstmCheckpoint {
    pub fn new(params: &LstmParams, optimizer: &RmsPropState, train_config: &TrainConfig) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            dims: params.dims(),
            params: flatten(params),
            optimizer: flatten(&optimizer.accumulators),
            train_config: *train_config,
        }
    }

    /// Restores the parameters, rejecting a checkpoint whose dimensions
    /// differ from `expected`.
    pub fn params(&self, expected: Dims) -> Result<LstmParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(LstmError::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.dims != expected {
            return Err(LstmError::DimensionMismatch {
                expected,
                found: self.dims,
            });
        }
        unflatten(self.dims, &self.params)
    }

    pub fn optimizer(&self) -> Result<RmsPropState> {
        Ok(RmsPropState {
            accumulators: unflatten(self.dims, &self.optimizer)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LstmError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LstmError::Checkpoint(e.to_string()))
    }
}
