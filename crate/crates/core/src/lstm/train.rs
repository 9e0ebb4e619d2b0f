use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{backward_into, forward};
use super::optim::{clip_global_norm, rmsprop_step, RmsPropState};
use super::{CellState, LstmError, LstmParams, Result};
use crate::window::WindowedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    /// Stop after this many epochs without a validation improvement; 0
    /// disables early stopping.
    pub early_stop_patience: usize,
    /// Optional cap on the global gradient norm of each batch.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            shuffle_seed: 0,
            early_stop_patience: 30,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(LstmError::Config("learning_rate must be finite and >= 0".into()));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(LstmError::Config("rmsprop_decay must lie in (0, 1)".into()));
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return Err(LstmError::Config("rmsprop_epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(LstmError::Config("batch_size must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(LstmError::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: LstmParams,
    pub optimizer: RmsPropState,
    pub history: Vec<EpochLoss>,
    pub best_epoch: Option<usize>,
}

fn sequence(window: &Array2<f64>) -> Vec<Array1<f64>> {
    window.rows().into_iter().map(|r| r.to_owned()).collect()
}

fn check_dataset(params: &LstmParams, ds: &WindowedDataset, name: &'static str) -> Result<()> {
    if ds.is_empty() {
        return Err(LstmError::EmptyDataset(name));
    }
    let dims = params.dims();
    if ds.channels != dims.input_size || ds.output_size() != dims.output_size {
        return Err(LstmError::Shape(format!(
            "{name} dataset has {} channels and {} outputs, model expects {} and {}",
            ds.channels,
            ds.output_size(),
            dims.input_size,
            dims.output_size
        )));
    }
    Ok(())
}

/// Last-step outputs for every window of `ds`.
pub fn predict(params: &LstmParams, ds: &WindowedDataset) -> Result<Vec<Array1<f64>>> {
    let init = CellState::zeros(params.dims().hidden_size);
    ds.inputs
        .iter()
        .map(|w| {
            let pass = forward(params, &sequence(w), &init)?;
            Ok(pass.outputs.into_iter().last().expect("non-empty sequence"))
        })
        .collect()
}

fn dataset_loss(params: &LstmParams, ds: &WindowedDataset) -> Result<f64> {
    super::mse_loss(&predict(params, ds)?, &ds.targets)
}

/// Mini-batch rmsprop on the last-step MSE. Returns the parameters with the
/// best validation loss seen at the end of any epoch.
pub fn train(
    params: LstmParams,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    params.check_shapes().map_err(LstmError::Shape)?;
    check_dataset(&params, train_set, "training")?;
    check_dataset(&params, val_set, "validation")?;

    let dims = params.dims();
    let init = CellState::zeros(dims.hidden_size);
    let mut optimizer = RmsPropState::new(&params);
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = None;
    let mut params = params;
    let mut history = Vec::with_capacity(config.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let sequences: Vec<Vec<Array1<f64>>> = train_set.inputs.iter().map(sequence).collect();
    let mut grads = LstmParams::zeros(dims);
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grads.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
            let scale = 2.0 / (chunk.len() * dims.output_size) as f64;
            let mut batch_loss = 0.0;
            for &k in chunk {
                let pass = forward(&params, &sequences[k], &init)?;
                let steps = pass.outputs.len();
                let err = &pass.outputs[steps - 1] - &train_set.targets[k];
                batch_loss += err.mapv(|e| e * e).sum();
                let mut d_outputs = vec![Array1::zeros(dims.output_size); steps];
                d_outputs[steps - 1] = err * scale;
                backward_into(&params, &pass.caches, &d_outputs, &mut grads)?;
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(LstmError::NonFiniteLoss { epoch, batch });
            }
            if let Some(max_norm) = config.clip_norm {
                clip_global_norm(&mut grads, max_norm);
            }
            rmsprop_step(&mut params, &grads, &mut optimizer, config)?;
        }

        let train_loss = dataset_loss(&params, train_set)?;
        let val_loss = dataset_loss(&params, val_set)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(LstmError::NonFiniteLoss { epoch, batch: 0 });
        }
        history.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = params.clone();
            best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if config.early_stop_patience > 0 && since_best >= config.early_stop_patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params: best,
        optimizer,
        history,
        best_epoch,
    })
}
