//! End-to-end forecasting: decompose the price series with EEMD, scale each
//! channel on the training range, frame sliding windows, train LSTM(s),
//! and score next-bar forecasts on the validation and test ranges.
//!
//! The decomposition runs once over the full series before splitting, so
//! IMF values near a split boundary are influenced by later samples. Window
//! construction and scaler fitting are leakage-free; the decomposition is
//! not.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{fit_scaler, split, ScalerMode, ScalerState, SplitRanges, SplitSpec, TimeSeries};
use crate::eemd::{eemd, EemdConfig, EemdResult};
use crate::emd::ImfSet;
use crate::lstm::{init_params, predict, train, Dims, LstmCheckpoint, LstmParams, TrainConfig, TrainOutcome};
use crate::metrics::{evaluate, Metrics};
use crate::window::{make_windows, WindowTarget, WindowedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Decompose,
    Scale,
    Window,
    Train,
    Predict,
    Evaluate,
    Checkpoint,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Decompose => "decompose",
            Stage::Scale => "scale",
            Stage::Window => "window",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
            Stage::Checkpoint => "checkpoint",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    fn at<E: std::error::Error + Send + Sync + 'static>(stage: Stage) -> impl FnOnce(E) -> Self {
        move |e| PipelineError {
            stage,
            source: Box::new(e),
        }
    }

    fn msg(stage: Stage, message: impl Into<String>) -> Self {
        PipelineError {
            stage,
            source: message.into().into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// One network over all channels predicting the scaled price.
    #[default]
    Joint,
    /// One single-channel network per channel; forecasts are summed.
    PerImf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub eemd: EemdConfig,
    pub scaler_mode: ScalerMode,
    pub split: SplitSpec,
    pub lookback: usize,
    /// Bars between the last window sample and the target.
    pub horizon: usize,
    /// Cap on IMF-plus-residue channels; surplus IMFs fold into the residue.
    pub max_channels: usize,
    pub hidden_size: usize,
    pub init_seed: u64,
    pub train: TrainConfig,
    pub strategy: Strategy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            eemd: EemdConfig::default(),
            scaler_mode: ScalerMode::Std,
            split: SplitSpec::default(),
            lookback: 3,
            horizon: 1,
            max_channels: 7,
            hidden_size: 32,
            init_seed: 0,
            train: TrainConfig::default(),
            strategy: Strategy::Joint,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback < 1 || self.horizon < 1 {
            return Err(PipelineError::msg(Stage::Window, "lookback and horizon must be at least 1"));
        }
        if self.max_channels < 1 || self.hidden_size < 1 {
            return Err(PipelineError::msg(Stage::Train, "max_channels and hidden_size must be at least 1"));
        }
        self.eemd.validate().map_err(PipelineError::at(Stage::Decompose))?;
        self.split.validate().map_err(PipelineError::at(Stage::Window))?;
        self.train.validate().map_err(PipelineError::at(Stage::Train))?;
        Ok(())
    }

    /// Dimensions of model `k` given the number of channels.
    pub fn model_dims(&self, channels: usize) -> Vec<Dims> {
        let dims = |input_size| Dims {
            input_size,
            hidden_size: self.hidden_size,
            output_size: 1,
        };
        match self.strategy {
            Strategy::Joint => vec![dims(channels)],
            Strategy::PerImf => vec![dims(1); channels],
        }
    }
}

/// IMFs followed by the residue, at most `max_channels` series. When there
/// are more, the trailing IMFs are added into the residue.
pub fn fold_channels(set: &ImfSet, max_channels: usize) -> Vec<Vec<f64>> {
    let keep = set.imfs.len().min(max_channels.saturating_sub(1));
    let mut channels: Vec<Vec<f64>> = set.imfs[..keep].iter().map(|i| i.values.clone()).collect();
    let mut residue = set.residue.clone();
    for imf in &set.imfs[keep..] {
        for (r, v) in residue.iter_mut().zip(&imf.values) {
            *r += v;
        }
    }
    channels.push(residue);
    channels
}

/// Train, validation and test windows for one network.
#[derive(Debug, Clone)]
pub struct SplitDatasets {
    pub train: WindowedDataset,
    pub validation: WindowedDataset,
    pub test: WindowedDataset,
    /// Full framing over the whole series (every target index).
    pub all: WindowedDataset,
}

/// Everything computed before training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub prices: Vec<f64>,
    pub eemd: EemdResult,
    /// Unscaled channels (IMFs then residue).
    pub channels: Vec<Vec<f64>>,
    pub channel_scalers: Vec<ScalerState>,
    pub price_scaler: ScalerState,
    pub scaled_channels: Vec<Vec<f64>>,
    pub scaled_prices: Vec<f64>,
    pub splits: SplitRanges,
    /// One entry per network, in model order.
    pub datasets: Vec<SplitDatasets>,
}

fn split_datasets(all: WindowedDataset, splits: &SplitRanges) -> SplitDatasets {
    SplitDatasets {
        train: all.subset(splits.train.clone()),
        validation: all.subset(splits.validation.clone()),
        test: all.subset(splits.test.clone()),
        all,
    }
}

/// Decomposes, scales and frames `prices`.
pub fn prepare(prices: &[f64], config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    let splits = split(prices.len(), &config.split).map_err(PipelineError::at(Stage::Window))?;
    let eemd = eemd(prices, &config.eemd).map_err(PipelineError::at(Stage::Decompose))?;
    prepare_from_decomposition(prices, eemd, splits, config)
}

fn prepare_from_decomposition(
    prices: &[f64],
    eemd: EemdResult,
    splits: SplitRanges,
    config: &PipelineConfig,
) -> Result<Prepared> {
    let channels = fold_channels(&eemd.imf_set, config.max_channels);
    let fit = |values: &[f64]| {
        fit_scaler(&values[splits.train.clone()], config.scaler_mode).map_err(PipelineError::at(Stage::Scale))
    };
    let channel_scalers = channels.iter().map(|c| fit(c)).collect::<Result<Vec<_>>>()?;
    let price_scaler = fit(prices)?;
    let scaled_channels = channels
        .iter()
        .zip(&channel_scalers)
        .map(|(c, s)| s.scale(c).map_err(PipelineError::at(Stage::Scale)))
        .collect::<Result<Vec<_>>>()?;
    let scaled_prices = price_scaler.scale(prices).map_err(PipelineError::at(Stage::Scale))?;

    let frame = |inputs: &[Vec<f64>], target: WindowTarget| {
        make_windows(inputs, config.lookback, config.horizon, target)
            .map(|all| split_datasets(all, &splits))
            .map_err(PipelineError::at(Stage::Window))
    };
    let datasets = match config.strategy {
        Strategy::Joint => vec![frame(&scaled_channels, WindowTarget::Series(scaled_prices.clone()))?],
        Strategy::PerImf => scaled_channels
            .iter()
            .map(|c| frame(std::slice::from_ref(c), WindowTarget::PerChannel))
            .collect::<Result<Vec<_>>>()?,
    };
    for d in &datasets {
        for (name, ds) in [("training", &d.train), ("validation", &d.validation), ("test", &d.test)] {
            if ds.is_empty() {
                return Err(PipelineError::msg(
                    Stage::Window,
                    format!("{name} split has no windows; series too short for lookback {}", config.lookback),
                ));
            }
            ds.check_leakage_free().map_err(PipelineError::at(Stage::Window))?;
        }
    }
    Ok(Prepared {
        prices: prices.to_vec(),
        eemd,
        channels,
        channel_scalers,
        price_scaler,
        scaled_channels,
        scaled_prices,
        splits,
        datasets,
    })
}

/// Trains one network per dataset of `prepared`. Per-channel networks train
/// in parallel; results keep model order.
pub fn train_models(prepared: &Prepared, config: &PipelineConfig) -> Result<Vec<TrainOutcome>> {
    let dims = config.model_dims(prepared.channels.len());
    prepared
        .datasets
        .par_iter()
        .zip(dims.par_iter())
        .enumerate()
        .map(|(k, (d, &dims))| {
            let params = init_params(dims, config.init_seed.wrapping_add(k as u64));
            train(params, &d.train, &d.validation, &config.train).map_err(PipelineError::at(Stage::Train))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub split_name: String,
    /// Series index of each target.
    pub index_map: Vec<usize>,
    /// Price-unit forecasts.
    pub predictions: Vec<f64>,
    pub actuals: Vec<f64>,
    /// Forecasts and actuals through the training-range price scaler.
    pub predictions_scaled: Vec<f64>,
    pub actuals_scaled: Vec<f64>,
    /// Per-channel price-unit forecasts (`per-imf` only); they sum to
    /// `predictions`.
    pub channel_predictions: Option<Vec<Vec<f64>>>,
    pub metrics: Metrics,
    /// Persistence forecast `y[t - horizon]` on the same targets.
    pub baseline: Vec<f64>,
    pub baseline_metrics: Metrics,
}

fn select(ds: &SplitDatasets, split_name: &str) -> WindowedDataset {
    match split_name {
        "train" => ds.train.clone(),
        "validation" => ds.validation.clone(),
        _ => ds.test.clone(),
    }
}

/// Price-unit forecasts for the windows of one split.
fn split_forecast(
    prepared: &Prepared,
    models: &[LstmParams],
    config: &PipelineConfig,
    split_name: &str,
) -> Result<(Vec<usize>, Vec<f64>, Option<Vec<Vec<f64>>>)> {
    if models.len() != prepared.datasets.len() {
        return Err(PipelineError::msg(
            Stage::Predict,
            format!("{} models for {} datasets", models.len(), prepared.datasets.len()),
        ));
    }
    let predict_scaled = |k: usize| -> Result<(Vec<usize>, Vec<f64>)> {
        let ds = select(&prepared.datasets[k], split_name);
        let out = predict(&models[k], &ds).map_err(PipelineError::at(Stage::Predict))?;
        Ok((ds.index_map, out.into_iter().map(|y| y[0]).collect()))
    };
    match config.strategy {
        Strategy::Joint => {
            let (index_map, scaled) = predict_scaled(0)?;
            let preds = prepared
                .price_scaler
                .unscale(&scaled)
                .map_err(PipelineError::at(Stage::Predict))?;
            Ok((index_map, preds, None))
        }
        Strategy::PerImf => {
            let mut index_map = Vec::new();
            let mut per_channel = Vec::with_capacity(models.len());
            for k in 0..models.len() {
                let (idx, scaled) = predict_scaled(k)?;
                if k == 0 {
                    index_map = idx;
                } else if idx != index_map {
                    return Err(PipelineError::msg(Stage::Predict, "channel windows are misaligned"));
                }
                per_channel.push(
                    prepared.channel_scalers[k]
                        .unscale(&scaled)
                        .map_err(PipelineError::at(Stage::Predict))?,
                );
            }
            let preds = recombine(&per_channel);
            Ok((index_map, preds, Some(per_channel)))
        }
    }
}

/// Element-wise sum of per-channel forecasts, in channel order.
pub fn recombine(per_channel: &[Vec<f64>]) -> Vec<f64> {
    let len = per_channel.first().map_or(0, Vec::len);
    (0..len)
        .map(|t| per_channel.iter().fold(0.0, |acc, c| acc + c[t]))
        .collect()
}

/// Scores `models` on one split (`"train"`, `"validation"` or `"test"`).
pub fn forecast_report(
    prepared: &Prepared,
    models: &[LstmParams],
    config: &PipelineConfig,
    split_name: &str,
) -> Result<ForecastReport> {
    let (index_map, predictions, channel_predictions) = split_forecast(prepared, models, config, split_name)?;
    let actuals: Vec<f64> = index_map.iter().map(|&t| prepared.prices[t]).collect();
    let baseline: Vec<f64> = index_map
        .iter()
        .map(|&t| prepared.prices[t - config.horizon])
        .collect();
    let metrics = evaluate(&predictions, &actuals).map_err(PipelineError::at(Stage::Evaluate))?;
    let baseline_metrics = evaluate(&baseline, &actuals).map_err(PipelineError::at(Stage::Evaluate))?;
    let scaler = &prepared.price_scaler;
    Ok(ForecastReport {
        split_name: split_name.to_string(),
        predictions_scaled: scaler.scale(&predictions).map_err(PipelineError::at(Stage::Evaluate))?,
        actuals_scaled: index_map.iter().map(|&t| prepared.scaled_prices[t]).collect(),
        index_map,
        predictions,
        actuals,
        channel_predictions,
        metrics,
        baseline,
        baseline_metrics,
    })
}

/// Forecast for the bar `horizon` steps after the last sample.
pub fn forecast_next(prepared: &Prepared, models: &[LstmParams], config: &PipelineConfig) -> Result<f64> {
    let len = prepared.prices.len();
    let start = len - config.lookback;
    let window = |inputs: &[Vec<f64>]| {
        let tail: Vec<Vec<f64>> = inputs.iter().map(|c| c[start..].to_vec()).collect();
        // Dummy target slot; only the input window is used.
        let padded: Vec<Vec<f64>> = tail
            .into_iter()
            .map(|mut c| {
                c.extend(std::iter::repeat_n(0.0, config.horizon));
                c
            })
            .collect();
        make_windows(&padded, config.lookback, config.horizon, WindowTarget::PerChannel)
            .map_err(PipelineError::at(Stage::Predict))
    };
    let run = |k: usize, ds: &WindowedDataset| -> Result<f64> {
        let out = predict(&models[k], ds).map_err(PipelineError::at(Stage::Predict))?;
        Ok(out[0][0])
    };
    match config.strategy {
        Strategy::Joint => {
            let mut ds = window(&prepared.scaled_channels)?;
            ds.targets = vec![ndarray::Array1::zeros(1)];
            let z = run(0, &ds)?;
            prepared.price_scaler.unscale_value(z).map_err(PipelineError::at(Stage::Predict))
        }
        Strategy::PerImf => {
            let mut total = 0.0;
            for (k, c) in prepared.scaled_channels.iter().enumerate() {
                let ds = window(std::slice::from_ref(c))?;
                let z = run(k, &ds)?;
                total += prepared.channel_scalers[k]
                    .unscale_value(z)
                    .map_err(PipelineError::at(Stage::Predict))?;
            }
            Ok(total)
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub prepared: Prepared,
    pub models: Vec<TrainOutcome>,
    /// Validation then test.
    pub reports: Vec<ForecastReport>,
}

impl PipelineOutcome {
    pub fn params(&self) -> Vec<LstmParams> {
        self.models.iter().map(|m| m.params.clone()).collect()
    }

    pub fn report(&self, split_name: &str) -> Option<&ForecastReport> {
        self.reports.iter().find(|r| r.split_name == split_name)
    }
}

pub fn run_pipeline(prices: &TimeSeries, config: &PipelineConfig) -> Result<PipelineOutcome> {
    let prepared = prepare(prices.values(), config)?;
    run_prepared(prepared, config)
}

/// Runs the pipeline on an existing decomposition of `prices`.
pub fn run_with_decomposition(prices: &[f64], eemd: EemdResult, config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let splits = split(prices.len(), &config.split).map_err(PipelineError::at(Stage::Window))?;
    let prepared = prepare_from_decomposition(prices, eemd, splits, config)?;
    run_prepared(prepared, config)
}

fn run_prepared(prepared: Prepared, config: &PipelineConfig) -> Result<PipelineOutcome> {
    let models = train_models(&prepared, config)?;
    let params: Vec<LstmParams> = models.iter().map(|m| m.params.clone()).collect();
    let reports = ["validation", "test"]
        .iter()
        .map(|s| forecast_report(&prepared, &params, config, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineOutcome {
        prepared,
        models,
        reports,
    })
}

pub const PIPELINE_CHECKPOINT_FORMAT: &str = "hht-forecast-pipeline/1";

/// Trained networks plus the configuration and scalers they were fit with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineCheckpoint {
    pub format: String,
    pub config: PipelineConfig,
    pub channels: usize,
    pub channel_scalers: Vec<ScalerState>,
    pub price_scaler: ScalerState,
    pub models: Vec<LstmCheckpoint>,
}

impl PipelineCheckpoint {
    pub fn new(outcome: &PipelineOutcome, config: &PipelineConfig) -> Self {
        Self {
            format: PIPELINE_CHECKPOINT_FORMAT.to_string(),
            config: *config,
            channels: outcome.prepared.channels.len(),
            channel_scalers: outcome.prepared.channel_scalers.clone(),
            price_scaler: outcome.prepared.price_scaler,
            models: outcome
                .models
                .iter()
                .map(|m| LstmCheckpoint::new(&m.params, &m.optimizer, &config.train))
                .collect(),
        }
    }

    /// Restores the networks for `config` and a decomposition with
    /// `channels` channels, rejecting any dimension mismatch.
    pub fn params_for(&self, config: &PipelineConfig, channels: usize) -> Result<Vec<LstmParams>> {
        if self.format != PIPELINE_CHECKPOINT_FORMAT {
            return Err(PipelineError::msg(Stage::Checkpoint, format!("unknown format `{}`", self.format)));
        }
        if self.config.strategy != config.strategy {
            return Err(PipelineError::msg(
                Stage::Checkpoint,
                format!("checkpoint strategy {:?} differs from {:?}", self.config.strategy, config.strategy),
            ));
        }
        if self.config.lookback != config.lookback || self.config.horizon != config.horizon {
            return Err(PipelineError::msg(Stage::Checkpoint, "checkpoint lookback or horizon differs"));
        }
        let dims = config.model_dims(channels);
        if dims.len() != self.models.len() {
            return Err(PipelineError::msg(
                Stage::Checkpoint,
                format!("checkpoint holds {} models, configuration needs {}", self.models.len(), dims.len()),
            ));
        }
        self.models
            .iter()
            .zip(dims)
            .map(|(m, d)| m.params(d).map_err(PipelineError::at(Stage::Checkpoint)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(PipelineError::at(Stage::Checkpoint))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(PipelineError::at(Stage::Checkpoint))
    }
}
