use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hht_forecast::data::{load_csv, to_series, ColumnMapping, Field, GapPolicy, ScalerMode, SplitSpec, TimeSeries};
use hht_forecast::eemd::{eemd, AlignmentPolicy, EemdConfig};
use hht_forecast::emd::{BoundaryPolicy, SiftConfig};
use hht_forecast::lstm::TrainConfig;
use hht_forecast::metrics::{evaluate, Metrics};
use hht_forecast::pipeline::{
    forecast_next, forecast_report, prepare, train_models, ForecastReport, PipelineCheckpoint, PipelineConfig,
    PipelineOutcome, Strategy,
};
use hht_forecast::plot::{line_chart, stacked_chart, Line};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

mod manifest;

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "hht-forecast", version, about = "EEMD-LSTM next-bar forecasting")]
struct Cli {
    /// Worker threads for ensemble trials and per-channel training
    /// (HHT_FORECAST_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose one price field into IMFs plus residue.
    Decompose {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eemd: EemdArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train the forecaster and write a best-validation checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eemd: EemdArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score a checkpoint on the validation and test ranges.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eemd: EemdArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = existing_file)]
        checkpoint: PathBuf,
        /// Also write forecasts in scaled units.
        #[arg(long)]
        scaled: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Forecast the bar after the last input bar.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eemd: EemdArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = existing_file)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FieldArg {
    Open,
    High,
    Low,
    Close,
    Volume,
}

impl From<FieldArg> for Field {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Open => Field::Open,
            FieldArg::High => Field::High,
            FieldArg::Low => Field::Low,
            FieldArg::Close => Field::Close,
            FieldArg::Volume => Field::Volume,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GapArg {
    Error,
    ForwardFill,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Joint,
    PerImf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScalerArg {
    Std,
    PaperExact,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundaryArg {
    Mirror,
    Clamp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlignArg {
    PadWithZeros,
    TruncateToMin,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DataArgs {
    /// OHLCV CSV with a header row.
    #[arg(long, value_parser = existing_file)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "close")]
    field: FieldArg,
    /// Bar interval in seconds.
    #[arg(long, default_value_t = 14400)]
    interval: i64,
    #[arg(long, value_enum, default_value = "error")]
    gap: GapArg,
    #[arg(long, default_value = "timestamp")]
    timestamp_col: String,
    #[arg(long, default_value = "open")]
    open_col: String,
    #[arg(long, default_value = "high")]
    high_col: String,
    #[arg(long, default_value = "low")]
    low_col: String,
    #[arg(long, default_value = "close")]
    close_col: String,
    #[arg(long, default_value = "volume")]
    volume_col: String,
}

#[derive(Args, Debug, Clone)]
struct EemdArgs {
    /// Noise std as a fraction of the series std.
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 100)]
    ensemble: usize,
    #[arg(long, default_value_t = 7)]
    max_imfs: usize,
    /// Seeds the ensemble noise, weight initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    max_sifts: usize,
    #[arg(long, default_value_t = 0.2)]
    sd_threshold: f64,
    #[arg(long, default_value_t = 0.1)]
    envelope_tolerance: f64,
    #[arg(long, value_enum, default_value = "mirror")]
    boundary: BoundaryArg,
    #[arg(long, value_enum, default_value = "pad-with-zeros")]
    alignment: AlignArg,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 3)]
    lookback: usize,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    /// Channel cap (IMFs plus residue).
    #[arg(long, default_value_t = 7)]
    channels: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    patience: Option<usize>,
    /// Clip each batch gradient to this global norm.
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long, value_enum, default_value = "joint")]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "std")]
    scaler: ScalerArg,
    #[arg(long, default_value_t = 0.70)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.15)]
    val_frac: f64,
    #[arg(long, default_value_t = 0.15)]
    test_frac: f64,
}

impl EemdArgs {
    fn config(&self) -> EemdConfig {
        EemdConfig {
            noise_amplitude: self.noise,
            ensemble_size: self.ensemble,
            seed: self.seed,
            sift: SiftConfig {
                max_imfs: self.max_imfs,
                max_sift_iterations: self.max_sifts,
                sd_threshold: self.sd_threshold,
                envelope_tolerance: self.envelope_tolerance,
                boundary_policy: match self.boundary {
                    BoundaryArg::Mirror => BoundaryPolicy::Mirror,
                    BoundaryArg::Clamp => BoundaryPolicy::Clamp,
                },
            },
            alignment_policy: match self.alignment {
                AlignArg::PadWithZeros => AlignmentPolicy::PadWithZeros,
                AlignArg::TruncateToMin => AlignmentPolicy::TruncateToMin,
            },
        }
    }
}

fn pipeline_config(eemd: &EemdArgs, m: &ModelArgs) -> PipelineConfig {
    let d = TrainConfig::default();
    PipelineConfig {
        eemd: eemd.config(),
        scaler_mode: match m.scaler {
            ScalerArg::Std => ScalerMode::Std,
            ScalerArg::PaperExact => ScalerMode::PaperExact,
        },
        split: SplitSpec {
            train_fraction: m.train_frac,
            validation_fraction: m.val_frac,
            test_fraction: m.test_frac,
        },
        lookback: m.lookback,
        horizon: m.horizon,
        max_channels: m.channels,
        hidden_size: m.hidden,
        init_seed: eemd.seed,
        train: TrainConfig {
            learning_rate: m.lr.unwrap_or(d.learning_rate),
            epochs: m.epochs.unwrap_or(d.epochs),
            batch_size: m.batch_size.unwrap_or(d.batch_size),
            shuffle_seed: eemd.seed,
            early_stop_patience: m.patience.unwrap_or(d.early_stop_patience),
            clip_norm: m.clip_norm.or(d.clip_norm),
            ..d
        },
        strategy: match m.strategy {
            StrategyArg::Joint => Strategy::Joint,
            StrategyArg::PerImf => Strategy::PerImf,
        },
    }
}

/// A runtime failure, reported as `error: <stage> stage: <message>`.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn tagged<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> Failure {
    move |e| Failure(format!("{stage} stage: {e}"))
}

type Outcome<T> = Result<T, Failure>;

fn load_series(data: &DataArgs) -> Outcome<TimeSeries> {
    let mapping = ColumnMapping {
        timestamp: data.timestamp_col.clone(),
        open: data.open_col.clone(),
        high: data.high_col.clone(),
        low: data.low_col.clone(),
        close: data.close_col.clone(),
        volume: data.volume_col.clone(),
    };
    let records = load_csv(&data.input, &mapping).map_err(tagged("load"))?;
    let gap = match data.gap {
        GapArg::Error => GapPolicy::Error,
        GapArg::ForwardFill => GapPolicy::ForwardFill,
    };
    to_series(&records, data.field.into(), data.interval, gap).map_err(tagged("load"))
}

fn digest(path: &Path) -> Outcome<String> {
    let bytes = fs::read(path).map_err(|e| Failure(format!("load stage: {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Outcome<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure(format!("output stage: {}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(tagged("output"))?;
    text.push('\n');
    write_file(dir, name, text)
}

struct Run<'a> {
    command: &'static str,
    data: &'a DataArgs,
    out: &'a Path,
    extra_inputs: Vec<&'a Path>,
}

impl Run<'_> {
    fn begin(&self) -> Outcome<()> {
        fs::create_dir_all(self.out).map_err(|e| Failure(format!("output stage: {}: {e}", self.out.display())))
    }

    fn finish(&self, config: Value) -> Outcome<()> {
        let mut inputs = vec![self.data.input.as_path()];
        inputs.extend(&self.extra_inputs);
        let input_digest = inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), digest(p)?)))
            .collect::<Outcome<_>>()?;
        let manifest = RunManifest {
            command: self.command.to_string(),
            argv: std::env::args().collect(),
            config_snapshot: json!({ "data": self.data, "pipeline": config }),
            input_digest,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        write_json(self.out, "manifest.json", &manifest)
    }
}

fn cmd_decompose(data: &DataArgs, eemd_args: &EemdArgs, out: &Path) -> Outcome<()> {
    let run = Run {
        command: "decompose",
        data,
        out,
        extra_inputs: vec![],
    };
    let series = load_series(data)?;
    let config = eemd_args.config();
    let result = eemd(series.values(), &config).map_err(tagged("decompose"))?;
    run.begin()?;

    let mut csv = Vec::new();
    result
        .imf_set
        .write_csv(&mut csv, &series.timestamps())
        .map_err(tagged("output"))?;
    write_file(out, "imfs.csv", csv)?;

    let names: Vec<String> = (1..=result.imf_set.len())
        .map(|k| format!("imf{k}"))
        .chain(["residue".to_string()])
        .collect();
    let channels = result.imf_set.channels();
    let mut lines = vec![Line {
        label: series.name(),
        values: series.values(),
    }];
    lines.extend(names.iter().zip(&channels).map(|(n, c)| Line {
        label: n,
        values: c,
    }));
    write_file(out, "imfs.svg", stacked_chart("EEMD decomposition", &lines))?;
    write_json(
        out,
        "eemd.json",
        &json!({
            "config": config,
            "trial_imf_counts": result.trial_imf_counts,
            "imf_count": result.imf_set.len(),
            "source_length": result.imf_set.source_length,
        }),
    )?;
    run.finish(json!({ "eemd": config }))
}

fn write_history(out: &Path, outcome: &PipelineOutcome, strategy: Strategy) -> Outcome<()> {
    let mut csv = String::new();
    match strategy {
        Strategy::Joint => {
            csv.push_str("epoch,train_loss,val_loss\n");
            for e in &outcome.models[0].history {
                csv.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
            }
        }
        Strategy::PerImf => {
            csv.push_str("channel,epoch,train_loss,val_loss\n");
            for (k, m) in outcome.models.iter().enumerate() {
                for e in &m.history {
                    csv.push_str(&format!("{k},{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
                }
            }
        }
    }
    write_file(out, "history.csv", csv)
}

fn cmd_train(data: &DataArgs, eemd_args: &EemdArgs, model: &ModelArgs, out: &Path) -> Outcome<()> {
    let run = Run {
        command: "train",
        data,
        out,
        extra_inputs: vec![],
    };
    let series = load_series(data)?;
    let config = pipeline_config(eemd_args, model);
    let prepared = prepare(series.values(), &config)?;
    let models = train_models(&prepared, &config)?;
    let outcome = PipelineOutcome {
        prepared,
        models,
        reports: vec![],
    };
    run.begin()?;
    let checkpoint = PipelineCheckpoint::new(&outcome, &config);
    write_file(out, "checkpoint.json", checkpoint.to_json()?)?;
    write_history(out, &outcome, config.strategy)?;
    run.finish(serde_json::to_value(config)?)
}

/// Prepares `series` under `config` and restores the checkpoint's networks.
fn restore(
    series: &TimeSeries,
    config: &PipelineConfig,
    checkpoint: &Path,
) -> Outcome<(hht_forecast::pipeline::Prepared, Vec<hht_forecast::lstm::LstmParams>)> {
    let text = fs::read_to_string(checkpoint).map_err(|e| Failure(format!("checkpoint stage: {e}")))?;
    let ck = PipelineCheckpoint::from_json(&text)?;
    let prepared = prepare(series.values(), config)?;
    let params = ck.params_for(config, prepared.channels.len())?;
    if ck.channel_scalers != prepared.channel_scalers || ck.price_scaler != prepared.price_scaler {
        eprintln!("warning: checkpoint scalers differ from those fitted on this input");
    }
    Ok((prepared, params))
}

fn forecast_csv(series: &TimeSeries, r: &ForecastReport, scaled: bool) -> String {
    let mut csv = String::from("index,timestamp,actual,predicted\n");
    let (actual, predicted) = if scaled {
        (&r.actuals_scaled, &r.predictions_scaled)
    } else {
        (&r.actuals, &r.predictions)
    };
    for ((i, a), p) in r.index_map.iter().zip(actual).zip(predicted) {
        csv.push_str(&format!("{i},{},{a},{p}\n", series.timestamp(*i)));
    }
    csv
}

#[derive(Serialize)]
struct SplitMetrics {
    model: Metrics,
    baseline: Metrics,
    model_scaled: Metrics,
}

fn cmd_evaluate(
    data: &DataArgs,
    eemd_args: &EemdArgs,
    model: &ModelArgs,
    checkpoint: &Path,
    scaled: bool,
    out: &Path,
) -> Outcome<()> {
    let run = Run {
        command: "evaluate",
        data,
        out,
        extra_inputs: vec![checkpoint],
    };
    let series = load_series(data)?;
    let config = pipeline_config(eemd_args, model);
    let (prepared, params) = restore(&series, &config, checkpoint)?;
    run.begin()?;
    let mut metrics = serde_json::Map::new();
    for split in ["validation", "test"] {
        let r = forecast_report(&prepared, &params, &config, split)?;
        let model_scaled = evaluate(&r.predictions_scaled, &r.actuals_scaled).map_err(tagged("evaluate"))?;
        metrics.insert(
            split.to_string(),
            serde_json::to_value(SplitMetrics {
                model: r.metrics,
                baseline: r.baseline_metrics,
                model_scaled,
            })?,
        );
        let name = if split == "test" { "forecast" } else { "forecast_validation" };
        write_file(out, &format!("{name}.csv"), forecast_csv(&series, &r, false))?;
        if scaled {
            write_file(out, &format!("{name}_scaled.csv"), forecast_csv(&series, &r, true))?;
        }
        if split == "test" {
            let svg = line_chart(
                "Test split: actual vs predicted",
                &[
                    Line {
                        label: "actual",
                        values: &r.actuals,
                    },
                    Line {
                        label: "predicted",
                        values: &r.predictions,
                    },
                    Line {
                        label: "persistence",
                        values: &r.baseline,
                    },
                ],
            );
            write_file(out, "forecast.svg", svg)?;
        }
    }
    write_json(out, "metrics.json", &Value::Object(metrics))?;
    run.finish(serde_json::to_value(config)?)
}

fn cmd_predict(data: &DataArgs, eemd_args: &EemdArgs, model: &ModelArgs, checkpoint: &Path, out: &Path) -> Outcome<()> {
    let run = Run {
        command: "predict",
        data,
        out,
        extra_inputs: vec![checkpoint],
    };
    let series = load_series(data)?;
    let config = pipeline_config(eemd_args, model);
    let (prepared, params) = restore(&series, &config, checkpoint)?;
    let next = forecast_next(&prepared, &params, &config)?;
    run.begin()?;
    let last = series.timestamp(series.len() - 1);
    let ts = last + series.interval() * config.horizon as i64;
    write_file(out, "prediction.csv", format!("timestamp,predicted\n{ts},{next}\n"))?;
    run.finish(serde_json::to_value(config)?)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var("HHT_FORECAST_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| format!("HHT_FORECAST_THREADS must be a positive integer, got `{v}`")),
        Err(_) => match flag {
            Some(0) => Err("--threads must be positive".into()),
            other => Ok(other),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match thread_count(cli.threads) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Decompose { data, eemd, out } => cmd_decompose(data, eemd, out),
        Command::Train {
            data,
            eemd,
            model,
            out,
        } => cmd_train(data, eemd, model, out),
        Command::Evaluate {
            data,
            eemd,
            model,
            checkpoint,
            scaled,
            out,
        } => cmd_evaluate(data, eemd, model, checkpoint, *scaled, out),
        Command::Predict {
            data,
            eemd,
            model,
            checkpoint,
            out,
        } => cmd_predict(data, eemd, model, checkpoint, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            let _ = writeln!(std::io::stderr(), "error: {msg}");
            ExitCode::from(1)
        }
    }
}
