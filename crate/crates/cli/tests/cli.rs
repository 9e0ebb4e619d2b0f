use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hht_forecast::data::{load_csv, to_series, ColumnMapping, Field, GapPolicy};
use hht_forecast::emd::{emd, ImfSet, SiftConfig};
use hht_forecast::metrics::{evaluate, Metrics};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hht-forecast"));
    c.env_remove("HHT_FORECAST_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn fixture(dir: &Path, bars: usize) -> PathBuf {
    let path = dir.join("bars.csv");
    let mut text = String::from("timestamp,open,high,low,close,volume\n");
    let mut price = 40.0f64;
    for k in 0..bars {
        let open = price;
        let t = k as f64;
        price = 40.0 + 2.0 * (t / 9.0).sin() + 0.7 * (t / 2.3).cos() + 0.01 * t;
        let high = open.max(price) + 0.05;
        let low = open.min(price) - 0.05;
        text.push_str(&format!("{},{open},{high},{low},{price},{}\n", 1_600_000_000 + 14400 * k as i64, 100 + k));
    }
    fs::write(&path, text).unwrap();
    path
}

const FAST: [&str; 8] = ["--ensemble", "4", "--epochs", "2", "--hidden", "4", "--batch-size", "16"];

fn train_args<'a>(input: &'a str, out: &'a str) -> Vec<&'a str> {
    let mut v = vec!["train", "--input", input, "--out", out];
    v.extend(FAST);
    v
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let o = run(&["decompose", "--input", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no such file"));
    assert_eq!(run(&["decompose"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), 120);
    let o = bin()
        .env("HHT_FORECAST_THREADS", "zero")
        .args(["decompose", "--input", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "timestamp,open,high,low,close,volume\n0,1,0.5,2,1,1\n").unwrap();
    let o = run(&["decompose", "--input", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("load stage") && err.contains("row 1"), "{err}");
}

#[test]
fn degenerate_decompose_equals_plain_emd() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), 300);
    let out = dir.path().join("d");
    let o = run(&[
        "decompose",
        "--input",
        input.to_str().unwrap(),
        "--ensemble",
        "1",
        "--noise",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ok(&o);
    let (set, stamps) = ImfSet::read_csv(fs::File::open(out.join("imfs.csv")).unwrap()).unwrap();
    let records = load_csv(&input, &ColumnMapping::default()).unwrap();
    let series = to_series(&records, Field::Close, 14400, GapPolicy::Error).unwrap();
    let plain = emd(series.values(), &SiftConfig::default()).unwrap();
    assert_eq!(set.len(), plain.len());
    for (a, b) in set.imfs.iter().zip(&plain.imfs) {
        assert_eq!(a.values, b.values);
    }
    assert_eq!(set.residue, plain.residue);
    assert_eq!(stamps, series.timestamps());
    for f in ["imfs.svg", "eemd.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), 200);
    let input = input.to_str().unwrap();
    let mut outputs = Vec::new();
    for (env, flag) in [(None, "1"), (Some("3"), "1"), (None, "6")] {
        let out = dir.path().join(format!("t{}", outputs.len()));
        let mut c = bin();
        if let Some(n) = env {
            c.env("HHT_FORECAST_THREADS", n);
        }
        let o = c
            .args(["--threads", flag, "decompose", "--input", input, "--ensemble", "12"])
            .args(["--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_ok(&o);
        outputs.push(fs::read(out.join("imfs.csv")).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn training_is_reproducible_and_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), 300);
    let before = fs::read(&input).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_ok(&run(&train_args(input.to_str().unwrap(), out.to_str().unwrap())));
    }
    let history = fs::read_to_string(a.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_loss");
    assert_eq!(lines.len(), 3);
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());
    assert_eq!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(b.join("checkpoint.json")).unwrap());
    assert_eq!(fs::read(&input).unwrap(), before);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    let digest = manifest["input_digest"][input.to_str().unwrap()].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert_eq!(manifest["config_snapshot"]["pipeline"]["lookback"], 3);
    assert_eq!(manifest["config_snapshot"]["pipeline"]["split"]["train_fraction"], 0.7);
}

#[test]
fn per_imf_history_has_a_channel_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), 300);
    let out = dir.path().join("p");
    let mut args = train_args(input.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--strategy", "per-imf"]);
    assert_ok(&run(&args));
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("channel,epoch,train_loss,val_loss\n"));
}

fn read_forecast(path: &Path) -> (Vec<f64>, Vec<f64>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,timestamp,actual,predicted"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse::<f64>().unwrap(), f[3].parse::<f64>().unwrap())
        })
        .unzip()
}

#[test]
fn evaluate_metrics_equal_library_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), 300);
    let input = input.to_str().unwrap();
    let t = dir.path().join("t");
    let e = dir.path().join("e");
    assert_ok(&run(&train_args(input, t.to_str().unwrap())));
    let ckpt = t.join("checkpoint.json");
    let mut args = vec!["evaluate", "--input", input, "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(["--out", e.to_str().unwrap(), "--scaled"]);
    args.extend(FAST);
    assert_ok(&run(&args));

    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(e.join("metrics.json")).unwrap()).unwrap();
    for (split, file) in [("test", "forecast.csv"), ("validation", "forecast_validation.csv")] {
        let (actual, predicted) = read_forecast(&e.join(file));
        let expected = evaluate(&predicted, &actual).unwrap();
        let reported: Metrics = serde_json::from_value(metrics[split]["model"].clone()).unwrap();
        assert_eq!(reported, expected, "{split}");
        let baseline: Metrics = serde_json::from_value(metrics[split]["baseline"].clone()).unwrap();
        assert!(baseline.rmse.is_finite() && baseline.count == expected.count);
    }
    let (actual, predicted) = read_forecast(&e.join("forecast_scaled.csv"));
    let scaled: Metrics = serde_json::from_value(metrics["test"]["model_scaled"].clone()).unwrap();
    assert_eq!(scaled, evaluate(&predicted, &actual).unwrap());
    assert!(fs::read_to_string(e.join("forecast.svg")).unwrap().starts_with("<svg"));

    let p = dir.path().join("p");
    let mut args = vec!["predict", "--input", input, "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(["--out", p.to_str().unwrap()]);
    args.extend(FAST);
    assert_ok(&run(&args));
    let pred = fs::read_to_string(p.join("prediction.csv")).unwrap();
    let row: Vec<&str> = pred.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], (1_600_000_000 + 14400 * 300).to_string());
    assert!(row[1].parse::<f64>().unwrap().is_finite());
}

#[test]
fn checkpoint_dimension_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path(), 300);
    let input = input.to_str().unwrap();
    let t = dir.path().join("t");
    assert_ok(&run(&train_args(input, t.to_str().unwrap())));
    let ckpt = t.join("checkpoint.json");
    let e = dir.path().join("e");
    let mut args = vec!["evaluate", "--input", input, "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(["--out", e.to_str().unwrap()]);
    args.extend(["--ensemble", "4", "--hidden", "16"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("checkpoint stage") && err.contains("hidden_size: 16"), "{err}");
}
