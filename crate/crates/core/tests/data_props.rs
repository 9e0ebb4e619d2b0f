use hht_forecast::data::{
    fit_scaler, read_csv, split, to_series, ColumnMapping, Field, GapPolicy, OhlcvRecord, ScalerMode, SplitSpec,
};
use hht_forecast::window::{make_windows, WindowTarget};
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = ScalerMode> {
    prop_oneof![Just(ScalerMode::Std), Just(ScalerMode::PaperExact)]
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 2..200)
        .prop_filter("needs spread", |v| v.iter().any(|x| (x - v[0]).abs() > 1e-3))
}

proptest! {
    #[test]
    fn unscale_inverts_scale(values in series(), mode in mode()) {
        let s = fit_scaler(&values, mode).unwrap();
        let back = s.unscale(&s.scale(&values).unwrap()).unwrap();
        for (a, b) in values.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn scaler_matches_two_pass_oracle(values in series(), mode in mode()) {
        let s = fit_scaler(&values, mode).unwrap();
        let n = values.len() as f64;
        let mut mean = 0.0;
        for v in &values {
            mean += v;
        }
        mean /= n;
        let mut var = 0.0;
        for v in &values {
            var += (v - mean) * (v - mean);
        }
        var /= n;
        prop_assert!((s.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        prop_assert!((s.variance - var).abs() <= 1e-10 * var);
        let scaled = s.scale(&values).unwrap();
        if mode == ScalerMode::Std {
            let m = scaled.iter().sum::<f64>() / n;
            let v = scaled.iter().map(|z| (z - m) * (z - m)).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_fill_covers_the_full_span(gaps in prop::collection::vec(1i64..4, 1..60)) {
        let interval = 14400;
        let mut t = 1_600_000_000i64;
        let mut records = Vec::new();
        for (k, g) in gaps.iter().enumerate() {
            let p = 100.0 + k as f64;
            records.push(OhlcvRecord { timestamp: t, open: p, high: p + 1.0, low: p - 1.0, close: p, volume: 1.0 });
            t += g * interval;
        }
        let span = (records.last().unwrap().timestamp - records[0].timestamp) / interval + 1;
        let s = to_series(&records, Field::Close, interval, GapPolicy::ForwardFill).unwrap();
        prop_assert_eq!(s.len() as i64, span);
        for r in &records {
            let i = ((r.timestamp - records[0].timestamp) / interval) as usize;
            prop_assert_eq!(s.values()[i], r.close);
        }
        let has_gap = gaps[..gaps.len() - 1].iter().any(|g| *g > 1);
        prop_assert_eq!(to_series(&records, Field::Close, interval, GapPolicy::Error).is_err(), has_gap);
    }

    #[test]
    fn windows_never_see_their_target(
        len in 5usize..120,
        lookback in 1usize..6,
        horizon in 1usize..4,
    ) {
        prop_assume!(len >= lookback + horizon);
        let a: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x * 2.0).collect();
        let ds = make_windows(&[a, b], lookback, horizon, WindowTarget::PerChannel).unwrap();
        prop_assert_eq!(ds.len(), len - lookback - horizon + 1);
        prop_assert!(ds.check_leakage_free().is_ok());
        for (k, t) in ds.index_map.iter().enumerate() {
            // Channel 0 holds its own time index, so the window's last row
            // must be strictly before the target index.
            prop_assert!(ds.inputs[k][[lookback - 1, 0]] < *t as f64);
            prop_assert_eq!(ds.targets[k][0], *t as f64);
        }
    }
}

#[test]
fn split_partitions_every_length_from_10_to_1000() {
    let spec = SplitSpec::default();
    for len in 10..=1000 {
        let r = split(len, &spec).unwrap();
        assert_eq!(r.train.start, 0);
        assert_eq!(r.train.end, r.validation.start);
        assert_eq!(r.validation.end, r.test.start);
        assert_eq!(r.test.end, len);
        assert!(r.train.start < r.train.end, "len {len}");
        let expect_train = (len * 70) / 100;
        assert_eq!(r.train.len(), expect_train, "len {len}");
    }
}

#[test]
fn windowing_seven_channels_of_length_100() {
    let channels: Vec<Vec<f64>> = (0..7).map(|c| (0..100).map(|i| (i * c) as f64).collect()).collect();
    let ds = make_windows(&channels, 3, 1, WindowTarget::PerChannel).unwrap();
    assert_eq!(ds.len(), 97);
    assert!(ds.inputs.iter().all(|w| w.dim() == (3, 7)));
}

#[test]
fn csv_gap_surfaces_in_series_construction() {
    let text = "timestamp,open,high,low,close,volume\n\
                0,1,2,0.5,1.5,10\n\
                14400,1.5,2,1,1.8,11\n\
                43200,1.8,2.2,1.7,2.0,12\n";
    let recs = read_csv(text.as_bytes(), &ColumnMapping::default()).unwrap();
    assert_eq!(recs.len(), 3);
    assert!(to_series(&recs, Field::Close, 14400, GapPolicy::Error).is_err());
    let filled = to_series(&recs, Field::Close, 14400, GapPolicy::ForwardFill).unwrap();
    assert_eq!(filled.values(), &[1.5, 1.8, 1.8, 2.0]);
}
