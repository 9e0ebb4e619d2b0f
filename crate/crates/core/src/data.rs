//! Bar data ingestion, uniform resampling, scaling and chronological splits.

use std::fs::File;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv header is missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row} (line {line}): {message}")]
    MalformedRow {
        row: usize,
        line: u64,
        message: String,
    },
    #[error("row {row}: timestamp {timestamp} does not follow previous timestamp {previous}")]
    NonMonotone {
        row: usize,
        timestamp: i64,
        previous: i64,
    },
    #[error("row {row}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { row: usize, timestamp: i64 },
    #[error("row {row}: OHLC invariant violated ({message})")]
    InvariantViolation { row: usize, message: String },
    #[error("no records")]
    Empty,
    #[error("gap in series: expected a bar at timestamp {expected}, next bar is at {found}")]
    Gap { expected: i64, found: i64 },
    #[error("timestamp {timestamp} is not aligned to the {interval}s grid starting at {start}")]
    Misaligned {
        timestamp: i64,
        start: i64,
        interval: i64,
    },
    #[error("interval must be positive, got {0}")]
    BadInterval(i64),
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("zero variance: scaling is undefined for a constant series")]
    ZeroVariance,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("split fractions must each lie in (0, 1) and sum to 1, got {0:?}")]
    BadSplit([f64; 3]),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One OHLCV bar. Timestamps are epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvRecord {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvRecord {
    fn check(&self) -> std::result::Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(format!("volume {} is negative or non-finite", self.volume));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} exceeds min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} is below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        Ok(())
    }

    pub fn field(&self, field: Field) -> f64 {
        match field {
            Field::Open => self.open,
            Field::High => self.high,
            Field::Low => self.low,
            Field::Close => self.close,
            Field::Volume => self.volume,
        }
    }
}

/// Header names for each OHLCV column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub timestamp: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Open,
    High,
    Low,
    Close,
    Volume,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Open => "open",
            Field::High => "high",
            Field::Low => "low",
            Field::Close => "close",
            Field::Volume => "volume",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    Error,
    ForwardFill,
}

/// Loads bars from a CSV file on disk. See [`read_csv`].
pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Vec<OhlcvRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, mapping)
}

/// Parses bars from any reader. Rows must be in strictly ascending timestamp
/// order and satisfy the OHLC invariants. Row numbers in errors are 1-based
/// data rows (the header is not counted).
pub fn read_csv<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Vec<OhlcvRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::MalformedRow {
            row: 0,
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let cols = [
        column(&mapping.timestamp)?,
        column(&mapping.open)?,
        column(&mapping.high)?,
        column(&mapping.low)?,
        column(&mapping.close)?,
        column(&mapping.volume)?,
    ];

    let mut records: Vec<OhlcvRecord> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| DataError::MalformedRow {
            row: row_no,
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let malformed = |message: String| DataError::MalformedRow {
            row: row_no,
            line,
            message,
        };
        let cell = |idx: usize| row.get(idx).ok_or_else(|| malformed(format!("missing column {idx}")));

        let ts_text = cell(cols[0])?;
        let timestamp: i64 = ts_text
            .parse()
            .map_err(|_| malformed(format!("bad timestamp `{ts_text}`")))?;
        let mut nums = [0.0f64; 5];
        for (slot, &c) in nums.iter_mut().zip(&cols[1..]) {
            let text = cell(c)?;
            *slot = text
                .parse()
                .map_err(|_| malformed(format!("bad number `{text}`")))?;
        }
        let record = OhlcvRecord {
            timestamp,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[4],
        };
        if let Some(prev) = records.last() {
            if timestamp == prev.timestamp {
                return Err(DataError::DuplicateTimestamp {
                    row: row_no,
                    timestamp,
                });
            }
            if timestamp < prev.timestamp {
                return Err(DataError::NonMonotone {
                    row: row_no,
                    timestamp,
                    previous: prev.timestamp,
                });
            }
        }
        record
            .check()
            .map_err(|message| DataError::InvariantViolation {
                row: row_no,
                message,
            })?;
        records.push(record);
    }
    Ok(records)
}

/// A uniformly sampled scalar series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start_timestamp: i64,
    interval: i64,
    values: Vec<f64>,
    name: String,
}

impl TimeSeries {
    pub fn new(
        name: impl Into<String>,
        start_timestamp: i64,
        interval: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if interval <= 0 {
            return Err(DataError::BadInterval(interval));
        }
        if values.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Self {
            start_timestamp,
            interval,
            values,
            name: name.into(),
        })
    }

    pub fn start_timestamp(&self) -> i64 {
        self.start_timestamp
    }

    pub fn interval(&self) -> i64 {
        self.interval
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> i64 {
        self.start_timestamp + self.interval * index as i64
    }

    pub fn timestamps(&self) -> Vec<i64> {
        (0..self.len()).map(|i| self.timestamp(i)).collect()
    }
}

/// Projects one field of the bars onto a uniform grid of `interval` seconds
/// anchored at the first bar.
pub fn to_series(
    records: &[OhlcvRecord],
    field: Field,
    interval: i64,
    gap_policy: GapPolicy,
) -> Result<TimeSeries> {
    if interval <= 0 {
        return Err(DataError::BadInterval(interval));
    }
    let first = records.first().ok_or(DataError::Empty)?;
    let start = first.timestamp;
    let mut values = vec![first.field(field)];
    let mut expected = start + interval;
    for rec in &records[1..] {
        if (rec.timestamp - start) % interval != 0 {
            return Err(DataError::Misaligned {
                timestamp: rec.timestamp,
                start,
                interval,
            });
        }
        if rec.timestamp < expected {
            return Err(DataError::NonMonotone {
                row: values.len() + 1,
                timestamp: rec.timestamp,
                previous: expected - interval,
            });
        }
        while rec.timestamp > expected {
            match gap_policy {
                GapPolicy::Error => {
                    return Err(DataError::Gap {
                        expected,
                        found: rec.timestamp,
                    })
                }
                GapPolicy::ForwardFill => {
                    let last = *values.last().expect("non-empty");
                    values.push(last);
                    expected += interval;
                }
            }
        }
        values.push(rec.field(field));
        expected += interval;
    }
    TimeSeries::new(field.name(), start, interval, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalerMode {
    /// `(x - mean) / sqrt(variance)`, the usual z-score.
    #[default]
    Std,
    /// `(x - mean) / variance`, dividing by the variance itself.
    PaperExact,
}

/// Fitted mean and population variance of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub mean: f64,
    pub variance: f64,
    pub mode: ScalerMode,
}

/// Fits a scaler with population (divide-by-N) variance. Callers pass the
/// training range only.
pub fn fit_scaler(values: &[f64], mode: ScalerMode) -> Result<ScalerState> {
    if values.len() < 2 {
        return Err(DataError::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DataError::NonFinite(i));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if variance <= 0.0 {
        return Err(DataError::ZeroVariance);
    }
    Ok(ScalerState {
        mean,
        variance,
        mode,
    })
}

impl ScalerState {
    fn divisor(&self) -> Result<f64> {
        if !(self.variance > 0.0) {
            return Err(DataError::ZeroVariance);
        }
        Ok(match self.mode {
            ScalerMode::Std => self.variance.sqrt(),
            ScalerMode::PaperExact => self.variance,
        })
    }

    pub fn scale_value(&self, x: f64) -> Result<f64> {
        Ok((x - self.mean) / self.divisor()?)
    }

    pub fn unscale_value(&self, z: f64) -> Result<f64> {
        Ok(z * self.divisor()? + self.mean)
    }

    pub fn scale(&self, values: &[f64]) -> Result<Vec<f64>> {
        let d = self.divisor()?;
        Ok(values.iter().map(|x| (x - self.mean) / d).collect())
    }

    pub fn unscale(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        let d = self.divisor()?;
        Ok(scaled.iter().map(|z| z * d + self.mean).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.70,
            validation_fraction: 0.15,
            test_fraction: 0.15,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
        ];
        let in_range = f.iter().all(|x| *x > 0.0 && *x < 1.0);
        if !in_range || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::BadSplit(f));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

/// Chronological split; boundaries are `floor(len * cumulative_fraction)`.
pub fn split(len: usize, spec: &SplitSpec) -> Result<SplitRanges> {
    spec.validate()?;
    if len < 10 {
        return Err(DataError::TooFewValues { needed: 10, got: len });
    }
    // 1e-9 absorbs representation error, e.g. 0.7 + 0.15 landing just below 0.85.
    let boundary = |cum: f64| ((len as f64 * cum + 1e-9).floor() as usize).min(len);
    let a = boundary(spec.train_fraction);
    let b = boundary(spec.train_fraction + spec.validation_fraction).max(a);
    Ok(SplitRanges {
        train: 0..a,
        validation: a..b,
        test: b..len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "timestamp,open,high,low,close,volume\n";

    fn parse(body: &str) -> Result<Vec<OhlcvRecord>> {
        read_csv(format!("{HEADER}{body}").as_bytes(), &ColumnMapping::default())
    }

    #[test]
    fn parses_well_formed_rows() {
        let recs = parse(
            "0,10,12,9,11,100\n14400,11,13,10,12,50.5\n28800,12,12.5,11,11.5,0\n",
        )
        .unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(
            recs[1],
            OhlcvRecord {
                timestamp: 14400,
                open: 11.0,
                high: 13.0,
                low: 10.0,
                close: 12.0,
                volume: 50.5
            }
        );
    }

    #[test]
    fn rejects_high_below_low_with_row_number() {
        let err = parse("0,10,12,9,11,100\n14400,11,9,12,11,5\n").unwrap_err();
        match err {
            DataError::InvariantViolation { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_disorder() {
        assert!(matches!(
            parse("0,1,1,1,1,1\n0,1,1,1,1,1\n"),
            Err(DataError::DuplicateTimestamp { row: 2, .. })
        ));
        assert!(matches!(
            parse("10,1,1,1,1,1\n5,1,1,1,1,1\n"),
            Err(DataError::NonMonotone { row: 2, .. })
        ));
    }

    #[test]
    fn malformed_number_reports_row() {
        match parse("0,1,1,1,1,1\n14400,1,x,1,1,1\n") {
            Err(DataError::MalformedRow { row, line, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_column_mapping() {
        let csv = "t,o,h,l,c,v\n0,1,2,0.5,1.5,3\n";
        let mapping = ColumnMapping {
            timestamp: "t".into(),
            open: "o".into(),
            high: "h".into(),
            low: "l".into(),
            close: "c".into(),
            volume: "v".into(),
        };
        let recs = read_csv(csv.as_bytes(), &mapping).unwrap();
        assert_eq!(recs[0].close, 1.5);
        assert!(matches!(
            read_csv(csv.as_bytes(), &ColumnMapping::default()),
            Err(DataError::MissingColumn(_))
        ));
    }

    fn bars(timestamps: &[i64]) -> Vec<OhlcvRecord> {
        timestamps
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let c = 100.0 + i as f64;
                OhlcvRecord {
                    timestamp: t,
                    open: c,
                    high: c + 1.0,
                    low: c - 1.0,
                    close: c,
                    volume: 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn contiguous_bars_make_a_series() {
        let ts: Vec<i64> = (0..6).map(|i| i * 14400).collect();
        let s = to_series(&bars(&ts), Field::Close, 14400, GapPolicy::Error).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.timestamp(5), 5 * 14400);
    }

    #[test]
    fn gap_is_forward_filled_or_rejected() {
        let ts = [0, 14400, 43200, 57600];
        let recs = bars(&ts);
        let s = to_series(&recs, Field::Close, 14400, GapPolicy::ForwardFill).unwrap();
        assert_eq!(s.values(), &[100.0, 101.0, 101.0, 102.0, 103.0]);
        assert_eq!(s.len() as i64, (57600 - 0) / 14400 + 1);
        match to_series(&recs, Field::Close, 14400, GapPolicy::Error) {
            Err(DataError::Gap { expected, found }) => {
                assert_eq!(expected, 28800);
                assert_eq!(found, 43200);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_with_gap_loads_then_fails_downstream() {
        let recs = parse("0,1,1,1,1,1\n14400,1,1,1,1,1\n43200,1,1,1,1,1\n").unwrap();
        assert_eq!(recs.len(), 3);
        assert!(matches!(
            to_series(&recs, Field::Close, 14400, GapPolicy::Error),
            Err(DataError::Gap { expected: 28800, .. })
        ));
    }

    #[test]
    fn misaligned_and_empty_inputs() {
        assert!(matches!(
            to_series(&bars(&[0, 100]), Field::Close, 14400, GapPolicy::ForwardFill),
            Err(DataError::Misaligned { .. })
        ));
        assert!(matches!(
            to_series(&[], Field::Close, 14400, GapPolicy::Error),
            Err(DataError::Empty)
        ));
    }

    #[test]
    fn scaler_fit_small_cases() {
        let s = fit_scaler(&[1.0, 2.0, 3.0], ScalerMode::Std).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.variance - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            fit_scaler(&[5.0, 5.0, 5.0], ScalerMode::Std),
            Err(DataError::ZeroVariance)
        ));
        assert!(fit_scaler(&[1.0], ScalerMode::Std).is_err());
    }

    #[test]
    fn scale_modes() {
        let std = ScalerState {
            mean: 2.0,
            variance: 4.0,
            mode: ScalerMode::Std,
        };
        assert_eq!(std.scale_value(4.0).unwrap(), 1.0);
        let exact = ScalerState {
            mode: ScalerMode::PaperExact,
            ..std
        };
        assert_eq!(exact.scale_value(4.0).unwrap(), 0.5);
        let zero = ScalerState {
            variance: 0.0,
            ..std
        };
        assert!(matches!(zero.scale(&[1.0]), Err(DataError::ZeroVariance)));
    }

    #[test]
    fn split_examples() {
        let spec = SplitSpec::default();
        let r = split(100, &spec).unwrap();
        assert_eq!((r.train, r.validation, r.test), (0..70, 70..85, 85..100));
        let r = split(10, &spec).unwrap();
        assert_eq!((r.train, r.validation, r.test), (0..7, 7..8, 8..10));
        let bad = SplitSpec {
            test_fraction: 0.2,
            ..spec
        };
        assert!(matches!(split(100, &bad), Err(DataError::BadSplit(_))));
        assert!(split(9, &spec).is_err());
    }
}
