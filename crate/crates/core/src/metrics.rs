//! Forecast error metrics and the persistence baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no values to evaluate")]
    Empty,
    #[error("predictions ({0}) and actuals ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// Mean of `|err| / |actual|` over non-zero actuals; `None` when every
    /// actual is zero.
    pub mape: Option<f64>,
    /// Fraction of steps whose predicted change has the sign of the actual
    /// change, over steps where the actual changes; `None` when it never
    /// does.
    pub directional_accuracy: Option<f64>,
    pub count: usize,
}

pub fn evaluate(predictions: &[f64], actuals: &[f64]) -> Result<Metrics, MetricsError> {
    if predictions.len() != actuals.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), actuals.len()));
    }
    if actuals.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = actuals.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut pct = 0.0;
    let mut pct_n = 0usize;
    for (p, a) in predictions.iter().zip(actuals) {
        let e = p - a;
        sq += e * e;
        abs += e.abs();
        if *a != 0.0 {
            pct += e.abs() / a.abs();
            pct_n += 1;
        }
    }
    let mut hits = 0usize;
    let mut moves = 0usize;
    for k in 1..actuals.len() {
        let da = actuals[k] - actuals[k - 1];
        if da == 0.0 {
            continue;
        }
        moves += 1;
        let dp = predictions[k] - predictions[k - 1];
        if dp != 0.0 && (dp > 0.0) == (da > 0.0) {
            hits += 1;
        }
    }
    Ok(Metrics {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        mape: (pct_n > 0).then(|| pct / pct_n as f64),
        directional_accuracy: (moves > 0).then(|| hits as f64 / moves as f64),
        count: actuals.len(),
    })
}

/// Predicts each value by its predecessor: returns `actuals[..n-1]`, to be
/// scored against `actuals[1..]`.
pub fn persistence_baseline(actuals: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if actuals.len() < 2 {
        return Err(MetricsError::TooShort {
            needed: 2,
            got: actuals.len(),
        });
    }
    Ok(actuals[..actuals.len() - 1].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_forecast() {
        let a = [1.0, 3.0, 2.0, 5.0];
        let m = evaluate(&a, &a).unwrap();
        assert_eq!((m.rmse, m.mae), (0.0, 0.0));
        assert_eq!(m.mape, Some(0.0));
        assert_eq!(m.directional_accuracy, Some(1.0));
    }

    #[test]
    fn small_arithmetic_case() {
        let m = evaluate(&[1.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(m.mae, 0.5);
        assert_eq!(m.rmse, 0.5f64.sqrt());
        assert_eq!(m.mape, Some(0.25));
        // The only actual step is flat, so direction is undefined.
        assert_eq!(m.directional_accuracy, None);
    }

    #[test]
    fn zero_actuals_drop_mape() {
        let m = evaluate(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(m.mape, None);
        assert_eq!(m.rmse, 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(evaluate(&[], &[]).unwrap_err(), MetricsError::Empty);
        assert_eq!(
            evaluate(&[1.0], &[1.0, 2.0]).unwrap_err(),
            MetricsError::LengthMismatch(1, 2)
        );
        assert!(persistence_baseline(&[1.0]).is_err());
    }

    #[test]
    fn persistence_examples() {
        assert_eq!(persistence_baseline(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0]);
        let flat = [4.0; 6];
        let p = persistence_baseline(&flat).unwrap();
        let m = evaluate(&p, &flat[1..]).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.directional_accuracy, None);
    }

    #[test]
    fn direction_counts_only_moving_steps() {
        // Actual: up, flat, down. Predicted: up, up, up.
        let m = evaluate(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.directional_accuracy, Some(0.5));
    }
}
