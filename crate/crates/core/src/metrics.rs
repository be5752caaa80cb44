//! Confusion counts, accuracy/precision, and training-time capture.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Label;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("y_true has {truth} entries, y_pred has {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no predictions to evaluate")]
    EmptyInput,
}

/// Positive class is `1` (PD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: String,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
    pub train_time_seconds: Option<f64>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let predicted_pos = self.tp + self.fp;
        (predicted_pos > 0).then(|| self.tp as f64 / predicted_pos as f64)
    }

    pub fn with_config(mut self, config: impl Into<String>) -> Self {
        self.config = config.into();
        self
    }

    pub fn with_time(mut self, seconds: f64) -> Self {
        self.train_time_seconds = Some(seconds);
        self
    }
}

pub fn evaluate(y_true: &[Label], y_pred: &[Label]) -> Result<EvalReport, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut r = EvalReport {
        config: String::new(),
        tp: 0,
        fp: 0,
        tn: 0,
        r#fn: 0,
        train_time_seconds: None,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => r.tp += 1,
            (0, 1) => r.fp += 1,
            (1, _) => r.r#fn += 1,
            _ => r.tn += 1,
        }
    }
    Ok(r)
}

/// Runs `job` and measures its wall-clock time on a monotonic clock.
pub fn time_training<T, E>(job: impl FnOnce() -> Result<T, E>) -> Result<(T, f64), E> {
    let start = Instant::now();
    let out = job()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Renders `num/den` to four decimals, rounding half to even on the exact
/// rational value.
pub fn format_ratio(num: usize, den: usize) -> String {
    assert!(den > 0);
    let num = num as u128;
    let den = den as u128;
    let scaled = num * 10_000;
    let mut q = scaled / den;
    let rem = scaled % den;
    if 2 * rem > den || (2 * rem == den && q % 2 == 1) {
        q += 1;
    }
    format!("{}.{:04}", q / 10_000, q % 10_000)
}

/// Round-half-even to four decimals for arbitrary reals (timings).
pub fn format_4dp(x: f64) -> String {
    let scaled = x * 1e4;
    let floor = scaled.floor();
    let diff = scaled - floor;
    let r = if (diff - 0.5).abs() < 1e-9 {
        if floor as i64 % 2 == 0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    format!("{:.4}", r / 1e4)
}

impl EvalReport {
    pub fn accuracy_str(&self) -> String {
        format_ratio(self.correct(), self.total())
    }

    /// `"undefined"` when no positive predictions were made.
    pub fn precision_str(&self) -> String {
        let pp = self.tp + self.fp;
        if pp == 0 {
            "undefined".to_string()
        } else {
            format_ratio(self.tp, pp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [1, 0, 1, 1, 0];
        let r = evaluate(&y, &y).unwrap();
        assert_eq!(r.accuracy(), 1.0);
        assert_eq!(r.precision(), Some(1.0));
    }

    #[test]
    fn two_errors_in_39() {
        let truth: Vec<Label> = (0..39).map(|i| u8::from(i % 4 != 0)).collect();
        let mut pred = truth.clone();
        pred[0] ^= 1;
        pred[1] ^= 1;
        let r = evaluate(&truth, &pred).unwrap();
        assert_eq!(r.correct(), 37);
        assert!((r.accuracy() - 37.0 / 39.0).abs() < 1e-15);
        assert_eq!(r.accuracy_str(), "0.9487");
    }

    #[test]
    fn all_negative_predictions_leave_precision_undefined() {
        let truth = [1, 0, 0, 1];
        let r = evaluate(&truth, &[0, 0, 0, 0]).unwrap();
        assert_eq!(r.precision(), None);
        assert_eq!(r.precision_str(), "undefined");
        assert_eq!(r.accuracy(), 0.5);
    }

    #[test]
    fn errors() {
        assert_eq!(
            evaluate(&[1], &[1, 0]).unwrap_err(),
            MetricsError::LengthMismatch { truth: 1, pred: 2 }
        );
        assert_eq!(evaluate(&[], &[]).unwrap_err(), MetricsError::EmptyInput);
    }

    #[test]
    fn ratio_rounding_half_even() {
        assert_eq!(format_ratio(36, 39), "0.9231");
        assert_eq!(format_ratio(1, 3), "0.3333");
        // 0.00005 exactly -> ties to even (0.0000), 0.00015 -> 0.0002
        assert_eq!(format_ratio(1, 20_000), "0.0000");
        assert_eq!(format_ratio(3, 20_000), "0.0002");
        assert_eq!(format_ratio(5, 5), "1.0000");
    }

    #[test]
    fn noop_job_is_fast() {
        let ((), t) = time_training(|| Ok::<_, ()>(())).unwrap();
        assert!(t < 0.01);
    }

    #[test]
    fn timing_propagates_errors() {
        let r: Result<((), f64), &str> = time_training(|| Err("boom"));
        assert_eq!(r.unwrap_err(), "boom");
    }
}
