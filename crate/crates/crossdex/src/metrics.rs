//! Forecast accuracy metrics: MAPE and RMSE, per session and summarized
//! across sessions as mean ± sample standard deviation.
//!
//! A session's metric pools every forecast point of every rolling
//! window in that session into one flat collection before averaging.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {actual} actual vs {forecast} forecast values")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("empty input")]
    Empty,
    #[error("MAPE undefined: actual value at position {0} is zero")]
    ZeroActual(usize),
}

/// Mean absolute percentage error: `(1/n) Σ |A_t − F_t| / |A_t|`.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(actual, forecast)?;
    let mut acc = 0.0;
    for (i, (a, f)) in actual.iter().zip(forecast).enumerate() {
        if *a == 0.0 {
            return Err(MetricsError::ZeroActual(i));
        }
        acc += ((a - f) / a).abs();
    }
    Ok(acc / actual.len() as f64)
}

/// Root mean square error: `sqrt((1/n) Σ (A_t − F_t)²)`.
pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(actual, forecast)?;
    let acc: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f) * (a - f))
        .sum();
    Ok((acc / actual.len() as f64).sqrt())
}

fn check_lengths(actual: &[f64], forecast: &[f64]) -> Result<(), MetricsError> {
    if actual.len() != forecast.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Accuracy of one test session: all forecast points pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session_id: usize,
    pub mape: f64,
    pub rmse: f64,
    pub n_points: usize,
}

impl SessionMetrics {
    /// Pools `(actual, forecast)` pairs from every window of a session.
    pub fn from_pooled(
        session_id: usize,
        actual: &[f64],
        forecast: &[f64],
    ) -> Result<Self, MetricsError> {
        Ok(SessionMetrics {
            session_id,
            mape: mape(actual, forecast)?,
            rmse: rmse(actual, forecast)?,
            n_points: actual.len(),
        })
    }
}

/// Mean ± sample standard deviation over sessions, the ±-column format
/// of the accuracy tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_mape: f64,
    pub std_mape: f64,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub n_sessions: usize,
    /// A single session has no spread; std is reported as 0 with this flag.
    pub single_sample: bool,
}

/// Summarizes per-session metrics. Standard deviation uses the n−1
/// denominator.
pub fn summarize(per_session: &[SessionMetrics]) -> Result<MetricsSummary, MetricsError> {
    if per_session.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mapes: Vec<f64> = per_session.iter().map(|s| s.mape).collect();
    let rmses: Vec<f64> = per_session.iter().map(|s| s.rmse).collect();
    let (mean_mape, std_mape) = mean_std(&mapes);
    let (mean_rmse, std_rmse) = mean_std(&rmses);
    Ok(MetricsSummary {
        mean_mape,
        std_mape,
        mean_rmse,
        std_rmse,
        n_sessions: per_session.len(),
        single_sample: per_session.len() == 1,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
