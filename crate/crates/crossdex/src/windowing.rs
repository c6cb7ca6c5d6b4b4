//! Session partitioning and strict per-window normalization.
//!
//! A series is cut into consecutive non-overlapping sessions of
//! `session_len` days. Session k trains, session k+1 tests, so N whole
//! sessions yield N−1 train/test pairs. Training observations slide
//! with a 1-day step from the session start; their labels all end
//! before the session does, leaving an untouched buffer ahead of the
//! test block, so training never sees a day of its paired test session,
//! label days included.
//!
//! Test windows start from the bridge window (the last `input_len` days
//! of the training session, not used for training) and roll forward
//! with the configured stride until a forecast would leave the test
//! session. Rolling is walk-forward with realized actuals, not
//! recursive self-feeding.
//!
//! Normalization is strict: the affine parameters of a window come from
//! the input window alone, never from labels, the future, or global
//! statistics, and the same parameters normalize the label at training
//! time and denormalize the prediction at test time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error(
        "series of {len} days is too short: need at least {min} (2 sessions of {session_len})"
    )]
    SeriesTooShort {
        len: usize,
        min: usize,
        session_len: usize,
    },
    #[error("invalid window config: {0}")]
    BadConfig(String),
}

/// Geometry of the session partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Days fed to the model.
    pub input_len: usize,
    /// Days the model must forecast.
    pub label_len: usize,
    /// Training observations per session (sliding by 1 day).
    pub obs_per_subset: usize,
    /// Days per session, the unit of model reset.
    pub session_len: usize,
    /// Step of the rolling test windows.
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            input_len: 30,
            label_len: 30,
            obs_per_subset: 30,
            session_len: 120,
            stride: 1,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), WindowError> {
        if self.input_len == 0
            || self.label_len == 0
            || self.obs_per_subset == 0
            || self.session_len == 0
            || self.stride == 0
        {
            return Err(WindowError::BadConfig("all fields must be >= 1".into()));
        }
        if self.session_len < self.input_len + self.label_len {
            return Err(WindowError::BadConfig(format!(
                "session_len {} cannot hold one observation of {}+{} days",
                self.session_len, self.input_len, self.label_len
            )));
        }
        let span = (self.obs_per_subset - 1) + self.input_len + self.label_len;
        if span > self.session_len {
            return Err(WindowError::BadConfig(format!(
                "{} observations sliding by 1 day span {} days, more than session_len {}",
                self.obs_per_subset, span, self.session_len
            )));
        }
        Ok(())
    }
}

/// One train/test pair. All offsets are absolute 0-based day indexes
/// into the source series; ranges are half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPair {
    pub session_id: usize,
    pub train_start: usize,
    pub train_end: usize,
    /// Start offsets of the training observations (input begins here).
    pub observation_starts: Vec<usize>,
    /// First training-session day no observation touches; days
    /// `buffer_start..train_end` are the guard buffer (the bridge
    /// window lives inside it).
    pub buffer_start: usize,
    pub test_start: usize,
    pub test_end: usize,
    /// Start offsets of the rolling test windows; the first is the
    /// bridge window ending exactly at `test_start`.
    pub test_window_starts: Vec<usize>,
}

/// The full deterministic partition of one series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub config: WindowConfig,
    pub series_len: usize,
    pub pairs: Vec<SessionPair>,
}

impl SessionPlan {
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// JSON audit dump of session boundaries, observation offsets and
    /// buffer extents.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// One training example: an input window and the label days that
/// immediately follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub input: Vec<f64>,
    pub label: Vec<f64>,
    pub start_index: usize,
}

/// Builds the session partition for a series of `series_len` days.
pub fn plan_sessions(series_len: usize, cfg: &WindowConfig) -> Result<SessionPlan, WindowError> {
    cfg.validate()?;
    let n_sessions = series_len / cfg.session_len;
    if n_sessions < 2 {
        return Err(WindowError::SeriesTooShort {
            len: series_len,
            min: 2 * cfg.session_len,
            session_len: cfg.session_len,
        });
    }

    let mut pairs = Vec::with_capacity(n_sessions - 1);
    for k in 0..n_sessions - 1 {
        let train_start = k * cfg.session_len;
        let train_end = train_start + cfg.session_len;
        let test_start = train_end;
        let test_end = test_start + cfg.session_len;

        let observation_starts: Vec<usize> =
            (0..cfg.obs_per_subset).map(|o| train_start + o).collect();
        let buffer_start = train_start + (cfg.obs_per_subset - 1) + cfg.input_len + cfg.label_len;

        let mut test_window_starts = Vec::new();
        let mut s = test_start - cfg.input_len;
        while s + cfg.input_len + cfg.label_len <= test_end {
            test_window_starts.push(s);
            s += cfg.stride;
        }

        pairs.push(SessionPair {
            session_id: k,
            train_start,
            train_end,
            observation_starts,
            buffer_start,
            test_start,
            test_end,
            test_window_starts,
        });
    }

    Ok(SessionPlan {
        config: cfg.clone(),
        series_len,
        pairs,
    })
}

/// Materializes the training observations of one pair from raw values.
pub fn extract_observations(
    values: &[f64],
    pair: &SessionPair,
    cfg: &WindowConfig,
) -> Vec<Observation> {
    pair.observation_starts
        .iter()
        .map(|&start| Observation {
            input: values[start..start + cfg.input_len].to_vec(),
            label: values[start + cfg.input_len..start + cfg.input_len + cfg.label_len].to_vec(),
            start_index: start,
        })
        .collect()
}

/// A window mapped into [0, 1] together with the parameters needed to
/// map related values the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedWindow {
    pub values: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    /// Set when the window was constant; all values map to 0.5 and
    /// denormalization returns the constant `lo`.
    pub degenerate: bool,
}

/// Min-max normalization with parameters from the window itself.
pub fn normalize_window(w: &[f64]) -> NormalizedWindow {
    assert!(!w.is_empty(), "normalize_window: empty window");
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return NormalizedWindow {
            values: vec![0.5; w.len()],
            lo,
            hi,
            degenerate: true,
        };
    }
    NormalizedWindow {
        values: w.iter().map(|x| (x - lo) / (hi - lo)).collect(),
        lo,
        hi,
        degenerate: false,
    }
}

/// Normalizes `values` with previously computed window parameters
/// (used for labels, which must share their input window's map).
pub fn normalize_with(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if hi == lo {
        return vec![0.5; values.len()];
    }
    values.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Inverse of the normalization map; constant `lo` when degenerate.
pub fn denormalize(pred: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    pred.iter().map(|x| lo + x * (hi - lo)).collect()
}
