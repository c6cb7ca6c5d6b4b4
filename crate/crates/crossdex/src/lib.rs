//! Cross-market training laboratory for long-horizon stock index forecasting.
//!
//! The crate trains small forecasting models (closed-form auto-regression,
//! from-scratch MLP/RBF/KGate/GMDH/CNN/LSTM/GRU variants) on one market
//! index, evaluates them 30 trading days ahead on the same or a different
//! index, and compares the resulting per-session accuracy distributions
//! with a paired Wilcoxon signed-rank test.
//!
//! The pieces, bottom up:
//!
//! - [`numcore`]: dense tensors, reverse-mode differentiation, adam,
//!   closed-form least squares. No external linear algebra.
//! - [`series`]: CSV ingestion, calendar alignment, Pearson correlation.
//! - [`windowing`]: session partitioning (120-day blocks, 30-in/30-out
//!   sliding observations) and strict per-window min-max normalization.
//! - [`models`]: the model zoo behind one [`models::Forecaster`] contract.
//! - [`metrics`]: MAPE / RMSE per session and their mean±std summaries.
//! - [`stats`]: paired Wilcoxon signed-rank test, exact and
//!   normal-approximation paths, with a configurable location shift.
//! - [`synth`]: seeded synthetic series generators for tests and demos.
//! - [`harness`]: the circular train-on-A/test-on-B experiment runner.
//! - [`report`]: accuracy tables and plot-ready CSV emission.
//! - [`cli`]: the `crossdex` command-line entry points.
//!
//! Every run is deterministic given its seed: same config, same bytes out,
//! independent of thread count.
//!
//! Start with the runnable walkthroughs under `examples/` (one per
//! capability, from `autodiff_basics` to `full_experiment`), or with the
//! `crossdex` binary for the file-driven workflow.

// Dense numeric kernels index matrices directly throughout.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod numcore;
pub mod report;
pub mod series;
pub mod stats;
pub mod synth;
pub mod windowing;

/// Version tag written into persisted result artifacts. Bumped on any
/// schema change; loaders refuse mismatched artifacts.
pub const RESULTS_FORMAT_VERSION: u32 = 1;
