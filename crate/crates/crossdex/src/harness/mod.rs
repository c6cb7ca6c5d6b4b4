//! Experiment orchestration: train each model on each index's sessions
//! and test it, unmodified, on every index's paired test sessions, in
//! a circular fashion. Diagonal cells of the resulting matrix are the
//! ablation (self-trained) baseline; off-diagonal cells are
//! cross-trained.
//!
//! Runs are keyed and merged in a total order, so results are
//! bit-identical regardless of thread count or scheduling. Per-session
//! seeds depend on the base seed, the model slot, and the session id
//! (never on index symbols), so identical data registered under two
//! symbols produces identical cells.

mod config;
mod results;

pub use config::{ExperimentConfig, IndexSpec};
pub use results::{load_results, persist_results, LoadedResults, PersistedResults, RunMetadata};

use crate::metrics::{summarize, MetricsSummary, SessionMetrics};
use crate::models::{build_forecaster, ModelError, TrainSession};
use crate::series::{load_series, IndexSeries, SeriesError};
use crate::stats::{wilcoxon_signed_rank, StatsError, WilcoxonResult};
use crate::windowing::{extract_observations, plan_sessions, SessionPlan, WindowError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("model construction failed: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("cell ({model}, {train_index}, {test_index}) missing from results")]
    MissingCell {
        model: String,
        train_index: String,
        test_index: String,
    },
    #[error("session counts differ: {a} has {na}, {b} has {nb}")]
    SessionCountMismatch {
        a: String,
        na: usize,
        b: String,
        nb: usize,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("results format version {found} unsupported (expected {expected}); no migration path")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("cannot parse results file: {0}")]
    BadResults(String),
}

/// Identity of one (model, train, test, session) evaluation. The
/// lexicographic order drives deterministic merging.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub model: String,
    pub train_index: String,
    pub test_index: String,
    pub session_id: usize,
}

/// Outcome of one session evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SessionOutcome {
    Ok {
        session_id: usize,
        mape: f64,
        rmse: f64,
        n_points: usize,
        /// First test window's forecast (the headline 30-day forecast
        /// of the session) and the matching actuals, for plotting.
        bridge_forecast: Vec<f64>,
        bridge_actual: Vec<f64>,
    },
    Failed {
        session_id: usize,
        error: String,
    },
}

impl SessionOutcome {
    pub fn session_id(&self) -> usize {
        match self {
            SessionOutcome::Ok { session_id, .. } | SessionOutcome::Failed { session_id, .. } => {
                *session_id
            }
        }
    }

    pub fn metrics(&self) -> Option<SessionMetrics> {
        match self {
            SessionOutcome::Ok {
                session_id,
                mape,
                rmse,
                n_points,
                ..
            } => Some(SessionMetrics {
                session_id: *session_id,
                mape: *mape,
                rmse: *rmse,
                n_points: *n_points,
            }),
            SessionOutcome::Failed { .. } => None,
        }
    }
}

/// One (model, train_index, test_index) cell with its per-session
/// outcomes in session order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: String,
    pub train_index: String,
    pub test_index: String,
    pub sessions: Vec<SessionOutcome>,
    pub summary: Option<MetricsSummary>,
}

/// The full train-index × test-index accuracy matrix, cells sorted by
/// (model, train_index, test_index).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultMatrix {
    pub cells: Vec<CellResult>,
}

impl ResultMatrix {
    pub fn cell(&self, model: &str, train: &str, test: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.train_index == train && c.test_index == test)
    }

    pub fn models(&self) -> Vec<String> {
        let mut v: Vec<String> = self.cells.iter().map(|c| c.model.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn indexes(&self) -> Vec<String> {
        let mut v: Vec<String> = self.cells.iter().map(|c| c.test_index.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Count of failed (model, train, test, session) evaluations.
    pub fn failure_count(&self) -> usize {
        self.cells
            .iter()
            .flat_map(|c| &c.sessions)
            .filter(|s| matches!(s, SessionOutcome::Failed { .. }))
            .count()
    }
}

/// splitmix64-style avalanche, the per-run seed derivation.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Session seed: a function of the base seed, the model slot, and the
/// session, deliberately not of index symbols.
fn session_seed(base: u64, model_slot: usize, session_id: usize) -> u64 {
    mix(mix(base ^ mix(model_slot as u64)) ^ session_id as u64)
}

struct LoadedIndex {
    symbol: String,
    values: Vec<f64>,
    plan: SessionPlan,
}

/// Runs the full experiment. `threads` caps internal parallelism
/// (`None` uses the rayon default); the result is identical either way.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ResultMatrix, HarnessError> {
    cfg.validate()?;
    let indexes = load_indexes(cfg)?;

    // One unit of work trains once and tests against every index.
    let mut units = Vec::new();
    for (model_slot, _) in cfg.models.iter().enumerate() {
        for train_idx in 0..indexes.len() {
            for session_id in 0..indexes[train_idx].plan.n_pairs() {
                units.push((model_slot, train_idx, session_id));
            }
        }
    }

    let run_unit = |&(model_slot, train_idx, session_id): &(usize, usize, usize)| {
        evaluate_unit(cfg, &indexes, model_slot, train_idx, session_id)
    };

    let mut outcomes: Vec<(RunKey, SessionOutcome)> = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
            pool.install(|| units.par_iter().map(run_unit).collect::<Vec<_>>())
        }
        None => units.par_iter().map(run_unit).collect::<Vec<_>>(),
    }
    .into_iter()
    .flatten()
    .collect();

    // Schedule-independent merge.
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));

    let mut matrix = ResultMatrix::default();
    for (key, outcome) in outcomes {
        match matrix.cells.last_mut() {
            Some(cell)
                if cell.model == key.model
                    && cell.train_index == key.train_index
                    && cell.test_index == key.test_index =>
            {
                cell.sessions.push(outcome);
            }
            _ => matrix.cells.push(CellResult {
                model: key.model,
                train_index: key.train_index,
                test_index: key.test_index,
                sessions: vec![outcome],
                summary: None,
            }),
        }
    }
    for cell in &mut matrix.cells {
        let ok: Vec<SessionMetrics> = cell.sessions.iter().filter_map(|s| s.metrics()).collect();
        cell.summary = summarize(&ok).ok();
    }
    Ok(matrix)
}

fn load_indexes(cfg: &ExperimentConfig) -> Result<Vec<LoadedIndex>, HarnessError> {
    cfg.indexes
        .iter()
        .map(|spec| {
            let series: IndexSeries = load_series(&spec.path, &spec.symbol)?;
            let values = series.closes();
            let plan = plan_sessions(values.len(), &cfg.window)?;
            Ok(LoadedIndex {
                symbol: spec.symbol.clone(),
                values,
                plan,
            })
        })
        .collect()
}

/// Train once on (model, train index, session), then evaluate the same
/// session of every index.
fn evaluate_unit(
    cfg: &ExperimentConfig,
    indexes: &[LoadedIndex],
    model_slot: usize,
    train_idx: usize,
    session_id: usize,
) -> Vec<(RunKey, SessionOutcome)> {
    let spec = &cfg.models[model_slot];
    let model_name = spec.kind.name().to_string();
    let train = &indexes[train_idx];
    let seed = session_seed(cfg.seed, model_slot, session_id);

    let key_for = |test: &LoadedIndex| RunKey {
        model: model_name.clone(),
        train_index: train.symbol.clone(),
        test_index: test.symbol.clone(),
        session_id,
    };
    let targets: Vec<&LoadedIndex> = indexes
        .iter()
        .filter(|t| t.plan.n_pairs() > session_id)
        .collect();

    let trained = (|| -> Result<Box<dyn crate::models::Forecaster>, ModelError> {
        let mut model = build_forecaster(spec)?;
        model.reset(seed);
        let pair = &train.plan.pairs[session_id];
        let observations = extract_observations(&train.values, pair, &cfg.window);
        let days = train.values[pair.train_start..pair.train_end].to_vec();
        model.train(&TrainSession::new(observations, days))?;
        Ok(model)
    })();

    let model = match trained {
        Ok(m) => m,
        Err(e) => {
            // Training failed: every test target records the failure.
            return targets
                .iter()
                .map(|t| {
                    (
                        key_for(t),
                        SessionOutcome::Failed {
                            session_id,
                            error: e.to_string(),
                        },
                    )
                })
                .collect();
        }
    };

    targets
        .iter()
        .map(|test| {
            let outcome = evaluate_session(&*model, test, session_id, &cfg.window);
            (key_for(test), outcome)
        })
        .collect()
}

fn evaluate_session(
    model: &dyn crate::models::Forecaster,
    test: &LoadedIndex,
    session_id: usize,
    window: &crate::windowing::WindowConfig,
) -> SessionOutcome {
    let pair = &test.plan.pairs[session_id];
    let mut actual = Vec::new();
    let mut forecast = Vec::new();
    let mut bridge_forecast = Vec::new();
    let mut bridge_actual = Vec::new();

    for (w, &start) in pair.test_window_starts.iter().enumerate() {
        let input = &test.values[start..start + window.input_len];
        let label =
            &test.values[start + window.input_len..start + window.input_len + window.label_len];
        match model.predict(input) {
            Ok(pred) => {
                if w == 0 {
                    bridge_forecast = pred.clone();
                    bridge_actual = label.to_vec();
                }
                forecast.extend(pred);
                actual.extend_from_slice(label);
            }
            Err(e) => {
                return SessionOutcome::Failed {
                    session_id,
                    error: e.to_string(),
                }
            }
        }
    }

    match SessionMetrics::from_pooled(session_id, &actual, &forecast) {
        Ok(m) => SessionOutcome::Ok {
            session_id,
            mape: m.mape,
            rmse: m.rmse,
            n_points: m.n_points,
            bridge_forecast,
            bridge_actual,
        },
        Err(e) => SessionOutcome::Failed {
            session_id,
            error: e.to_string(),
        },
    }
}

/// One row of the cross-vs-ablation comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WilcoxonRow {
    pub model: String,
    pub train_index: String,
    pub test_index: String,
    /// Sessions paired after dropping failures on either side.
    pub n_pairs: usize,
    pub n_dropped: usize,
    pub result: WilcoxonResult,
}

/// Pairs each test index's self-trained per-session MAPE (its diagonal
/// cell) against the cross-trained MAPE session-by-session and runs the
/// signed-rank test at shift `mu`.
///
/// The not-cross-trained sample is first, so a small `greater` p-value
/// means cross-training is at least as accurate.
pub fn compare_cross_vs_ablation(
    matrix: &ResultMatrix,
    mu: f64,
) -> Result<Vec<WilcoxonRow>, HarnessError> {
    let models = matrix.models();
    let indexes = matrix.indexes();
    let mut rows = Vec::new();

    for model in &models {
        for train in &indexes {
            for test in &indexes {
                if train == test {
                    continue;
                }
                let missing = |tr: &str, te: &str| HarnessError::MissingCell {
                    model: model.clone(),
                    train_index: tr.to_string(),
                    test_index: te.to_string(),
                };
                let own = matrix
                    .cell(model, test, test)
                    .ok_or_else(|| missing(test, test))?;
                let cross = matrix
                    .cell(model, train, test)
                    .ok_or_else(|| missing(train, test))?;
                if own.sessions.len() != cross.sessions.len() {
                    return Err(HarnessError::SessionCountMismatch {
                        a: format!("({model}, {test}, {test})"),
                        na: own.sessions.len(),
                        b: format!("({model}, {train}, {test})"),
                        nb: cross.sessions.len(),
                    });
                }
                // Pair by session_id; drop a session from both sides if
                // either failed.
                let mut own_mape = Vec::new();
                let mut cross_mape = Vec::new();
                let mut dropped = 0;
                for (a, b) in own.sessions.iter().zip(&cross.sessions) {
                    debug_assert_eq!(a.session_id(), b.session_id());
                    match (a.metrics(), b.metrics()) {
                        (Some(ma), Some(mb)) => {
                            own_mape.push(ma.mape);
                            cross_mape.push(mb.mape);
                        }
                        _ => dropped += 1,
                    }
                }
                if own_mape.is_empty() {
                    continue;
                }
                let result = wilcoxon_signed_rank(&own_mape, &cross_mape, mu)?;
                rows.push(WilcoxonRow {
                    model: model.clone(),
                    train_index: train.clone(),
                    test_index: test.clone(),
                    n_pairs: own_mape.len(),
                    n_dropped: dropped,
                    result,
                });
            }
        }
    }
    Ok(rows)
}
