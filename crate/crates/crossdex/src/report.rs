//! Accuracy tables and plot-ready CSV emission.
//!
//! MAPE is printed to 4 decimal places and RMSE to 2, the precision the
//! accuracy tables are read at. Wilcoxon p-values print at 5 decimals.
//! Figures are not rendered; per-session actual-vs-forecast CSVs are
//! emitted instead.

use crate::harness::{ResultMatrix, WilcoxonRow};
use crate::metrics::MetricsSummary;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("results are empty: nothing to report")]
    EmptyResults,
    #[error("unknown format `{0}` (expected `md` or `csv`)")]
    BadFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Md,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" => Ok(Format::Md),
            "csv" => Ok(Format::Csv),
            other => Err(ReportError::BadFormat(other.to_string())),
        }
    }
}

pub fn format_mape(x: f64) -> String {
    format!("{x:.4}")
}

pub fn format_rmse(x: f64) -> String {
    format!("{x:.2}")
}

fn mape_pm(s: &MetricsSummary) -> String {
    format!("{}±{}", format_mape(s.mean_mape), format_mape(s.std_mape))
}

fn rmse_pm(s: &MetricsSummary) -> String {
    format!("{}±{}", format_rmse(s.mean_rmse), format_rmse(s.std_rmse))
}

/// Self-trained accuracy table for one index (the matrix diagonal).
pub fn ablation_table(
    matrix: &ResultMatrix,
    index: &str,
    format: Format,
) -> Result<String, ReportError> {
    let mut rows = Vec::new();
    for model in matrix.models() {
        if let Some(cell) = matrix.cell(&model, index, index) {
            let (mape, rmse) = match &cell.summary {
                Some(s) => (mape_pm(s), rmse_pm(s)),
                None => ("failed".into(), "failed".into()),
            };
            rows.push((model, mape, rmse));
        }
    }
    if rows.is_empty() {
        return Err(ReportError::EmptyResults);
    }
    let mut out = String::new();
    match format {
        Format::Md => {
            let _ = writeln!(out, "| Model | MAPE | RMSE |");
            let _ = writeln!(out, "|---|---|---|");
            for (model, mape, rmse) in rows {
                let _ = writeln!(out, "| {model} | {mape} | {rmse} |");
            }
        }
        Format::Csv => {
            let _ = writeln!(out, "model,mape,rmse");
            for (model, mape, rmse) in rows {
                let _ = writeln!(out, "{model},{mape},{rmse}");
            }
        }
    }
    Ok(out)
}

/// Cross-training matrix for one model: rows trained-on, columns
/// tested-on, mean±std of the chosen metric.
pub fn cross_table(
    matrix: &ResultMatrix,
    model: &str,
    format: Format,
) -> Result<String, ReportError> {
    let indexes = matrix.indexes();
    if indexes.is_empty() {
        return Err(ReportError::EmptyResults);
    }
    let entry = |train: &str, test: &str| -> String {
        matrix
            .cell(model, train, test)
            .and_then(|c| c.summary.as_ref())
            .map(mape_pm)
            .unwrap_or_else(|| "-".into())
    };
    let mut out = String::new();
    match format {
        Format::Md => {
            let _ = writeln!(out, "| Index | {} |", indexes.join(" | "));
            let _ = writeln!(out, "|{}|", vec!["---"; indexes.len() + 1].join("|"));
            for train in &indexes {
                let cells: Vec<String> = indexes.iter().map(|t| entry(train, t)).collect();
                let _ = writeln!(out, "| {train} | {} |", cells.join(" | "));
            }
        }
        Format::Csv => {
            let _ = writeln!(out, "index,{}", indexes.join(","));
            for train in &indexes {
                let cells: Vec<String> = indexes.iter().map(|t| entry(train, t)).collect();
                let _ = writeln!(out, "{train},{}", cells.join(","));
            }
        }
    }
    Ok(out)
}

/// Wilcoxon comparison rows for one training index, in the accuracy
/// tables' column order (greater, less, two-sided), 5 decimals.
pub fn wilcoxon_table(
    rows: &[WilcoxonRow],
    train_index: &str,
    format: Format,
) -> Result<String, ReportError> {
    let picked: Vec<&WilcoxonRow> = rows
        .iter()
        .filter(|r| r.train_index == train_index)
        .collect();
    if picked.is_empty() {
        return Err(ReportError::EmptyResults);
    }
    let mut out = String::new();
    match format {
        Format::Md => {
            let _ = writeln!(out, "| Model | Index | Greater | Less | Two-side |");
            let _ = writeln!(out, "|---|---|---|---|---|");
            for r in picked {
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.5} | {:.5} | {:.5} |",
                    r.model,
                    r.test_index,
                    r.result.p_greater,
                    r.result.p_less,
                    r.result.p_two_sided
                );
            }
        }
        Format::Csv => {
            let _ = writeln!(out, "model,index,greater,less,two_side");
            for r in picked {
                let _ = writeln!(
                    out,
                    "{},{},{:.5},{:.5},{:.5}",
                    r.model,
                    r.test_index,
                    r.result.p_greater,
                    r.result.p_less,
                    r.result.p_two_sided
                );
            }
        }
    }
    Ok(out)
}

/// Per-session actual-vs-forecast points (the session's first test
/// window) for one cell, plot-ready.
pub fn plot_csv(
    matrix: &ResultMatrix,
    model: &str,
    train: &str,
    test: &str,
) -> Result<String, ReportError> {
    let cell = matrix
        .cell(model, train, test)
        .ok_or(ReportError::EmptyResults)?;
    let mut out = String::from("session_id,day,actual,forecast\n");
    for session in &cell.sessions {
        if let crate::harness::SessionOutcome::Ok {
            session_id,
            bridge_forecast,
            bridge_actual,
            ..
        } = session
        {
            for (day, (a, f)) in bridge_actual.iter().zip(bridge_forecast).enumerate() {
                let _ = writeln!(out, "{session_id},{day},{a},{f}");
            }
        }
    }
    Ok(out)
}

/// Pairwise correlation rows at the published 4-decimal precision.
pub fn correlation_csv(rows: &[(String, String, f64)]) -> String {
    let mut out = String::from("index1,index2,pearson\n");
    for (a, b, r) in rows {
        let _ = writeln!(out, "{a},{b},{r:.4}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CellResult, SessionOutcome};
    use crate::metrics::SessionMetrics;

    fn matrix_with(models: &[&str], indexes: &[&str]) -> ResultMatrix {
        let mut cells = Vec::new();
        for m in models {
            for tr in indexes {
                for te in indexes {
                    let sessions: Vec<SessionOutcome> = (0..3)
                        .map(|i| SessionOutcome::Ok {
                            session_id: i,
                            mape: 0.05 + 0.001 * i as f64,
                            rmse: 300.0 + i as f64,
                            n_points: 10,
                            bridge_forecast: vec![1.0, 2.0],
                            bridge_actual: vec![1.1, 2.1],
                        })
                        .collect();
                    let summary = crate::metrics::summarize(
                        &sessions
                            .iter()
                            .filter_map(|s| s.metrics())
                            .collect::<Vec<SessionMetrics>>(),
                    )
                    .ok();
                    cells.push(CellResult {
                        model: m.to_string(),
                        train_index: tr.to_string(),
                        test_index: te.to_string(),
                        sessions,
                        summary,
                    });
                }
            }
        }
        ResultMatrix { cells }
    }

    #[test]
    fn mape_formats_to_four_decimals() {
        assert_eq!(format_mape(0.050612), "0.0506");
        assert_eq!(format_mape(0.05), "0.0500");
        assert_eq!(format_rmse(336.789), "336.79");
    }

    #[test]
    fn ablation_table_has_one_row_per_model() {
        let m = matrix_with(&["ar", "rbf"], &["A"]);
        let md = ablation_table(&m, "A", Format::Md).unwrap();
        assert_eq!(md.lines().count(), 4);
        assert!(md.contains("| ar | 0.0510±0.0010 |"), "{md}");
        let csv = ablation_table(&m, "A", Format::Csv).unwrap();
        assert!(csv.starts_with("model,mape,rmse\n"));
    }

    #[test]
    fn cross_table_is_square_in_indexes() {
        let m = matrix_with(&["ar"], &["A", "B"]);
        let csv = cross_table(&m, "ar", Format::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "index,A,B");
    }

    #[test]
    fn empty_results_error() {
        let empty = ResultMatrix::default();
        assert!(matches!(
            ablation_table(&empty, "A", Format::Md),
            Err(ReportError::EmptyResults)
        ));
    }

    #[test]
    fn plot_csv_emits_bridge_points() {
        let m = matrix_with(&["ar"], &["A"]);
        let csv = plot_csv(&m, "ar", "A", "A").unwrap();
        assert!(csv.starts_with("session_id,day,actual,forecast\n"));
        // 3 sessions × 2 bridge days.
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn correlation_rows_format_to_four_decimals() {
        let rows = vec![("NASDAQ".to_string(), "DOW".to_string(), 0.97503)];
        let csv = correlation_csv(&rows);
        assert!(csv.contains("NASDAQ,DOW,0.9750"), "{csv}");
    }
}
