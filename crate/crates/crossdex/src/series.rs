//! Index series ingestion, calendar alignment, and Pearson correlation.
//!
//! Input files are two-column CSVs (`date,close`, ISO-8601 dates).
//! Different exchanges trade on slightly different calendars, so series
//! are compared only after an inner join on dates; values are never
//! fabricated for missing days.

use chrono::NaiveDate;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("{path}:{line}: {problem}")]
    Parse {
        path: String,
        line: usize,
        problem: String,
    },
    #[error("{path}:{line}: close must be a positive finite number, got {value}")]
    NonPositiveClose {
        path: String,
        line: usize,
        value: f64,
    },
    #[error("{path}:{line}: duplicate date {date}")]
    DuplicateDate {
        path: String,
        line: usize,
        date: NaiveDate,
    },
    #[error("{path}: series is empty")]
    Empty { path: String },
    #[error("series {a} and {b} share no dates")]
    NoOverlap { a: String, b: String },
    #[error("pearson needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("pearson undefined: series {0} is constant (zero variance)")]
    DegenerateVariance(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A dated sequence of closing values for one market index.
///
/// Invariants: dates strictly increasing, every close finite and > 0,
/// length ≥ 1. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSeries {
    name: String,
    points: Vec<(NaiveDate, f64)>,
}

impl IndexSeries {
    /// Validates and constructs a series. Points may arrive unsorted;
    /// they are sorted by date here. `origin` only decorates errors.
    pub fn new(
        name: impl Into<String>,
        mut points: Vec<(NaiveDate, f64)>,
        origin: &str,
    ) -> Result<Self, SeriesError> {
        if points.is_empty() {
            return Err(SeriesError::Empty {
                path: origin.to_string(),
            });
        }
        points.sort_by_key(|(d, _)| *d);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SeriesError::DuplicateDate {
                    path: origin.to_string(),
                    line: 0,
                    date: w[0].0,
                });
            }
        }
        for (d, v) in &points {
            if !v.is_finite() || *v <= 0.0 {
                return Err(SeriesError::NonPositiveClose {
                    path: format!("{origin} ({d})"),
                    line: 0,
                    value: *v,
                });
            }
        }
        Ok(IndexSeries {
            name: name.into(),
            points,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.points.iter().map(|(d, _)| *d)
    }

    /// Closing values in date order.
    pub fn closes(&self) -> Vec<f64> {
        self.points.iter().map(|(_, v)| *v).collect()
    }
}

/// Two series restricted to their shared calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    pub name_a: String,
    pub name_b: String,
}

/// Loads and validates one `date,close` CSV.
///
/// Rows may be unsorted (the result is sorted ascending); malformed
/// rows, non-positive closes, and duplicate dates fail with the
/// offending line number.
pub fn load_series(path: impl AsRef<Path>, name: &str) -> Result<IndexSeries, SeriesError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|source| SeriesError::Io {
        path: display.clone(),
        source,
    })?;
    parse_series(&raw, name, &display)
}

fn parse_series(raw: &str, name: &str, origin: &str) -> Result<IndexSeries, SeriesError> {
    let mut lines = raw.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "date,close" => {}
        Some((_, header)) => {
            return Err(SeriesError::Parse {
                path: origin.to_string(),
                line: 1,
                problem: format!("expected header `date,close`, got `{}`", header.trim()),
            })
        }
        None => {
            return Err(SeriesError::Empty {
                path: origin.to_string(),
            })
        }
    }

    let mut points = Vec::new();
    let mut seen: Vec<(NaiveDate, usize)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (date_str, close_str) = match (fields.next(), fields.next(), fields.next()) {
            (Some(d), Some(c), None) => (d.trim(), c.trim()),
            _ => {
                return Err(SeriesError::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    problem: format!("expected 2 fields `date,close`, got `{trimmed}`"),
                })
            }
        };
        let date =
            NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|e| SeriesError::Parse {
                path: origin.to_string(),
                line: line_no,
                problem: format!("bad date `{date_str}`: {e}"),
            })?;
        let close: f64 = close_str.parse().map_err(|e| SeriesError::Parse {
            path: origin.to_string(),
            line: line_no,
            problem: format!("bad close `{close_str}`: {e}"),
        })?;
        if !close.is_finite() || close <= 0.0 {
            return Err(SeriesError::NonPositiveClose {
                path: origin.to_string(),
                line: line_no,
                value: close,
            });
        }
        if seen.iter().any(|(d, _)| *d == date) {
            return Err(SeriesError::DuplicateDate {
                path: origin.to_string(),
                line: line_no,
                date,
            });
        }
        seen.push((date, line_no));
        points.push((date, close));
    }
    IndexSeries::new(name, points, origin)
}

/// Writes a series back out in the input format. `load_series` of the
/// result reproduces the values bit-exactly.
pub fn save_series(series: &IndexSeries, path: impl AsRef<Path>) -> Result<(), SeriesError> {
    let path = path.as_ref();
    let mut out = String::from("date,close\n");
    for (d, v) in series.points() {
        let _ = writeln!(out, "{},{}", d.format("%Y-%m-%d"), v);
    }
    std::fs::write(path, out).map_err(|source| SeriesError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Inner-joins two series on their calendars.
pub fn align(x: &IndexSeries, y: &IndexSeries) -> Result<AlignedPair, SeriesError> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut dates = Vec::new();
    let (xs, ys) = (x.points(), y.points());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() && j < ys.len() {
        match xs[i].0.cmp(&ys[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dates.push(xs[i].0);
                a.push(xs[i].1);
                b.push(ys[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    if dates.is_empty() {
        return Err(SeriesError::NoOverlap {
            a: x.name().to_string(),
            b: y.name().to_string(),
        });
    }
    Ok(AlignedPair {
        a,
        b,
        dates,
        name_a: x.name().to_string(),
        name_b: y.name().to_string(),
    })
}

/// Sample Pearson correlation of an aligned pair.
pub fn pearson(pair: &AlignedPair) -> Result<f64, SeriesError> {
    pearson_of(&pair.a, &pair.b, &pair.name_a, &pair.name_b)
}

fn pearson_of(a: &[f64], b: &[f64], name_a: &str, name_b: &str) -> Result<f64, SeriesError> {
    if a.len() < 2 {
        return Err(SeriesError::TooShort(a.len()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 {
        return Err(SeriesError::DegenerateVariance(name_a.to_string()));
    }
    if vb == 0.0 {
        return Err(SeriesError::DegenerateVariance(name_b.to_string()));
    }
    // Rounding can push |r| a ULP past 1 for perfectly collinear data.
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// All unordered pairs with their correlations, in input order.
pub fn correlation_table(
    series: &[IndexSeries],
) -> Result<Vec<(String, String, f64)>, SeriesError> {
    let mut rows = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let pair = align(&series[i], &series[j])?;
            let r = pearson(&pair)?;
            rows.push((
                series[i].name().to_string(),
                series[j].name().to_string(),
                r,
            ));
        }
    }
    Ok(rows)
}
