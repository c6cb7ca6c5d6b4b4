//! Seeded synthetic index generators for tests, demos, and the `synth`
//! subcommand. All generators are deterministic given their seed and
//! emit weekday-dated series starting 2005-01-03.

use crate::series::IndexSeries;
use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("correlation must lie strictly inside (-1, 1), got {0}")]
    BadCorrelation(f64),
    #[error("need at least 1 day, got {0}")]
    BadLength(usize),
}

fn trading_dates(n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut d = NaiveDate::from_ymd_opt(2005, 1, 3).expect("valid date");
    while dates.len() < n {
        if d.weekday() != Weekday::Sat && d.weekday() != Weekday::Sun {
            dates.push(d);
        }
        d += Duration::days(1);
    }
    dates
}

fn to_series(name: &str, values: Vec<f64>) -> IndexSeries {
    let dates = trading_dates(values.len());
    IndexSeries::new(name, dates.into_iter().zip(values).collect(), "synth")
        .expect("generated series is valid")
}

/// Standard normal via Box-Muller; deterministic given the rng state.
fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Geometric Brownian motion at daily steps (drift 5%/yr, vol 20%/yr,
/// 252 trading days).
pub fn gbm(name: &str, n: usize, seed: u64) -> Result<IndexSeries, SynthError> {
    if n == 0 {
        return Err(SynthError::BadLength(n));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values = gbm_path(n, 1000.0, &mut |_| gaussian(&mut rng));
    Ok(to_series(name, values))
}

fn gbm_path(n: usize, s0: f64, z: &mut impl FnMut(usize) -> f64) -> Vec<f64> {
    let (mu, sigma, dt): (f64, f64, f64) = (0.05, 0.2, 1.0 / 252.0);
    let drift = (mu - 0.5 * sigma * sigma) * dt;
    let step = sigma * dt.sqrt();
    let mut values = Vec::with_capacity(n);
    let mut s = s0;
    values.push(s);
    for t in 1..n {
        s *= (drift + step * z(t)).exp();
        values.push(s);
    }
    values
}

/// Two GBM paths whose daily log-returns share correlation `rho`.
pub fn correlated_gbm(
    name_a: &str,
    name_b: &str,
    n: usize,
    seed: u64,
    rho: f64,
) -> Result<(IndexSeries, IndexSeries), SynthError> {
    if n == 0 {
        return Err(SynthError::BadLength(n));
    }
    if !(-1.0 < rho && rho < 1.0) {
        return Err(SynthError::BadCorrelation(rho));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mix = (1.0 - rho * rho).sqrt();
    let mut za = Vec::with_capacity(n);
    let mut zb = Vec::with_capacity(n);
    for _ in 0..n {
        let z1 = gaussian(&mut rng);
        let z2 = gaussian(&mut rng);
        za.push(z1);
        zb.push(rho * z1 + mix * z2);
    }
    let a = gbm_path(n, 1000.0, &mut |t| za[t]);
    let b = gbm_path(n, 1000.0, &mut |t| zb[t]);
    Ok((to_series(name_a, a), to_series(name_b, b)))
}

/// Sum of a constant and a few damped cosines: every value is a fixed
/// linear function of the trailing window, so the closed-form
/// auto-regression reproduces the series exactly.
pub fn linear(name: &str, n: usize, seed: u64) -> Result<IndexSeries, SynthError> {
    if n == 0 {
        return Err(SynthError::BadLength(n));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let base = 500.0;
    // Well-separated frequencies keep the induced regression problem
    // well-conditioned; each cosine obeys an order-2 linear recurrence.
    let modes: Vec<(f64, f64, f64)> = [0.25, 0.9, 1.7]
        .iter()
        .map(|w| {
            (
                rng.gen_range(25.0..40.0),                 // amplitude
                w + rng.gen_range(-0.05..0.05),            // angular frequency
                rng.gen_range(0.0..std::f64::consts::TAU), // phase
            )
        })
        .collect();
    let values = (0..n)
        .map(|t| {
            let tf = t as f64;
            base + modes
                .iter()
                .map(|(a, w, p)| a * (w * tf + p).cos())
                .sum::<f64>()
        })
        .collect();
    Ok(to_series(name, values))
}

/// Pearson correlation of daily log-returns of two same-calendar series.
pub fn log_return_correlation(a: &IndexSeries, b: &IndexSeries) -> f64 {
    let ra = log_returns(&a.closes());
    let rb = log_returns(&b.closes());
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

fn log_returns(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gbm_is_seed_reproducible() {
        let a = gbm("X", 500, 7).unwrap();
        let b = gbm("X", 500, 7).unwrap();
        assert_eq!(a, b);
        let c = gbm("X", 500, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gbm_values_positive() {
        let s = gbm("X", 3000, 1).unwrap();
        assert!(s.closes().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn correlated_pair_hits_requested_rho() {
        let (a, b) = correlated_gbm("A", "B", 5000, 42, 0.99).unwrap();
        let r = log_return_correlation(&a, &b);
        assert!((r - 0.99).abs() < 0.03, "measured {r}");
    }

    #[test]
    fn invalid_rho_rejected() {
        assert!(matches!(
            correlated_gbm("A", "B", 100, 1, 1.0),
            Err(SynthError::BadCorrelation(_))
        ));
    }

    #[test]
    fn linear_series_is_ar_reproducible() {
        use crate::models::{build_forecaster, ForecasterSpec, ModelKind, TrainSession};
        use crate::windowing::{extract_observations, plan_sessions, WindowConfig};

        let series = linear("L", 360, 5).unwrap();
        let values = series.closes();
        let cfg = WindowConfig::default();
        let plan = plan_sessions(values.len(), &cfg).unwrap();
        let pair = &plan.pairs[0];
        let observations = extract_observations(&values, pair, &cfg);
        let session = TrainSession::new(
            observations,
            values[pair.train_start..pair.train_end].to_vec(),
        );

        let mut spec = ForecasterSpec::new(ModelKind::Ar);
        spec.normalize = false;
        let mut ar = build_forecaster(&spec).unwrap();
        ar.train(&session).unwrap();

        // Forecast the first test window and compare against the series.
        let s = pair.test_window_starts[0];
        let pred = ar.predict(&values[s..s + 30]).unwrap();
        for (p, a) in pred.iter().zip(&values[s + 30..s + 60]) {
            assert!((p - a).abs() < 1e-6 * a.abs(), "{p} vs {a}");
        }
    }

    #[test]
    fn dates_skip_weekends() {
        let s = gbm("X", 50, 3).unwrap();
        for (d, _) in s.points() {
            assert!(d.weekday() != Weekday::Sat && d.weekday() != Weekday::Sun);
        }
    }
}
