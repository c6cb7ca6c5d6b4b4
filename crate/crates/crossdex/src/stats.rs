//! Paired Wilcoxon signed-rank test with a configurable location shift.
//!
//! Conventions follow the common reference implementation defaults:
//! zero differences are dropped, tied absolute differences get
//! midranks, the exact null distribution is used for small tie-free
//! samples, and the normal approximation applies a continuity
//! correction and a tie-corrected variance otherwise. The two-sided
//! exact p is the doubled one-sided p capped at 1.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Largest `n_effective` handled by the exact path.
pub const EXACT_LIMIT: usize = 50;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty samples")]
    Empty,
}

/// Which null distribution produced the p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Full signed-rank null distribution (tie-free, n < EXACT_LIMIT).
    Exact,
    /// Normal approximation with continuity correction.
    NormalCc,
}

/// Hypothesis direction for [`WilcoxonResult::p_value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// V: sum of the ranks of positive differences.
    pub statistic: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n_effective: usize,
    pub p_greater: f64,
    pub p_less: f64,
    pub p_two_sided: f64,
    pub method: Method,
    /// Location shift subtracted from the differences.
    pub mu: f64,
    /// All differences were zero; every p-value is 1.
    pub degenerate: bool,
}

impl WilcoxonResult {
    pub fn p_value(&self, alternative: Alternative) -> f64 {
        match alternative {
            Alternative::Greater => self.p_greater,
            Alternative::Less => self.p_less,
            Alternative::TwoSided => self.p_two_sided,
        }
    }
}

/// Paired Wilcoxon signed-rank test of `x − y − mu`.
///
/// Returns p-values for all three alternatives; `greater` is the
/// hypothesis that `x` is shifted right of `y` by more than `mu`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], mu: f64) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::Empty);
    }

    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b - mu)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            n_effective: 0,
            p_greater: 1.0,
            p_less: 1.0,
            p_two_sided: 1.0,
            method: Method::Exact,
            mu,
            degenerate: true,
        });
    }

    let (ranks, tie_groups) = midranks(&diffs);
    let has_ties = tie_groups.iter().any(|&t| t > 1);
    let v: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();

    let (p_greater, p_less, p_two_sided, method) = if n < EXACT_LIMIT && !has_ties {
        let (pg, pl, p2) = exact_p_values(v, n);
        (pg, pl, p2, Method::Exact)
    } else {
        let tie_term: f64 = tie_groups
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum::<f64>()
            / 48.0;
        let (pg, pl, p2) = normal_p_values(v, n, tie_term);
        (pg, pl, p2, Method::NormalCc)
    };

    Ok(WilcoxonResult {
        statistic: v,
        n_effective: n,
        p_greater,
        p_less,
        p_two_sided,
        method,
        mu,
        degenerate: false,
    })
}

/// Midranks of |d| plus the tie-group sizes.
fn midranks(diffs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().partial_cmp(&diffs[b].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut tie_groups = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j share the midrank.
        let mid = (i + 1 + j + 1) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = mid;
        }
        tie_groups.push(j - i + 1);
        i = j + 1;
    }
    (ranks, tie_groups)
}

/// Exact null distribution of V for tie-free ranks 1..=n: subset-sum
/// counts computed by dynamic programming. `P(V = w) = counts[w] / 2^n`.
pub fn signrank_null_distribution(n: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u128; max + 1];
    counts[0] = 1;
    for rank in 1..=n {
        for w in (rank..=max).rev() {
            counts[w] += counts[w - rank];
        }
    }
    let total = 2f64.powi(n as i32);
    counts.into_iter().map(|c| c as f64 / total).collect()
}

fn exact_p_values(v: f64, n: usize) -> (f64, f64, f64) {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u128; max + 1];
    counts[0] = 1;
    for rank in 1..=n {
        for w in (rank..=max).rev() {
            counts[w] += counts[w - rank];
        }
    }
    let vi = v.round() as usize;
    let total = 2f64.powi(n as i32);
    let ge: u128 = counts[vi..].iter().sum();
    let le: u128 = counts[..=vi].iter().sum();
    let pg = ge as f64 / total;
    let pl = le as f64 / total;
    let p2 = (2.0 * pg.min(pl)).min(1.0);
    (pg, pl, p2)
}

fn normal_p_values(v: f64, n: usize, tie_term: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let e = nf * (nf + 1.0) / 4.0;
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let norm = Normal::new(0.0, 1.0).expect("unit normal");
    let z0 = v - e;
    let pg = 1.0 - norm.cdf((z0 - 0.5) / sigma);
    let pl = norm.cdf((z0 + 0.5) / sigma);
    let z2 = (z0 - 0.5 * z0.signum()) / sigma;
    let p2 = (2.0 * norm.cdf(z2).min(1.0 - norm.cdf(z2))).min(1.0);
    (pg, pl, p2)
}
