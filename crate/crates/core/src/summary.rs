//! Posterior summaries and sequential contrasts of chain columns.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::sampler::Chain;

/// Linear interpolation between order statistics (`h = (n - 1) p`).
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    let q = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    // keep monotone in p despite rounding in the interpolation
    q.clamp(sorted[lo], sorted[hi])
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastRow {
    pub summary: SummaryRow,
    /// Share of draws with a strictly positive difference.
    pub p_gt_zero: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SummaryError {
    EmptyChain,
    UnknownParameter(String),
}

impl fmt::Display for SummaryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummaryError::EmptyChain => write!(f, "chain has no draws"),
            SummaryError::UnknownParameter(name) => write!(f, "unknown parameter '{name}'"),
        }
    }
}

/// Mean, median, sample standard deviation and 2.5/50/97.5% quantiles.
pub fn summarize_values(name: &str, values: &[f64]) -> Result<SummaryRow, SummaryError> {
    if values.is_empty() {
        return Err(SummaryError::EmptyChain);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
    } else {
        0.0
    };
    let s = sorted(values);
    let q50 = quantile(&s, 0.5);
    Ok(SummaryRow {
        name: name.into(),
        mean,
        median: q50,
        sd,
        q025: quantile(&s, 0.025),
        q50,
        q975: quantile(&s, 0.975),
    })
}

pub fn summarize(chain: &Chain) -> Result<Vec<SummaryRow>, SummaryError> {
    if chain.is_empty() {
        return Err(SummaryError::EmptyChain);
    }
    chain
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<f64> = chain.draws.iter().map(|d| d[k]).collect();
            summarize_values(name, &col)
        })
        .collect()
}

/// Summaries of the per-draw differences `a - b` for each `(a, b)` pair,
/// labelled `"a-b"`.
pub fn contrasts<S: AsRef<str>>(
    chain: &Chain,
    pairs: &[(S, S)],
) -> Result<Vec<ContrastRow>, SummaryError> {
    if chain.is_empty() {
        return Err(SummaryError::EmptyChain);
    }
    pairs
        .iter()
        .map(|(a, b)| {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ia = chain
                .column_index(a)
                .ok_or_else(|| SummaryError::UnknownParameter(a.into()))?;
            let ib = chain
                .column_index(b)
                .ok_or_else(|| SummaryError::UnknownParameter(b.into()))?;
            let diff: Vec<f64> = chain.draws.iter().map(|d| d[ia] - d[ib]).collect();
            let positive = diff.iter().filter(|x| **x > 0.0).count();
            Ok(ContrastRow {
                summary: summarize_values(&format!("{a}-{b}"), &diff)?,
                p_gt_zero: positive as f64 / diff.len() as f64,
            })
        })
        .collect()
}

/// The ladders `alpha{k+1} - alpha{k}` then `gamma{k+1} - gamma{k}` for every
/// regime pair present in `names`.
pub fn sequential_pairs<S: AsRef<str>>(names: &[S]) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for prefix in ["alpha", "gamma"] {
        let count = names
            .iter()
            .filter(|n| {
                n.as_ref()
                    .strip_prefix(prefix)
                    .is_some_and(|rest| rest.parse::<usize>().is_ok())
            })
            .count();
        for k in 1..count {
            pairs.push((format!("{prefix}{k}"), format!("{prefix}{}", k - 1)));
        }
    }
    pairs
}
