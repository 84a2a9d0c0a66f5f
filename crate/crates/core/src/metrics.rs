//! Prediction and variable-selection metrics, plus the summary statistics
//! used in experiment reports.

use alloc::format;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Harrell's concordance index.
///
/// A pair `(i, j)` is comparable when `Tᵢ < Tⱼ` and subject `i` had the event.
/// It counts 1 when `riskᵢ > riskⱼ` and ½ when the risks tie.
pub fn c_index(risk: &[f64], times: &[f64], status: &[bool]) -> Result<f64> {
    let n = risk.len();
    if times.len() != n || status.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} risks, {} times, {} status values",
            n,
            times.len(),
            status.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("C-index needs at least two subjects".into()));
    }
    let mut comparable = 0u64;
    // twice the concordant weight, to stay in integers
    let mut concordant2 = 0u64;
    for i in 0..n {
        if !status[i] {
            continue;
        }
        for j in 0..n {
            if times[i] < times[j] {
                comparable += 1;
                if risk[i] > risk[j] {
                    concordant2 += 2;
                } else if risk[i] == risk[j] {
                    concordant2 += 1;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(concordant2 as f64 / (2.0 * comparable as f64))
}

/// Selection errors of an estimated support against the true one. Rates are
/// fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub selected: usize,
    pub fpn: usize,
    pub fpr: f64,
    pub fnn: usize,
    pub fnr: f64,
}

pub fn selection_metrics(selected: &[usize], truth: &[usize], p: usize) -> Result<SelectionMetrics> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty true support: FNR undefined".into()));
    }
    if let Some(&bad) = selected.iter().chain(truth).find(|&&j| j >= p) {
        return Err(Error::InvalidArgument(format!("feature index {} out of range for p = {}", bad, p)));
    }
    let mut sel = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    let mut tru = truth.to_vec();
    tru.sort_unstable();
    tru.dedup();
    let fpn = sel.iter().filter(|j| tru.binary_search(j).is_err()).count();
    let fnn = tru.iter().filter(|j| sel.binary_search(j).is_err()).count();
    let negatives = p - tru.len();
    Ok(SelectionMetrics {
        selected: sel.len(),
        fpn,
        fpr: if negatives == 0 { 0.0 } else { fpn as f64 / negatives as f64 },
        fnn,
        fnr: fnn as f64 / tru.len() as f64,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation over `√len`; 0 for fewer than two values.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Linearly interpolated sample quantile (the usual "type 7" definition).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn iqr(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}
