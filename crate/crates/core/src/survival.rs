//! Survival data, risk-set indexing and the Cox negative log partial
//! likelihood together with its derivatives in the per-subject linear
//! predictor `η`.
//!
//! All quantities use the averaged form
//!
//! ```text
//! q(η) = -(1/n) Σᵢ Δᵢ [ ηᵢ - log Σ_{j∈Rᵢ} exp(ηⱼ) ]
//! ```
//!
//! with `Rᵢ = {j : Tⱼ ≥ Tᵢ}`. The history set `C_m = {i : Tᵢ ≤ T_m}` collects
//! the events whose risk sets contain `m`. Both sets are contiguous ranges of
//! the time-sorted order, so they are stored as offsets rather than as sets.

use alloc::format;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor applied to the diagonal Hessian inside the working response.
pub const W_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    status: Vec<bool>,
    x: Matrix,
    z: Matrix,
}

impl SurvivalDataset {
    pub fn new(times: Vec<f64>, status: Vec<bool>, x: Matrix, z: Matrix) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if status.len() != n || x.nrows() != n || z.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "times has {} rows, status {}, x {}, z {}",
                n,
                status.len(),
                x.nrows(),
                z.nrows()
            )));
        }
        if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidDataset(format!(
                "time of row {} is {}, expected a finite positive value",
                i, times[i]
            )));
        }
        if z.ncols() > n {
            return Err(Error::InvalidDataset(format!(
                "{} network covariates exceed {} subjects",
                z.ncols(),
                n
            )));
        }
        if !x.is_finite() || !z.is_finite() {
            return Err(Error::InvalidDataset("non-finite covariate".into()));
        }
        Ok(Self { times, status, x, z })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn n_penalized(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_network(&self) -> usize {
        self.z.ncols()
    }

    pub fn n_events(&self) -> usize {
        self.status.iter().filter(|&&d| d).count()
    }

    /// Rows `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.times[i]).collect(),
            idx.iter().map(|&i| self.status[i]).collect(),
            self.x.select_rows(idx),
            self.z.select_rows(idx),
        )
    }
}

/// Risk and history sets over the time-sorted order, ties grouped.
#[derive(Debug, Clone)]
pub struct RiskIndex {
    order: Vec<usize>,
    /// Sorted position where each subject's tie group starts.
    group_start: Vec<usize>,
    /// Sorted position one past the end of each subject's tie group.
    group_end: Vec<usize>,
    status: Vec<bool>,
}

impl RiskIndex {
    pub fn new(dataset: &SurvivalDataset) -> Result<Self> {
        Self::from_times(dataset.times(), dataset.status())
    }

    pub fn from_times(times: &[f64], status: &[bool]) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if status.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} times but {} status values",
                n,
                status.len()
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));

        let mut group_start = vec![0; n];
        let mut group_end = vec![0; n];
        let mut k = 0;
        while k < n {
            let t = times[order[k]];
            let mut end = k + 1;
            while end < n && times[order[end]] == t {
                end += 1;
            }
            for &i in &order[k..end] {
                group_start[i] = k;
                group_end[i] = end;
            }
            k = end;
        }
        Ok(Self {
            order,
            group_start,
            group_end,
            status: status.to_vec(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Subjects sorted by ascending time (ties by subject index).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    /// `Rᵢ = {j : Tⱼ ≥ Tᵢ}`, unordered.
    pub fn risk_set(&self, i: usize) -> &[usize] {
        &self.order[self.group_start[i]..]
    }

    /// `C_m = {i : Tᵢ ≤ T_m}`, unordered.
    pub fn history_set(&self, m: usize) -> &[usize] {
        &self.order[..self.group_end[m]]
    }

    fn check(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "predictor has {} entries for {} subjects",
                eta.len(),
                self.len()
            )));
        }
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinitePredictor);
        }
        Ok(())
    }

    /// `log Sᵢ` for every subject, accumulated in log space over the sorted
    /// order so that neither large nor very negative predictors overflow.
    fn log_risk_sums(&self, eta: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut suffix = vec![f64::NEG_INFINITY; n + 1];
        for k in (0..n).rev() {
            suffix[k] = log_add_exp(suffix[k + 1], eta[self.order[k]]);
        }
        (0..n).map(|i| suffix[self.group_start[i]]).collect()
    }

    fn loss_from(&self, eta: &[f64], log_sums: &[f64]) -> f64 {
        let total: f64 = (0..self.len())
            .filter(|&i| self.status[i])
            .map(|i| eta[i] - log_sums[i])
            .sum();
        -total / self.len() as f64
    }

    /// `q(η)`.
    pub fn neg_log_partial_likelihood(&self, eta: &[f64]) -> Result<f64> {
        self.check(eta)?;
        let log_sums = self.log_risk_sums(eta);
        Ok(self.loss_from(eta, &log_sums))
    }

    /// `∂q/∂η`.
    pub fn grad_eta(&self, eta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.derivatives(eta)?.grad)
    }

    /// Diagonal of `∂²q/∂η²`.
    pub fn hessian_diag(&self, eta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.derivatives(eta)?.hess_diag)
    }

    /// Loss, gradient and diagonal Hessian from one pass over the risk sets.
    pub fn derivatives(&self, eta: &[f64]) -> Result<Derivatives> {
        self.check(eta)?;
        let n = self.len();
        let inv_n = 1.0 / n as f64;
        let log_sums = self.log_risk_sums(eta);
        let loss = self.loss_from(eta, &log_sums);

        // log prefix sums of Δᵢ/Sᵢ and Δᵢ/Sᵢ² over the sorted order
        let mut pre1 = vec![f64::NEG_INFINITY; n + 1];
        let mut pre2 = vec![f64::NEG_INFINITY; n + 1];
        for k in 0..n {
            let i = self.order[k];
            if self.status[i] {
                pre1[k + 1] = log_add_exp(pre1[k], -log_sums[i]);
                pre2[k + 1] = log_add_exp(pre2[k], -2.0 * log_sums[i]);
            } else {
                pre1[k + 1] = pre1[k];
                pre2[k + 1] = pre2[k];
            }
        }

        let mut grad = Vec::with_capacity(n);
        let mut hess_diag = Vec::with_capacity(n);
        for m in 0..n {
            let end = self.group_end[m];
            // Σ_{i∈C_m} Δᵢ πᵢₘ and Σ Δᵢ πᵢₘ² with πᵢₘ = exp(η_m)/Sᵢ ≤ 1
            let expected = (eta[m] + pre1[end]).exp();
            let second = (2.0 * eta[m] + pre2[end]).exp();
            let delta = if self.status[m] { 1.0 } else { 0.0 };
            grad.push(-inv_n * (delta - expected));
            hess_diag.push((inv_n * (expected - second)).max(0.0));
        }
        Ok(Derivatives {
            loss,
            grad,
            hess_diag,
        })
    }

    /// Working response `y(ξ)` for the weighted least-squares surrogate, given
    /// the diagonal Hessian `w` evaluated at the same predictor.
    pub fn working_response(&self, pred: &Predictor, w: &[f64]) -> Result<WorkingResponse> {
        let grad = self.grad_eta(pred.eta())?;
        working_response_from(pred.xi(), &grad, w)
    }
}

/// `y_m = ξ_m − grad_m / max(W_mm, ε)`: the bracket in the working response
/// equals `−n·grad_m`.
pub(crate) fn working_response_from(
    xi: &[f64],
    grad: &[f64],
    w: &[f64],
) -> Result<WorkingResponse> {
    if xi.len() != grad.len() || w.len() != grad.len() {
        return Err(Error::DimensionMismatch(format!(
            "xi {}, gradient {}, weights {}",
            xi.len(),
            grad.len(),
            w.len()
        )));
    }
    let mut floored = Vec::new();
    let y = xi
        .iter()
        .zip(grad)
        .zip(w)
        .enumerate()
        .map(|(m, ((&x, &g), &wm))| {
            if wm < W_FLOOR {
                floored.push(m);
            }
            x - g / wm.max(W_FLOOR)
        })
        .collect();
    Ok(WorkingResponse { y, floored })
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkingResponse {
    pub y: Vec<f64>,
    /// Subjects whose Hessian entry was below [`W_FLOOR`].
    pub floored: Vec<usize>,
}

/// `η = ξ + g` with `ξ = Xβ` and `g = g(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    xi: Vec<f64>,
    g_vals: Vec<f64>,
    eta: Vec<f64>,
}

impl Predictor {
    pub fn new(xi: Vec<f64>, g_vals: Vec<f64>) -> Result<Self> {
        if xi.len() != g_vals.len() {
            return Err(Error::DimensionMismatch(format!(
                "xi has {} entries, g {}",
                xi.len(),
                g_vals.len()
            )));
        }
        let eta = xi.iter().zip(&g_vals).map(|(a, b)| a + b).collect();
        Ok(Self { xi, g_vals, eta })
    }

    /// Predictor with `g ≡ 0`.
    pub fn linear(xi: Vec<f64>) -> Self {
        let g_vals = vec![0.0; xi.len()];
        Self {
            eta: xi.clone(),
            xi,
            g_vals,
        }
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn g_vals(&self) -> &[f64] {
        &self.g_vals
    }
}
