//! SCAD-penalized coordinate descent on `β` with the network output held
//! fixed.
//!
//! Each sweep replaces the partial likelihood by the weighted least-squares
//! surrogate `½ (y − ξ)ᵀ W (y − ξ)` built from the diagonal Hessian `W` and the
//! working response `y` at the current `ξ = Xβ`, then updates every
//! coordinate in ascending order with the closed-form SCAD solution while
//! keeping the residual `r = y − ξ` current through rank-one updates. `W` and
//! `y` are refreshed once per sweep.
//!
//! Columns of `X` are centered and scaled to unit sample variance internally;
//! coefficients go in and come out on the original scale.

use alloc::vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scad::ScadConfig;
use crate::survival::{working_response_from, RiskIndex};

/// Floor applied to `v_j = x_jᵀ W x_j`.
pub const V_FLOOR: f64 = 1e-10;

/// Coefficients beyond this magnitude abort the fit.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdConfig {
    /// Stop when the sweep-to-sweep change in standardized `β` has
    /// Euclidean norm at most this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 100,
        }
    }
}

/// Column-major copy of `X` with centered, unit-variance columns.
#[derive(Debug, Clone)]
pub struct StandardizedDesign {
    n: usize,
    p: usize,
    cols: Vec<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl StandardizedDesign {
    pub fn new(x: &Matrix) -> Self {
        let (n, p) = (x.nrows(), x.ncols());
        let mut cols = vec![0.0; n * p];
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            let col = &mut cols[j * n..(j + 1) * n];
            for (i, c) in col.iter_mut().enumerate() {
                *c = x.get(i, j);
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            // constant columns stay at zero after centering
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for c in col.iter_mut() {
                *c = (*c - mean) / sd;
            }
            center[j] = mean;
            scale[j] = sd;
        }
        Self {
            n,
            p,
            cols,
            center,
            scale,
        }
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn to_standardized(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scale).map(|(b, s)| b * s).collect()
    }

    pub fn to_original(&self, beta_std: &[f64]) -> Vec<f64> {
        beta_std.iter().zip(&self.scale).map(|(b, s)| b / s).collect()
    }

    /// Standardized `ξ = X̃β̃`.
    pub fn xi(&self, beta_std: &[f64]) -> Vec<f64> {
        let mut xi = vec![0.0; self.n];
        for (j, &b) in beta_std.iter().enumerate() {
            if b != 0.0 {
                for (x, c) in xi.iter_mut().zip(self.column(j)) {
                    *x += b * c;
                }
            }
        }
        xi
    }
}

/// `(h_j, v_j)` for one coordinate: `v_j = x_jᵀWx_j` (floored) and
/// `h_j = x_jᵀWr + v_j β_j`.
pub fn surrogate_inputs(column: &[f64], w: &[f64], residual: &[f64], beta_j: f64) -> (f64, f64) {
    let mut xwr = 0.0;
    let mut xwx = 0.0;
    for ((&x, &wm), &r) in column.iter().zip(w).zip(residual) {
        let xw = x * wm;
        xwr += xw * r;
        xwx += xw * x;
    }
    let v = xwx.max(V_FLOOR);
    (xwr + v * beta_j, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdOutcome {
    /// Coefficients on the original scale; thresholded entries are exactly 0.
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Working state of one coordinate-descent run, on the standardized scale.
#[derive(Debug, Clone)]
pub(crate) struct CdState {
    pub beta: Vec<f64>,
    pub xi: Vec<f64>,
    pub y: Vec<f64>,
    pub residual: Vec<f64>,
    pub w: Vec<f64>,
}

impl CdState {
    pub fn new(design: &StandardizedDesign, beta_std: Vec<f64>) -> Self {
        let n = design.nrows();
        let xi = design.xi(&beta_std);
        Self {
            beta: beta_std,
            xi,
            y: vec![0.0; n],
            residual: vec![0.0; n],
            w: vec![0.0; n],
        }
    }

    /// Recomputes `ξ`, `W`, `y` and `r` from the current `β` and `g`.
    pub fn refresh(&mut self, design: &StandardizedDesign, index: &RiskIndex, g_vals: &[f64]) -> Result<()> {
        self.xi = design.xi(&self.beta);
        let eta: Vec<f64> = self.xi.iter().zip(g_vals).map(|(a, b)| a + b).collect();
        let d = index.derivatives(&eta)?;
        let wr = working_response_from(&self.xi, &d.grad, &d.hess_diag)?;
        self.residual = wr.y.iter().zip(&self.xi).map(|(y, x)| y - x).collect();
        self.y = wr.y;
        self.w = d.hess_diag;
        Ok(())
    }

    /// One ascending pass over the coordinates. Returns `‖β_new − β_old‖₂`.
    pub fn sweep(&mut self, design: &StandardizedDesign, scad: &ScadConfig) -> Result<f64> {
        let mut change = 0.0;
        for j in 0..design.ncols() {
            let col = design.column(j);
            let old = self.beta[j];
            let (h, v) = surrogate_inputs(col, &self.w, &self.residual, old);
            let new = scad.threshold(h, v)?;
            if new != old {
                let delta = new - old;
                for (r, &x) in self.residual.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                self.beta[j] = new;
                change += delta * delta;
            }
        }
        Ok(change.sqrt())
    }
}

/// Coordinate descent over a precomputed standardized design.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateDescent<'a> {
    design: &'a StandardizedDesign,
    index: &'a RiskIndex,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(design: &'a StandardizedDesign, index: &'a RiskIndex) -> Self {
        Self { design, index }
    }

    pub fn fit(&self, g_vals: &[f64], beta_init: &[f64], scad: &ScadConfig, cfg: &CdConfig) -> Result<CdOutcome> {
        let design = self.design;
        if beta_init.len() != design.ncols() || g_vals.len() != design.nrows() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "beta has {} entries for {} columns, g has {} for {} rows",
                beta_init.len(),
                design.ncols(),
                g_vals.len(),
                design.nrows()
            )));
        }
        if beta_init.iter().chain(g_vals).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite initial value".into()));
        }
        scad.validate()?;

        let mut state = CdState::new(design, design.to_standardized(beta_init));
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < cfg.max_sweeps {
            state.refresh(design, self.index, g_vals)?;
            let change = state.sweep(design, scad)?;
            sweeps += 1;
            let beta = design.to_original(&state.beta);
            if beta.iter().any(|b| !(b.abs() <= DIVERGENCE_BOUND)) {
                return Err(Error::Divergence);
            }
            if change <= cfg.tol {
                converged = true;
                break;
            }
        }
        Ok(CdOutcome {
            beta: design.to_original(&state.beta),
            sweeps,
            converged,
        })
    }
}

/// One-shot coordinate descent on `dataset` with `g` fixed at `g_vals`.
pub fn cd_fit(
    dataset: &crate::survival::SurvivalDataset,
    g_vals: &[f64],
    beta_init: &[f64],
    scad: &ScadConfig,
    cfg: &CdConfig,
) -> Result<CdOutcome> {
    let design = StandardizedDesign::new(dataset.x());
    let index = RiskIndex::new(dataset)?;
    CoordinateDescent::new(&design, &index).fit(g_vals, beta_init, scad, cfg)
}
