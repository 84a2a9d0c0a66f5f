//! Alternating estimation of `(β, g)`: Adam on the network with `β` fixed,
//! then coordinate descent on `β` with `g` fixed, until both settle.
//!
//! Prediction, BIC and the tuning loops over `λ` and over network shapes
//! also live here.

use alloc::format;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{adam_fit, AdamConfig};
use crate::cd::{CdConfig, CoordinateDescent, StandardizedDesign};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::c_index;
use crate::network::{Network, NetworkArch};
use crate::scad::ScadConfig;
use crate::split::stratified_split;
use crate::survival::{RiskIndex, SurvivalDataset};

/// How the nonparametric part is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GModel {
    /// A trained ReLU network on the standardized `z`.
    Network,
    /// `g ≡ 0`: a plain SCAD-penalized Cox fit that ignores `z`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub scad: ScadConfig,
    /// Hidden-layer widths; empty gives an affine `g`.
    pub hidden_widths: Vec<usize>,
    pub dropout: f64,
    pub g_model: GModel,
    pub adam: AdamConfig,
    pub cd: CdConfig,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            scad: ScadConfig::default(),
            hidden_widths: vec![8, 8],
            dropout: 0.3,
            g_model: GModel::Network,
            adam: AdamConfig::default(),
            cd: CdConfig::default(),
            outer_tol: 1e-4,
            max_outer: 50,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn arch(&self, input_dim: usize) -> NetworkArch {
        NetworkArch {
            input_dim,
            hidden_widths: self.hidden_widths.clone(),
            dropout: self.dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scad.validate()?;
        self.adam.validate()?;
        if !(self.outer_tol > 0.0) || self.max_outer == 0 || !(self.cd.tol > 0.0) || self.cd.max_sweeps == 0 {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive and iteration caps at least 1 (outer_tol {}, max_outer {}, cd {:?})",
                self.outer_tol, self.max_outer, self.cd
            )));
        }
        if self.g_model == GModel::Network {
            self.arch(1).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Penalized loss `Q` after each outer iteration.
    pub loss_trace: Vec<f64>,
    pub cd_sweeps: Vec<usize>,
    pub adam_steps: Vec<usize>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Averaged log partial likelihood on the training data.
    pub log_likelihood: f64,
    pub bic: f64,
    pub train_c_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    /// Coefficients on the original covariate scale, exact zeros off the support.
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    pub net: Option<Network>,
    pub n_network: usize,
    /// Standardization applied to `z` before the network.
    pub z_center: Vec<f64>,
    pub z_scale: Vec<f64>,
    pub lambda: f64,
    pub diagnostics: Diagnostics,
}

impl FittedModel {
    /// `ĝ(z)` in eval mode; zero when no network was fitted.
    pub fn g_values(&self, z: &Matrix) -> Result<Vec<f64>> {
        if z.ncols() != self.n_network {
            return Err(Error::DimensionMismatch(format!(
                "z has {} columns, model was trained on {}",
                z.ncols(),
                self.n_network
            )));
        }
        match &self.net {
            Some(net) => net.eval(&apply_standardization(z, &self.z_center, &self.z_scale)),
            None => Ok(vec![0.0; z.nrows()]),
        }
    }

    pub fn predict_eta(&self, x: &Matrix, z: &Matrix) -> Result<Vec<f64>> {
        predict_eta(self, x, z)
    }
}

fn support_of(beta: &[f64]) -> Vec<usize> {
    (0..beta.len()).filter(|&j| beta[j] != 0.0).collect()
}

fn z_standardization(z: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = z.nrows() as f64;
    let mut center = Vec::with_capacity(z.ncols());
    let mut scale = Vec::with_capacity(z.ncols());
    for j in 0..z.ncols() {
        let col = z.column(j);
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = var.sqrt();
        center.push(m);
        scale.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
    }
    (center, scale)
}

fn apply_standardization(z: &Matrix, center: &[f64], scale: &[f64]) -> Matrix {
    let mut out = z.clone();
    for i in 0..out.nrows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - center[j]) / scale[j];
        }
    }
    out
}

/// `β̂ᵀx + ĝ(z)` per row; larger means higher hazard.
pub fn predict_eta(model: &FittedModel, x: &Matrix, z: &Matrix) -> Result<Vec<f64>> {
    if x.ncols() != model.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} columns, model was trained on {}",
            x.ncols(),
            model.beta.len()
        )));
    }
    if x.nrows() != z.nrows() {
        return Err(Error::DimensionMismatch(format!("x has {} rows, z has {}", x.nrows(), z.nrows())));
    }
    let g = model.g_values(z)?;
    let xi = x.mul_vec(&model.beta);
    Ok(xi.iter().zip(&g).map(|(a, b)| a + b).collect())
}

/// `−2n·ℓ + ln(n)·s`.
pub fn bic_value(log_likelihood: f64, n: usize, support_size: usize) -> f64 {
    -2.0 * n as f64 * log_likelihood + (n as f64).ln() * support_size as f64
}

/// Averaged log partial likelihood of `model` on `dataset`.
pub fn log_likelihood(model: &FittedModel, dataset: &SurvivalDataset) -> Result<f64> {
    let eta = predict_eta(model, dataset.x(), dataset.z())?;
    Ok(-RiskIndex::new(dataset)?.neg_log_partial_likelihood(&eta)?)
}

pub fn bic(model: &FittedModel, dataset: &SurvivalDataset) -> Result<f64> {
    Ok(bic_value(log_likelihood(model, dataset)?, dataset.len(), model.support.len()))
}

pub fn fit(dataset: &SurvivalDataset, cfg: &FitConfig) -> Result<FittedModel> {
    fit_from(dataset, cfg, None)
}

/// Like [`fit`], but starts from the coefficients and network of `start`
/// instead of `β = 0` and a fresh network.
pub fn fit_from(dataset: &SurvivalDataset, cfg: &FitConfig, start: Option<&FittedModel>) -> Result<FittedModel> {
    cfg.validate()?;
    let p = dataset.n_penalized();
    let r = dataset.n_network();
    if p == 0 {
        return Err(Error::InvalidDataset("no penalized covariates".into()));
    }
    if cfg.g_model == GModel::Network && r == 0 {
        return Err(Error::InvalidDataset("no network covariates".into()));
    }
    if let Some(m) = start {
        if m.beta.len() != p || m.n_network != r {
            return Err(Error::DimensionMismatch("warm start does not match the dataset".into()));
        }
    }

    let n = dataset.len();
    let design = StandardizedDesign::new(dataset.x());
    let index = RiskIndex::new(dataset)?;
    let (z_center, z_scale) = match start {
        Some(m) => (m.z_center.clone(), m.z_scale.clone()),
        None => z_standardization(dataset.z()),
    };
    let zs = apply_standardization(dataset.z(), &z_center, &z_scale);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut net = match cfg.g_model {
        GModel::Zero => None,
        GModel::Network => Some(match start.and_then(|m| m.net.clone()) {
            Some(net) if net.arch() == &cfg.arch(r) => net,
            _ => {
                let mut net = Network::init(cfg.arch(r), &mut rng)?;
                net.center(&zs)?;
                net
            }
        }),
    };
    let mut beta = match start {
        Some(m) => m.beta.clone(),
        None => vec![0.0; p],
    };
    let mut g = match &net {
        Some(net) => net.eval(&zs)?,
        None => vec![0.0; n],
    };

    let cd = CoordinateDescent::new(&design, &index);
    let mut loss_trace = Vec::new();
    let mut cd_sweeps = Vec::new();
    let mut adam_steps = Vec::new();
    let mut converged = false;
    let mut k = 0;
    while k < cfg.max_outer {
        k += 1;
        let g_new = match net.as_mut() {
            Some(net) => {
                let xi = design.xi(&design.to_standardized(&beta));
                let out = adam_fit(net, &zs, &index, &xi, &cfg.adam, &mut rng).map_err(|e| e.in_outer(k))?;
                adam_steps.push(out.steps);
                net.eval(&zs).map_err(|e| e.in_outer(k))?
            }
            None => g.clone(),
        };
        let out = cd.fit(&g_new, &beta, &cfg.scad, &cfg.cd).map_err(|e| e.in_outer(k))?;
        cd_sweeps.push(out.sweeps);

        let beta_std = design.to_standardized(&out.beta);
        let eta: Vec<f64> = design.xi(&beta_std).iter().zip(&g_new).map(|(a, b)| a + b).collect();
        let q = index.neg_log_partial_likelihood(&eta).map_err(|e| e.in_outer(k))?;
        loss_trace.push(q + cfg.scad.total(&beta_std));

        let d_beta = out.beta.iter().zip(&beta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let d_g = (g_new.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64).sqrt();
        beta = out.beta;
        g = g_new;
        log::trace!("outer {}: Q = {:.6}, change = {:.3e}", k, loss_trace[k - 1], d_beta + d_g);
        if d_beta + d_g <= cfg.outer_tol || (net.is_none() && out.converged) {
            converged = true;
            break;
        }
    }

    let support = support_of(&beta);
    let mut model = FittedModel {
        beta,
        support,
        net,
        n_network: r,
        z_center,
        z_scale,
        lambda: cfg.scad.lambda,
        diagnostics: Diagnostics {
            loss_trace,
            cd_sweeps,
            adam_steps,
            outer_iterations: k,
            converged,
            log_likelihood: 0.0,
            bic: 0.0,
            train_c_index: None,
        },
    };
    let eta = predict_eta(&model, dataset.x(), dataset.z())?;
    let ll = -index.neg_log_partial_likelihood(&eta)?;
    model.diagnostics.log_likelihood = ll;
    model.diagnostics.bic = bic_value(ll, n, model.support.len());
    model.diagnostics.train_c_index = c_index(&eta, dataset.times(), dataset.status()).ok();
    log::debug!(
        "fit at λ = {}: {} outer iterations, support {}, BIC {:.4}",
        model.lambda,
        k,
        model.support.len(),
        model.diagnostics.bic
    );
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub support_size: usize,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPath {
    pub best_index: usize,
    pub entries: Vec<PathEntry>,
    /// The fit at the selected `λ`.
    pub model: FittedModel,
}

impl LambdaPath {
    pub fn best_lambda(&self) -> f64 {
        self.entries[self.best_index].lambda
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut grid: Vec<f64> = (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect();
            grid[0] = lo;
            grid[n - 1] = hi;
            grid
        }
    }
}

/// Fits every `λ` of an ascending grid and keeps the BIC minimizer; equal
/// BIC goes to the larger `λ`.
///
/// Each fit is warm-started from the fit at the previous grid point.
pub fn tune_lambda(dataset: &SurvivalDataset, grid: &[f64], cfg: &FitConfig) -> Result<LambdaPath> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty λ grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("λ grid must be strictly ascending".into()));
    }
    let mut entries = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, FittedModel)> = None;
    let mut prev: Option<FittedModel> = None;
    for (k, &lambda) in grid.iter().enumerate() {
        let cell = FitConfig {
            scad: cfg.scad.with_lambda(lambda),
            ..cfg.clone()
        };
        let model = fit_from(dataset, &cell, prev.as_ref())?;
        entries.push(PathEntry {
            lambda,
            beta: model.beta.clone(),
            support_size: model.support.len(),
            bic: model.diagnostics.bic,
        });
        // later entries have larger λ, so ties go to the sparser fit
        if best.as_ref().is_none_or(|(_, b)| model.diagnostics.bic <= b.diagnostics.bic) {
            best = Some((k, model.clone()));
        }
        prev = Some(model);
    }
    let (best_index, model) = best.expect("grid is non-empty");
    Ok(LambdaPath {
        best_index,
        entries,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ArchCriterion {
    /// Negative log partial likelihood on a stratified held-out share.
    Validation { fraction: f64 },
    /// BIC of the fit on all the data.
    TrainingBic,
}

impl Default for ArchCriterion {
    fn default() -> Self {
        ArchCriterion::Validation { fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchGrid {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

impl Default for ArchGrid {
    fn default() -> Self {
        Self {
            depths: vec![1, 2],
            widths: vec![4, 8],
            dropouts: vec![0.3],
            learning_rates: vec![0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchCell {
    pub depth: usize,
    pub width: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    /// Lower is better.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSelection {
    pub best: ArchCell,
    pub cells: Vec<ArchCell>,
}

impl ArchSelection {
    /// `base` with the selected shape and rates.
    pub fn apply(&self, base: &FitConfig) -> FitConfig {
        FitConfig {
            hidden_widths: vec![self.best.width; self.best.depth],
            dropout: self.best.dropout,
            adam: AdamConfig {
                learning_rate: self.best.learning_rate,
                ..base.adam
            },
            ..base.clone()
        }
    }
}

/// Exhaustive search over network shapes at the `λ` of `cfg`. Cells are
/// visited in ascending (depth, width, dropout, rate) order and only a
/// strictly better score replaces the incumbent, so ties go to the smaller
/// network.
pub fn tune_architecture(
    dataset: &SurvivalDataset,
    grid: &ArchGrid,
    criterion: ArchCriterion,
    cfg: &FitConfig,
) -> Result<ArchSelection> {
    if grid.depths.is_empty() || grid.widths.is_empty() || grid.dropouts.is_empty() || grid.learning_rates.is_empty() {
        return Err(Error::InvalidArgument("architecture grids must be non-empty".into()));
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let mut depths = grid.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let mut widths = grid.widths.clone();
    widths.sort_unstable();
    widths.dedup();
    let dropouts = sorted(&grid.dropouts);
    let rates = sorted(&grid.learning_rates);

    let (train, held_out) = match criterion {
        ArchCriterion::Validation { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::InvalidArgument(format!("validation fraction {} outside (0, 1)", fraction)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let split = stratified_split(dataset.status(), fraction, &mut rng);
            (dataset.subset(&split.train)?, Some(dataset.subset(&split.test)?))
        }
        ArchCriterion::TrainingBic => (dataset.clone(), None),
    };

    let mut cells = Vec::new();
    let mut best: Option<ArchCell> = None;
    for &depth in &depths {
        // width is irrelevant without hidden layers
        let widths_here = if depth == 0 { &widths[..1] } else { &widths[..] };
        for &width in widths_here {
            for &dropout in &dropouts {
                for &learning_rate in &rates {
                    let mut cell = ArchCell {
                        depth,
                        width,
                        dropout,
                        learning_rate,
                        score: f64::INFINITY,
                    };
                    let cell_cfg = ArchSelection {
                        best: cell.clone(),
                        cells: Vec::new(),
                    }
                    .apply(cfg);
                    let model = fit(&train, &cell_cfg)?;
                    cell.score = match &held_out {
                        Some(val) => -log_likelihood(&model, val)?,
                        None => model.diagnostics.bic,
                    };
                    if best.as_ref().is_none_or(|b| cell.score < b.score) {
                        best = Some(cell.clone());
                    }
                    cells.push(cell);
                }
            }
        }
    }
    Ok(ArchSelection {
        best: best.expect("grids are non-empty"),
        cells,
    })
}
