//! Replicated simulation experiments.
//!
//! Each replicate simulates a dataset, splits it 80/20 stratified by event
//! status, tunes and fits on the training part, and scores the test part by
//! C-index and the selected support against the true one. Replicates run in
//! parallel; each draws from its own stream of the master seed, so results
//! do not depend on the thread count.

use dplc_core::estimator::{predict_eta, tune_architecture, tune_lambda, FitConfig, FittedModel, GModel};
use dplc_core::metrics::{c_index, iqr, mean, median, selection_metrics, standard_error};
use dplc_core::sim::simulate;
use dplc_core::split::stratified_split;
use dplc_core::SurvivalDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "DPLC")]
    Dplc,
    #[serde(rename = "Cox-SCAD")]
    CoxScad,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Dplc => "DPLC",
            Method::CoxScad => "Cox-SCAD",
        }
    }
}

/// One method on one replicate. Failed fits keep their row with the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub method: Method,
    pub status: String,
    pub error: String,
    pub n_train: usize,
    pub n_test: usize,
    pub censoring_rate: f64,
    pub lambda: Option<f64>,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub c_index: Option<f64>,
    pub selected: Option<usize>,
    pub fpn: Option<usize>,
    pub fpr: Option<f64>,
    pub fnn: Option<usize>,
    pub fnr: Option<f64>,
}

impl ReplicateRow {
    fn failed(replicate: usize, method: Method, error: String) -> Self {
        Self {
            replicate,
            method,
            status: "failed".into(),
            error,
            n_train: 0,
            n_test: 0,
            censoring_rate: f64::NAN,
            lambda: None,
            depth: None,
            width: None,
            c_index: None,
            selected: None,
            fpn: None,
            fpr: None,
            fnn: None,
            fnr: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Random stream of replicate `k`.
pub fn replicate_rng(master: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(k as u64);
    rng
}

pub fn methods(cfg: &RunConfig) -> Vec<Method> {
    if cfg.experiment.baseline {
        vec![Method::Dplc, Method::CoxScad]
    } else {
        vec![Method::Dplc]
    }
}

/// Tunes (architecture if configured, then `λ`) and fits on `train`.
pub fn tune_and_fit(train: &SurvivalDataset, cfg: &RunConfig, fit_cfg: &FitConfig) -> dplc_core::Result<(FittedModel, FitConfig)> {
    let mut fit_cfg = fit_cfg.clone();
    if let (Some(grid), GModel::Network) = (&cfg.arch_grid, fit_cfg.g_model) {
        let sel = tune_architecture(train, grid, cfg.arch_criterion, &fit_cfg)?;
        fit_cfg = sel.apply(&fit_cfg);
    }
    let path = tune_lambda(train, &cfg.lambda_grid, &fit_cfg)?;
    Ok((path.model, fit_cfg))
}

pub fn run_replicate(cfg: &RunConfig, k: usize) -> Vec<ReplicateRow> {
    let methods = methods(cfg);
    let mut rng = replicate_rng(cfg.seed, k);
    let sim = match simulate(&cfg.sim, &mut rng) {
        Ok(sim) => sim,
        Err(e) => return methods.iter().map(|&m| ReplicateRow::failed(k, m, e.to_string())).collect(),
    };
    let ds = &sim.dataset;
    let split = stratified_split(ds.status(), cfg.experiment.test_fraction, &mut rng);
    let fit_seed: u64 = rng.random();
    let subsets = ds.subset(&split.train).and_then(|tr| Ok((tr, ds.subset(&split.test)?)));
    let (train, test) = match subsets {
        Ok(pair) => pair,
        Err(e) => return methods.iter().map(|&m| ReplicateRow::failed(k, m, e.to_string())).collect(),
    };

    methods
        .iter()
        .map(|&method| {
            let fit_cfg = FitConfig {
                seed: fit_seed,
                g_model: match method {
                    Method::Dplc => cfg.fit.g_model,
                    Method::CoxScad => GModel::Zero,
                },
                ..cfg.fit.clone()
            };
            let scored = tune_and_fit(&train, cfg, &fit_cfg).and_then(|(model, used)| {
                let eta = predict_eta(&model, test.x(), test.z())?;
                let c = c_index(&eta, test.times(), test.status())?;
                Ok((model, used, c))
            });
            match scored {
                Ok((model, used, c)) => {
                    let sel = selection_metrics(&model.support, &sim.support, cfg.sim.p).ok();
                    let net = method == Method::Dplc && used.g_model == GModel::Network;
                    ReplicateRow {
                        replicate: k,
                        method,
                        status: "ok".into(),
                        error: String::new(),
                        n_train: train.len(),
                        n_test: test.len(),
                        censoring_rate: sim.censoring_rate,
                        lambda: Some(model.lambda),
                        depth: net.then_some(used.hidden_widths.len()),
                        width: net.then(|| used.hidden_widths.first().copied().unwrap_or(0)),
                        c_index: Some(c),
                        selected: Some(model.support.len()),
                        fpn: sel.map(|s| s.fpn),
                        fpr: sel.map(|s| s.fpr),
                        fnn: sel.map(|s| s.fnn),
                        fnr: sel.map(|s| s.fnr),
                    }
                }
                Err(e) => {
                    log::warn!("replicate {k}, {}: {e}", method.label());
                    ReplicateRow {
                        n_train: train.len(),
                        n_test: test.len(),
                        censoring_rate: sim.censoring_rate,
                        ..ReplicateRow::failed(k, method, e.to_string())
                    }
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| MeanSe {
            mean: mean(values),
            se: standard_error(values),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub iqr: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replicates: usize,
    pub failed: usize,
    pub c_index: Option<Spread>,
    pub selected: Option<MeanSe>,
    pub fpn: Option<MeanSe>,
    /// Percentages.
    pub fpr: Option<MeanSe>,
    pub fnn: Option<MeanSe>,
    /// Percentages.
    pub fnr: Option<MeanSe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub replicates: usize,
    pub mean_censoring_rate: f64,
    pub methods: Vec<MethodSummary>,
}

pub fn summarize(rows: &[ReplicateRow], replicates: usize) -> ExperimentSummary {
    let mut methods = Vec::new();
    for method in [Method::Dplc, Method::CoxScad] {
        let mine: Vec<&ReplicateRow> = rows.iter().filter(|r| r.method == method).collect();
        if mine.is_empty() {
            continue;
        }
        let ok: Vec<&&ReplicateRow> = mine.iter().filter(|r| r.is_ok()).collect();
        let floats = |f: &dyn Fn(&ReplicateRow) -> Option<f64>| ok.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
        let c = floats(&|r| r.c_index);
        methods.push(MethodSummary {
            method,
            replicates: mine.len(),
            failed: mine.len() - ok.len(),
            c_index: (!c.is_empty()).then(|| Spread {
                median: median(&c),
                iqr: iqr(&c),
                mean: mean(&c),
            }),
            selected: MeanSe::of(&floats(&|r| r.selected.map(|v| v as f64))),
            fpn: MeanSe::of(&floats(&|r| r.fpn.map(|v| v as f64))),
            fpr: MeanSe::of(&floats(&|r| r.fpr.map(|v| 100.0 * v))),
            fnn: MeanSe::of(&floats(&|r| r.fnn.map(|v| v as f64))),
            fnr: MeanSe::of(&floats(&|r| r.fnr.map(|v| 100.0 * v))),
        });
    }
    let cens: Vec<f64> = {
        let mut seen = Vec::new();
        for r in rows {
            if r.censoring_rate.is_finite() && !seen.iter().any(|&(k, _)| k == r.replicate) {
                seen.push((r.replicate, r.censoring_rate));
            }
        }
        seen.into_iter().map(|(_, c)| c).collect()
    };
    ExperimentSummary {
        replicates,
        mean_censoring_rate: if cens.is_empty() { f64::NAN } else { mean(&cens) },
        methods,
    }
}

/// Runs all replicates, handing finished rows to `sink` in replicate order
/// as each batch completes.
pub fn run_experiment_with<F>(cfg: &RunConfig, mut sink: F) -> AppResult<(Vec<ReplicateRow>, ExperimentSummary)>
where
    F: FnMut(&[ReplicateRow]) -> AppResult<()>,
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.threads)
        .build()
        .map_err(|e| AppError::Input(format!("cannot start worker threads: {e}")))?;
    let n = cfg.experiment.replicates;
    let batch = pool.current_num_threads().max(1);
    let mut rows = Vec::with_capacity(n * 2);
    let mut start = 0;
    while start < n {
        let end = (start + batch).min(n);
        let chunk: Vec<Vec<ReplicateRow>> = pool.install(|| (start..end).into_par_iter().map(|k| run_replicate(cfg, k)).collect());
        let flat: Vec<ReplicateRow> = chunk.into_iter().flatten().collect();
        sink(&flat)?;
        rows.extend(flat);
        log::info!("finished replicates {}..{} of {}", start, end, n);
        start = end;
    }
    let summary = summarize(&rows, n);
    Ok((rows, summary))
}

pub fn run_experiment(cfg: &RunConfig) -> AppResult<(Vec<ReplicateRow>, ExperimentSummary)> {
    run_experiment_with(cfg, |_| Ok(()))
}

/// Selection summary rows: `mean (se)` cells per method.
pub fn selection_table(summary: &ExperimentSummary) -> Vec<[String; 6]> {
    let cell = |m: Option<MeanSe>, digits: usize| match m {
        Some(m) => format!("{:.*} ({:.*})", digits, m.mean, digits, m.se),
        None => "NA".to_string(),
    };
    let mut out = vec![[
        "Method".to_string(),
        "Selected Features".to_string(),
        "FPN".to_string(),
        "FPR (%)".to_string(),
        "FNN".to_string(),
        "FNR (%)".to_string(),
    ]];
    for m in &summary.methods {
        out.push([
            m.method.label().to_string(),
            cell(m.selected, 2),
            cell(m.fpn, 2),
            cell(m.fpr, 2),
            cell(m.fnn, 2),
            cell(m.fnr, 2),
        ]);
    }
    out
}
