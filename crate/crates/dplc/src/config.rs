//! Run configuration: fitting settings, tuning grids, simulation design and
//! experiment size in one JSON document. Every field is optional; unknown
//! keys are rejected.

use std::path::Path;

use dplc_core::estimator::{log_grid, ArchCriterion, ArchGrid, FitConfig};
use dplc_core::sim::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io::read_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub replicates: usize,
    pub test_fraction: f64,
    /// Also fit the `g ≡ 0` SCAD-Cox baseline on every replicate.
    pub baseline: bool,
    /// Worker threads for replicates; 0 uses all cores.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            replicates: 10,
            test_fraction: 0.2,
            baseline: true,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random draw derives from it.
    pub seed: u64,
    pub fit: FitConfig,
    /// Ascending `λ` values searched by BIC.
    pub lambda_grid: Vec<f64>,
    /// When present, the network shape is tuned over this grid before the `λ` search.
    pub arch_grid: Option<ArchGrid>,
    pub arch_criterion: ArchCriterion,
    pub sim: SimConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            fit: FitConfig::default(),
            lambda_grid: log_grid(0.05, 5.0, 12),
            arch_grid: None,
            arch_criterion: ArchCriterion::default(),
            sim: SimConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> AppResult<Self> {
        let cfg = match path {
            Some(p) => read_json(p)?,
            None => RunConfig::default(),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> AppResult<()> {
        let bad = |m: String| Err(AppError::Input(format!("invalid configuration: {m}")));
        self.fit.validate().map_err(|e| AppError::Input(format!("invalid configuration: fit: {e}")))?;
        self.sim.validate().map_err(|e| AppError::Input(format!("invalid configuration: sim: {e}")))?;
        if self.lambda_grid.is_empty() {
            return bad("lambda_grid is empty".into());
        }
        if self.lambda_grid.windows(2).any(|w| !(w[0] < w[1])) || !(self.lambda_grid[0] > 0.0) {
            return bad("lambda_grid must be positive and strictly ascending".into());
        }
        if let Some(g) = &self.arch_grid {
            if g.depths.is_empty() || g.widths.is_empty() || g.dropouts.is_empty() || g.learning_rates.is_empty() {
                return bad("arch_grid entries must be non-empty".into());
            }
        }
        if self.experiment.replicates == 0 {
            return bad("experiment.replicates must be at least 1".into());
        }
        if !(self.experiment.test_fraction > 0.0 && self.experiment.test_fraction < 1.0) {
            return bad("experiment.test_fraction must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Applies `--seed`: the master seed and the fitting seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.fit.seed = seed;
    }
}

/// `"0.05,0.1,1"` lists values; `"lo:hi:n"` gives `n` log-spaced values.
pub fn parse_lambda_grid(s: &str) -> AppResult<Vec<f64>> {
    let bad = || AppError::Input(format!("cannot parse --lambda-grid {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if !(lo > 0.0 && hi >= lo && n >= 1) {
                return Err(bad());
            }
            log_grid(lo, hi, n)
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<AppResult<Vec<f64>>>()?,
        _ => return Err(bad()),
    };
    Ok(grid)
}

/// `"depths=1,2;widths=4,8;dropouts=0.1;lrs=0.01"`; omitted keys keep their defaults.
pub fn parse_arch_grid(s: &str) -> AppResult<ArchGrid> {
    let bad = |m: &str| AppError::Input(format!("cannot parse --arch-grid {s:?}: {m}"));
    let mut grid = ArchGrid::default();
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (key, values) = part.split_once('=').ok_or_else(|| bad("expected key=values"))?;
        let floats = || -> AppResult<Vec<f64>> {
            values.split(',').map(|v| v.trim().parse().map_err(|_| bad(v))).collect()
        };
        let ints = || -> AppResult<Vec<usize>> {
            values.split(',').map(|v| v.trim().parse().map_err(|_| bad(v))).collect()
        };
        match key.trim() {
            "depths" => grid.depths = ints()?,
            "widths" => grid.widths = ints()?,
            "dropouts" => grid.dropouts = floats()?,
            "lrs" | "learning_rates" => grid.learning_rates = floats()?,
            other => return Err(bad(&format!("unknown key `{other}`"))),
        }
    }
    Ok(grid)
}
