//! Saved models: a JSON bundle with the nonzero coefficients by feature
//! name, the network, the `z` standardization, the fitting configuration
//! and the fit diagnostics.

use dplc_core::estimator::{Diagnostics, FitConfig, FittedModel, PathEntry};
use dplc_core::network::Network;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub feature: String,
    pub index: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathPoint {
    pub lambda: f64,
    pub support_size: usize,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBundle {
    pub format_version: u32,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub lambda: f64,
    pub coefficients: Vec<Coefficient>,
    pub network: Option<Network>,
    pub z_center: Vec<f64>,
    pub z_scale: Vec<f64>,
    pub config: FitConfig,
    pub diagnostics: Diagnostics,
    pub lambda_path: Vec<PathPoint>,
}

impl ModelBundle {
    pub fn new(
        model: &FittedModel,
        x_names: &[String],
        z_names: &[String],
        config: &FitConfig,
        path: &[PathEntry],
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            x_names: x_names.to_vec(),
            z_names: z_names.to_vec(),
            lambda: model.lambda,
            coefficients: model
                .support
                .iter()
                .map(|&j| Coefficient {
                    feature: x_names[j].clone(),
                    index: j,
                    beta: model.beta[j],
                })
                .collect(),
            network: model.net.clone(),
            z_center: model.z_center.clone(),
            z_scale: model.z_scale.clone(),
            config: config.clone(),
            diagnostics: model.diagnostics.clone(),
            lambda_path: path
                .iter()
                .map(|e| PathPoint {
                    lambda: e.lambda,
                    support_size: e.support_size,
                    bic: e.bic,
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> AppResult<FittedModel> {
        let bad = |m: String| Err(AppError::Input(format!("invalid model file: {m}")));
        if self.format_version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported format version {}", self.format_version));
        }
        let p = self.x_names.len();
        let r = self.z_names.len();
        if self.z_center.len() != r || self.z_scale.len() != r {
            return bad("z standardization does not match z_names".into());
        }
        if let Some(net) = &self.network {
            if net.arch().input_dim != r {
                return bad(format!("network expects {} inputs, {} z columns named", net.arch().input_dim, r));
            }
        }
        let mut beta = vec![0.0; p];
        for c in &self.coefficients {
            if c.index >= p || self.x_names[c.index] != c.feature {
                return bad(format!("coefficient for `{}` at index {} does not match x_names", c.feature, c.index));
            }
            if c.beta == 0.0 || !c.beta.is_finite() {
                return bad(format!("coefficient for `{}` must be finite and nonzero", c.feature));
            }
            beta[c.index] = c.beta;
        }
        let support = (0..p).filter(|&j| beta[j] != 0.0).collect();
        Ok(FittedModel {
            beta,
            support,
            net: self.network.clone(),
            n_network: r,
            z_center: self.z_center.clone(),
            z_scale: self.z_scale.clone(),
            lambda: self.lambda,
            diagnostics: self.diagnostics.clone(),
        })
    }
}
