//! Core numerics for the SCAD-penalized deep partially linear Cox model.
//!
//! The hazard of subject `i` is modelled as `λ₀(t)·exp(βᵀxᵢ + g(zᵢ))` where
//! `β` is a sparse coefficient vector over the penalized covariates `x` and
//! `g` is a small fully connected ReLU network over the covariates `z`.
//! Estimation alternates between Adam steps on the network (with `β` held
//! fixed) and SCAD-penalized coordinate descent on `β` (with `g` held fixed),
//! both driven by the negative log partial likelihood.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and the parallel experiment runner live in the `dplc` crate.
//!
//! Module map:
//!
//! - [`survival`]: datasets, risk-set indexing and partial-likelihood derivatives.
//! - [`scad`]: the SCAD penalty and its thresholding operator.
//! - [`cd`]: coordinate descent on `β` for a fixed `g`.
//! - [`network`] and [`adam`]: the `g` estimator and its optimizer.
//! - [`estimator`]: the alternating fit, BIC, and tuning.
//! - [`sim`] and [`metrics`]: the simulation design and evaluation metrics.
#![no_std]

extern crate alloc;

pub mod adam;
pub mod cd;
pub mod error;
pub mod estimator;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod scad;
pub mod sim;
pub mod split;
pub mod survival;

pub use error::{Error, Result};
pub use estimator::{FitConfig, FittedModel};
pub use matrix::Matrix;
pub use scad::ScadConfig;
pub use survival::{RiskIndex, SurvivalDataset};
