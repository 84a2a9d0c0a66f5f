//! SCAD penalty, its derivative, and the closed-form univariate minimizer
//! used by coordinate descent.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScadConfig {
    pub lambda: f64,
    pub a: f64,
}

impl Default for ScadConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            a: DEFAULT_A,
        }
    }
}

impl ScadConfig {
    pub fn new(lambda: f64, a: f64) -> Result<Self> {
        let cfg = Self { lambda, a };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda = {}", self.lambda)));
        }
        if !(self.a > 2.0 && self.a.is_finite()) {
            return Err(Error::InvalidArgument(format!("SCAD a = {} must exceed 2", self.a)));
        }
        Ok(())
    }

    /// `p'_λ(θ)` for `θ ≥ 0`.
    pub fn derivative(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        let (l, a) = (self.lambda, self.a);
        Ok(if theta <= l {
            l
        } else {
            (a * l - theta).max(0.0) / (a - 1.0)
        })
    }

    /// `p_λ(θ)`, the integral of [`ScadConfig::derivative`] from 0.
    pub fn value(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.value_unchecked(theta))
    }

    pub(crate) fn value_unchecked(&self, theta: f64) -> f64 {
        let (l, a) = (self.lambda, self.a);
        if theta <= l {
            l * theta
        } else if theta <= a * l {
            (2.0 * a * l * theta - theta * theta - l * l) / (2.0 * (a - 1.0))
        } else {
            l * l * (a + 1.0) / 2.0
        }
    }

    /// `Σⱼ p_λ(|βⱼ|)`.
    pub fn total(&self, beta: &[f64]) -> f64 {
        beta.iter().map(|b| self.value_unchecked(b.abs())).sum()
    }

    /// Univariate SCAD solution `f_SCAD(h, v)`.
    ///
    /// At `v = 1` this is the exact minimizer of `½β² − hβ + p_λ(|β|)`.
    /// For other `v` it returns `f_SCAD(h, 1)/v`, which keeps the knots in
    /// `h` fixed and rescales the solution by the curvature.
    pub fn threshold(&self, h: f64, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::NonPositiveCurvature);
        }
        let (l, a) = (self.lambda, self.a);
        let abs_h = h.abs();
        // |h| ≤ λ lies in the first branch's dead zone; return +0.0, never -0.0
        if abs_h <= l {
            return Ok(0.0);
        }
        Ok(if abs_h <= 2.0 * l {
            soft_threshold(h, l) / v
        } else if abs_h <= a * l {
            soft_threshold(h, a * l / (a - 1.0)) / (v * (1.0 - 1.0 / (a - 1.0)))
        } else {
            h / v
        })
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "SCAD argument {} must be nonnegative",
            theta
        )))
    }
}

/// `sign(h)·(|h| − λ)₊` with `sign(0) = 0`.
pub fn soft_threshold(h: f64, lambda: f64) -> f64 {
    let mag = (h.abs() - lambda).max(0.0);
    if h > 0.0 {
        mag
    } else if h < 0.0 {
        -mag
    } else {
        0.0
    }
}
