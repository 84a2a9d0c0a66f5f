//! Adam on the network parameters with the linear part held fixed.

use alloc::vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::{grad_params, Network};
use crate::survival::RiskIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    /// First-moment decay `r₁`.
    pub beta1: f64,
    /// Second-moment decay `r₂`.
    pub beta2: f64,
    pub eps: f64,
    /// Maximum number of updates per call.
    pub inner_steps: usize,
    /// Stop once an update moves the parameters by at most this (L2 norm).
    pub tol: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            inner_steps: 20,
            tol: 1e-6,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.inner_steps >= 1
            && self.tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!("invalid Adam settings {:?}", self)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// One bias-corrected update of `params` in place; returns the L2 norm
    /// of the change.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &AdamConfig) -> f64 {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let mut moved = 0.0;
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            let delta = cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
            *p -= delta;
            moved += delta * delta;
        }
        moved.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamOutcome {
    pub steps: usize,
    /// Training-mode loss before each update.
    pub losses: Vec<f64>,
}

/// Runs up to `cfg.inner_steps` Adam updates of `net` on `q(ξ + g)` with
/// `ξ` fixed, from fresh moment estimates, then re-centers `net` on `z`.
pub fn adam_fit<R: Rng + ?Sized>(
    net: &mut Network,
    z: &Matrix,
    index: &RiskIndex,
    xi: &[f64],
    cfg: &AdamConfig,
    rng: &mut R,
) -> Result<AdamOutcome> {
    cfg.validate()?;
    let mut state = AdamState::new(net.params().len());
    let mut losses = Vec::with_capacity(cfg.inner_steps);
    let mut steps = 0;
    while steps < cfg.inner_steps {
        let (loss, grad) = grad_params(net, z, index, xi, rng).map_err(|e| match e {
            Error::NonFinitePredictor => Error::TrainingDiverged,
            other => other,
        })?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged);
        }
        losses.push(loss);
        let moved = state.step(net.params_mut(), &grad, cfg);
        steps += 1;
        if moved <= cfg.tol {
            break;
        }
    }
    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::TrainingDiverged);
    }
    net.center(z)?;
    Ok(AdamOutcome { steps, losses })
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::network::NetworkArch;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    #[test]
    fn first_step_is_normalized_sign() {
        let cfg = AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        };
        let grad = [0.3, -2.0, 1e-3, 0.0];
        let mut params = [1.0, 1.0, 1.0, 1.0];
        let mut state = AdamState::new(4);
        state.step(&mut params, &grad, &cfg);
        for k in 0..4 {
            let expected = 1.0 - 0.01 * grad[k] / (grad[k].abs() + cfg.eps);
            assert!((params[k] - expected).abs() < 1e-12);
        }
        assert!((params[1] - 1.01).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::init(NetworkArch::uniform(2, 1, 4, 0.0), &mut rng).unwrap();
        let before = net.params().to_vec();
        let z = Matrix::from_vec(4, 2, (0..8).map(|k| k as f64 * 0.1).collect()).unwrap();
        let index = RiskIndex::from_times(&[1.0, 2.0, 3.0, 4.0], &[false; 4]).unwrap();
        let out = adam_fit(&mut net, &z, &index, &[0.0; 4], &AdamConfig::default(), &mut rng).unwrap();
        assert_eq!(net.params(), &before[..]);
        assert_eq!(out.steps, 1);
    }

    #[test]
    fn training_reduces_loss_on_linear_truth() {
        let n = 300;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let alpha = [1.0, -0.7];
        let mut zdata = Vec::with_capacity(2 * n);
        let mut times = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        for _ in 0..n {
            let z: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            zdata.extend_from_slice(&z);
            let eta = alpha[0] * z[0] + alpha[1] * z[1];
            let u: f64 = Exp1.sample(&mut rng);
            let t = u / eta.exp();
            let c = rng.random::<f64>() * 4.0;
            times.push(t.min(c));
            status.push(t <= c);
        }
        let z = Matrix::from_vec(n, 2, zdata).unwrap();
        let index = RiskIndex::from_times(&times, &status).unwrap();
        let xi = vec![0.0; n];
        let mut net = Network::init(NetworkArch::uniform(2, 1, 8, 0.0), &mut rng).unwrap();
        let initial = index.neg_log_partial_likelihood(&net.eval(&z).unwrap()).unwrap();
        let cfg = AdamConfig {
            inner_steps: 200,
            tol: 0.0,
            ..AdamConfig::default()
        };
        let out = adam_fit(&mut net, &z, &index, &xi, &cfg, &mut rng).unwrap();
        assert_eq!(out.steps, 200);
        let trained = index.neg_log_partial_likelihood(&net.eval(&z).unwrap()).unwrap();
        assert!(trained < initial, "{} !< {}", trained, initial);
        // smoothed trace trends down
        let head: f64 = out.losses[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = out.losses[180..].iter().sum::<f64>() / 20.0;
        assert!(tail < head);
        let mean: f64 = net.eval(&z).unwrap().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn invalid_settings_rejected() {
        let bad = AdamConfig {
            inner_steps: 0,
            ..AdamConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AdamConfig {
            beta2: 1.0,
            ..AdamConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
