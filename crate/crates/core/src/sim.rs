//! Simulated partially linear Cox data.
//!
//! Covariates `(x, z)` are jointly Gaussian with unit variances and a common
//! correlation `ρ`. Event times are exponential with hazard
//! `μ·exp(β₀ᵀx + g₀(z))`, censored by `Uniform[0, 𝒞]` with `𝒞` calibrated to
//! a target censoring rate.

use alloc::format;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::survival::SurvivalDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum G0Kind {
    Linear,
    Nonlinear,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub s_beta: usize,
    pub rho: f64,
    pub g0: G0Kind,
    pub target_censoring: f64,
    pub mu: f64,
    /// Magnitude range of the nonzero `β₀` entries; signs are random.
    pub beta_min: f64,
    pub beta_max: f64,
    /// `α₀ ~ U(−alpha_bound, alpha_bound)` for the linear `g₀`.
    pub alpha_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 500,
            p: 100,
            r: 8,
            s_beta: 10,
            rho: 0.2,
            g0: G0Kind::Linear,
            target_censoring: 0.3,
            mu: 1.0,
            beta_min: 0.5,
            beta_max: 2.0,
            alpha_bound: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::InvalidArgument(msg.into())) };
        check(self.n >= 2, "n must be at least 2")?;
        check(self.p >= 1, "p must be at least 1")?;
        check(self.s_beta <= self.p, "s_beta exceeds p")?;
        check((0.0..1.0).contains(&self.rho), "rho must lie in [0, 1)")?;
        check(
            self.target_censoring > 0.0 && self.target_censoring < 1.0,
            "target_censoring must lie in (0, 1)",
        )?;
        check(self.mu > 0.0 && self.mu.is_finite(), "mu must be positive")?;
        check(
            0.0 < self.beta_min && self.beta_min <= self.beta_max && self.beta_max.is_finite(),
            "need 0 < beta_min <= beta_max",
        )?;
        check(self.alpha_bound >= 0.0 && self.alpha_bound.is_finite(), "alpha_bound must be non-negative")?;
        check(self.r >= 1, "r must be at least 1")?;
        check(self.g0 != G0Kind::Nonlinear || self.r >= 8, "the nonlinear g0 needs r >= 8")?;
        Ok(())
    }
}

/// Equicorrelated Gaussian `(X, Z)`: each row is `√(1−ρ)·eᵢ + √ρ·e₀` over
/// the `p + r` coordinates with one shared `e₀`.
pub fn gen_covariates<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> (Matrix, Matrix) {
    let (n, p, r) = (cfg.n, cfg.p, cfg.r);
    let own = (1.0 - cfg.rho).sqrt();
    let shared = cfg.rho.sqrt();
    let mut x = Matrix::zeros(n, p);
    let mut z = Matrix::zeros(n, r);
    for i in 0..n {
        let e0: f64 = StandardNormal.sample(rng);
        for v in x.row_mut(i).iter_mut().chain(z.row_mut(i).iter_mut()) {
            let e: f64 = StandardNormal.sample(rng);
            *v = own * e + shared * e0;
        }
    }
    (x, z)
}

/// `s` nonzero entries at random positions, magnitudes `U[lo, hi]`, random signs.
pub fn gen_beta0<R: Rng + ?Sized>(p: usize, s: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    let mut beta = alloc::vec![0.0; p];
    let mut positions = sample(rng, p, s).into_vec();
    positions.sort_unstable();
    for j in positions {
        let magnitude = lo + (hi - lo) * rng.random::<f64>();
        beta[j] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    beta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G0Value {
    pub value: f64,
    /// The argument of the logarithm was zero and was nudged by 1e-12.
    pub perturbed: bool,
}

pub fn g0_eval(z: &[f64], kind: G0Kind, alpha: &[f64]) -> Result<G0Value> {
    let value = match kind {
        G0Kind::Zero => 0.0,
        G0Kind::Linear => {
            if alpha.len() != z.len() {
                return Err(Error::DimensionMismatch(format!("{} coefficients for {} inputs", alpha.len(), z.len())));
            }
            z.iter().zip(alpha).map(|(a, b)| a * b).sum()
        }
        G0Kind::Nonlinear => {
            if z.len() < 8 {
                return Err(Error::DimensionMismatch(format!("nonlinear g0 needs 8 inputs, got {}", z.len())));
            }
            let mut d = z[1] - z[2];
            let perturbed = d == 0.0;
            if perturbed {
                d = 1e-12;
            }
            let q = z[5] - z[6] + z[7];
            let value =
                0.68 * z[0].exp() - 0.45 * (d * d).ln() + 0.32 * (z[3] * z[4]).sin() - 0.45 * q * q - 0.32;
            return Ok(G0Value { value, perturbed });
        }
    };
    Ok(G0Value {
        value,
        perturbed: false,
    })
}

/// `Uᵢ = −ln(uᵢ)/(μ·exp(ηᵢ))` with `uᵢ` uniform on the open unit interval.
pub fn gen_survival<R: Rng + ?Sized>(eta: &[f64], mu: f64, rng: &mut R) -> Vec<f64> {
    eta.iter()
        .map(|&e| {
            let u: f64 = Open01.sample(rng);
            -u.ln() / (mu * e.exp())
        })
        .collect()
}

/// Expected censoring fraction `meanᵢ P(Cᵢ < Uᵢ)` for `C ~ Uniform[0, bound]`.
pub fn expected_censoring(u: &[f64], bound: f64) -> f64 {
    u.iter().map(|&ui| (ui / bound).min(1.0)).sum::<f64>() / u.len() as f64
}

/// Upper bound `𝒞` whose expected censoring fraction equals `target`, found
/// by bisection on `ln 𝒞` against the closed-form fraction.
pub fn calibrate_censoring(u: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::CensoringUnreachable(format!("target {} outside (0, 1)", target)));
    }
    if u.is_empty() || u.iter().any(|&ui| !(ui > 0.0 && ui.is_finite())) {
        return Err(Error::CensoringUnreachable("event times must be finite and positive".into()));
    }
    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = u.iter().copied().fold(0.0, f64::max);
    // rate is 1 at u_min and at most u_max/𝒞 beyond u_max
    let mut lo = u_min.ln();
    let mut hi = (2.0 * u_max / target).ln();
    if !(expected_censoring(u, hi.exp()) < target) {
        return Err(Error::CensoringUnreachable(format!("no bound reaches censoring {}", target)));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_censoring(u, mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: SurvivalDataset,
    pub beta0: Vec<f64>,
    pub alpha0: Vec<f64>,
    /// Indices of the nonzero `β₀` entries.
    pub support: Vec<usize>,
    pub censoring_bound: f64,
    /// Realized fraction of censored subjects.
    pub censoring_rate: f64,
    /// Rows whose `g₀` needed the log-singularity nudge.
    pub perturbed: usize,
}

pub fn simulate<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<SimulatedData> {
    cfg.validate()?;
    let (x, z) = gen_covariates(cfg, rng);
    let beta0 = gen_beta0(cfg.p, cfg.s_beta, cfg.beta_min, cfg.beta_max, rng);
    let alpha0: Vec<f64> = match cfg.g0 {
        G0Kind::Linear => (0..cfg.r)
            .map(|_| cfg.alpha_bound * (2.0 * rng.random::<f64>() - 1.0))
            .collect(),
        _ => Vec::new(),
    };
    let xi = x.mul_vec(&beta0);
    let mut eta = Vec::with_capacity(cfg.n);
    let mut perturbed = 0;
    for i in 0..cfg.n {
        let g = g0_eval(z.row(i), cfg.g0, &alpha0)?;
        perturbed += g.perturbed as usize;
        eta.push(xi[i] + g.value);
    }
    let u = gen_survival(&eta, cfg.mu, rng);
    let bound = calibrate_censoring(&u, cfg.target_censoring)?;
    let mut times = Vec::with_capacity(cfg.n);
    let mut status = Vec::with_capacity(cfg.n);
    for &ui in &u {
        let c: f64 = bound * Distribution::<f64>::sample(&Open01, rng);
        times.push(ui.min(c));
        status.push(ui <= c);
    }
    let censoring_rate = status.iter().filter(|&&d| !d).count() as f64 / cfg.n as f64;
    let support = (0..cfg.p).filter(|&j| beta0[j] != 0.0).collect();
    Ok(SimulatedData {
        dataset: SurvivalDataset::new(times, status, x, z)?,
        beta0,
        alpha0,
        support,
        censoring_bound: bound,
        censoring_rate,
        perturbed,
    })
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    fn all_columns(x: &Matrix, z: &Matrix) -> Vec<Vec<f64>> {
        (0..x.ncols()).map(|j| x.column(j)).chain((0..z.ncols()).map(|j| z.column(j))).collect()
    }

    #[test]
    fn covariate_correlations() {
        for (rho, target, tol) in [(0.0, 0.0, 0.1), (0.2, 0.2, 0.05)] {
            let cfg = SimConfig {
                n: 5000,
                p: 6,
                r: 4,
                rho,
                ..SimConfig::default()
            };
            let (x, z) = gen_covariates(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
            let cols = all_columns(&x, &z);
            for a in 0..cols.len() {
                for b in a + 1..cols.len() {
                    let c = corr(&cols[a], &cols[b]);
                    assert!((c - target).abs() < tol, "rho {} pair ({}, {}): {}", rho, a, b, c);
                }
            }
        }
    }

    #[test]
    fn covariates_reproducible() {
        let cfg = SimConfig {
            n: 50,
            p: 5,
            ..SimConfig::default()
        };
        let a = gen_covariates(&cfg, &mut ChaCha8Rng::seed_from_u64(2));
        let b = gen_covariates(&cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
    }

    #[test]
    fn beta0_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let b = gen_beta0(100, 10, 0.5, 2.0, &mut rng);
            let nz: Vec<f64> = b.iter().copied().filter(|&v| v != 0.0).collect();
            assert_eq!(nz.len(), 10);
            assert!(nz.iter().all(|v| (0.5..=2.0).contains(&v.abs())));
        }
    }

    #[test]
    fn g0_examples() {
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        let z = [0.3, -1.2, 0.7, 2.0, 0.1, -0.4, 0.9, 1.1];
        assert_eq!(g0_eval(&z, G0Kind::Linear, &e1).unwrap().value, 0.3);

        let z = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let v = g0_eval(&z, G0Kind::Nonlinear, &[]).unwrap();
        assert!((v.value - 0.36).abs() < 1e-15);
        assert!(!v.perturbed);

        // independent evaluation of the same formula
        let z = [0.3, -1.2, 0.7, 2.0, 0.1, -0.4, 0.9, 1.1];
        let want = 0.68 * 0.3f64.exp() - 0.45 * ((-1.9f64) * (-1.9f64)).ln() + 0.32 * (0.2f64).sin()
            - 0.45 * (-0.4f64 - 0.9 + 1.1).powi(2)
            - 0.32;
        assert!((g0_eval(&z, G0Kind::Nonlinear, &[]).unwrap().value - want).abs() < 1e-12);

        let mut swapped = z;
        swapped.swap(1, 2);
        assert_eq!(
            g0_eval(&z, G0Kind::Nonlinear, &[]).unwrap().value,
            g0_eval(&swapped, G0Kind::Nonlinear, &[]).unwrap().value
        );

        let tie = [0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0];
        let v = g0_eval(&tie, G0Kind::Nonlinear, &[]).unwrap();
        assert!(v.perturbed && v.value.is_finite());
        assert!(g0_eval(&[1.0; 4], G0Kind::Nonlinear, &[]).is_err());
    }

    #[test]
    fn unit_exponential_times() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = gen_survival(&vec![0.0; n], 1.0, &mut rng);
        let mean = u.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02);

        let eta = vec![0.3; 1000];
        let a = gen_survival(&eta, 1.0, &mut ChaCha8Rng::seed_from_u64(5));
        let b = gen_survival(&eta, 2.0, &mut ChaCha8Rng::seed_from_u64(5));
        for (x, y) in a.iter().zip(&b) {
            assert!((x / 2.0 - y).abs() <= 1e-15 * x);
        }
    }

    /// Kolmogorov–Smirnov statistic of `v` against Exp(1).
    fn ks_exp1(v: &mut [f64]) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mut d: f64 = 0.0;
        for (k, &x) in v.iter().enumerate() {
            let f = 1.0 - (-x).exp();
            d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
        }
        d
    }

    #[test]
    fn heterogeneous_times_are_exponential_after_rescaling() {
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let eta: Vec<f64> = (0..n).map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let mu = 0.7;
        let u = gen_survival(&eta, mu, &mut rng);
        let mut scaled: Vec<f64> = u.iter().zip(&eta).map(|(t, e)| t * mu * e.exp()).collect();
        // critical value at α = 0.01
        assert!(ks_exp1(&mut scaled) < 1.628 / (n as f64).sqrt());
    }

    #[test]
    fn censoring_calibration() {
        let u = vec![2.0; 10];
        assert_eq!(expected_censoring(&u, 4.0), 0.5);
        let c = calibrate_censoring(&u, 0.5).unwrap();
        assert!((c - 4.0).abs() < 1e-9);

        assert!(calibrate_censoring(&u, 0.0).is_err());
        assert!(calibrate_censoring(&u, 1.0).is_err());
        assert!(calibrate_censoring(&[1.0, 0.0], 0.3).is_err());
    }

    proptest! {
        #[test]
        fn calibration_hits_target(u in proptest::collection::vec(1e-3f64..1e3, 1..60), target in 0.02f64..0.98) {
            let c = calibrate_censoring(&u, target).unwrap();
            prop_assert!((expected_censoring(&u, c) - target).abs() < 1e-9);
            prop_assert!(expected_censoring(&u, c * 1e-9) > 1.0 - 1e-9 || u.iter().any(|&x| x < c * 1e-9));
        }

        #[test]
        fn censoring_rate_is_monotone(u in proptest::collection::vec(1e-3f64..1e3, 1..30), a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(expected_censoring(&u, lo) >= expected_censoring(&u, hi));
        }
    }

    #[test]
    fn simulated_censoring_near_target() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rates: Vec<f64> = (0..20).map(|_| simulate(&cfg, &mut rng).unwrap().censoring_rate).collect();
        let mean = rates.iter().sum::<f64>() / 20.0;
        assert!((mean - 0.3).abs() < 0.03, "{}", mean);
    }

    #[test]
    fn simulate_shapes_and_validation() {
        let cfg = SimConfig {
            n: 40,
            p: 12,
            s_beta: 3,
            g0: G0Kind::Nonlinear,
            ..SimConfig::default()
        };
        let sim = simulate(&cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(sim.dataset.len(), 40);
        assert_eq!(sim.dataset.n_penalized(), 12);
        assert_eq!(sim.dataset.n_network(), 8);
        assert_eq!(sim.support.len(), 3);
        assert!(sim.alpha0.is_empty());
        let again = simulate(&cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(sim, again);

        let bad = SimConfig {
            s_beta: 13,
            ..cfg.clone()
        };
        assert!(simulate(&bad, &mut ChaCha8Rng::seed_from_u64(8)).is_err());
        let bad = SimConfig { r: 4, ..cfg };
        assert!(bad.validate().is_err());
    }
}
