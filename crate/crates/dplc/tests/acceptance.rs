//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.
//!
//! Arguments that do not start with `-` filter criteria by substring, e.g.
//! `cargo test -p dplc --test acceptance -- scad`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dplc::bench::{run_experiment, ExperimentSummary, Method, MethodSummary};
use dplc::config::RunConfig;
use dplc_core::cd::{cd_fit, CdConfig};
use dplc_core::network::{DropoutMask, Network, NetworkArch};
use dplc_core::sim::{simulate, G0Kind, SimConfig};
use dplc_core::{Matrix, RiskIndex, ScadConfig, SurvivalDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, Duration, Check); 10] = [
        ("gradient suite", Duration::from_secs(60), gradient_suite),
        ("scad operator oracle", Duration::from_secs(10), scad_oracle),
        ("partial likelihood properties", Duration::MAX, likelihood_properties),
        ("unpenalized equivalence", Duration::MAX, unpenalized_equivalence),
        ("null calibration", Duration::from_secs(5 * 60), null_calibration),
        ("linear desk reproduction", Duration::from_secs(30 * 60), linear_desk),
        ("nonlinear ordering", Duration::from_secs(30 * 60), nonlinear_ordering),
        ("selection trend", Duration::from_secs(45 * 60), selection_trend),
        ("censoring calibration", Duration::MAX, censoring_calibration),
        ("determinism", Duration::MAX, determinism),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, budget, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(", budget {}s", budget.as_secs())
        };
        println!(
            "{} {}: {} [{:.1}s{}]",
            if pass { "PASS" } else { "FAIL" },
            name,
            out.detail,
            elapsed.as_secs_f64(),
            budget_note
        );
    }
    println!("acceptance: {} of {} criteria passed", ran - failed, ran);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Averaged negative log partial likelihood by explicit risk-set sums.
fn brute_loss(times: &[f64], status: &[bool], eta: &[f64]) -> f64 {
    let n = times.len();
    let mut total = 0.0;
    for i in 0..n {
        if status[i] {
            let s: f64 = (0..n).filter(|&j| times[j] >= times[i]).map(|j| eta[j].exp()).sum();
            total += eta[i] - s.ln();
        }
    }
    -total / n as f64
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Random survival instance with ties (integer times) and mixed status;
/// at least one event.
fn instance(n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>, Vec<f64>) {
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(1..=n as u32) as f64).collect();
    let mut status: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    status[0] = true;
    let eta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    (times, status, eta)
}

fn gradient_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let h = 1e-6;
    let mut worst_eta = 0.0f64;
    let mut worst_theta = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(5..=50);
        let r = rng.random_range(1..=4);
        let depth = rng.random_range(0..=2);
        let width = rng.random_range(1..=8);
        let (times, status, eta) = instance(n, &mut rng);
        let index = RiskIndex::from_times(&times, &status).unwrap();

        let grad = index.grad_eta(&eta).unwrap();
        for k in 0..n {
            let fd = central_difference(
                |v| {
                    let mut e = eta.clone();
                    e[k] = v;
                    brute_loss(&times, &status, &e)
                },
                eta[k],
                h,
            );
            worst_eta = worst_eta.max((grad[k] - fd).abs() / grad[k].abs().max(1e-4));
        }

        let arch = NetworkArch::uniform(r, depth, width, 0.0);
        let mut net = Network::init(arch.clone(), &mut rng).unwrap();
        for p in net.params_mut().iter_mut() {
            if *p == 0.0 {
                *p = rng.random_range(-0.1..0.1);
            }
        }
        let z_data: Vec<f64> = (0..n * r).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z = Matrix::from_vec(n, r, z_data).unwrap();
        let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let (_, grad) = net.loss_and_grad(&z, &index, &xi, &DropoutMask::ones(&arch, n)).unwrap();
        let loss = |net: &Network| {
            let g = net.eval_raw(&z).unwrap();
            let eta: Vec<f64> = xi.iter().zip(&g).map(|(a, b)| a + b).collect();
            brute_loss(&times, &status, &eta)
        };
        for (k, &analytic) in grad.iter().enumerate() {
            let fd = central_difference(
                |v| {
                    let mut m = net.clone();
                    m.params_mut()[k] = v;
                    loss(&m)
                },
                net.params()[k],
                h,
            );
            worst_theta = worst_theta.max((analytic - fd).abs() / analytic.abs().max(1e-4));
        }
    }
    outcome(
        worst_eta < 1e-5 && worst_theta < 1e-5,
        format!("20 instances, max rel err dq/deta {worst_eta:.2e}, dq/dtheta {worst_theta:.2e} (< 1e-5)"),
    )
}

fn scad_value(theta: f64, lambda: f64, a: f64) -> f64 {
    let t = theta.abs();
    if t <= lambda {
        lambda * t
    } else if t <= a * lambda {
        (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0))
    } else {
        lambda * lambda * (a + 1.0) / 2.0
    }
}

/// Minimizer of `½(b − h)² + p_λ(|b|)` by a dense grid and golden-section
/// refinement around the best grid point.
fn brute_threshold(h: f64, lambda: f64, a: f64) -> f64 {
    let f = |b: f64| 0.5 * (b - h) * (b - h) + scad_value(b, lambda, a);
    let (lo, hi) = (-h.abs() - 1.0, h.abs() + 1.0);
    let steps = 20_000;
    let step = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|k| lo + k as f64 * step)
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap();
    let (mut l, mut u) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while u - l > 1e-12 {
        let c = u - g * (u - l);
        let d = l + g * (u - l);
        if f(c) < f(d) {
            u = d;
        } else {
            l = c;
        }
    }
    let mid = 0.5 * (l + u);
    // the exact zero is a kink; prefer it when it is at least as good
    if f(0.0) <= f(mid) {
        0.0
    } else {
        mid
    }
}

fn scad_oracle() -> Outcome {
    let a = 3.7;
    let mut worst = 0.0f64;
    let mut cells = 0;
    for &lambda in &[0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
        let cfg = ScadConfig::new(lambda, a).unwrap();
        for k in -200..=200 {
            let h = k as f64 * 0.05;
            let got = cfg.threshold(h, 1.0).unwrap();
            worst = worst.max((got - brute_threshold(h, lambda, a)).abs());
            cells += 1;
        }
    }
    outcome(worst < 1e-6, format!("{cells} (h, lambda) cells, max abs err {worst:.2e} (< 1e-6)"))
}

fn likelihood_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let (mut shift, mut score, mut min_w, mut hess) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(2..=20);
        let (times, status, eta) = instance(n, &mut rng);
        let index = RiskIndex::from_times(&times, &status).unwrap();
        let q = index.neg_log_partial_likelihood(&eta).unwrap();
        let c = rng.random_range(-5.0..5.0);
        let shifted: Vec<f64> = eta.iter().map(|e| e + c).collect();
        shift = shift.max((index.neg_log_partial_likelihood(&shifted).unwrap() - q).abs());
        let d = index.derivatives(&eta).unwrap();
        score = score.max(d.grad.iter().sum::<f64>().abs());
        let h = 1e-3;
        for k in 0..n {
            min_w = min_w.min(d.hess_diag[k]);
            let at = |v: f64| {
                let mut e = eta.clone();
                e[k] = v;
                brute_loss(&times, &status, &e)
            };
            let fd = (at(eta[k] + h) - 2.0 * at(eta[k]) + at(eta[k] - h)) / (h * h);
            hess = hess.max((d.hess_diag[k] - fd).abs() / d.hess_diag[k].abs().max(1e-3));
        }
    }
    outcome(
        shift < 1e-12 && score < 1e-12 && min_w >= -1e-12 && hess < 1e-4,
        format!(
            "50 instances n<=20: shift {shift:.1e} (< 1e-12), score sum {score:.1e} (< 1e-12), min W {min_w:.2e} (>= -1e-12), W vs FD rel {hess:.1e} (< 1e-4)"
        ),
    )
}

/// Scalar Newton–Raphson on the partial likelihood with offset `g`,
/// derivatives by explicit risk-set sums.
fn newton_beta(x: &[f64], g: &[f64], times: &[f64], status: &[bool]) -> f64 {
    let n = x.len();
    let mut b = 0.0;
    for _ in 0..100 {
        let (mut grad, mut hess) = (0.0, 0.0);
        for i in 0..n {
            if !status[i] {
                continue;
            }
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for j in 0..n {
                if times[j] >= times[i] {
                    let w = (b * x[j] + g[j]).exp();
                    s0 += w;
                    s1 += w * x[j];
                    s2 += w * x[j] * x[j];
                }
            }
            let m = s1 / s0;
            grad += x[i] - m;
            hess += s2 / s0 - m * m;
        }
        let step = grad / hess;
        b += step;
        if step.abs() < 1e-12 {
            break;
        }
    }
    b
}

fn unpenalized_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = 100;
        let beta = rng.random_range(-1.0..1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut times = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let t = -u.ln() / (beta * x[i] + g[i]).exp();
            let c = rng.random_range(0.0..3.0);
            times.push(t.min(c).max(1e-12));
            status.push(t <= c);
        }
        let want = newton_beta(&x, &g, &times, &status);
        let ds = SurvivalDataset::new(times, status, Matrix::from_vec(n, 1, x).unwrap(), Matrix::zeros(n, 0)).unwrap();
        let cfg = CdConfig { tol: 1e-10, max_sweeps: 1000 };
        let got = cd_fit(&ds, &g, &[0.0], &ScadConfig::new(0.0, 3.7).unwrap(), &cfg).unwrap().beta[0];
        worst = worst.max((got - want).abs());
    }
    outcome(worst < 1e-3, format!("20 seeds, max |beta_cd - beta_newton| {worst:.2e} (< 1e-3)"))
}

fn run_config(sim: SimConfig, replicates: usize, baseline: bool) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.set_seed(SEED);
    cfg.sim = sim;
    cfg.experiment.replicates = replicates;
    cfg.experiment.baseline = baseline;
    cfg
}

fn experiment(cfg: &RunConfig) -> ExperimentSummary {
    run_experiment(cfg).expect("experiment runs").1
}

fn method(summary: &ExperimentSummary, m: Method) -> &MethodSummary {
    summary.methods.iter().find(|s| s.method == m).expect("method present")
}

fn failures(s: &MethodSummary) -> String {
    if s.failed == 0 {
        String::new()
    } else {
        format!(", {} failed fits", s.failed)
    }
}

fn null_calibration() -> Outcome {
    let sim = SimConfig { n: 300, p: 100, s_beta: 0, g0: G0Kind::Zero, ..SimConfig::default() };
    let summary = experiment(&run_config(sim, 20, false));
    let d = method(&summary, Method::Dplc);
    let med = d.c_index.map_or(f64::NAN, |c| c.median);
    outcome(
        (0.45..=0.55).contains(&med) && d.failed == 0,
        format!("n=300, 20 replicates, median test C-index {med:.4} (in [0.45, 0.55]){}", failures(d)),
    )
}

fn linear_desk() -> Outcome {
    let sim = SimConfig { n: 500, p: 100, s_beta: 10, g0: G0Kind::Linear, ..SimConfig::default() };
    let summary = experiment(&run_config(sim, 20, false));
    let d = method(&summary, Method::Dplc);
    let med = d.c_index.map_or(f64::NAN, |c| c.median);
    let fnr = d.fnr.map_or(f64::NAN, |f| f.mean);
    outcome(
        med >= 0.78 && fnr <= 45.0 && d.failed == 0,
        format!("n=500 p=100 s=10, 20 replicates, median C-index {med:.4} (>= 0.78), mean FNR {fnr:.1}% (<= 45%){}", failures(d)),
    )
}

fn nonlinear_ordering() -> Outcome {
    let sim = SimConfig { n: 500, p: 100, s_beta: 10, g0: G0Kind::Nonlinear, ..SimConfig::default() };
    let summary = experiment(&run_config(sim, 10, true));
    let d = method(&summary, Method::Dplc);
    let b = method(&summary, Method::CoxScad);
    let md = d.c_index.map_or(f64::NAN, |c| c.median);
    let mb = b.c_index.map_or(f64::NAN, |c| c.median);
    outcome(
        md - mb >= 0.03 && d.failed == 0 && b.failed == 0,
        format!("10 replicates, median C-index DPLC {md:.4} vs g=0 Cox-SCAD {mb:.4}, gap {:.4} (>= 0.03)", md - mb),
    )
}

/// Non-increasing up to at most one inversion of size at most `slack`.
fn non_increasing(v: &[f64], slack: f64) -> bool {
    let rises: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).collect();
    rises.is_empty() || (rises.len() == 1 && rises[0] <= slack)
}

fn selection_trend() -> Outcome {
    let mut fpn = Vec::new();
    let mut fnn = Vec::new();
    let mut failed = 0;
    for n in [300, 600, 1200] {
        let sim = SimConfig { n, p: 100, s_beta: 10, g0: G0Kind::Linear, ..SimConfig::default() };
        let summary = experiment(&run_config(sim, 10, false));
        let d = method(&summary, Method::Dplc);
        failed += d.failed;
        fpn.push(d.fpn.map_or(f64::NAN, |m| m.mean));
        fnn.push(d.fnn.map_or(f64::NAN, |m| m.mean));
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/");
    outcome(
        non_increasing(&fpn, 0.5) && non_increasing(&fnn, 0.5) && failed == 0,
        format!(
            "n=300/600/1200, 10 replicates each, mean FPN {}, mean FNN {} (non-increasing, one inversion <= 0.5 allowed)",
            fmt(&fpn),
            fmt(&fnn)
        ),
    )
}

fn censoring_calibration() -> Outcome {
    let cfg = SimConfig::default();
    let rates: Vec<f64> = (0..20)
        .map(|k| simulate(&cfg, &mut dplc::bench::replicate_rng(SEED, k)).unwrap().censoring_rate)
        .collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let (lo, hi) = rates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
    outcome(
        (mean - 0.3).abs() <= 0.03,
        format!("20 replicates, mean realized censoring {:.2}% (30% +- 3%), range {:.1}%..{:.1}%", 100.0 * mean, 100.0 * lo, 100.0 * hi),
    )
}

fn dplc(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dplc")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("dplc {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

/// Runs every command into `dir` and returns the produced files.
fn cli_session(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let config = r#"{"sim": {"n": 200, "p": 20, "s_beta": 3}, "experiment": {"replicates": 2}, "lambda_grid": [0.05, 0.2, 0.8]}"#;
    std::fs::write(dir.join("config.json"), config).map_err(|e| e.to_string())?;
    dplc(&["--seed", "7", "simulate", "--config", &p("config.json"), "--out", &p("sim")])?;
    dplc(&["--seed", "7", "fit", "--data", &p("sim/data.csv"), "--lambda-grid", "0.05,0.2,0.8", "--out", &p("fit")])?;
    dplc(&["--seed", "7", "predict", "--model", &p("fit/model.json"), "--data", &p("sim/data.csv"), "--out", &p("pred.csv")])?;
    dplc(&["--seed", "7", "benchmark", "--config", &p("config.json"), "--out", &p("bench")])?;
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).map_err(|e| e.to_string())?));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let run = || -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        cli_session(dir.path())
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> = a
                .iter()
                .zip(&b)
                .filter(|(x, y)| x != y)
                .map(|(x, _)| x.0.as_str())
                .collect();
            let same_set = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0);
            outcome(
                same_set && differing.is_empty(),
                format!(
                    "simulate/fit/predict/benchmark twice with --seed 7: {} files, {} differ{}",
                    a.len(),
                    differing.len(),
                    if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) }
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}
